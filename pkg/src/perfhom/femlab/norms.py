"""Error norms between the perforated and homogenized discrete solutions."""
from __future__ import annotations

from typing import Optional

import numpy as np

from ..corrector import CorrectorField, Lattice, eval_corrector
from ..regime import ContractError
from .assembly import p1_gradients
from .quadrature import map_points, triangle_rule
from .solvers import DiscreteSolution

__all__ = ["error_norms", "l2_norm", "check_matched_pair"]

AREA_DEGREE = 3
CORRECTOR_DEGREE = 5


def check_matched_pair(perforated, filled) -> None:
    """Raise unless ``filled`` extends ``perforated`` by appending hole nodes."""
    if perforated.kind != "perforated" or filled.kind != "filled":
        raise ContractError("expected a (perforated, filled) mesh pair")
    n = perforated.n_nodes
    if filled.n_nodes < n or not np.array_equal(filled.nodes[:n], perforated.nodes):
        raise ContractError("meshes do not share their exterior nodes")
    nt = perforated.n_triangles
    if filled.n_triangles < nt or not np.array_equal(filled.triangles[:nt], perforated.triangles):
        raise ContractError("meshes do not share their exterior triangles")


def _p1_at(values, triangles, bary):
    return np.einsum("tk,qk->tq", values[triangles], bary)


def l2_norm(sol: DiscreteSolution) -> float:
    """``|u_h|_{L2}`` over the solution's own mesh."""
    mesh = sol.mesh
    bary, w = triangle_rule(AREA_DEGREE)
    _, a = p1_gradients(mesh.nodes, mesh.triangles)
    vals = _p1_at(sol.values, mesh.triangles, bary)
    return float(np.sqrt(np.sum(a * (vals ** 2 @ w))))


def error_norms(u_eps: DiscreteSolution, u: DiscreteSolution,
                corrector: Optional[CorrectorField] = None) -> dict:
    """``L2`` and ``H1`` norms of ``u_eps - u`` on the perforated domain.

    With a corrector, ``H1_corrected`` is the H1 norm of ``u_eps - (1 + G) u``
    with ``G`` and its gradient evaluated in closed form at the points of a
    degree-5 rule.  Without one, ``H1_corrected`` is ``None``.
    """
    pm, fm = u_eps.mesh, u.mesh
    check_matched_pair(pm, fm)
    n = pm.n_nodes
    uu = u.values[:n]
    w_nodes = u_eps.values - uu
    tris = pm.triangles
    grads, area = p1_gradients(pm.nodes, tris)

    bary, w = triangle_rule(AREA_DEGREE)
    diff = _p1_at(w_nodes, tris, bary)
    l2sq = float(np.sum(area * (diff ** 2 @ w)))
    gdiff = np.einsum("tk,tkd->td", w_nodes[tris], grads)
    semi = float(np.sum(area * np.sum(gdiff ** 2, axis=1)))
    out = {"L2": np.sqrt(l2sq), "H1": np.sqrt(l2sq + semi), "H1_corrected": None}
    if corrector is None:
        return out

    if pm.eps is None or abs(pm.eps - corrector.eps) > 1e-12 * corrector.eps:
        raise ContractError("corrector cell size does not match the mesh")
    lattice = Lattice.unit_square_tiling(pm.eps)
    bary5, w5 = triangle_rule(CORRECTOR_DEGREE)
    pts = map_points(pm.nodes, tris, bary5)
    G, dG = eval_corrector(corrector, lattice, pts, allow_inside=True)
    ue = _p1_at(u_eps.values, tris, bary5)
    uh = _p1_at(uu, tris, bary5)
    due = np.einsum("tk,tkd->td", u_eps.values[tris], grads)[:, None, :]
    duh = np.einsum("tk,tkd->td", uu[tris], grads)[:, None, :]
    err = ue - (1.0 + G) * uh
    derr = due - (1.0 + G)[..., None] * duh - dG * uh[..., None]
    total = np.sum(area * ((err ** 2 + np.sum(derr ** 2, axis=-1)) @ w5))
    out["H1_corrected"] = float(np.sqrt(total))
    return out
