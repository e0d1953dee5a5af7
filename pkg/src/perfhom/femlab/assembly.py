"""P1 element matrices and the two model problems.

Perforated problem: ``(grad u, grad v) + sum_i gamma (u, v)_{hole i} + (u, v) = (f, v)``.
Homogenized problem: ``(grad u, grad v) + (1 + V)(u, v) = (f, v)`` on the filled mesh.
Both carry a homogeneous Dirichlet condition on the outer square.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from ..regime import ContractError, PerforationParams
from .mesh import OUTER, TriMesh
from .quadrature import map_points, triangle_rule

__all__ = [
    "LoadError",
    "Problem",
    "SparseSystem",
    "p1_gradients",
    "local_stiffness",
    "local_robin_mass",
    "stiffness_matrix",
    "mass_matrix",
    "robin_matrix",
    "load_vector",
    "assemble",
]

LOAD_QUADRATURE_DEGREE = 3


class LoadError(ValueError):
    """The load could not be evaluated at the quadrature points."""


@dataclass(frozen=True)
class Problem:
    """``kind`` is ``"PerforatedRobin"`` or ``"Homogenized"``; ``V`` is the potential."""

    kind: str
    V: float = 0.0
    gamma: Optional[float] = None

    @classmethod
    def perforated(cls, gamma: Optional[float] = None) -> "Problem":
        """Robin problem; ``gamma`` overrides the coefficient taken from the params."""
        return cls("PerforatedRobin", 0.0, gamma)

    @classmethod
    def homogenized(cls, V: float) -> "Problem":
        if not V >= 0:
            raise ContractError("the homogenized potential must be non-negative")
        return cls("Homogenized", float(V))

    def __post_init__(self):
        if self.kind not in ("PerforatedRobin", "Homogenized"):
            raise ContractError(f"unknown problem kind {self.kind!r}")


def p1_gradients(nodes: np.ndarray, triangles: np.ndarray):
    """Constant gradients of the three hat functions per triangle and the areas.

    Returns ``(grads (T, 3, 2), areas (T,))``.
    """
    p = nodes[triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    # rows of inv(B)^T map reference gradients to physical ones
    inv = np.empty((len(p), 2, 2))
    inv[:, 0, 0] = e2[:, 1] / det
    inv[:, 0, 1] = -e2[:, 0] / det
    inv[:, 1, 0] = -e1[:, 1] / det
    inv[:, 1, 1] = e1[:, 0] / det
    ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    grads = np.einsum("ka,tab->tkb", ref, inv)
    return grads, 0.5 * det


def local_stiffness(corners) -> np.ndarray:
    corners = np.asarray(corners, dtype=float)
    g, a = p1_gradients(corners, np.array([[0, 1, 2]]))
    return a[0] * g[0] @ g[0].T


def local_robin_mass(length: float, gamma: float = 1.0) -> np.ndarray:
    return gamma * length / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])


_LOCAL_MASS = (np.ones((3, 3)) + np.eye(3)) / 12.0


def _scatter(rows, cols, vals, n):
    A = sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n))
    return A.tocsr()


def stiffness_matrix(mesh: TriMesh) -> sp.csr_matrix:
    g, a = p1_gradients(mesh.nodes, mesh.triangles)
    loc = a[:, None, None] * np.einsum("tid,tjd->tij", g, g)
    t = mesh.triangles
    return _scatter(np.repeat(t, 3, axis=1), np.tile(t, (1, 3)), loc, mesh.n_nodes)


def mass_matrix(mesh: TriMesh) -> sp.csr_matrix:
    _, a = p1_gradients(mesh.nodes, mesh.triangles)
    loc = a[:, None, None] * _LOCAL_MASS[None]
    t = mesh.triangles
    return _scatter(np.repeat(t, 3, axis=1), np.tile(t, (1, 3)), loc, mesh.n_nodes)


def robin_matrix(mesh: TriMesh, gamma: float) -> sp.csr_matrix:
    """Boundary mass on hole edges scaled by ``gamma``."""
    e = mesh.hole_edges()
    if gamma == 0 or len(e) == 0:
        return sp.csr_matrix((mesh.n_nodes, mesh.n_nodes))
    L = np.linalg.norm(mesh.nodes[e[:, 1]] - mesh.nodes[e[:, 0]], axis=1)
    loc = (gamma * L / 6.0)[:, None, None] * np.array([[2.0, 1.0], [1.0, 2.0]])[None]
    return _scatter(np.repeat(e, 2, axis=1), np.tile(e, (1, 2)), loc, mesh.n_nodes)


def _eval_load(f: Callable, pts: np.ndarray) -> np.ndarray:
    try:
        vals = np.asarray(f(pts), dtype=float)
    except Exception as exc:  # noqa: BLE001 - surfaced as a load error
        raise LoadError(f"load evaluation failed: {exc}") from exc
    if vals.shape != pts.shape[:-1]:
        try:
            vals = np.broadcast_to(vals, pts.shape[:-1])
        except ValueError as exc:
            raise LoadError(f"load returned shape {vals.shape}, expected {pts.shape[:-1]}") from exc
    if not np.all(np.isfinite(vals)):
        raise LoadError("load is not finite at some quadrature point")
    return vals


def load_vector(mesh: TriMesh, f: Callable, degree: int = LOAD_QUADRATURE_DEGREE) -> np.ndarray:
    """``b_i = int f phi_i`` by a triangle rule exact to ``degree``.

    ``f`` takes an array of points with the coordinates on the last axis.
    """
    bary, w = triangle_rule(degree)
    _, a = p1_gradients(mesh.nodes, mesh.triangles)
    pts = map_points(mesh.nodes, mesh.triangles, bary)
    fv = _eval_load(f, pts)
    loc = a[:, None] * np.einsum("tq,q,qk->tk", fv, w, bary)
    return np.bincount(mesh.triangles.ravel(), weights=loc.ravel(), minlength=mesh.n_nodes)


@dataclass
class SparseSystem:
    """Assembled matrices on all nodes plus the Dirichlet set.

    ``operator`` is ``K + B + M`` for the Robin problem and ``K + (1 + V) M``
    for the homogenized one; ``reduced()`` drops the Dirichlet rows and columns.
    """

    mesh: TriMesh
    K: sp.csr_matrix
    M: sp.csr_matrix
    B: sp.csr_matrix
    dirichlet: np.ndarray
    b: np.ndarray
    problem: Problem
    eps: Optional[float] = None
    gamma: float = 0.0

    @property
    def free(self) -> np.ndarray:
        mask = np.ones(self.mesh.n_nodes, dtype=bool)
        mask[self.dirichlet] = False
        return np.flatnonzero(mask)

    @property
    def operator(self) -> sp.csr_matrix:
        return (self.K + self.B + (1.0 + self.problem.V) * self.M).tocsr()

    @property
    def energy(self) -> sp.csr_matrix:
        """Form matrix without the identity part: ``K + B + V M``."""
        return (self.K + self.B + self.problem.V * self.M).tocsr()

    def reduced(self):
        """``(A_ff, b_f, free)`` after symmetric elimination of Dirichlet nodes."""
        free = self.free
        A = self.operator[free][:, free].tocsr()
        return A, self.b[free], free


def assemble(mesh: TriMesh, params: Optional[PerforationParams], eps: Optional[float],
             problem: Problem, f: Callable) -> SparseSystem:
    """Assemble the Robin or homogenized system on a matching mesh variant."""
    if problem.kind == "PerforatedRobin":
        if mesh.kind == "filled":
            raise ContractError("the Robin problem needs the perforated mesh")
        if problem.gamma is not None:
            gamma = float(problem.gamma)
        elif params is not None and eps is not None:
            gamma = float(params.gamma(eps))
        else:
            raise ContractError("gamma needs params and eps, or an explicit value")
    else:
        if mesh.kind == "perforated":
            raise ContractError("the homogenized problem needs the filled mesh")
        gamma = 0.0
    K = stiffness_matrix(mesh)
    M = mass_matrix(mesh)
    B = robin_matrix(mesh, gamma) if problem.kind == "PerforatedRobin" else sp.csr_matrix(K.shape)
    b = load_vector(mesh, f)
    return SparseSystem(mesh, K, M, B, mesh.dirichlet_nodes(), b, problem, eps, gamma)
