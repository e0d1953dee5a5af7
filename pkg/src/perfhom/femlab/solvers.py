"""Preconditioned conjugate gradients and a low-eigenvalue driver."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .assembly import SparseSystem

__all__ = [
    "ConvergenceError",
    "CGResult",
    "DiscreteSolution",
    "pcg",
    "solve_cg",
    "low_eigenvalues",
    "system_eigenvalues",
]

SOLVER_TOL = 1e-10
EIGEN_TOL = 1e-8


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    residual: float


def pcg(A, b: np.ndarray, tol: float = SOLVER_TOL, max_iter: Optional[int] = None,
        x0: Optional[np.ndarray] = None) -> CGResult:
    """Jacobi-preconditioned CG until ``|b - A x| <= tol |b|``."""
    b = np.asarray(b, dtype=float)
    n = len(b)
    if max_iter is None:
        max_iter = max(10 * n, 1000)
    diag = A.diagonal() if sp.issparse(A) else np.diag(A)
    if np.any(diag <= 0):
        raise ValueError("operator must have a positive diagonal")
    inv_diag = 1.0 / diag
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return CGResult(np.zeros(n), 0, 0.0)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    res = np.linalg.norm(r) / bnorm
    it = 0
    while res > tol:
        if it >= max_iter:
            raise ConvergenceError(f"CG did not converge in {max_iter} iterations", res)
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        it += 1
        res = np.linalg.norm(r) / bnorm
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    # certify with the true residual
    res = np.linalg.norm(b - A @ x) / bnorm
    return CGResult(x, it, res)


@dataclass
class DiscreteSolution:
    """Nodal values on ``mesh`` (zero on Dirichlet nodes) and solve metadata."""

    mesh: object
    values: np.ndarray
    metadata: dict = field(default_factory=dict)


def solve_cg(system: SparseSystem, tol: float = SOLVER_TOL, max_iter: Optional[int] = None) -> DiscreteSolution:
    A, b, free = system.reduced()
    res = pcg(A, b, tol, max_iter)
    u = np.zeros(system.mesh.n_nodes)
    u[free] = res.x
    meta = {
        "problem": system.problem.kind,
        "V": system.problem.V,
        "gamma": system.gamma,
        "eps": system.eps,
        "iterations": res.iterations,
        "residual": res.residual,
    }
    return DiscreteSolution(system.mesh, u, meta)


def _m_orthonormalize(X, M, against=None):
    if against is not None and against.shape[1]:
        X = X - against @ (against.T @ (M @ X))
        X = X - against @ (against.T @ (M @ X))
    G = X.T @ (M @ X)
    w, V = np.linalg.eigh(0.5 * (G + G.T))
    keep = w > 1e-14 * w.max()
    return X @ (V[:, keep] / np.sqrt(w[keep]))


def low_eigenvalues(A, M, k: int, shift: float = 0.0, tol: float = EIGEN_TOL,
                    max_iter: int = 500, inner_tol: float = 1e-13, block: Optional[int] = None,
                    seed: int = 0, return_vectors: bool = False):
    """``k`` smallest eigenvalues of ``A v = lam M v`` for SPD ``M``.

    Block inverse iteration on ``A - shift M`` (CG inner solves) with a
    Rayleigh-Ritz step; converged pairs are locked and deflated from the
    active block.  ``shift`` must lie below the spectrum; use a negative
    shift for Neumann problems.  Convergence means
    ``|A v - lam M v| / |v|_M <= tol`` for each pair.
    """
    if not 1 <= k <= 10:
        raise ValueError("k must lie in 1..10")
    A = sp.csr_matrix(A) if not sp.issparse(A) else A.tocsr()
    M = sp.csr_matrix(M) if not sp.issparse(M) else M.tocsr()
    n = A.shape[0]
    if k > n:
        raise ValueError("k exceeds the problem size")
    shifted = (A - shift * M).tocsr()
    p = min(n, block or k + 4)
    rng = np.random.default_rng(seed)
    X = _m_orthonormalize(rng.standard_normal((n, p)), M)
    locked = np.zeros((n, 0))
    lam_locked: list = []
    res_locked: list = []
    prev = None
    stall = 0
    for _ in range(max_iter):
        need = k - locked.shape[1]
        MX = M @ X
        Y = np.column_stack([pcg(shifted, MX[:, j], inner_tol).x for j in range(X.shape[1])])
        Y = _m_orthonormalize(Y, M, locked)
        Ah = Y.T @ (A @ Y)
        Mh = Y.T @ (M @ Y)
        theta, C = sla.eigh(0.5 * (Ah + Ah.T), 0.5 * (Mh + Mh.T))
        X = Y @ C
        R = A @ X - (M @ X) * theta
        mnorm = np.sqrt(np.einsum("ij,ij->j", X, M @ X))
        res = np.linalg.norm(R, axis=0) / mnorm
        # lock the converged leading pairs
        done = 0
        while done < min(need, len(theta)) and res[done] <= tol:
            done += 1
        if done:
            locked = np.column_stack([locked, X[:, :done]])
            lam_locked += list(theta[:done])
            res_locked += list(res[:done])
            X = X[:, done:]
            if locked.shape[1] >= k:
                break
            fill = p - X.shape[1]
            if fill > 0:
                X = np.column_stack([X, rng.standard_normal((n, fill))])
            X = _m_orthonormalize(X, M, locked)
            stall = 0
            prev = None
            continue
        lead = res[0]
        if prev is not None and lead > 0.999 * prev:
            stall += 1
            if stall >= 20:
                raise ConvergenceError("eigen iteration stagnated", float(lead))
        else:
            stall = 0
        prev = lead
    else:
        raise ConvergenceError("eigen iteration hit max_iter", float(res[0]))
    order = np.argsort(lam_locked)
    lam = np.asarray(lam_locked)[order]
    if return_vectors:
        return lam, locked[:, order], np.asarray(res_locked)[order]
    return lam


def system_eigenvalues(system: SparseSystem, k: int, **kw) -> np.ndarray:
    """Low eigenvalues of the form ``K + B + V M`` against ``M`` on free nodes."""
    free = system.free
    A = system.energy[free][:, free]
    M = system.M[free][:, free]
    return low_eigenvalues(A, M, k, **kw)
