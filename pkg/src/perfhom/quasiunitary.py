"""Resolvent and spectral bounds for operators in two different Hilbert spaces.

Finite-dimensional test bed: ``A`` acts on ``H = C^m``, ``A_eps`` on
``H_eps = C^k``, and four identification maps connect them.  The minimal
constants in the four closeness conditions are computed exactly as operator
norms, which turns the abstract resolvent bounds (``4 delta`` in L2,
``6 delta`` in the energy norm) and the spectral bound into checkable
inequalities between singular values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .regime import ContractError, DomainError

__all__ = [
    "HypothesisError",
    "BoundViolation",
    "HilbertPair",
    "QuasiUnitarySetup",
    "DeltaCertificate",
    "delta_certificate",
    "resolvent_defect",
    "hausdorff",
    "tilde_hausdorff",
    "spectral_bound",
    "tau_bound",
    "minimize_tau_bound",
    "spectral_bound_check",
    "injectivity_constant",
    "random_instance",
    "AbstractRow",
    "abstract_suite",
]


class HypothesisError(ValueError):
    """Supplied constants do not satisfy the lower-bound hypothesis."""


class BoundViolation(AssertionError):
    """A bound that must hold for every admissible input failed."""


def _adj(M):
    return M.conj().T


def _opnorm(M) -> float:
    if M.size == 0:
        return 0.0
    return float(np.linalg.svd(M, compute_uv=False)[0])


def _herm_power(A, p):
    w, U = np.linalg.eigh(A)
    return (U * w ** p) @ _adj(U)


@dataclass(frozen=True)
class HilbertPair:
    A: np.ndarray
    A_eps: np.ndarray

    def __post_init__(self):
        for name in ("A", "A_eps"):
            M = np.array(getattr(self, name))
            if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
                raise DomainError(f"{name} must be a non-empty square matrix")
            if np.max(np.abs(M - _adj(M))) > 1e-12 * max(1.0, np.max(np.abs(M))):
                raise DomainError(f"{name} is not self-adjoint")
            M = 0.5 * (M + _adj(M))
            if np.linalg.eigvalsh(M)[0] < -1e-10:
                raise DomainError(f"{name} is not positive semidefinite")
            M.setflags(write=False)
            object.__setattr__(self, name, M)

    @property
    def dim_H(self) -> int:
        return self.A.shape[0]

    @property
    def dim_He(self) -> int:
        return self.A_eps.shape[0]

    def resolvent(self):
        return _herm_power(self.A + np.eye(self.dim_H), -1.0)

    def resolvent_eps(self):
        return _herm_power(self.A_eps + np.eye(self.dim_He), -1.0)


@dataclass(frozen=True)
class QuasiUnitarySetup:
    pair: HilbertPair
    J: np.ndarray
    J_tilde: np.ndarray
    J1: np.ndarray
    J1_tilde: np.ndarray

    def __post_init__(self):
        m, k = self.pair.dim_H, self.pair.dim_He
        shapes = {"J": (k, m), "J1": (k, m), "J_tilde": (m, k), "J1_tilde": (m, k)}
        for name, shape in shapes.items():
            M = np.array(getattr(self, name))
            if M.shape != shape:
                raise ContractError(f"{name} has shape {M.shape}, expected {shape}")
            M.setflags(write=False)
            object.__setattr__(self, name, M)

    @classmethod
    def identity(cls, A) -> "QuasiUnitarySetup":
        A = np.asarray(A)
        I = np.eye(A.shape[0])
        return cls(HilbertPair(A, A), I, I, I, I)


@dataclass(frozen=True)
class DeltaCertificate:
    delta0: float
    delta1: float
    delta2: float
    delta3: float

    @property
    def delta(self) -> float:
        return max(self.delta0, self.delta1, self.delta2, self.delta3)


def delta_certificate(setup: QuasiUnitarySetup) -> DeltaCertificate:
    """Smallest constants for which the four closeness conditions hold.

    * ``|(u, J f) - (J~ u, f)| <= d0 |f| |u|``              d0 = |J* - J~|
    * ``|J1 f - J f| <= d1 |f|_1``                           d1 = |(J1 - J)(A+1)^-1/2|
    * ``|J~1 u - J~ u| <= d2 |u|``                           d2 = |J~1 - J~|
    * ``|a_eps[u, J1 f] - a[J~1 u, f]| <= d3 |f|_2 |u|_1``   d3 = |(A_eps+1)^-1/2 (A_eps J1 - J~1* A)(A+1)^-1|
    """
    p = setup.pair
    Im, Ik = np.eye(p.dim_H), np.eye(p.dim_He)
    d0 = _opnorm(_adj(setup.J) - setup.J_tilde)
    d1 = _opnorm((setup.J1 - setup.J) @ _herm_power(p.A + Im, -0.5))
    d2 = _opnorm(setup.J1_tilde - setup.J_tilde)
    form_defect = p.A_eps @ setup.J1 - _adj(setup.J1_tilde) @ p.A
    d3 = _opnorm(_herm_power(p.A_eps + Ik, -0.5) @ form_defect @ p.resolvent())
    return DeltaCertificate(d0, d1, d2, d3)


def resolvent_defect(setup: QuasiUnitarySetup):
    """``(|R_eps J - J R|, |(A_eps+1)^1/2 (R_eps J - J1 R)|)``."""
    p = setup.pair
    R, Re = p.resolvent(), p.resolvent_eps()
    l2 = _opnorm(Re @ setup.J - setup.J @ R)
    h1 = _opnorm(_herm_power(p.A_eps + np.eye(p.dim_He), 0.5) @ (Re @ setup.J - setup.J1 @ R))
    return l2, h1


def hausdorff(X, Y) -> float:
    X = np.asarray(list(X) if not isinstance(X, np.ndarray) else X, dtype=float).ravel()
    Y = np.asarray(list(Y) if not isinstance(Y, np.ndarray) else Y, dtype=float).ravel()
    if X.size == 0 or Y.size == 0:
        raise DomainError("Hausdorff distance needs non-empty sets")
    D = np.abs(X[:, None] - Y[None, :])
    return float(max(D.min(axis=1).max(), D.min(axis=0).max()))


def tilde_hausdorff(X, Y) -> float:
    """Hausdorff distance after the map ``x -> 1/(1+x)`` on ``[0, inf]``."""
    X = np.asarray(list(X) if not isinstance(X, np.ndarray) else X, dtype=float).ravel()
    Y = np.asarray(list(Y) if not isinstance(Y, np.ndarray) else Y, dtype=float).ravel()
    if np.any(X < 0) or np.any(Y < 0):
        raise DomainError("sets must lie in [0, inf)")
    return hausdorff(1.0 / (1.0 + X), 1.0 / (1.0 + Y))


def spectral_bound(rho, mu, nu, rho_t, mu_t, nu_t) -> float:
    a = nu / 2 + math.sqrt(nu * nu / 4 + rho * rho * mu)
    b = nu_t / 2 + math.sqrt(nu_t * nu_t / 4 + rho_t * rho_t * mu_t)
    return max(a, b)


def tau_bound(rho, mu, nu, tau) -> float:
    """One half of the tau-family bound: ``max(rho sqrt(mu/tau), nu/(1-tau))``."""
    return max(rho * math.sqrt(mu / tau), nu / (1 - tau))


def minimize_tau_bound(rho, mu, nu) -> float:
    """Minimize ``tau_bound`` over ``tau`` in (0, 1) numerically.

    The first term decreases and the second increases in ``tau``, so the
    minimum sits at their crossing, which is bracketed and refined by Brent.
    """
    if nu == 0:
        return rho * math.sqrt(mu)
    if rho == 0 or mu == 0:
        return nu
    g = lambda tau: rho * math.sqrt(mu / tau) - nu / (1 - tau)
    a, b = 0.5, 0.5
    while g(a) < 0:
        a *= 0.5
    while g(b) > 0:
        b = 1 - (1 - b) * 0.5
    tau = brentq(g, a, b, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=500)
    return tau_bound(rho, mu, nu, tau)


def injectivity_constant(J) -> float:
    """``|(J* J)^-1|``: the smallest ``mu`` with ``|f|^2 <= mu |J f|^2``."""
    s = np.linalg.svd(np.asarray(J), compute_uv=False)
    # numerically rank-deficient maps have no finite constant
    if s.size < np.asarray(J).shape[1] or s[-1] <= 1e-12 * max(s[0], 1.0):
        return math.inf
    return float(1.0 / s[-1] ** 2)


def _lower_bound_holds(J, A, mu, nu, tol=1e-10) -> bool:
    # |f|^2 <= mu |J f|^2 + nu (A f, f)  <=>  mu J*J + nu A - I >= 0
    M = mu * (_adj(J) @ J) + nu * A - np.eye(A.shape[0])
    M = 0.5 * (M + _adj(M))
    return bool(np.linalg.eigvalsh(M)[0] >= -tol * max(1.0, mu))


@dataclass(frozen=True)
class SpectralCheck:
    lhs: float
    rhs: float
    rho: float
    rho_tilde: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + 1e-9


def spectral_bound_check(setup: QuasiUnitarySetup, mu, nu, mu_t, nu_t, strict: bool = True) -> SpectralCheck:
    """Compare the distance between the spectra with the a-priori bound.

    Raises :class:`HypothesisError` if ``(mu, nu)`` or ``(mu_t, nu_t)`` fail
    their lower-bound hypotheses, and :class:`BoundViolation` (when
    ``strict``) if the bound itself fails.
    """
    p = setup.pair
    if not _lower_bound_holds(setup.J, p.A, mu, nu):
        raise HypothesisError("|f|^2 <= mu |J f|^2 + nu a[f,f] fails")
    if not _lower_bound_holds(setup.J_tilde, p.A_eps, mu_t, nu_t):
        raise HypothesisError("|u|^2 <= mu~ |J~ u|^2 + nu~ a_eps[u,u] fails")
    R, Re = p.resolvent(), p.resolvent_eps()
    rho = _opnorm(Re @ setup.J - setup.J @ R)
    rho_t = _opnorm(setup.J_tilde @ Re - R @ setup.J_tilde)
    lhs = tilde_hausdorff(np.clip(np.linalg.eigvalsh(p.A_eps), 0, None),
                          np.clip(np.linalg.eigvalsh(p.A), 0, None))
    rhs = spectral_bound(rho, mu, nu, rho_t, mu_t, nu_t)
    out = SpectralCheck(lhs, rhs, rho, rho_t)
    if strict and not out.holds:
        raise BoundViolation(f"spectral distance {lhs:.3e} exceeds bound {rhs:.3e}")
    return out


def _wishart(rng, m, scale):
    X = rng.standard_normal((m, m + 2))
    W = X @ X.T / (m + 2)
    return scale * W


def _unit_noise(rng, shape):
    N = rng.standard_normal(shape)
    return N / _opnorm(N)


def random_instance(seed: int, dims=(8, 8), coupling_scale: float = 0.01) -> QuasiUnitarySetup:
    """Reproducible random setup whose closeness constants scale like ``coupling_scale``.

    ``J`` is an isometry ``H -> H_eps`` plus noise of norm ``coupling_scale``;
    ``A_eps`` equals ``J0 A J0*`` on the range of the isometry ``J0``, an
    independent positive block on its complement, plus a positive
    perturbation of norm ``coupling_scale``.

    With ``dim_He < dim_H`` no isometry exists, ``J0`` is a co-isometry and
    the form condition stays O(1) regardless of ``coupling_scale``.
    """
    m, k = (int(dims), int(dims)) if np.isscalar(dims) else (int(dims[0]), int(dims[1]))
    if m < 1 or k < 1:
        raise DomainError("dimensions must be >= 1")
    c = float(coupling_scale)
    rng = np.random.default_rng(seed)
    A = _wishart(rng, m, 2.0)
    Q, _ = np.linalg.qr(rng.standard_normal((max(k, m), max(k, m))))
    if k >= m:
        J0 = Q[:k, :m]
    else:
        # co-isometry: J0 J0* = I on H_eps
        J0 = Q[:m, :k].T
    A_eps = J0 @ A @ J0.T
    if k > m:
        Pc = np.eye(k) - J0 @ J0.T
        A_eps = A_eps + Pc @ _wishart(rng, k, 2.0) @ Pc
    E = _wishart(rng, k, 1.0)
    A_eps = A_eps + c * E / _opnorm(E)
    A_eps = 0.5 * (A_eps + A_eps.T)
    J = J0 + c * _unit_noise(rng, (k, m))
    J_t = J0.T + c * _unit_noise(rng, (m, k))
    J1 = J + c * _unit_noise(rng, (k, m))
    J1_t = J_t + c * _unit_noise(rng, (m, k))
    return QuasiUnitarySetup(HilbertPair(A, A_eps), J, J_t, J1, J1_t)


@dataclass(frozen=True)
class AbstractRow:
    seed: int
    dim: int
    delta: float
    l2_defect: float
    h1_defect: float
    spectral_distance: float
    spectral_bound: float

    @property
    def l2_ok(self) -> bool:
        return self.l2_defect <= 4 * self.delta + 1e-9

    @property
    def h1_ok(self) -> bool:
        return self.h1_defect <= 6 * self.delta + 1e-9

    @property
    def spectral_ok(self) -> bool:
        return self.spectral_distance <= self.spectral_bound + 1e-9

    @property
    def passed(self) -> bool:
        return self.l2_ok and self.h1_ok and self.spectral_ok


def abstract_suite(instances: int = 100, max_dim: int = 16, seed: int = 0,
                   coupling_scale: float = 0.01) -> list:
    """Check the resolvent and spectral bounds on seeded random instances.

    Dimensions are drawn from ``1..max_dim`` with ``dim_He = dim_H`` so both
    identification maps are injective; the spectral bound uses ``nu = 0``
    and ``mu = |(J* J)^-1|``.
    """
    if instances < 1 or max_dim < 1:
        raise DomainError("need at least one instance of dimension >= 1")
    rng = np.random.default_rng(seed)
    dims = rng.integers(1, max_dim + 1, size=instances)
    rows = []
    for i, m in enumerate(dims):
        s = int(seed) * 1_000_003 + i
        while True:
            setup = random_instance(s, (int(m), int(m)), coupling_scale)
            mu = injectivity_constant(setup.J)
            mu_t = injectivity_constant(setup.J_tilde)
            if math.isfinite(mu) and math.isfinite(mu_t):
                break
            s += 7_919_000  # singular J*J: regenerate
        delta = delta_certificate(setup).delta
        l2, h1 = resolvent_defect(setup)
        chk = spectral_bound_check(setup, mu, 0.0, mu_t, 0.0, strict=False)
        rows.append(AbstractRow(s, int(m), delta, l2, h1, chk.lhs, chk.rhs))
    return rows
