"""Lattice geometry and the explicit corrector functions.

The corrector near the hole of cell ``i`` is a multiple of the fundamental
solution of the Laplacian,

    G_i(x) = -V_eps eps^n / (kappa_n (n-2) |x - x_i|^(n-2))   (n >= 3)
    G_i(x) =  V_eps eps^2 / (2 pi) ln |x - x_i|                (n = 2)

glued into the cell by the cut-off ``phi(4|x - x_i|/eps)``.  On the hole
boundary it satisfies the Robin condition ``dG/dn + gamma (G + 1) = 0`` with
the normal pointing into the hole; the checks below evaluate that identity,
the flux identity and the sup bound from the closed forms.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

from .regime import (
    DomainError,
    PerforationNumbers,
    PerforationParams,
    ScalingLaw,
    perforation_numbers,
    sphere_area,
    validate_epsilon,
)

__all__ = [
    "SingularityError",
    "Lattice",
    "CellGeometry",
    "CorrectorField",
    "cutoff_phi",
    "sphere_points",
    "eval_G_i",
    "eval_corrector",
    "cell_means",
    "eval_J1",
    "check_robin_identity",
    "flux_integral",
    "boundary_sup",
    "identity_grid",
    "run_identity_suite",
]


class SingularityError(DomainError):
    """Evaluation requested at the pole of the fundamental solution."""


# ---------------------------------------------------------------------------
# cut-off profile

_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)


def _bump(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = (s > 1.0) & (s < 2.0)
    si = s[inside]
    out[inside] = np.exp(-1.0 / ((si - 1.0) * (2.0 - si)))
    return out


def _tail_integral(t):
    # int_t^2 bump(s) ds for t in [1, 2], 64-point Gauss-Legendre per t
    t = np.asarray(t, dtype=float)
    half = 0.5 * (2.0 - t)
    nodes = t[..., None] + half[..., None] * (_GL_X + 1.0)
    return half * (_bump(nodes) @ _GL_W)


_BUMP_MASS = float(_tail_integral(np.array(1.0)))


def cutoff_phi(t):
    """Smooth cut-off: 1 on [0, 1], 0 on [2, inf), monotone in between.

    On (1, 2) the value is the normalized integral of the bump
    ``exp(-1/((s-1)(2-s)))`` from ``t`` to 2.  Returns ``(value, derivative)``
    with the same shape as ``t``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("cut-off argument must be non-negative")
    val = np.where(t <= 1.0, 1.0, 0.0)
    mid = (t > 1.0) & (t < 2.0)
    if np.any(mid):
        val = np.array(val, dtype=float)
        # clip the rounding overshoot just above t = 1
        val[mid] = np.minimum(_tail_integral(t[mid]) / _BUMP_MASS, 1.0)
    der = -_bump(t) / _BUMP_MASS
    if val.ndim == 0:
        return float(val), float(der)
    return val, der


# ---------------------------------------------------------------------------
# geometry


@dataclass(frozen=True)
class Lattice:
    """Cells ``eps(box + i)`` with centers ``origin + i*eps`` lying inside a box domain.

    The default origin (all zeros) is the lattice ``x_i = i eps``.  The finite
    element harness uses ``origin = eps/2`` so that the cells tile the unit
    square exactly.
    """

    lower: tuple
    upper: tuple
    eps: float
    origin: Optional[tuple] = None

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi) or len(lo) < 1:
            raise DomainError("box corners must have the same positive length")
        if any(a >= b for a, b in zip(lo, hi)):
            raise DomainError("box must have positive extent in every direction")
        if not self.eps > 0:
            raise DomainError("cell size must be positive")
        org = tuple(0.0 for _ in lo) if self.origin is None else tuple(float(v) for v in self.origin)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "origin", org)

    @classmethod
    def unit_square_tiling(cls, eps: float) -> "Lattice":
        return cls((0.0, 0.0), (1.0, 1.0), eps, (eps / 2, eps / 2))

    @property
    def n(self) -> int:
        return len(self.lower)

    def _ranges(self):
        tol = 1e-9
        out = []
        for a, b, o in zip(self.lower, self.upper, self.origin):
            # origin + eps*(i -+ 1/2) within [a, b]
            lo = math.ceil((a - o) / self.eps + 0.5 - tol)
            hi = math.floor((b - o) / self.eps - 0.5 + tol)
            out.append((lo, hi))
        return out

    @cached_property
    def index_set(self) -> np.ndarray:
        axes = [np.arange(lo, hi + 1) for lo, hi in self._ranges()]
        if any(len(a) == 0 for a in axes):
            return np.zeros((0, self.n), dtype=int)
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=-1)

    @property
    def centers(self) -> np.ndarray:
        return self.center(self.index_set)

    def center(self, i) -> np.ndarray:
        return np.asarray(self.origin) + self.eps * np.asarray(i, dtype=float)

    def contains_index(self, i) -> np.ndarray:
        i = np.asarray(i)
        ok = np.ones(i.shape[:-1], dtype=bool)
        for k, (lo, hi) in enumerate(self._ranges()):
            ok &= (i[..., k] >= lo) & (i[..., k] <= hi)
        return ok

    def nearest_index(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.rint((x - np.asarray(self.origin)) / self.eps).astype(int)


@dataclass(frozen=True)
class CellGeometry:
    """Radii of the sets attached to one cell (all concentric about the center)."""

    n: int
    eps: float
    d: float

    def __post_init__(self):
        if not 0 < self.d < self.eps / 2:
            raise DomainError("hole must lie strictly inside its cell")

    @property
    def hole_radius(self) -> float:
        return self.d

    @property
    def annulus(self) -> tuple:
        return (self.d, self.eps / 2)

    @property
    def shell(self) -> tuple:
        return (self.eps / 4, self.eps / 2)

    @property
    def cutoff_radius(self) -> float:
        return 2 * self.d if self.n >= 3 else math.sqrt(self.eps * self.d)

    @property
    def cutoff_support(self) -> tuple:
        return (self.d, self.cutoff_radius)

    def cutoff_inside_annulus(self) -> bool:
        return self.cutoff_radius <= self.eps / 2


class CorrectorField:
    """Corrector data for one ``(params, eps)``; immutable after construction."""

    def __init__(self, params: PerforationParams, eps: float):
        self.params = params
        self.eps = float(eps)
        self.numbers: PerforationNumbers = perforation_numbers(params, eps)
        self.n = params.n
        self.d = params.d(eps)
        self.gamma = params.gamma(eps)
        self.kappa = sphere_area(self.n)
        self.geometry = CellGeometry(self.n, self.eps, self.d)
        # V_eps eps^n, the strength of the point source
        self.strength = self.numbers.V_eps * self.eps ** self.n

    def admissibility(self) -> list:
        return validate_epsilon(self.params, self.eps)

    def kernel(self, r):
        """Radial profile ``G(r)`` and ``G'(r)``."""
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise SingularityError("corrector kernel evaluated at its pole")
        n, c = self.n, self.strength
        if n == 2:
            return c / (2 * math.pi) * np.log(r), c / (2 * math.pi * r)
        val = -c / (self.kappa * (n - 2) * r ** (n - 2))
        der = c / (self.kappa * r ** (n - 1))
        return val, der

    def cutoff(self, r):
        """``phi(4 r / eps)`` and its r-derivative."""
        v, dv = cutoff_phi(4.0 * np.asarray(r, dtype=float) / self.eps)
        return v, dv * 4.0 / self.eps

    def inner_cutoff(self, r):
        """The two-branch cut-off around the hole used by the first-order map."""
        r = np.asarray(r, dtype=float)
        if self.n >= 3:
            v, dv = cutoff_phi(r / self.d)
            return v, dv / self.d
        rho = math.sqrt(self.eps * self.d)
        denom = math.log(self.d) - math.log(rho)
        inside = r < rho
        rs = np.where(inside, r, rho)
        val = np.where(inside, (np.log(rs) - math.log(rho)) / denom, 0.0)
        der = np.where(inside, 1.0 / (rs * denom), 0.0)
        val = np.where(r <= self.d, 1.0, val)
        der = np.where(r < self.d, 0.0, der)
        return val, der


def _as_points(x, n):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != n:
        raise DomainError(f"points must have {n} coordinates, got shape {x.shape}")
    return x


def _radial(x, center):
    diff = x - center
    r = np.linalg.norm(diff, axis=-1)
    return diff, r


def eval_G_i(field: CorrectorField, i, x, lattice: Optional[Lattice] = None):
    """Value and gradient of the cell-``i`` fundamental-solution corrector at ``x``."""
    x = _as_points(x, field.n)
    center = lattice.center(i) if lattice is not None else field.eps * np.asarray(i, dtype=float)
    diff, r = _radial(x, center)
    if np.any(r == 0):
        raise SingularityError("x coincides with the hole center")
    g, dg = field.kernel(r)
    grad = (dg / r)[..., None] * diff
    return g, grad


def _cell_lookup(lattice: Lattice, x):
    idx = lattice.nearest_index(x)
    valid = lattice.contains_index(idx)
    diff = x - lattice.center(idx)
    r = np.linalg.norm(diff, axis=-1)
    return idx, valid, diff, r


def _reject_holes(field, valid, r):
    if np.any(valid & (r < field.d * (1 - 1e-12))):
        raise DomainError("point lies inside a hole")


def eval_corrector(field: CorrectorField, lattice: Lattice, x, allow_inside: bool = False):
    """``G_eps(x) = sum_i G_i(x) phi(4|x - x_i|/eps)`` and its gradient.

    At most one term is non-zero: the cut-off of cell ``i`` is supported in
    the ball of radius ``eps/2`` about its center.  ``allow_inside`` permits
    points inside a hole but off its center (polygonal meshes cut the disk).
    """
    x = _as_points(x, field.n)
    _, valid, diff, r = _cell_lookup(lattice, x)
    if allow_inside:
        if np.any(valid & (r == 0)):
            raise SingularityError("x coincides with a hole center")
    else:
        _reject_holes(field, valid, r)
    active = valid & (r < field.eps / 2)
    val = np.zeros(x.shape[:-1])
    grad = np.zeros(x.shape)
    if np.any(active):
        ra = r[active]
        g, dg = field.kernel(ra)
        p, dp = field.cutoff(ra)
        val[active] = g * p
        grad[active] = ((dg * p + g * dp) / ra)[:, None] * diff[active]
    return val, grad


# 3-point Gauss-Legendre on [-1/2, 1/2], exact to degree 5
_G3_X = np.array([-math.sqrt(0.6), 0.0, math.sqrt(0.6)]) / 2
_G3_W = np.array([5.0, 8.0, 5.0]) / 18


def cell_means(lattice: Lattice, f: Callable, indices=None) -> np.ndarray:
    """Means of ``f`` over whole cells (holes included), order-5 tensor Gauss rule."""
    idx = lattice.index_set if indices is None else np.atleast_2d(indices)
    n = lattice.n
    pts = np.array(list(itertools.product(_G3_X, repeat=n)))
    wts = np.array([np.prod(w) for w in itertools.product(_G3_W, repeat=n)])
    centers = lattice.center(idx)
    samples = centers[:, None, :] + lattice.eps * pts[None, :, :]
    return np.asarray(f(samples)) @ wts


def eval_J1(field: CorrectorField, lattice: Lattice, f: Callable, x, f_means=None):
    """First-order identification map applied to ``f`` and evaluated at ``x``.

    ``f`` must accept arrays of points (trailing axis = coordinates).
    ``f_means`` maps lattice index tuples to cell means; missing means are
    computed by quadrature.
    """
    x = _as_points(x, field.n)
    idx, valid, diff, r = _cell_lookup(lattice, x)
    _reject_holes(field, valid, r)
    fx = np.asarray(f(x), dtype=float)
    out = np.array(fx, dtype=float, copy=True)
    active = valid & (r < field.eps / 2)
    if not np.any(active):
        return out
    act_idx = idx[active]
    if f_means is None:
        uniq, inv = np.unique(act_idx, axis=0, return_inverse=True)
        fi = cell_means(lattice, f, uniq)[np.ravel(inv)]
    else:
        fi = np.array([f_means[tuple(int(v) for v in row)] for row in act_idx])
    ra = r[active]
    g, _ = field.kernel(ra)
    p, _ = field.cutoff(ra)
    pt, _ = field.inner_cutoff(ra)
    out[active] = fx[active] + (fi - fx[active]) * pt + fi * g * p
    return out


# ---------------------------------------------------------------------------
# boundary identities


def sphere_points(n: int, count: int, seed: int = 0) -> np.ndarray:
    """``count`` unit vectors in R^n.

    Uniform angles for n = 2, a Fibonacci lattice for n = 3 and normalized
    Gaussian samples (plus the coordinate directions) for n >= 4.
    """
    count = max(int(count), 1)
    if n == 2:
        th = 2 * math.pi * np.arange(count) / count
        return np.stack([np.cos(th), np.sin(th)], axis=-1)
    if n == 3:
        k = np.arange(count) + 0.5
        z = 1 - 2 * k / count
        phi = math.pi * (1 + math.sqrt(5)) * k
        rho = np.sqrt(1 - z * z)
        return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=-1)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((count, n))
    axes = np.concatenate([np.eye(n), -np.eye(n)])[:count]
    v[: len(axes)] = axes
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _boundary_samples(field: CorrectorField, i, sample_count, seed=0):
    center = field.eps * np.asarray(i, dtype=float)
    u = sphere_points(field.n, sample_count, seed)
    return center + field.d * u, -u


def check_robin_identity(field: CorrectorField, i=None, sample_count: int = 64) -> float:
    """Max of ``|dG/dn + gamma (G + 1)|`` over samples of the hole boundary.

    The normal is the exterior normal of the perforated domain, i.e. it points
    toward the hole center.
    """
    i = np.zeros(field.n, dtype=int) if i is None else i
    if field.gamma == 0:
        return 0.0
    x, normal = _boundary_samples(field, i, sample_count)
    g, grad = eval_G_i(field, i, x)
    dn = np.sum(grad * normal, axis=-1)
    return float(np.max(np.abs(dn + field.gamma * (g + 1.0))))


def flux_integral(field: CorrectorField, i=None, sample_count: int = 16) -> float:
    """``-int dG/dn ds`` over the hole boundary.

    The normal derivative is constant on the sphere, so the integral is the
    sphere area ``kappa_n d^(n-1)`` times the sampled normal derivative.
    """
    i = np.zeros(field.n, dtype=int) if i is None else i
    x, normal = _boundary_samples(field, i, sample_count)
    _, grad = eval_G_i(field, i, x)
    dn = np.sum(grad * normal, axis=-1)
    return float(-field.kappa * field.d ** (field.n - 1) * np.mean(dn))


def boundary_sup(field: CorrectorField, i=None, sample_count: int = 64) -> float:
    """Max of ``|G_i|`` over samples of the hole boundary."""
    i = np.zeros(field.n, dtype=int) if i is None else i
    x, _ = _boundary_samples(field, i, sample_count)
    g, _ = eval_G_i(field, i, x)
    return float(np.max(np.abs(g)))


# ---------------------------------------------------------------------------
# identity suite


def identity_grid(
    dims: Sequence[int] = (2, 3, 4, 5, 6),
    s_values: Sequence = (1.2, 1.5, 2, 3),
    t_values: Sequence = (-4, -1, 0, 1, 3),
    eps_values: Sequence[float] = (0.1, 0.05, 0.01, 1e-3),
    d_coefs: Sequence[float] = (1.0, 0.1),
):
    """Admissible ``(params, eps)`` tuples for the identity checks."""
    out = []
    for n in dims:
        for s in s_values:
            for c in d_coefs:
                for t in t_values:
                    params = PerforationParams(n, ScalingLaw(c, s), ScalingLaw(1.0, t))
                    for eps in eps_values:
                        if not validate_epsilon(params, eps):
                            out.append((params, eps))
    return out


@dataclass
class IdentityRow:
    n: int
    s: float
    t: float
    d_coef: float
    eps: float
    gamma: float
    robin_residual: float
    flux_rel_error: float
    sup_value: float
    sup_rel_error: float
    passed: bool = False


def run_identity_suite(grid=None, sample_count: int = 32,
                       robin_tol: float = 1e-10, rel_tol: float = 1e-12) -> list:
    rows = []
    for params, eps in (identity_grid() if grid is None else grid):
        fld = CorrectorField(params, eps)
        nums = fld.numbers
        res = check_robin_identity(fld, sample_count=sample_count)
        target = fld.strength
        flux = flux_integral(fld, sample_count=sample_count)
        flux_err = abs(flux - target) / target if target > 0 else abs(flux)
        sup = boundary_sup(fld, sample_count=sample_count)
        sup_target = nums.P_eps / (nums.P_eps + nums.Q_eps)
        sup_err = abs(sup - sup_target) / sup_target if sup_target > 0 else abs(sup)
        ok = res <= robin_tol * fld.gamma and flux_err <= rel_tol and sup_err <= rel_tol and sup <= 1.0
        rows.append(IdentityRow(
            params.n, float(params.d_law.exponent), float(params.gamma_law.exponent),
            params.d_law.coefficient, eps, fld.gamma, res, flux_err, sup, sup_err, ok,
        ))
    return rows
