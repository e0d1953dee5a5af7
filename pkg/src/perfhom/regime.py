"""Parameter algebra of the perforated Robin problem.

Scaling laws for the hole radius ``d_eps`` and the Robin coefficient
``gamma_eps``, the derived numbers ``P_eps``, ``Q_eps``, ``V_eps``, their
limits, and the convergence-rate functions used by the rest of the package.

Limits are classified exactly from the (exponent, log power) pair of each
power-log law; nothing here takes a numerical limit.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import Mapping, Optional

__all__ = [
    "DomainError",
    "GeometryError",
    "ContractError",
    "ScalingLaw",
    "PerforationParams",
    "PerforationNumbers",
    "Limit",
    "Scenario",
    "VCase",
    "Region",
    "Violation",
    "RegimeReport",
    "RateBundle",
    "sphere_area",
    "perforation_numbers",
    "limit_regime",
    "validate_epsilon",
    "convergence_rates",
    "rates_for",
    "figure2_region",
    "params_from_mapping",
]


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class GeometryError(ValueError):
    """Holes do not fit inside their cells."""


class ContractError(ValueError):
    """Inputs are individually valid but inconsistent with each other."""


def _exact(x) -> Fraction:
    # floats within 1e-12 of a small-denominator rational are snapped so that
    # exponents such as 5/3 typed as 1.6666666666666667 classify exactly
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    xf = float(x)
    if not math.isfinite(xf):
        raise DomainError(f"exponent must be finite, got {x!r}")
    g = Fraction(xf).limit_denominator(1000)
    if abs(float(g) - xf) <= 1e-12 * max(1.0, abs(xf)):
        return g
    return Fraction(xf)


@dataclass(frozen=True)
class ScalingLaw:
    """The law ``coefficient * eps**exponent * |ln eps|**log_power``."""

    coefficient: float
    exponent: Fraction = Fraction(0)
    log_power: int = 0

    def __post_init__(self):
        c = float(self.coefficient)
        if not (math.isfinite(c) and c >= 0):
            raise DomainError(f"coefficient must be finite and >= 0, got {self.coefficient!r}")
        if int(self.log_power) != self.log_power:
            raise DomainError("log_power must be an integer")
        object.__setattr__(self, "coefficient", c)
        object.__setattr__(self, "exponent", _exact(self.exponent))
        object.__setattr__(self, "log_power", int(self.log_power))

    def __call__(self, eps: float) -> float:
        if not 0 < eps < 1:
            raise DomainError(f"eps must lie in (0, 1), got {eps!r}")
        return self.coefficient * eps ** float(self.exponent) * abs(math.log(eps)) ** self.log_power

    @classmethod
    def power(cls, exponent, coefficient: float = 1.0) -> "ScalingLaw":
        return cls(coefficient, exponent, 0)


@dataclass(frozen=True)
class PerforationParams:
    """Dimension plus the hole-radius and Robin-coefficient laws."""

    n: int
    d_law: ScalingLaw
    gamma_law: ScalingLaw

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"dimension must be an integer >= 2, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        if self.d_law.coefficient <= 0:
            raise DomainError("hole radius coefficient must be positive")
        s, p = self.d_law.exponent, self.d_law.log_power
        # d/eps -> 0 as eps -> 0
        if not (s > 1 or (s == 1 and p < 0)):
            raise DomainError(
                f"d_eps/eps must vanish as eps -> 0 (exponent {s}, log power {p})"
            )

    def d(self, eps: float) -> float:
        return self.d_law(eps)

    def gamma(self, eps: float) -> float:
        return self.gamma_law(eps)

    @classmethod
    def power_laws(cls, n: int, s, t, d_coef: float = 1.0, gamma_coef: float = 1.0):
        """``d_eps = d_coef * eps**s`` and ``gamma_eps = gamma_coef * eps**t``."""
        return cls(n, ScalingLaw(d_coef, s), ScalingLaw(gamma_coef, t))


@dataclass(frozen=True)
class PerforationNumbers:
    P_eps: float
    Q_eps: float
    V_eps: float
    D_script: float
    Lambda_eps: float


class Limit:
    """A value in ``[0, inf]`` with an explicit infinite variant."""

    __slots__ = ("value", "infinite")

    def __init__(self, value: float = 0.0, infinite: bool = False):
        if infinite:
            value = math.inf
        elif not (math.isfinite(value) and value >= 0):
            raise DomainError(f"finite limit must be >= 0, got {value!r}")
        self.value = float(value)
        self.infinite = bool(infinite)

    @classmethod
    def inf(cls) -> "Limit":
        return cls(infinite=True)

    @property
    def is_zero(self) -> bool:
        return not self.infinite and self.value == 0.0

    @property
    def is_positive(self) -> bool:
        return not self.is_zero

    @property
    def is_finite(self) -> bool:
        return not self.infinite

    def __float__(self) -> float:
        return self.value

    def __eq__(self, other):
        if isinstance(other, Limit):
            return self.infinite == other.infinite and self.value == other.value
        return NotImplemented

    def __hash__(self):
        return hash((self.value, self.infinite))

    def __repr__(self):
        return "Limit(inf)" if self.infinite else f"Limit({self.value!r})"

    def to_json(self):
        return "inf" if self.infinite else self.value


class Scenario(str, enum.Enum):
    VANISHING = "VanishingLimit"
    HOMOGENIZED = "HomogenizedLimit"


class VCase(str, enum.Enum):
    P_POS_Q_INF = "P_pos_Q_inf"
    P_INF_Q_POS = "P_inf_Q_pos"
    BOTH_POS = "both_pos"
    EITHER_ZERO = "either_zero"
    NOT_APPLICABLE = "not_applicable"


class Region(str, enum.Enum):
    """The five parameter regions of the (s, t) phase diagram."""

    BOTH_INF = "P=inf and Q=inf"
    EITHER_ZERO = "P=0 or Q=0"
    P_POS_Q_INF = "P>0 and Q=inf"
    P_INF_Q_POS = "P=inf and Q>0"
    BOTH_POS = "P>0 and Q>0"


class Violation(str, enum.Enum):
    LAMBDA = "Lambda_eps > 1/4"
    LOG_RATIO = "|ln eps|/|ln d_eps| > 1/2"
    HOLE_OUTSIDE_CELL = "d_eps >= eps/2"


@dataclass(frozen=True)
class RegimeReport:
    P: Limit
    Q: Limit
    V: Optional[float]
    scenario: Scenario
    v_case: VCase

    def to_dict(self) -> dict:
        return {
            "P": self.P.to_json(),
            "Q": self.Q.to_json(),
            "V": self.V,
            "scenario": self.scenario.value,
            "v_case": self.v_case.value,
        }


@dataclass(frozen=True)
class RateBundle:
    """Rate functions at one eps. ``None`` marks a rate that does not apply."""

    eta: Optional[float]
    eta_prime: Optional[float]
    eta_tilde: Optional[float]
    eta_dprime: Optional[float]
    delta_1: Optional[float]
    delta_2: Optional[float]
    delta_3: Optional[float]
    delta_4: Optional[float]
    th5_bound: float

    FIELDS = (
        "eta", "eta_prime", "eta_tilde", "eta_dprime",
        "delta_1", "delta_2", "delta_3", "delta_4", "th5_bound",
    )

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.FIELDS}


def sphere_area(n: int) -> float:
    """Surface area ``2 pi^(n/2) / Gamma(n/2)`` of the unit sphere in R^n."""
    if int(n) != n or n < 2:
        raise DomainError(f"dimension must be an integer >= 2, got {n!r}")
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def _check_eps(eps: float):
    if not (isinstance(eps, Real) and 0 < eps < 1):
        raise DomainError(f"eps must lie in (0, 1), got {eps!r}")


def perforation_numbers(params: PerforationParams, eps: float) -> PerforationNumbers:
    _check_eps(eps)
    n = params.n
    d = params.d(eps)
    g = params.gamma(eps)
    if d >= eps / 2:
        raise GeometryError(f"d_eps = {d:g} does not fit in a cell of size eps = {eps:g}")
    kappa = sphere_area(n)
    P = kappa * g * d ** (n - 1) / eps ** n
    if n >= 3:
        D = d ** (n - 2)
        Q = (n - 2) * kappa * D / eps ** n
    else:
        D = 1.0 / abs(math.log(d))
        Q = 2.0 * math.pi * D / eps ** 2
    V = P * Q / (P + Q) if P > 0 else 0.0
    return PerforationNumbers(P, Q, V, D, d / eps)


def _classify(coef: float, exponent: Fraction, log_power: int) -> Limit:
    # limit of coef * eps**exponent * |ln eps|**log_power as eps -> 0+
    if coef == 0:
        return Limit(0.0)
    if exponent > 0:
        return Limit(0.0)
    if exponent < 0:
        return Limit.inf()
    if log_power > 0:
        return Limit.inf()
    if log_power < 0:
        return Limit(0.0)
    return Limit(coef)


def _p_law(params: PerforationParams):
    n, dl, gl = params.n, params.d_law, params.gamma_law
    coef = sphere_area(n) * gl.coefficient * dl.coefficient ** (n - 1)
    return coef, gl.exponent + (n - 1) * dl.exponent - n, gl.log_power + (n - 1) * dl.log_power


def _q_law(params: PerforationParams):
    n, dl = params.n, params.d_law
    if n == 2:
        # |ln d_eps| grows like exponent*|ln eps|, so Q_eps ~ eps^-2 / |ln eps|
        return 2.0 * math.pi / float(dl.exponent), Fraction(-2), -1
    coef = (n - 2) * sphere_area(n) * dl.coefficient ** (n - 2)
    return coef, (n - 2) * dl.exponent - n, (n - 2) * dl.log_power


def _v_table(P: Limit, Q: Limit):
    if P.infinite and Q.infinite:
        return None, Scenario.VANISHING, VCase.NOT_APPLICABLE
    if P.is_zero or Q.is_zero:
        return 0.0, Scenario.HOMOGENIZED, VCase.EITHER_ZERO
    if Q.infinite:
        return P.value, Scenario.HOMOGENIZED, VCase.P_POS_Q_INF
    if P.infinite:
        return Q.value, Scenario.HOMOGENIZED, VCase.P_INF_Q_POS
    return P.value * Q.value / (P.value + Q.value), Scenario.HOMOGENIZED, VCase.BOTH_POS


def limit_regime(params: PerforationParams) -> RegimeReport:
    P = _classify(*_p_law(params))
    Q = _classify(*_q_law(params))
    V, scenario, v_case = _v_table(P, Q)
    return RegimeReport(P, Q, V, scenario, v_case)


def validate_epsilon(params: PerforationParams, eps: float) -> list:
    """Return the admissibility conditions violated at ``eps`` (empty if admissible)."""
    _check_eps(eps)
    d = params.d(eps)
    out = []
    if d / eps > 0.25:
        out.append(Violation.LAMBDA)
    if params.n == 2 and limit_regime(params).Q.is_positive:
        ld = abs(math.log(d))
        if ld == 0 or abs(math.log(eps)) / ld > 0.5:
            out.append(Violation.LOG_RATIO)
    if d >= eps / 2:
        out.append(Violation.HOLE_OUTSIDE_CELL)
    return out


def _dim_branch(n: int, ge5, four, three, two):
    if n >= 5:
        return ge5
    return {4: four, 3: three, 2: two}[n]


def convergence_rates(params: PerforationParams, eps: float, V_limit: Optional[float]) -> RateBundle:
    """All rate functions at ``eps`` against the exact limit potential ``V_limit``.

    ``V_limit`` must be given whenever P < inf or Q < inf; in the P = Q = inf
    regime only ``th5_bound`` is populated.
    """
    nums = perforation_numbers(params, eps)
    report = limit_regime(params)
    n = params.n
    d = params.d(eps)
    P, Q, V = nums.P_eps, nums.Q_eps, nums.V_eps
    lam = nums.Lambda_eps
    log_eps = abs(math.log(eps))
    log_lam = abs(math.log(lam))
    th5 = max(1.0 / P if P > 0 else math.inf, 1.0 / Q, eps ** 2)

    if report.scenario is Scenario.VANISHING:
        return RateBundle(None, None, None, None, None, None, None, None, th5)
    if V_limit is None:
        raise ContractError("V_limit is required when P < inf or Q < inf")

    dV = abs(V - V_limit)
    eta = max(dV, *_dim_branch(
        n,
        (eps, lam),
        (eps, lam * log_lam),
        (eps, lam ** 0.5),
        (eps * log_eps, log_lam ** -0.5),
    ))
    eta_prime = max(V / math.sqrt(Q), eta)
    eta_tilde = max(dV, _dim_branch(
        n,
        eps ** (2.0 / (n - 2)) if n > 2 else None,
        eps * log_eps,
        eps,
        eps * log_eps,
    ))
    if report.P.is_finite:
        eta_dprime = max(P / math.sqrt(Q), abs(P - report.P.value), eps, lam ** (n / 2))
    else:
        eta_dprime = None
    delta_1 = max(lam ** (n / 2), math.sqrt(eps * d))
    delta_2 = delta_1 if n >= 3 else max(lam ** 0.5, eps ** 0.75 * d ** 0.25)
    delta_3 = _dim_branch(n, lam, lam * log_lam, lam ** 0.5, log_lam ** -0.5)
    delta_4 = eps if n >= 3 else eps * log_eps
    return RateBundle(eta, eta_prime, eta_tilde, eta_dprime,
                      delta_1, delta_2, delta_3, delta_4, th5)


def rates_for(params: PerforationParams, eps: float) -> RateBundle:
    """``convergence_rates`` with the limit potential taken from ``limit_regime``."""
    return convergence_rates(params, eps, limit_regime(params).V)


def figure2_region(n: int, s, t) -> Region:
    """Region of ``(s, t)`` for ``d_eps = eps**s``, ``gamma_eps = eps**t``, n >= 3."""
    if int(n) != n or n < 3:
        raise DomainError("the phase diagram is drawn for n >= 3")
    s, t = _exact(s), _exact(t)
    if s <= 1:
        raise DomainError(f"s must exceed 1 so that d_eps/eps -> 0, got {s}")
    e_p = t + (n - 1) * s - n
    e_q = (n - 2) * s - n
    if e_p > 0 or e_q > 0:
        return Region.EITHER_ZERO
    if e_p < 0 and e_q < 0:
        return Region.BOTH_INF
    if e_p == 0 and e_q < 0:
        return Region.P_POS_Q_INF
    if e_p < 0 and e_q == 0:
        return Region.P_INF_Q_POS
    return Region.BOTH_POS


def region_of_report(report: RegimeReport) -> Region:
    P, Q = report.P, report.Q
    if P.infinite and Q.infinite:
        return Region.BOTH_INF
    if P.is_zero or Q.is_zero:
        return Region.EITHER_ZERO
    if Q.infinite:
        return Region.P_POS_Q_INF
    if P.infinite:
        return Region.P_INF_Q_POS
    return Region.BOTH_POS


def _law_from(m: Mapping, prefix: str, default_coef: float) -> ScalingLaw:
    sub = m.get(prefix, {})
    if not isinstance(sub, Mapping):
        sub = {}

    def get(key, default):
        dotted = f"{prefix}.{key}"
        if dotted in m:
            return m[dotted]
        return sub.get(key, default)

    return ScalingLaw(
        float(get("coefficient", default_coef)),
        _exact(get("exponent", 0)),
        int(get("log_power", 0)),
    )


def params_from_mapping(m: Mapping) -> PerforationParams:
    """Build parameters from a flat (``d.exponent``) or nested (``d = {...}``) mapping.

    Exponents may be given as numbers or as rational strings like ``"5/3"``.
    """
    if "n" not in m:
        raise DomainError("configuration is missing the dimension 'n'")
    return PerforationParams(int(m["n"]), _law_from(m, "d", 1.0), _law_from(m, "gamma", 1.0))
