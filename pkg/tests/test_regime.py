import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from perfhom.regime import (
    ContractError,
    DomainError,
    GeometryError,
    PerforationParams,
    Region,
    Scenario,
    ScalingLaw,
    VCase,
    Violation,
    convergence_rates,
    figure2_region,
    limit_regime,
    params_from_mapping,
    perforation_numbers,
    rates_for,
    sphere_area,
    validate_epsilon,
)
from perfhom.regime import region_of_report

PI = math.pi


# --- sphere_area -------------------------------------------------------------

@pytest.mark.parametrize("n,expected", [(2, 2 * PI), (3, 4 * PI), (4, 2 * PI ** 2)])
def test_sphere_area_examples(n, expected):
    assert sphere_area(n) == pytest.approx(expected, rel=1e-15)


def test_sphere_area_recursion_oracle():
    # kappa_{n+2} = 2 pi kappa_n / n, independent of the Gamma function
    k = {2: 2 * PI, 3: 4 * PI}
    for n in range(2, 12):
        k[n + 2] = 2 * PI * k[n] / n
        assert sphere_area(n) == pytest.approx(k[n], rel=1e-13)


@pytest.mark.parametrize("n", [1, 0, 2.5])
def test_sphere_area_rejects(n):
    with pytest.raises(DomainError):
        sphere_area(n)


# --- perforation_numbers -----------------------------------------------------

def test_numbers_point_on_dashed_interval():
    p = PerforationParams.power_laws(3, "3/2", 0)
    assert perforation_numbers(p, 0.1).P_eps == pytest.approx(4 * PI, rel=1e-12)


def test_numbers_neumann_holes():
    p = PerforationParams(3, ScalingLaw.power(2), ScalingLaw(0.0))
    nums = perforation_numbers(p, 0.1)
    assert nums.P_eps == 0.0 and nums.V_eps == 0.0


def test_numbers_fixed_radius_example():
    # d = eps^2 = 0.01 at eps = 0.1; by hand P = 0.4 pi, Q = 40 pi, V = 16 pi / 40.4
    p = PerforationParams.power_laws(3, 2, 0)
    nums = perforation_numbers(p, 0.1)
    assert nums.P_eps == pytest.approx(1.2566370614359172, rel=1e-12)
    assert nums.Q_eps == pytest.approx(125.66370614359172, rel=1e-12)
    assert nums.V_eps == pytest.approx(1.2441951103325913, rel=1e-12)
    assert nums.Lambda_eps == pytest.approx(0.1)


def test_numbers_two_dimensional_capacity():
    p = PerforationParams.power_laws(2, 2, 0)
    nums = perforation_numbers(p, 0.1)
    assert nums.Q_eps == pytest.approx(2 * PI / (math.log(100) * 0.01), rel=1e-13)
    assert nums.D_script == pytest.approx(1 / math.log(100))


def test_numbers_geometry_error():
    p = PerforationParams(3, ScalingLaw(0.6, 1, -1), ScalingLaw(1.0))
    # d = 0.6 eps / |ln eps| >= eps/2 when |ln eps| <= 1.2
    with pytest.raises(GeometryError):
        perforation_numbers(p, 0.5)


@pytest.mark.parametrize("eps", [0.0, 1.0, -0.1, 2.0])
def test_numbers_reject_eps(eps):
    with pytest.raises(DomainError):
        perforation_numbers(PerforationParams.power_laws(3, 2, 0), eps)


def test_params_require_vanishing_ratio():
    with pytest.raises(DomainError):
        PerforationParams.power_laws(3, 1, 0)
    with pytest.raises(DomainError):
        PerforationParams.power_laws(3, "0.9", 0)
    PerforationParams(3, ScalingLaw(0.1, 1, -1), ScalingLaw(1.0))  # eps/|ln eps| is fine


# --- limit_regime ------------------------------------------------------------

def test_limit_balanced_point():
    r = limit_regime(PerforationParams.power_laws(3, 3, -3))
    assert float(r.P) == pytest.approx(4 * PI)
    assert float(r.Q) == pytest.approx(4 * PI)
    assert r.V == pytest.approx(2 * PI)
    assert r.v_case is VCase.BOTH_POS and r.scenario is Scenario.HOMOGENIZED


def test_limit_p_zero():
    r = limit_regime(PerforationParams.power_laws(3, 2, 10))
    assert r.P.is_zero and r.V == 0.0 and r.v_case is VCase.EITHER_ZERO


def test_limit_vanishing():
    r = limit_regime(PerforationParams.power_laws(3, "1.1", -5))
    assert r.P.infinite and r.Q.infinite
    assert r.scenario is Scenario.VANISHING and r.V is None


def test_limit_log_factor_breaks_tie():
    # P_eps exponent zero, log power +1 -> infinite; -1 -> zero
    up = PerforationParams(3, ScalingLaw.power("3/2"), ScalingLaw(1.0, 0, 1))
    down = PerforationParams(3, ScalingLaw.power("3/2"), ScalingLaw(1.0, 0, -1))
    assert limit_regime(up).P.infinite
    assert limit_regime(down).P.is_zero


def test_limit_two_dimensional_q_infinite():
    r = limit_regime(PerforationParams.power_laws(2, "3/2", "1/2", 0.25, 4 / PI))
    assert r.Q.infinite
    assert float(r.P) == pytest.approx(2.0)
    assert r.V == pytest.approx(2.0) and r.v_case is VCase.P_POS_Q_INF


def test_exponent_snapping():
    a = PerforationParams.power_laws(5, 5 / 3, -5 / 3)
    b = PerforationParams.power_laws(5, "5/3", "-5/3")
    assert a.d_law.exponent == Fraction(5, 3)
    assert limit_regime(a).to_dict() == limit_regime(b).to_dict()


# --- validate_epsilon --------------------------------------------------------

def test_validate_admissible():
    assert validate_epsilon(PerforationParams.power_laws(3, 2, 0), 0.2) == []


def test_validate_lambda():
    # d = 0.5**1.1 also fails to fit the cell, so both conditions are reported
    bad = validate_epsilon(PerforationParams.power_laws(3, "1.1", 0), 0.5)
    assert Violation.LAMBDA in bad
    assert bad == [Violation.LAMBDA, Violation.HOLE_OUTSIDE_CELL]


def test_validate_lambda_only():
    bad = validate_epsilon(PerforationParams.power_laws(3, "1.1", 0, d_coef=0.3), 0.5)
    assert bad == [Violation.LAMBDA]


def test_validate_log_ratio():
    # Q > 0 read to include Q = inf in two dimensions
    p = PerforationParams.power_laws(2, "1.5", 0)
    assert Violation.LOG_RATIO in validate_epsilon(p, 0.3)


def test_validate_reject_eps():
    with pytest.raises(DomainError):
        validate_epsilon(PerforationParams.power_laws(3, 2, 0), 1.5)


# --- convergence_rates -------------------------------------------------------

def test_eta_three_dimensional_example():
    p = PerforationParams.power_laws(3, "1.5", 0)
    r = convergence_rates(p, 0.01, perforation_numbers(p, 0.01).V_eps)  # V_eps == V
    assert r.eta == pytest.approx(math.sqrt(0.1), rel=1e-12)


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_delta4_high_dimension(n):
    p = PerforationParams.power_laws(n, 2, 0)
    assert rates_for(p, 0.05).delta_4 == pytest.approx(0.05)


def test_delta4_two_dimensions():
    p = PerforationParams.power_laws(2, 2, 0)
    assert rates_for(p, 0.05).delta_4 == pytest.approx(0.05 * abs(math.log(0.05)))


def test_th5_vanishing_family():
    # coefficient 1 puts the hole outside its cell at eps = 0.1
    p = PerforationParams.power_laws(3, "1.1", -5, d_coef=0.25)
    nums = perforation_numbers(p, 0.1)
    r = rates_for(p, 0.1)
    assert r.th5_bound == pytest.approx(max(1 / nums.P_eps, 1 / nums.Q_eps, 0.01))
    assert r.eta is None and r.delta_1 is None


def test_rates_need_limit_potential():
    with pytest.raises(ContractError):
        convergence_rates(PerforationParams.power_laws(3, 2, 0), 0.1, None)


def test_eta_dprime_only_for_finite_p():
    p = PerforationParams.power_laws(3, 3, -4)  # P = inf, Q > 0
    assert rates_for(p, 0.1).eta_dprime is None


# --- figure2_region ----------------------------------------------------------

@pytest.mark.parametrize("s,t,region", [
    ("3/2", 0, Region.P_POS_Q_INF),
    (3, -3, Region.BOTH_POS),
    (2, 5, Region.EITHER_ZERO),
    ("1.1", -5, Region.BOTH_INF),
    (3, -4, Region.P_INF_Q_POS),
])
def test_figure2_examples(s, t, region):
    assert figure2_region(3, s, t) is region


def test_figure2_rejects():
    with pytest.raises(DomainError):
        figure2_region(3, 1, 0)
    with pytest.raises(DomainError):
        figure2_region(2, 2, 0)


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_example_v_table(n):
    kappa = sphere_area(n)
    dashed = limit_regime(PerforationParams.power_laws(n, Fraction(n, n - 1), 0))
    assert dashed.V == pytest.approx(kappa)
    ray = limit_regime(PerforationParams.power_laws(n, Fraction(n, n - 2), -Fraction(n, n - 2) - 1))
    assert ray.V == pytest.approx((n - 2) * kappa)
    point = limit_regime(PerforationParams.power_laws(n, Fraction(n, n - 2), -Fraction(n, n - 2)))
    assert point.V == pytest.approx(kappa * (n - 2) / (n - 1))


# --- params_from_mapping -----------------------------------------------------

def test_params_flat_and_nested():
    flat = {"n": 2, "d.coefficient": 0.25, "d.exponent": "3/2", "gamma.exponent": 0.5}
    nested = {"n": 2, "d": {"coefficient": 0.25, "exponent": "3/2"}, "gamma": {"exponent": "1/2"}}
    a, b = params_from_mapping(flat), params_from_mapping(nested)
    assert a == b
    assert a.d_law.exponent == Fraction(3, 2)


def test_params_missing_dimension():
    with pytest.raises(DomainError):
        params_from_mapping({"d": {"exponent": 2}})


# --- properties ---------------------------------------------------------------

exponents = st.fractions(min_value=Fraction(11, 10), max_value=4, max_denominator=12)
gammas = st.fractions(min_value=-6, max_value=6, max_denominator=12)
epsilons = st.floats(min_value=1e-4, max_value=0.2)
coefs = st.floats(min_value=0.05, max_value=5.0)


def _admissible(p, eps):
    try:
        return not validate_epsilon(p, eps)
    except (DomainError, GeometryError):
        return False


@settings(max_examples=200, deadline=None)
@given(n=st.integers(2, 6), s=exponents, t=gammas, eps=epsilons, c=coefs)
def test_v_dominated_by_p_and_q(n, s, t, eps, c):
    p = PerforationParams.power_laws(n, s, t, 0.5, c)
    if not _admissible(p, eps):
        return
    nums = perforation_numbers(p, eps)
    P, Q, V = nums.P_eps, nums.Q_eps, nums.V_eps
    assert V <= min(P, Q) * (1 + 1e-12)
    lhs = V / math.sqrt(Q)
    assert lhs <= min(math.sqrt(Q), P / math.sqrt(Q)) * (1 + 1e-12)


@settings(max_examples=200, deadline=None)
@given(n=st.integers(2, 6), s=exponents, t=gammas, eps=epsilons)
def test_eta_prime_dominates_eta(n, s, t, eps):
    p = PerforationParams.power_laws(n, s, t, 0.5)
    if not _admissible(p, eps):
        return
    r = rates_for(p, eps)
    if r.eta is not None:
        assert r.eta_prime >= r.eta


@settings(max_examples=100, deadline=None)
@given(n=st.integers(2, 6), s=exponents, t=gammas, eps=epsilons, lam=st.floats(0.1, 10.0))
def test_gamma_homogeneity(n, s, t, eps, lam):
    p1 = PerforationParams.power_laws(n, s, t, 0.5, 1.0)
    p2 = PerforationParams.power_laws(n, s, t, 0.5, lam)
    if not _admissible(p1, eps):
        return
    assert perforation_numbers(p2, eps).P_eps == pytest.approx(lam * perforation_numbers(p1, eps).P_eps, rel=1e-12)
    r1, r2 = limit_regime(p1), limit_regime(p2)
    if r1.v_case is VCase.P_POS_Q_INF:
        assert r2.V == pytest.approx(lam * r1.V, rel=1e-12)


@settings(max_examples=300, deadline=None)
@given(n=st.integers(3, 6), s=exponents, t=gammas)
def test_eta_tilde_comparable_to_eta_when_q_positive(n, s, t):
    p = PerforationParams.power_laws(n, s, t, 0.5)
    rep = limit_regime(p)
    if rep.scenario is Scenario.VANISHING or rep.Q.is_zero:
        return
    eps_values = [e for e in (1e-2, 5e-3, 2e-3, 1e-3) if _admissible(p, e)]
    if len(eps_values) < 2:
        return
    ratios = []
    for e in eps_values:
        r = rates_for(p, e)
        ratios.append(r.eta_tilde / r.eta)
    # the ratio stays inside a fixed band over the decade
    assert max(ratios) / min(ratios) <= 20.0


@settings(max_examples=200, deadline=None)
@given(n=st.integers(3, 6), s=exponents, t=gammas)
def test_region_agrees_with_limits(n, s, t):
    rep = limit_regime(PerforationParams.power_laws(n, s, t))
    assert figure2_region(n, s, t) is region_of_report(rep)
