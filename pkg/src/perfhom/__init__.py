"""Homogenization of the Robin Laplacian in periodically perforated domains.

Regime classification and rate formulas (:mod:`perfhom.regime`), explicit
correctors (:mod:`perfhom.corrector`), the finite-dimensional resolvent and
spectral bounds (:mod:`perfhom.quasiunitary`), a 2-D P1 finite element solver
(:mod:`perfhom.femlab`) and eps-sweep orchestration (:mod:`perfhom.harness`).
"""
from .regime import (
    PerforationParams,
    ScalingLaw,
    convergence_rates,
    figure2_region,
    limit_regime,
    perforation_numbers,
    rates_for,
    sphere_area,
    validate_epsilon,
)

__version__ = "0.1.0"
