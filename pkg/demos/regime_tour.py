"""
Walk through the parameter algebra: classify a few hole/coupling families,
then watch the rate functions shrink along an eps sweep.

Run:  python demos/regime_tour.py
"""
from perfhom import PerforationParams, figure2_region, limit_regime, perforation_numbers, rates_for

# d_eps = eps^s, gamma_eps = eps^t in three dimensions
families = {
    "dashed interval (s=3/2, t=0)": ("3/2", 0),
    "balanced point (s=3, t=-3)": (3, -3),
    "strong coupling ray (s=3, t=-5)": (3, -5),
    "Neumann-like (s=2, t=5)": (2, 5),
    "vanishing (s=1.1, t=-5)": ("1.1", -5),
}

print(f"{'family':34s} {'region':18s} {'P':>8s} {'Q':>8s} {'V':>8s}")
for name, (s, t) in families.items():
    rep = limit_regime(PerforationParams.power_laws(3, s, t))
    V = "-" if rep.V is None else f"{rep.V:.4f}"
    print(f"{name:34s} {figure2_region(3, s, t).value:18s} "
          f"{str(rep.P.to_json())[:8]:>8s} {str(rep.Q.to_json())[:8]:>8s} {V:>8s}")

# rates along a sweep for the dashed-interval family
params = PerforationParams.power_laws(3, "3/2", 0)
print("\neps        P_eps     V_eps     eta       eta'      eta~")
for eps in (1e-1, 1e-2, 1e-3, 1e-4):
    nums = perforation_numbers(params, eps)
    r = rates_for(params, eps)
    print(f"{eps:<10g} {nums.P_eps:<9.4f} {nums.V_eps:<9.4f} {r.eta:<9.4f} {r.eta_prime:<9.4f} {r.eta_tilde:<9.4f}")
