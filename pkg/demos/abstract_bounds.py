"""
Finite-dimensional check of the abstract comparison theorems: for random
operator pairs the resolvent differences stay below 4*delta and 6*delta and
the spectra stay within the a-priori distance.

Run:  python demos/abstract_bounds.py
"""
from perfhom.quasiunitary import abstract_suite

for coupling in (1e-1, 1e-2, 1e-3):
    rows = abstract_suite(instances=100, max_dim=16, seed=1, coupling_scale=coupling)
    worst_l2 = max(r.l2_defect / (4 * r.delta) for r in rows)
    worst_h1 = max(r.h1_defect / (6 * r.delta) for r in rows)
    worst_spec = max(r.spectral_distance / r.spectral_bound for r in rows if r.spectral_bound > 0)
    print(f"coupling {coupling:g}: max delta {max(r.delta for r in rows):.2e}, "
          f"L2/(4 delta) <= {worst_l2:.3f}, H1/(6 delta) <= {worst_h1:.3f}, "
          f"spectral distance / bound <= {worst_spec:.3f}, all pass: {all(r.passed for r in rows)}")
