"""
The corrector is built from scaled fundamental solutions.  On every hole
boundary it satisfies the Robin condition exactly, its flux equals
V_eps eps^n and its size there is P/(P+Q).  This script checks all three on
the default parameter grid and shows one profile in detail.

Run:  python demos/corrector_identities.py
"""
import numpy as np

from perfhom import PerforationParams
from perfhom.corrector import CorrectorField, Lattice, eval_corrector, run_identity_suite

rows = run_identity_suite()
print(f"{len(rows)} (n, s, t, eps) tuples, {sum(r.passed for r in rows)} pass")
print("worst Robin residual / gamma:", max(r.robin_residual / r.gamma for r in rows if r.gamma > 0))
print("worst flux relative error:   ", max(r.flux_rel_error for r in rows))

# a radial slice through one cell of the 2-D family used by the FEM sweeps
params = PerforationParams.power_laws(2, "3/2", "1/2", 0.25, 4 / np.pi)
eps = 0.25
field = CorrectorField(params, eps)
lattice = Lattice.unit_square_tiling(eps)
center = lattice.center((1, 1))
r = np.linspace(field.d, eps / 2, 9)
G, _ = eval_corrector(field, lattice, center + np.stack([r, 0 * r], axis=1))
print(f"\nhole radius {field.d:.4f}, P/(P+Q) = {field.numbers.P_eps / (field.numbers.P_eps + field.numbers.Q_eps):.5f}")
for ri, gi in zip(r, G):
    print(f"  r = {ri:.4f}   G = {gi: .6f}")
