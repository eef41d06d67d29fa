"""Which input statistics allow a deep dip?

The best achievable visibility depends only on the normally ordered auto and
cross correlations of the two inputs.
"""

from atomhom import correlators
from atomhom.correlators import InputMoments

measured = InputMoments(g2_aa=0.016, g2_bb=0.047, g2_ab=0.048)
b = correlators.visibility_bound(measured)
print(f"moments (0.016, 0.047, 0.048): V_max = {b.v_max:.4f}")
print(f"  Cauchy-Schwarz classical? {correlators.cauchy_schwarz_check(measured)}")

print("\nTwo-mode squeezed vacuum:")
for n in (0.01, 0.1, 0.5, 1.0, 5.0):
    print(f"  <n> = {n:5.2f}   V_max = {correlators.tmsv_visibility(n):.4f}")

print("\nClassical waves with random relative phase never beat one half:")
for ia, ib in ((1, 1), (1, 0.25), (1, 0.01)):
    v = correlators.classical_wave_dip(ia, ib, 4096)
    print(f"  I_a = {ia}, I_b = {ib:<5}  V = {v:.4f}")
