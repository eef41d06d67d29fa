"""Two atoms, one splitter: the coincidence null and how it fills in.

Run with ``python3 demos/01_hom_null.py``.
"""

import numpy as np

from atomhom import correlators, fock
from atomhom.fock import BeamSplitterSpec

pair = fock.make_input_state({"a": 1, "b": 1}, 2)

print("|1,1> through a balanced splitter, coincidence probability vs splitter phase")
for phi in np.linspace(0, 2 * np.pi, 5)[:-1]:
    out = fock.apply_beam_splitter(pair, BeamSplitterSpec(0.5, phi))
    print(f"  phi = {phi:4.2f}   P(1,1) = {fock.coincidence_probability(out):.1e}")

print("\nOutput number distribution at phi = 0:")
for (c, d), p in sorted(fock.port_distribution(fock.apply_beam_splitter(pair, BeamSplitterSpec())).items()):
    print(f"  (n_c, n_d) = ({c}, {d})   {p:.3f}")

print("\nMaking the packets distinguishable restores coincidences as (1 - O^2) / 2:")
for o, g in correlators.coincidence_vs_overlap(pair, [0.0, 0.25, 0.5, 0.75, 1.0], n_phases=4):
    print(f"  overlap {o:4.2f}   <N_c N_d> = {g:.4f}")

print("\nA slightly unbalanced splitter (T = 0.49) leaves a small residue:")
out = fock.hom_output(1, 1, 1.0, 0.49)
print(f"  P(1,1) = {fock.coincidence_probability(out):.2e}")
