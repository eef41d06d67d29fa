"""Detector efficiency and incident atom numbers from count statistics."""

import numpy as np

from atomhom import estimators

rng = np.random.default_rng(5)
eta = 0.25

# perfect twins: equal numbers on both sides, then independent detection
n = rng.poisson(2.0, 100_000)
n_a, n_b = rng.binomial(n, eta), rng.binomial(n, eta)
print(f"normalized difference variance {1 - estimators.eta_from_counts(n_a, n_b):.3f} "
      f"-> eta = {estimators.eta_from_counts(n_a, n_b):.3f}")

for lam in (0.5, 0.8):
    detected = rng.binomial(rng.poisson(lam, 100_000), eta)
    f = estimators.fit_incident_poisson(estimators.histogram_of(detected), eta)
    print(f"incident mean {lam}: fitted {f.mean_incident:.3f}, P(2)/P(1) = {f.ratio:.3f}")
