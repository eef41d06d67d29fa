"""Simulate a delay scan at the default operating point and fit the dip."""

import time

from atomhom import estimators, experiment
from atomhom.config import ScenarioConfig

cfg = ScenarioConfig.default()
print(f"config {cfg.config_hash()}, seed {cfg.run_seed}, "
      f"{cfg.scan.shots_per_tau} shots at {len(cfg.scan.tau_grid)} delays")

t0 = time.perf_counter()
batches = experiment.run_dip_scan(cfg.source, cfg.schedule, cfg.detector,
                                  cfg.scan.tau_grid, cfg.scan.shots_per_tau, cfg.run_seed)
print(f"simulated in {time.perf_counter() - t0:.1f} s\n")

points = estimators.dip_scan(batches, cfg.volumes["c"], cfg.volumes["d"])
print(" tau (us)    G_cd      +/-      <n_c>   <n_d>")
for p in points:
    print(f"  {p.tau_us:5.0f}   {p.g2.value:.4f}   {p.g2.std_error:.4f}   "
          f"{p.n_c_mean:.3f}   {p.n_d_mean:.3f}")

fit = estimators.fit_dip_scan(points)
print(f"\nV = {fit.visibility:.3f} +/- {fit.error('visibility'):.3f}")
print(f"tau0 = {fit.tau0_us:.1f} us, FWHM = {fit.fwhm_us:.1f} us")

src, sched, det = cfg.source, cfg.schedule, cfg.detector
bg = estimators.expected_moments(src, sched, det, cfg.volumes["c"], cfg.volumes["d"], 0.0)
dip = estimators.expected_moments(src, sched, det, cfg.volumes["c"], cfg.volumes["d"], 1.0)
print(f"model expectation: V = {1 - dip.g2_cd / bg.g2_cd:.3f}, "
      f"dip centre {sched.mirror_delay:.0f} us, "
      f"FWHM {experiment.dip_fwhm(src.coherence_sigma_t):.1f} us")
