"""Bigger integration volumes mix in more modes and wash the dip out."""

from atomhom import estimators, experiment
from atomhom.config import ScenarioConfig

cfg = ScenarioConfig.default()
batches = experiment.run_dip_scan(cfg.source, cfg.schedule, cfg.detector,
                                  cfg.scan.tau_grid, cfg.scan.shots_per_tau, cfg.run_seed)
sizes = [0.3, 0.6, 1.2, 2.0]
vc, vd = cfg.volumes["c"], cfg.volumes["d"]
fits = estimators.scan_visibility_vs_volume(batches, "z", sizes, vc, vd)

print(" dv_z (cm/s)   V fitted          V model")
for p in fits:
    c, d = vc.resized("z", p.size), vd.resized("z", p.size)
    bg = estimators.expected_moments(cfg.source, cfg.schedule, cfg.detector, c, d, 0.0)
    dip = estimators.expected_moments(cfg.source, cfg.schedule, cfg.detector, c, d, 1.0)
    print(f"   {p.size:4.1f}        {p.visibility:.3f} +/- {p.error:.3f}   "
          f"{1 - dip.g2_cd / bg.g2_cd:.3f}")
