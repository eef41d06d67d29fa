"""Command line entry point: ``atomhom predict | simulate | analyze``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 fit error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import correlators, estimators, events_io, experiment
from .config import ScenarioConfig, config_from_dict, load_config
from .errors import (AtomHomError, ConfigError, DegenerateFitError, FitError, GeometryError,
                     InputError, UndefinedVisibilityError)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_FIT = 0, 2, 3, 4

log = logging.getLogger("atomhom")

TMSV_CURVE_N = (0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0)
OVERLAPS = (0.0, 0.25, 0.5, 0.75, 1.0)


def _config(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig.default()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


# -- predict --------------------------------------------------------------------------------


def predict_report(cfg: ScenarioConfig) -> dict:
    src, sched = cfg.source, cfg.schedule
    dist = experiment.central_mode_distribution(src, sched.raman_survival)
    r = np.arange(dist.shape[0])
    pa, pb = dist.sum(axis=1), dist.sum(axis=0)
    moments = correlators.InputMoments(float(r * (r - 1) @ pa), float(r * (r - 1) @ pb),
                                       float(r @ dist @ r))
    mean_a, mean_b = float(r @ pa), float(r @ pb)
    bound = correlators.visibility_bound(moments)

    t = sched.splitter_transmittance
    curve = []
    mass = 1.0
    for o in OVERLAPS:
        g, mass = experiment.exact_mode_coincidence(dist, o, t)
        curve.append({"overlap": o, "g2_cd": g})
    exact_v = 1.0 - curve[-1]["g2_cd"] / curve[0]["g2_cd"] if curve[0]["g2_cd"] > 0 else None

    vc, vd = cfg.volumes["c"], cfg.volumes["d"]
    det = cfg.detector
    bg = estimators.expected_moments(src, sched, det, vc, vd, 0.0)
    dip = estimators.expected_moments(src, sched, det, vc, vd, 1.0)

    classical = (correlators.classical_dip_limit(mean_a, mean_b)
                 if mean_a + mean_b > 0 else None)
    return {
        "central_mode": {
            "family": src.family,
            "mean_a": mean_a, "mean_b": mean_b,
            "g2_aa": moments.g2_aa, "g2_bb": moments.g2_bb, "g2_ab": moments.g2_ab,
            "cauchy_schwarz_classical": correlators.cauchy_schwarz_check(moments),
        },
        "visibility_bound": {"v_max": bound.v_max, "g2_dip": bound.g2_dip,
                             "g2_background": bound.g2_background},
        "exact_splitter": {"transmittance": t, "retained_mass": mass,
                           "coincidence_vs_overlap": curve, "visibility": exact_v},
        "detected_in_volumes": {"g2_background": bg.g2_cd, "g2_dip": dip.g2_cd,
                                "visibility": 1.0 - dip.g2_cd / bg.g2_cd if bg.g2_cd > 0 else None,
                                "n_c": bg.n_c, "n_d": bg.n_d},
        "tmsv_curve": [{"mean_n": n, "v_max": correlators.tmsv_visibility(n)}
                       for n in TMSV_CURVE_N],
        "classical_bound": {"v_max": classical, "ceiling": 0.5},
    }


def _print_predict(rep: dict) -> None:
    cm, vb, ex = rep["central_mode"], rep["visibility_bound"], rep["exact_splitter"]
    print(f"source family        {cm['family']}")
    print(f"central-mode means   a={cm['mean_a']:.4f}  b={cm['mean_b']:.4f}")
    print(f"moments              G_aa={cm['g2_aa']:.4f}  G_bb={cm['g2_bb']:.4f}  G_ab={cm['g2_ab']:.4f}")
    print(f"visibility bound     {vb['v_max']:.4f}")
    print(f"classical bound      {rep['classical_bound']['v_max']}")
    print(f"exact splitter T={ex['transmittance']}:")
    for row in ex["coincidence_vs_overlap"]:
        print(f"  overlap {row['overlap']:.2f}   <n_c n_d> = {row['g2_cd']:.5f}")
    det = rep["detected_in_volumes"]
    print(f"detected in volumes  bg={det['g2_background']:.5f}  dip={det['g2_dip']:.5f}  "
          f"V={det['visibility']}")
    print("tmsv bound           " + "  ".join(f"n={r['mean_n']}:{r['v_max']:.3f}"
                                               for r in rep["tmsv_curve"]))


def cmd_predict(args) -> int:
    cfg = _config(args)
    try:
        rep = predict_report(cfg)
        if args.moments:
            m = correlators.InputMoments(*args.moments)
            b = correlators.visibility_bound(m)
            rep["given_moments"] = {"g2_aa": m.g2_aa, "g2_bb": m.g2_bb, "g2_ab": m.g2_ab,
                                    "v_max": b.v_max,
                                    "cauchy_schwarz_classical": correlators.cauchy_schwarz_check(m)}
    except UndefinedVisibilityError as exc:
        raise ConfigError(f"no correlations to bound: {exc}") from None
    _print_predict(rep)
    if "given_moments" in rep:
        g = rep["given_moments"]
        print(f"given moments        V_max = {g['v_max']:.4f}  "
              f"(classical-admissible: {g['cauchy_schwarz_classical']})")
    if args.out:
        estimators.write_json_report(args.out, rep, cfg.config_hash())
    return EXIT_OK


# -- simulate -------------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = _config(args)
    if not args.out:
        raise ConfigError("simulate needs --out")
    batches = experiment.run_dip_scan(cfg.source, cfg.schedule, cfg.detector,
                                      cfg.scan.tau_grid, cfg.scan.shots_per_tau,
                                      cfg.run_seed, workers=args.workers)
    shots = [s for b in batches for s in b]
    resampled = sum(s.resampled for s in shots)
    meta = {"config_hash": cfg.config_hash(), "seed": cfg.run_seed, "config": cfg.to_dict(),
            "resampled_modes": resampled}
    n = events_io.write_events(args.out, shots, meta)
    n_events = sum(len(s) for s in shots)
    print(f"wrote {n} shots ({n_events} atoms) to {args.out}; seed {cfg.run_seed}; "
          f"config {cfg.config_hash()}; resampled modes {resampled}")
    return EXIT_OK


# -- analyze --------------------------------------------------------------------------------


def _analysis_config(args) -> ScenarioConfig:
    if args.config:
        return _config(args)
    meta = events_io.read_meta(args.events) if not str(args.events).endswith(".csv") else None
    if meta and "config" in meta:
        return config_from_dict(meta["config"])
    return ScenarioConfig.default()


def cmd_analyze(args) -> int:
    cfg = _analysis_config(args)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    vc, vd = cfg.volumes["c"], cfg.volumes["d"]
    path = str(args.events)

    if path.endswith(".csv"):
        try:
            table = estimators.read_dip_csv(path)
        except (OSError, KeyError, ValueError) as exc:
            raise InputError(f"cannot read dip table {path}: {exc}") from None
        if args.volume_scan:
            raise InputError("--volume-scan needs an event file, not a dip table")
        fit = estimators.fit_dip(table)
    else:
        try:
            shots, problems = events_io.read_events(path)
        except OSError as exc:
            raise InputError(f"cannot read {path}: {exc.strerror}") from None
        if problems:
            print(f"skipped {len(problems)} malformed line(s): "
                  + ", ".join(str(n) for n, _ in problems[:10]), file=sys.stderr)
        points = estimators.dip_scan(shots, vc, vd)
        fit = estimators.fit_dip_scan(points)
        estimators.write_dip_csv(out / "dip_scan.csv", points)
        estimators.write_stability_csv(out / "stability.csv", points)
        if args.volume_scan:
            vs = estimators.scan_visibility_vs_volume(shots, cfg.volume_scan.axis,
                                                      cfg.volume_scan.sizes, vc, vd)
            estimators.write_volume_csv(out / "volume_scan.csv", vs)
            for p in vs:
                print(f"volume {cfg.volume_scan.axis}={p.size:g}  V = {p.visibility:.3f} +/- {p.error:.3f}")

    estimators.write_json_report(out / "dip_fit.json", fit.to_dict(), cfg.config_hash())
    print(f"V = {fit.visibility:.4f} +/- {fit.error('visibility'):.4f}")
    print(f"tau0 = {fit.tau0_us:.1f} +/- {fit.error('tau0_us'):.1f} us;  "
          f"FWHM = {fit.fwhm_us:.1f} us;  background = {fit.g2_bg:.5f}")
    if fit.clamped:
        print("warning: visibility clamped to [0, 1]", file=sys.stderr)
    return EXIT_OK


# -- entry ----------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML scenario file")
    common.add_argument("--show-defaults", action="store_true",
                        help="print the effective configuration as YAML and exit")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="atomhom", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("predict", parents=[common], help="analytic and exact predictions")
    pr.add_argument("--out", help="write the report as JSON")
    pr.add_argument("--moments", nargs=3, type=float, metavar=("G_AA", "G_BB", "G_AB"),
                    help="also bound the visibility for these measured moments")
    pr.set_defaults(func=cmd_predict)

    sm = sub.add_parser("simulate", parents=[common], help="Monte Carlo delay scan")
    sm.add_argument("--out", help="event file (JSON lines)")
    sm.add_argument("--seed", type=int, help="override run_seed")
    sm.add_argument("--workers", type=int, default=1)
    sm.set_defaults(func=cmd_simulate)

    an = sub.add_parser("analyze", parents=[common], help="fit the dip in an event file")
    an.add_argument("events", help="event file, or a dip table ending in .csv")
    an.add_argument("--out", help="output directory (default: current)")
    an.add_argument("--volume-scan", action="store_true",
                    help="also refit with resized volumes")
    an.set_defaults(func=cmd_analyze)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.show_defaults:
            print(_config(args).to_yaml(), end="")
            return EXIT_OK
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FitError, DegenerateFitError) as exc:
        print(f"fit error: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (InputError, GeometryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except AtomHomError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
