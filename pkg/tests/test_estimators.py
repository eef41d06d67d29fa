import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import curve_fit

from atomhom import estimators as es
from atomhom import experiment as ex
from atomhom.errors import DegenerateFitError, FitError, GeometryError, InputError
from atomhom.estimators import CorrelationEstimate, IntegrationVolume, PairMoments

VA = IntegrationVolume((0.0, 0.0, 12.1))
VB = IntegrationVolume((0.0, 0.0, 7.0))


def shots_from_counts(na, nb, tau=0.0):
    out = []
    for i, (x, y) in enumerate(zip(na, nb)):
        ev = np.vstack([np.tile(VA.center, (int(x), 1)), np.tile(VB.center, (int(y), 1))])
        out.append(ex.ShotEvents(i, ev, 0.0, tau))
    return out


# -- correlation estimates ------------------------------------------------------------


def test_one_count_each():
    e = es.estimate_g2_cross(shots_from_counts([1] * 5, [1] * 5), VA, VB)
    assert (e.value, e.std_error, e.shots, e.mean_counts) == (1.0, 0.0, 5, (1.0, 1.0))


def test_independent_poisson_product():
    rng = np.random.default_rng(1)
    n = 100_000
    e = es.estimate_g2_cross(shots_from_counts(rng.poisson(0.2, n), rng.poisson(0.19, n)), VA, VB)
    assert abs(e.value - 0.038) < 4 * e.std_error


def test_auto_examples():
    assert es.estimate_g2_auto(shots_from_counts([0, 1, 1, 0], [0] * 4), VA).value == 0.0
    assert es.estimate_g2_auto(shots_from_counts([2] * 4, [0] * 4), VA).value == 2.0


def test_geometry_and_input_errors():
    with pytest.raises(GeometryError):
        es.estimate_g2_cross(shots_from_counts([1], [1]), VA, VA)
    with pytest.raises(InputError):
        es.estimate_g2_cross([], VA, VB)
    with pytest.raises(InputError):
        es.estimate_g2_auto([], VA)
    with pytest.raises(GeometryError):
        IntegrationVolume((0, 0, 0), dv_z=0.0)


def test_error_shrinks_like_inverse_sqrt():
    # twin counts: N_a = N_b = Poisson(0.5), so <N_a N_b> = 0.25 + 0.5
    rng = np.random.default_rng(2)
    errs = []
    for n in (1_000, 10_000, 100_000):
        k = rng.poisson(0.5, n)
        e = es.estimate_g2_cross(shots_from_counts(k, k), VA, VB)
        assert abs(e.value - 0.75) < 4 * e.std_error
        errs.append(e.std_error)
    for a, b in zip(errs, errs[1:]):
        assert a / b == pytest.approx(math.sqrt(10), rel=0.2)


def test_ensemble_std_is_unscaled_error():
    e = CorrelationEstimate(0.1, 0.01, 400, (0, 0))
    assert e.ensemble_std == pytest.approx(0.2)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)), min_size=1, max_size=40),
       st.data())
def test_merge_equals_single_pass(pairs, data):
    x = [p[0] for p in pairs]
    y = [p[1] for p in pairs]
    z = [a * b for a, b in pairs]
    whole = PairMoments.from_counts(x, y, z)
    cuts = sorted(data.draw(st.lists(st.integers(0, len(pairs)), max_size=4)))
    bounds = [0, *cuts, len(pairs)]
    parts = [PairMoments.from_counts(x[i:j], y[i:j], z[i:j]) for i, j in zip(bounds, bounds[1:])]
    left = PairMoments()
    for p in parts:
        left = left + p
    right = PairMoments()
    for p in reversed(parts):
        right = p + right
    assert left == whole == right
    assert left.estimate() == whole.estimate()


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 2.0), st.floats(0.0, 2.0), st.floats(0.05, 2.0), st.floats(0.0, 2.0))
def test_enlarging_volume_never_loses_counts(dz, extra_z, dp, extra_p):
    rng = np.random.default_rng(3)
    v = rng.normal(0, 1, (500, 3))
    small = IntegrationVolume((0, 0, 0), dz, dp)
    big = IntegrationVolume((0, 0, 0), dz + extra_z, dp + extra_p)
    assert big.count(v) >= small.count(v)
    assert np.all(big.contains(v) | ~small.contains(v))


def test_half_open_boundaries():
    left = IntegrationVolume((0, 0, 0.0), dv_z=1.0, dv_perp=1.0)
    right = IntegrationVolume((0, 0, 1.0), dv_z=1.0, dv_perp=1.0)
    edge = np.array([[0.0, 0.0, 0.5]])
    assert left.count(edge) + right.count(edge) == 1
    assert not left.overlaps(right)


def test_quantized_window_matches_brute_force():
    det = ex.DetectorSpec()
    v = IntegrationVolume((0.0, 0.0, 12.1))
    lo, hi = es._effective_bounds(v, det)
    pts = np.random.default_rng(4).uniform(-1, 1, (20_000, 3)) + np.array(v.center)
    inside_q = v.contains(det.quantize(pts))
    inside_eff = np.all((pts >= lo) & (pts < hi), axis=1)
    assert np.array_equal(inside_q, inside_eff)


# -- dip fit ----------------------------------------------------------------------------

TRUE = (0.05, 0.65, 550.0, 64.0)
GRID = np.arange(350.0, 751.0, 50.0)


def test_noiseless_recovery():
    y = es.dip_model(GRID, *TRUE)
    fit = es.fit_dip(list(zip(GRID, y)))
    np.testing.assert_allclose(fit.params(), TRUE, rtol=1e-6)
    assert not fit.clamped


def test_noiseless_recovery_with_errors():
    y = es.dip_model(GRID, *TRUE)
    pts = [(t, CorrelationEstimate(v, 0.002, 1000, (0, 0))) for t, v in zip(GRID, y)]
    np.testing.assert_allclose(es.fit_dip(pts).params(), TRUE, rtol=1e-6)


def _noisy_points(seed):
    rng = np.random.default_rng(seed)
    err = np.full(len(GRID), 0.003)
    y = es.dip_model(GRID, *TRUE) + rng.normal(0, err)
    return [(t, CorrelationEstimate(v, e, 2000, (0, 0))) for t, v, e in zip(GRID, y, err)], y, err


def test_fit_idempotence():
    pts, _, err = _noisy_points(5)
    fit = es.fit_dip(pts)
    again = [(t, CorrelationEstimate(v, e, 2000, (0, 0)))
             for t, v, e in zip(GRID, es.dip_model(GRID, *fit.params()), err)]
    np.testing.assert_allclose(es.fit_dip(again).params(), fit.params(), rtol=1e-9)


def test_agrees_with_scipy():
    pts, y, err = _noisy_points(6)
    fit = es.fit_dip(pts)
    ref, cov = curve_fit(es.dip_model, GRID, y, p0=fit.params(), sigma=err, absolute_sigma=True)
    np.testing.assert_allclose(fit.params(), ref, rtol=1e-5)
    for name, s in zip(es.PARAM_NAMES, np.sqrt(np.diag(cov))):
        assert fit.error(name) == pytest.approx(s, rel=1e-3)


def test_fit_preconditions():
    with pytest.raises(InputError):
        es.fit_dip(list(zip(GRID[:4], es.dip_model(GRID[:4], *TRUE))))


def test_fit_failure_carries_last_iterate():
    pts, _, _ = _noisy_points(7)
    with pytest.raises(FitError) as exc:
        es.fit_dip(pts, max_iter=1)
    assert exc.value.last is not None and len(exc.value.last) == 4


def test_overdeep_dip_is_clamped():
    y = es.dip_model(GRID, 0.05, 1.3, 550.0, 60.0)
    fit = es.fit_dip(list(zip(GRID, y)))
    assert fit.clamped and fit.visibility == 1.0


def test_fit_report_fields():
    d = es.fit_dip(list(zip(GRID, es.dip_model(GRID, *TRUE)))).to_dict()
    assert {"g2_bg", "visibility", "tau0_us", "sigma_us", "fwhm_us", "confidence_68"} <= d.keys()


# -- scans on the default scenario -------------------------------------------------------


def test_single_size_matches_default_fit(reference_scan):
    cfg = reference_scan["cfg"]
    vc, vd = cfg.volumes["c"], cfg.volumes["d"]
    [p] = es.scan_visibility_vs_volume(reference_scan["batches"], "z", [vc.dv_z], vc, vd)
    assert p.visibility == pytest.approx(reference_scan["fit"].visibility, abs=1e-12)


def test_wide_volume_loses_visibility(reference_scan):
    cfg = reference_scan["cfg"]
    vc, vd = cfg.volumes["c"], cfg.volumes["d"]
    small, wide, huge = es.scan_visibility_vs_volume(reference_scan["batches"], "z", [0.3, 2.0, 3.0], vc, vd)
    assert small.visibility - wide.visibility > 2 * math.hypot(small.error, wide.error)
    # at 3 cm/s the fit is loose; it must still agree with the model, which sits far below
    model = [es.expected_moments(cfg.source, cfg.schedule, cfg.detector,
                                 vc.resized("z", 3.0), vd.resized("z", 3.0), o).g2_cd for o in (0.0, 1.0)]
    v_model = 1 - model[1] / model[0]
    assert v_model < 0.5 * small.visibility
    assert abs(huge.visibility - v_model) < 2 * huge.error


def test_volume_scan_preconditions(reference_scan):
    with pytest.raises(InputError):
        es.scan_visibility_vs_volume(reference_scan["batches"], "z", [])
    with pytest.raises(InputError):
        es.scan_visibility_vs_volume(reference_scan["batches"], "z", [0.6, 0.3])
    with pytest.raises(InputError):
        es.scan_visibility_vs_volume(reference_scan["batches"], "x", [0.3])


def test_source_moments_without_interferometer():
    # the twin source seen directly in the input volumes
    src, sched, det = ex.reference_scenario()
    sched = ex.PulseSchedule(overlap_offset_us=50.0, apply_mirror=False, apply_splitter=False)
    shots = ex.run_dip_scan(src, sched, det, [0.0], 10_000, 41)[0]
    ab = es.estimate_g2_cross(shots, VA, VB)
    aa = es.estimate_g2_auto(shots, VA)
    model = es.expected_moments(src, sched, det, VA, VB, 1.0)
    # same simulation, closed form
    assert abs(ab.value - model.g2_cd) < 4 * ab.std_error
    assert abs(ab.mean_counts[0] - 0.125) < 0.01
    assert abs(ab.mean_counts[1] - 0.200) < 0.01
    # measured values with their quoted uncertainties
    assert abs(ab.value - 0.048) < 3 * math.hypot(ab.std_error, 0.007)
    assert abs(aa.value - 0.016) < 3 * math.hypot(aa.std_error, 0.005)


# -- calibration -------------------------------------------------------------------------


def test_eta_from_normalized_variance():
    # Var(N_a - N_b) = 0.75 * (<N_a> + <N_b>)
    na = np.array([0, 0, 1, 1, 2, 2, 1, 1])
    nb = np.array([0, 1, 1, 0, 2, 1, 1, 2])
    var = np.var(na - nb, ddof=1)
    assert es.eta_from_counts(na, nb) == pytest.approx(1 - var / (na.mean() + nb.mean()))


def test_perfect_twins_thinned():
    rng = np.random.default_rng(8)
    n = rng.poisson(4.0, 100_000)
    na, nb = rng.binomial(n, 0.25), rng.binomial(n, 0.25)
    assert es.eta_from_counts(na, nb) == pytest.approx(0.25, abs=0.02)


def test_uncorrelated_beams_floor():
    rng = np.random.default_rng(9)
    assert abs(es.eta_from_counts(rng.poisson(1, 100_000), rng.poisson(1, 100_000))) < 0.02


def test_eta_needs_counts():
    with pytest.raises(InputError):
        es.eta_from_counts([0, 0], [0, 0])


def test_eta_from_shots_uses_volumes():
    rng = np.random.default_rng(10)
    n = rng.poisson(2.0, 20_000)
    shots = shots_from_counts(rng.binomial(n, 0.5), rng.binomial(n, 0.5))
    assert es.estimate_eta_from_variance(shots, VA, VB) == pytest.approx(0.5, abs=0.03)


@pytest.mark.parametrize("hist,lam,ratio", [({0: 7, 1: 1}, 0.5, 0.25), ({0: 4, 1: 1}, 0.8, 0.40)])
def test_incident_poisson(hist, lam, ratio):
    f = es.fit_incident_poisson(hist, 0.25)
    assert f.mean_incident == pytest.approx(lam)
    assert f.ratio == pytest.approx(ratio)
    assert f.p1 == pytest.approx(lam * math.exp(-lam))
    assert f.p2 / f.p1 == pytest.approx(ratio)
    assert not f.degenerate


def test_incident_poisson_degenerate():
    assert es.fit_incident_poisson([100], 1.0).degenerate
    with pytest.raises(DegenerateFitError):
        es.fit_incident_poisson([0, 0, 0], 1.0)
    with pytest.raises(DegenerateFitError):
        es.fit_incident_poisson({}, 1.0)
    with pytest.raises(InputError):
        es.fit_incident_poisson([1], 0.0)


# -- exports -----------------------------------------------------------------------------


def test_csv_exports(tmp_path, reference_scan):
    pts = reference_scan["points"]
    es.write_dip_csv(tmp_path / "dip.csv", pts)
    es.write_stability_csv(tmp_path / "stab.csv", pts)
    with open(tmp_path / "dip.csv") as f:
        rows = list(csv.reader(f))
    assert tuple(rows[0]) == es.DIP_COLUMNS and len(rows) == len(pts) + 1
    back = es.read_dip_csv(tmp_path / "dip.csv")
    assert [t for t, _ in back] == [p.tau_us for p in pts]
    assert [e.value for _, e in back] == [p.g2.value for p in pts]
    with open(tmp_path / "stab.csv") as f:
        assert tuple(next(csv.reader(f))) == es.STABILITY_COLUMNS
