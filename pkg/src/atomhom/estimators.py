"""Correlation, visibility and calibration estimators over event records.

Counts inside an :class:`IntegrationVolume` are volume-integrated detected
numbers, so the correlators below are the normally ordered moments in detected
units; no density prefactor is applied.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DegenerateFitError, FitError, GeometryError, InputError
from .experiment import DetectorSpec, PulseSchedule, ShotEvents, SourceSpec, mode_grid

DEFAULT_DV_Z = 0.3
DEFAULT_DV_PERP = 0.5


@dataclass(frozen=True)
class IntegrationVolume:
    """Half-open velocity box ``[c - dv/2, c + dv/2)`` on each axis (cm/s)."""

    center: tuple[float, float, float]
    dv_z: float = DEFAULT_DV_Z
    dv_perp: float = DEFAULT_DV_PERP

    def __post_init__(self):
        if self.dv_z <= 0 or self.dv_perp <= 0:
            raise GeometryError("volume extents must be > 0")
        object.__setattr__(self, "center", tuple(float(x) for x in self.center))

    @property
    def half_widths(self) -> np.ndarray:
        return np.array([self.dv_perp, self.dv_perp, self.dv_z]) / 2.0

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center)
        return c - self.half_widths, c + self.half_widths

    def contains(self, v: np.ndarray) -> np.ndarray:
        lo, hi = self.bounds()
        v = np.asarray(v, dtype=float).reshape(-1, 3)
        return np.all((v >= lo) & (v < hi), axis=1)

    def count(self, v: np.ndarray) -> int:
        return int(self.contains(v).sum())

    def overlaps(self, other: "IntegrationVolume") -> bool:
        lo1, hi1 = self.bounds()
        lo2, hi2 = other.bounds()
        return bool(np.all((lo1 < hi2) & (lo2 < hi1)))

    def resized(self, axis: str, size: float) -> "IntegrationVolume":
        if axis == "z":
            return IntegrationVolume(self.center, size, self.dv_perp)
        if axis == "perp":
            return IntegrationVolume(self.center, self.dv_z, size)
        raise InputError(f"axis must be 'z' or 'perp', got {axis!r}")


def default_volumes(source: SourceSpec | None = None, dv_z: float = DEFAULT_DV_Z,
                    dv_perp: float = DEFAULT_DV_PERP) -> dict[str, IntegrationVolume]:
    """Volumes centred on the beams: a and c share beam a's velocity, b and d beam b's."""
    source = source or SourceSpec()
    va = IntegrationVolume(source.v_center_a, dv_z, dv_perp)
    vb = IntegrationVolume(source.v_center_b, dv_z, dv_perp)
    return {"a": va, "b": vb, "c": va, "d": vb}


def counts(shots: Sequence[ShotEvents], volume: IntegrationVolume) -> np.ndarray:
    return np.array([volume.count(s.events) for s in shots], dtype=np.int64)


# -- model expectation ------------------------------------------------------------------


def _effective_bounds(volume: IntegrationVolume, det: DetectorSpec | None):
    """Velocity interval whose quantized values fall inside ``volume``."""
    lo, hi = volume.bounds()
    if det is None or not det.enabled:
        return lo, hi
    p = np.array([det.pixel_perp, det.pixel_perp, det.pixel_z])
    return p * np.ceil(lo / p - 0.5), p * np.ceil(hi / p - 0.5)


def _captured_fraction(center, offsets, cell, lo, hi) -> np.ndarray:
    a = np.asarray(center) + offsets - cell / 2
    b = a + cell
    span = np.clip(np.minimum(b, hi) - np.maximum(a, lo), 0.0, None) / cell
    return np.prod(span, axis=1)


@dataclass(frozen=True)
class ModelMoments:
    g2_cd: float
    n_c: float
    n_d: float


def expected_moments(source: SourceSpec, sched: PulseSchedule, det: DetectorSpec | None,
                     vc: IntegrationVolume, vd: IntegrationVolume,
                     overlap: float) -> ModelMoments:
    """Expected ``<N_c N_d>`` and mean counts for the simulated model, in closed form.

    Modes are independent and uniformly filled; inside one mode a Fock-diagonal
    input gives ``<n_c n_d> = RT (G_aa + G_bb) + (T^2 + R^2 - 2 T R O^2) G_ab``.
    The per-channel truncation of the sampler is ignored.
    """
    g = mode_grid(source)
    w = g.weights
    s = sched.raman_survival * (sched.mirror_reflectivity if sched.apply_mirror else 1.0)
    if source.family == "fixed_fock":
        na = np.zeros_like(w)
        nb = np.zeros_like(w)
        na[g.center] = round(source.mean_n_a)
        nb[g.center] = round(source.mean_n_b)
        gaa, gbb, gab = na * (na - 1), nb * (nb - 1), na * nb
    elif source.family == "tmsv":
        na = nb = source.mean_n_a * w
        gaa = gbb = 2 * na * na
        gab = 2 * na * na + na
    else:
        na, nb = source.mean_n_a * w, source.mean_n_b * w
        mu = source.pair_fraction * min(source.mean_n_a, source.mean_n_b) * w
        gaa, gbb, gab = na * na, nb * nb, na * nb + mu
    na, nb = s * na, s * nb
    gaa, gbb, gab = s * s * gaa, s * s * gbb, s * s * gab

    if sched.apply_splitter:
        t = sched.splitter_transmittance
        r = 1.0 - t
        mc, md = r * na + t * nb, t * na + r * nb
        same = r * t * (gaa + gbb) + (t * t + r * r - 2 * t * r * overlap ** 2) * gab
    else:
        mc, md, same = na, nb, gab

    fc = _captured_fraction(source.v_center_a, g.offsets, g.cell, *_effective_bounds(vc, det))
    fd = _captured_fraction(source.v_center_b, g.offsets, g.cell, *_effective_bounds(vd, det))
    eta = sched.eta
    xc, xd = eta * fc * mc, eta * fd * md
    g2 = eta * eta * float(np.sum(fc * fd * same)) + float(xc.sum() * xd.sum() - np.sum(xc * xd))
    return ModelMoments(g2, float(xc.sum()), float(xd.sum()))


# -- fold-style moment accumulation --------------------------------------------------


@dataclass
class PairMoments:
    """Exact integer sums for ``X``, ``Y`` and a per-shot statistic ``Z`` built from them.

    Merging two accumulators is addition, so partial batches can be reduced in
    any order with identical results.
    """

    shots: int = 0
    sum_x: int = 0
    sum_y: int = 0
    sum_xx: int = 0
    sum_yy: int = 0
    sum_z: int = 0
    sum_zz: int = 0

    @classmethod
    def from_counts(cls, x: Iterable[int], y: Iterable[int], z: Iterable[int]) -> "PairMoments":
        x, y, z = ([int(v) for v in arr] for arr in (x, y, z))
        return cls(len(x), sum(x), sum(y), sum(v * v for v in x), sum(v * v for v in y),
                   sum(z), sum(v * v for v in z))

    def merge(self, other: "PairMoments") -> "PairMoments":
        return PairMoments(*(getattr(self, f) + getattr(other, f) for f in
                             ("shots", "sum_x", "sum_y", "sum_xx", "sum_yy", "sum_z", "sum_zz")))

    __add__ = merge

    def _mean_err(self, s, ss):
        n = self.shots
        mean = s / n
        if n < 2:
            return mean, 0.0
        var = (ss - s * s / n) / (n - 1)
        return mean, math.sqrt(max(var, 0.0) / n)

    def estimate(self) -> "CorrelationEstimate":
        if self.shots < 1:
            raise InputError("no shots to estimate from")
        value, err = self._mean_err(self.sum_z, self.sum_zz)
        return CorrelationEstimate(value, err, self.shots,
                                   (self.sum_x / self.shots, self.sum_y / self.shots))

    def mean_errors(self) -> tuple[float, float]:
        return self._mean_err(self.sum_x, self.sum_xx)[1], self._mean_err(self.sum_y, self.sum_yy)[1]


@dataclass(frozen=True)
class CorrelationEstimate:
    value: float
    std_error: float
    shots: int
    mean_counts: tuple[float, float]

    @property
    def ensemble_std(self) -> float:
        """Standard deviation of the per-shot statistic."""
        return self.std_error * math.sqrt(self.shots)


def cross_moments(shots: Sequence[ShotEvents], va: IntegrationVolume,
                  vb: IntegrationVolume) -> PairMoments:
    if not shots:
        raise InputError("empty shot list")
    if va.overlaps(vb):
        raise GeometryError("cross-correlation volumes overlap")
    x, y = counts(shots, va), counts(shots, vb)
    return PairMoments.from_counts(x, y, x * y)


def auto_moments(shots: Sequence[ShotEvents], v: IntegrationVolume) -> PairMoments:
    if not shots:
        raise InputError("empty shot list")
    x = counts(shots, v)
    return PairMoments.from_counts(x, x, x * (x - 1))


def estimate_g2_cross(shots: Sequence[ShotEvents], va: IntegrationVolume,
                      vb: IntegrationVolume) -> CorrelationEstimate:
    """Mean of ``N_a * N_b`` over shots."""
    return cross_moments(shots, va, vb).estimate()


def estimate_g2_auto(shots: Sequence[ShotEvents], v: IntegrationVolume) -> CorrelationEstimate:
    """Mean of ``N (N - 1)`` over shots."""
    return auto_moments(shots, v).estimate()


# -- dip fit --------------------------------------------------------------------------------

PARAM_NAMES = ("g2_bg", "visibility", "tau0_us", "sigma_us")


def dip_model(tau, g2_bg, visibility, tau0, sigma):
    tau = np.asarray(tau, dtype=float)
    return g2_bg * (1.0 - visibility * np.exp(-((tau - tau0) ** 2) / (2.0 * sigma ** 2)))


def _jacobian(tau, p):
    bg, v, t0, s = p
    g = np.exp(-((tau - t0) ** 2) / (2.0 * s ** 2))
    return np.column_stack([
        1.0 - v * g,
        -bg * g,
        -bg * v * g * (tau - t0) / s ** 2,
        -bg * v * g * (tau - t0) ** 2 / s ** 3,
    ])


@dataclass(frozen=True)
class DipFit:
    g2_bg: float
    visibility: float
    tau0_us: float
    sigma_us: float
    confidence_68: dict = field(default_factory=dict)
    clamped: bool = False
    iterations: int = 0
    chi2: float = 0.0

    @property
    def fwhm_us(self) -> float:
        return 2.0 * math.sqrt(2.0 * math.log(2.0)) * self.sigma_us

    def error(self, name: str) -> float:
        lo, hi = self.confidence_68[name]
        return (hi - lo) / 2.0

    def params(self) -> np.ndarray:
        return np.array([self.g2_bg, self.visibility, self.tau0_us, self.sigma_us])

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in PARAM_NAMES}
        d.update(fwhm_us=self.fwhm_us, clamped=self.clamped, iterations=self.iterations,
                 chi2=self.chi2, confidence_68={k: list(v) for k, v in self.confidence_68.items()})
        return d


def _initial_guess(tau, y):
    order = np.argsort(tau)
    tau, y = tau[order], y[order]
    i_min = int(np.argmin(y))
    k = max(1, int(round(0.3 * len(tau))))
    far = np.argsort(-np.abs(tau - tau[i_min]), kind="stable")[:k]
    bg = float(np.mean(y[far]))
    v = 1.0 - y[i_min] / bg if bg != 0 else 0.5
    spacing = float(np.median(np.diff(tau)))
    return np.array([bg, v, tau[i_min], 2.0 * spacing])


def fit_dip(points: Sequence[tuple[float, CorrelationEstimate]], max_iter: int = 200,
            rtol: float = 1e-9) -> DipFit:
    """Weighted Gauss-Newton fit of ``bg * (1 - V exp(-(tau - tau0)^2 / 2 sigma^2))``.

    Weights are ``1 / std_error^2``. When no point carries an error, unit
    weights are used and the covariance is scaled by the residual variance.
    """
    if len(points) < 5:
        raise InputError(f"need at least 5 points to fit a dip, got {len(points)}")
    tau = np.array([float(t) for t, _ in points])
    y = np.array([e.value if isinstance(e, CorrelationEstimate) else float(e) for _, e in points])
    err = np.array([e.std_error if isinstance(e, CorrelationEstimate) else 0.0 for _, e in points])
    absolute = bool(np.any(err > 0))
    if absolute:
        floor = err[err > 0].min()
        err = np.where(err > 0, err, floor)
    else:
        err = np.ones_like(y)
    sw = 1.0 / err

    def cost(p):
        r = (y - dip_model(tau, *p)) * sw
        return float(r @ r)

    p = _initial_guess(tau, y)
    c = cost(p)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        j = _jacobian(tau, p) * sw[:, None]
        r = (y - dip_model(tau, *p)) * sw
        step, *_ = np.linalg.lstsq(j, r, rcond=None)
        lam = 1.0
        while True:
            trial = p + lam * step
            trial[3] = abs(trial[3])
            ct = cost(trial)
            if ct <= c or lam < 1e-12:
                break
            lam /= 2.0
        change = np.abs(trial - p) / np.maximum(np.abs(p), 1e-300)
        if ct > c:
            # no descent direction left: already at the minimum
            converged = True
            break
        p, c = trial, ct
        if np.max(change) < rtol:
            converged = True
            break
    if not converged:
        raise FitError(f"dip fit did not converge in {max_iter} iterations", last=p)

    j = _jacobian(tau, p) * sw[:, None]
    try:
        cov = np.linalg.inv(j.T @ j)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(j.T @ j)
    if not absolute:
        dof = max(len(tau) - 4, 1)
        cov = cov * c / dof
    sd = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    ci = {name: (float(v - s), float(v + s)) for name, v, s in zip(PARAM_NAMES, p, sd)}

    v = float(p[1])
    clamped = not 0.0 <= v <= 1.0
    return DipFit(float(p[0]), min(max(v, 0.0), 1.0), float(p[2]), float(p[3]), ci,
                  clamped, it, c)


# -- scans ---------------------------------------------------------------------------------


@dataclass(frozen=True)
class DipPoint:
    tau_us: float
    g2: CorrelationEstimate
    n_c_mean: float
    n_d_mean: float
    n_c_err: float
    n_d_err: float


def group_by_tau(shots: Iterable[ShotEvents]) -> list[tuple[float, list[ShotEvents]]]:
    groups: dict[float, list[ShotEvents]] = {}
    for s in shots:
        groups.setdefault(float(s.tau), []).append(s)
    return sorted(groups.items())


def _flatten(batches) -> list[ShotEvents]:
    flat = []
    for b in batches:
        if isinstance(b, ShotEvents):
            flat.append(b)
        else:
            flat.extend(b)
    return flat


def dip_scan(batches, vc: IntegrationVolume, vd: IntegrationVolume) -> list[DipPoint]:
    """Cross-correlation and mean counts at every delay. Accepts batches or a flat shot list."""
    out = []
    for tau, shots in group_by_tau(_flatten(batches)):
        m = cross_moments(shots, vc, vd)
        ec, ed = m.mean_errors()
        est = m.estimate()
        out.append(DipPoint(tau, est, est.mean_counts[0], est.mean_counts[1], ec, ed))
    return out


def fit_dip_scan(points: Sequence[DipPoint]) -> DipFit:
    return fit_dip([(p.tau_us, p.g2) for p in points])


@dataclass(frozen=True)
class VolumeScanPoint:
    size: float
    visibility: float
    error: float
    fit: DipFit | None = None


def scan_visibility_vs_volume(shots, axis: str, sizes: Sequence[float],
                              vc: IntegrationVolume | None = None,
                              vd: IntegrationVolume | None = None) -> list[VolumeScanPoint]:
    """Refit the dip with the output volumes resized along ``axis``."""
    sizes = [float(s) for s in sizes]
    if not sizes:
        raise InputError("no volume sizes given")
    if any(s <= 0 for s in sizes) or sizes != sorted(sizes):
        raise InputError("volume sizes must be positive and ascending")
    if axis not in ("z", "perp"):
        raise InputError(f"axis must be 'z' or 'perp', got {axis!r}")
    if vc is None or vd is None:
        d = default_volumes()
        vc, vd = vc or d["c"], vd or d["d"]
    flat = _flatten(shots)
    out = []
    for size in sizes:
        fit = fit_dip_scan(dip_scan(flat, vc.resized(axis, size), vd.resized(axis, size)))
        out.append(VolumeScanPoint(size, fit.visibility, fit.error("visibility"), fit))
    return out


# -- calibration ------------------------------------------------------------------------------


def eta_from_counts(n_a: Sequence[int], n_b: Sequence[int]) -> float:
    """``1 - Var(N_a - N_b) / (<N_a> + <N_b>)``: the twin-beam detection efficiency."""
    n_a = np.asarray(n_a, dtype=float)
    n_b = np.asarray(n_b, dtype=float)
    total = n_a.mean() + n_b.mean()
    if total <= 0:
        raise InputError("zero mean counts; efficiency undefined")
    return float(1.0 - np.var(n_a - n_b, ddof=1) / total)


def estimate_eta_from_variance(shots: Sequence[ShotEvents], va: IntegrationVolume,
                               vb: IntegrationVolume) -> float:
    """Detection efficiency from the normalized number-difference variance; volumes should span the beams."""
    if not shots:
        raise InputError("empty shot list")
    return eta_from_counts(counts(shots, va), counts(shots, vb))


@dataclass(frozen=True)
class PoissonFit:
    mean_incident: float
    p1: float
    p2: float
    ratio: float
    degenerate: bool = False


def _histogram(counts_hist) -> np.ndarray:
    if isinstance(counts_hist, Mapping):
        if not counts_hist:
            return np.zeros(0)
        h = np.zeros(max(int(k) for k in counts_hist) + 1)
        for k, v in counts_hist.items():
            h[int(k)] += v
        return h
    return np.asarray(counts_hist, dtype=float)


def fit_incident_poisson(counts_hist, eta: float) -> PoissonFit:
    """Poisson mean of incident atoms from a histogram of detected counts.

    ``counts_hist[k]`` is the number of shots with ``k`` detected atoms. Under
    binomial thinning the detected counts are Poisson with mean ``eta * lambda``,
    whose ML estimate is the detected mean.
    """
    if not 0.0 < eta <= 1.0:
        raise InputError(f"eta must lie in (0, 1], got {eta}")
    h = _histogram(counts_hist)
    if h.size == 0 or h.sum() <= 0:
        raise DegenerateFitError("empty histogram")
    mean_detected = float(np.arange(len(h)) @ h / h.sum())
    lam = mean_detected / eta
    p1 = lam * math.exp(-lam)
    p2 = lam * lam * math.exp(-lam) / 2.0
    return PoissonFit(lam, p1, p2, lam / 2.0, degenerate=lam == 0.0)


def histogram_of(counts_arr: Sequence[int]) -> np.ndarray:
    return np.bincount(np.asarray(counts_arr, dtype=np.int64))


# -- exports ----------------------------------------------------------------------------------

DIP_COLUMNS = ("tau_us", "g2", "stderr", "n_c_mean", "n_d_mean")
STABILITY_COLUMNS = ("tau_us", "n_c_mean", "n_c_err", "n_d_mean", "n_d_err", "product", "g2")
VOLUME_COLUMNS = ("size", "visibility", "err")


def write_dip_csv(path, points: Sequence[DipPoint]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(DIP_COLUMNS)
        for p in points:
            w.writerow([p.tau_us, p.g2.value, p.g2.std_error, p.n_c_mean, p.n_d_mean])


def read_dip_csv(path) -> list[tuple[float, CorrelationEstimate]]:
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    return [(float(r["tau_us"]), CorrelationEstimate(float(r["g2"]), float(r["stderr"]), 1,
                                                     (float(r["n_c_mean"]), float(r["n_d_mean"]))))
            for r in rows]


def write_stability_csv(path, points: Sequence[DipPoint]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(STABILITY_COLUMNS)
        for p in points:
            w.writerow([p.tau_us, p.n_c_mean, p.n_c_err, p.n_d_mean, p.n_d_err,
                        p.n_c_mean * p.n_d_mean, p.g2.value])


def write_volume_csv(path, points: Sequence[VolumeScanPoint]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(VOLUME_COLUMNS)
        for p in points:
            w.writerow([p.size, p.visibility, p.error])


def write_json_report(path, payload: dict, config_hash: str | None = None) -> None:
    body = dict(payload)
    if config_hash is not None:
        body["config_hash"] = config_hash
    with open(path, "w") as f:
        json.dump(body, f, indent=2, sort_keys=True)
        f.write("\n")
