"""Monte Carlo model of the twin-atom HOM experiment in velocity space.

Each beam is a grid of elementary velocity modes (cells of ``mode_z x mode_perp^2``)
whose mean occupation follows the Gaussian beam profile. Mode ``j`` of beam a and
mode ``j`` of beam b are coupled by the Bragg splitter; different modes never
interfere. Inside a shot, per-mode occupations are drawn from the source family,
thinned by the Raman transfer and the mirror, routed through the splitter by
sampling the exact Fock output distribution, given velocities uniform over
their output cell, thinned by detection and finally pixelized.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import fock
from .errors import DomainError, InputError

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
FAMILIES = ("fixed_fock", "tmsv", "independent_poisson")
MAX_PER_CHANNEL = 6


@dataclass(frozen=True)
class SourceSpec:
    """Statistical model of the twin-beam source.

    ``mean_n_a``/``mean_n_b`` are the mean occupations of the central elementary
    mode of each beam at emission. For ``independent_poisson``, a fraction
    ``pair_fraction`` of ``min(mean_n_a, mean_n_b)`` is emitted as twin pairs
    with shared Poisson statistics; the rest of each beam is independent
    Poisson. ``tmsv`` uses ``mean_n_a`` for both beams. ``fixed_fock`` puts the
    rounded means in the central mode only.
    """

    family: str = "independent_poisson"
    mean_n_a: float = 0.5
    mean_n_b: float = 0.8
    v_center_a: tuple[float, float, float] = (0.0, 0.0, 12.1)
    v_center_b: tuple[float, float, float] = (0.0, 0.0, 7.0)
    fwhm_z: float = 1.4
    fwhm_perp: float = 1.4
    coherence_sigma_t: float = 45.0
    pair_fraction: float = 0.0
    mode_z: float = 0.6
    mode_perp: float = 0.5
    mode_span: float = 3.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown source family {self.family!r}; expected one of {FAMILIES}")
        if self.mean_n_a < 0 or self.mean_n_b < 0:
            raise DomainError("mean occupations must be >= 0")
        for name in ("fwhm_z", "fwhm_perp", "coherence_sigma_t", "mode_z", "mode_perp"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be > 0")
        if self.mode_span < 0:
            raise DomainError("mode_span must be >= 0")
        if not 0.0 <= self.pair_fraction <= 1.0:
            raise DomainError("pair_fraction must lie in [0, 1]")
        object.__setattr__(self, "v_center_a", tuple(float(x) for x in self.v_center_a))
        object.__setattr__(self, "v_center_b", tuple(float(x) for x in self.v_center_b))


@dataclass(frozen=True)
class PulseSchedule:
    """Pulse timings (us) and transfer probabilities.

    The packet overlap peaks at ``tau = t2 - t1 + overlap_offset_us``.
    """

    t1: float = 0.0
    t2: float = 500.0
    t3: float = 1050.0
    mirror_reflectivity: float = 0.95
    splitter_transmittance: float = 0.49
    raman_survival: float = 0.94
    eta: float = 0.25
    overlap_offset_us: float = 0.0
    apply_mirror: bool = True
    apply_splitter: bool = True

    def __post_init__(self):
        if not self.t1 < self.t2 < self.t3:
            raise DomainError("pulse times must satisfy t1 < t2 < t3")
        for name in ("mirror_reflectivity", "splitter_transmittance", "raman_survival", "eta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {v}")

    @property
    def mirror_delay(self) -> float:
        return self.t2 - self.t1 + self.overlap_offset_us


@dataclass(frozen=True)
class DetectorSpec:
    pixel_z: float = 0.15
    pixel_perp: float = 0.25
    enabled: bool = True

    def __post_init__(self):
        if self.pixel_z <= 0 or self.pixel_perp <= 0:
            raise DomainError("pixel sizes must be > 0")

    def quantize(self, v: np.ndarray) -> np.ndarray:
        if not self.enabled or len(v) == 0:
            return v
        p = np.array([self.pixel_perp, self.pixel_perp, self.pixel_z])
        return (np.floor(v / p) + 0.5) * p


@dataclass(eq=False)
class ShotEvents:
    """Detected atoms of one repetition: ``events`` is an ``(n, 3)`` array of (vx, vy, vz) in cm/s."""

    shot_id: int
    events: np.ndarray
    phase_phi: float
    tau: float
    resampled: int = 0

    def __post_init__(self):
        self.events = np.asarray(self.events, dtype=float).reshape(-1, 3)
        if not 0.0 <= self.phase_phi < 2 * math.pi:
            raise DomainError(f"phase {self.phase_phi} outside [0, 2 pi)")
        if not np.all(np.isfinite(self.events)):
            raise DomainError("events must be finite")

    def __len__(self):
        return len(self.events)

    def same_as(self, other: "ShotEvents") -> bool:
        return (self.shot_id == other.shot_id and self.tau == other.tau
                and self.phase_phi == other.phase_phi
                and np.array_equal(self.events, other.events))


# -- geometry ------------------------------------------------------------------------


def overlap_from_tau(tau: float, t_mirror_delay: float, coherence_sigma_t: float) -> float:
    """Amplitude overlap of two Gaussian packets offset by ``tau - t_mirror_delay``.

    ``coherence_sigma_t`` is the rms duration of each packet's density, so the
    coincidence dip ``1 - O^2`` has rms width ``sqrt(2) * coherence_sigma_t``.
    """
    if coherence_sigma_t <= 0:
        raise DomainError("coherence_sigma_t must be > 0")
    d = tau - t_mirror_delay
    return math.exp(-d * d / (8.0 * coherence_sigma_t ** 2))


def dip_fwhm(coherence_sigma_t: float) -> float:
    """FWHM of the ``1 - O(tau)^2`` dip."""
    return 2.0 * math.sqrt(2.0 * math.log(2.0)) * math.sqrt(2.0) * coherence_sigma_t


@dataclass(frozen=True)
class ModeGrid:
    offsets: np.ndarray  # (M, 3) cell centers relative to the beam center
    weights: np.ndarray  # (M,) profile weight, 1 at the central cell
    cell: np.ndarray     # (3,) cell edge lengths
    center: int          # index of the central cell


@lru_cache(maxsize=32)
def _mode_grid(fwhm_z, fwhm_perp, mode_z, mode_perp, span) -> ModeGrid:
    sz, sp = fwhm_z * FWHM_TO_SIGMA, fwhm_perp * FWHM_TO_SIGMA
    kz = int(round(span * sz / mode_z))
    kp = int(round(span * sp / mode_perp))
    iz = np.arange(-kz, kz + 1) * mode_z
    ip = np.arange(-kp, kp + 1) * mode_perp
    gx, gy, gz = np.meshgrid(ip, ip, iz, indexing="ij")
    offsets = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])
    w = np.exp(-(offsets[:, 0] ** 2 + offsets[:, 1] ** 2) / (2 * sp ** 2)
               - offsets[:, 2] ** 2 / (2 * sz ** 2))
    center = int(np.argmin(np.abs(offsets).sum(axis=1)))
    offsets.setflags(write=False)
    w.setflags(write=False)
    return ModeGrid(offsets, w, np.array([mode_perp, mode_perp, mode_z]), center)


def mode_grid(source: SourceSpec) -> ModeGrid:
    return _mode_grid(source.fwhm_z, source.fwhm_perp, source.mode_z, source.mode_perp,
                      source.mode_span)


def central_fraction(source: SourceSpec, dv_z: float, dv_perp: float) -> float:
    """Fraction of the central mode's atoms inside a box of the given size centered on it."""
    fz = min(dv_z, source.mode_z) / source.mode_z
    fp = min(dv_perp, source.mode_perp) / source.mode_perp
    return fz * fp * fp


# -- exact splitter tables --------------------------------------------------------------


@lru_cache(maxsize=4096)
def port_table(n_a: int, n_b: int, overlap: float, transmittance: float) -> np.ndarray:
    """``P(N_c = k)`` for ``k = 0 .. n_a + n_b`` after the splitter.

    The distribution is independent of the splitter phase for Fock inputs, so
    it is evaluated at ``phi = 0``.
    """
    out = fock.hom_output(n_a, n_b, overlap, transmittance, 0.0)
    n = n_a + n_b
    p = np.zeros(n + 1)
    for (nc, nd), prob in fock.port_distribution(out, "c", "d").items():
        p[nc] += prob
    p = np.clip(p, 0.0, None)
    p.setflags(write=False)
    return p / p.sum()


# -- RNG ----------------------------------------------------------------------------------


def shot_rng(run_seed: int, shot_id: int) -> np.random.Generator:
    """Counter-based stream for one shot: Philox keyed by ``(run_seed, shot_id)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(run_seed), int(shot_id)])))


# -- source draws ---------------------------------------------------------------------------


def _draw_occupations(source: SourceSpec, grid: ModeGrid, rng: np.random.Generator):
    m = len(grid.weights)
    w = grid.weights
    if source.family == "fixed_fock":
        na = np.zeros(m, dtype=np.int64)
        nb = np.zeros(m, dtype=np.int64)
        na[grid.center] = int(round(source.mean_n_a))
        nb[grid.center] = int(round(source.mean_n_b))
        if max(na[grid.center], nb[grid.center]) > MAX_PER_CHANNEL:
            raise DomainError(f"fixed_fock occupations exceed the cutoff {MAX_PER_CHANNEL}")
        return na, nb, 0
    resampled = 0
    na, nb = _family_draw(source, w, rng)
    bad = (na > MAX_PER_CHANNEL) | (nb > MAX_PER_CHANNEL)
    while bad.any():
        resampled += int(bad.sum())
        ra, rb = _family_draw(source, w[bad], rng)
        na[bad], nb[bad] = ra, rb
        bad = (na > MAX_PER_CHANNEL) | (nb > MAX_PER_CHANNEL)
    return na, nb, resampled


def _family_draw(source: SourceSpec, w: np.ndarray, rng: np.random.Generator):
    if source.family == "tmsv":
        mean = source.mean_n_a * w
        # thermal pair number: geometric with success 1 / (1 + mean), shifted to start at 0
        n = rng.geometric(1.0 / (1.0 + mean)) - 1
        return n.astype(np.int64), n.astype(np.int64)
    mu = source.pair_fraction * min(source.mean_n_a, source.mean_n_b)
    pairs = rng.poisson(mu * w)
    na = pairs + rng.poisson((source.mean_n_a - mu) * w)
    nb = pairs + rng.poisson((source.mean_n_b - mu) * w)
    return na.astype(np.int64), nb.astype(np.int64)


def _route(na, nb, overlap, transmittance, rng):
    """Sample the atom number leaving through port c for every mode."""
    nc = np.zeros_like(na)
    busy = np.flatnonzero(na + nb)
    if len(busy) == 0:
        return nc
    keys = na[busy] * (MAX_PER_CHANNEL + 1) + nb[busy]
    for key in np.unique(keys):
        sel = busy[keys == key]
        a, b = divmod(int(key), MAX_PER_CHANNEL + 1)
        p = port_table(a, b, overlap, transmittance)
        nc[sel] = rng.choice(len(p), size=len(sel), p=p)
    return nc


def simulate_shot(source: SourceSpec, sched: PulseSchedule, det: DetectorSpec,
                  seed: int, tau: float, shot_id: int = 0) -> ShotEvents:
    """One repetition of the experiment; reproducible from ``(seed, shot_id)``."""
    rng = shot_rng(seed, shot_id)
    grid = mode_grid(source)
    phase = float(rng.uniform(0.0, 2 * math.pi))

    na, nb, resampled = _draw_occupations(source, grid, rng)
    na = rng.binomial(na, sched.raman_survival)
    nb = rng.binomial(nb, sched.raman_survival)
    if sched.apply_mirror:
        na = rng.binomial(na, sched.mirror_reflectivity)
        nb = rng.binomial(nb, sched.mirror_reflectivity)
    if sched.apply_splitter:
        o = overlap_from_tau(tau, sched.mirror_delay, source.coherence_sigma_t)
        nc = _route(na, nb, o, sched.splitter_transmittance, rng)
        nd = na + nb - nc
    else:
        nc, nd = na, nb

    nc = rng.binomial(nc, sched.eta)
    nd = rng.binomial(nd, sched.eta)
    va = np.asarray(source.v_center_a)
    vb = np.asarray(source.v_center_b)
    parts = []
    for counts, center in ((nc, va), (nd, vb)):
        idx = np.repeat(np.arange(len(counts)), counts)
        jitter = (rng.random((len(idx), 3)) - 0.5) * grid.cell
        parts.append(center + grid.offsets[idx] + jitter)
    events = det.quantize(np.concatenate(parts))
    return ShotEvents(shot_id, events, phase, float(tau), resampled)


def _simulate_chunk(args):
    source, sched, det, run_seed, jobs = args
    return [simulate_shot(source, sched, det, run_seed, tau, sid) for sid, tau in jobs]


def run_dip_scan(source: SourceSpec, sched: PulseSchedule, det: DetectorSpec,
                 tau_grid: Sequence[float], shots_per_tau: int, run_seed: int,
                 workers: int = 1) -> list[list[ShotEvents]]:
    """Shots for every delay in ``tau_grid``; shot ``k`` at grid index ``i`` has id ``i * shots_per_tau + k``."""
    if shots_per_tau < 1:
        raise InputError("shots_per_tau must be >= 1")
    taus = [float(t) for t in tau_grid]
    jobs = [(i * shots_per_tau + k, tau) for i, tau in enumerate(taus) for k in range(shots_per_tau)]
    if workers <= 1:
        flat = _simulate_chunk((source, sched, det, run_seed, jobs))
    else:
        size = max(1, len(jobs) // (4 * workers))
        chunks = [jobs[i:i + size] for i in range(0, len(jobs), size)]
        with ProcessPoolExecutor(workers) as ex:
            flat = [s for part in ex.map(_simulate_chunk,
                                         [(source, sched, det, run_seed, c) for c in chunks])
                    for s in part]
    return [flat[i * shots_per_tau:(i + 1) * shots_per_tau] for i in range(len(taus))]


# -- reference scenario ------------------------------------------------------------------------

REFERENCE_TAU_GRID = tuple(float(t) for t in range(350, 751, 50))


def source_mean_for_incident(incident: float, source: SourceSpec, sched: PulseSchedule,
                             dv_z: float = 0.3, dv_perp: float = 0.5) -> float:
    """Central-mode emission mean giving ``incident`` post-transfer atoms in a centered box."""
    return incident / (sched.raman_survival * central_fraction(source, dv_z, dv_perp))


def reference_scenario(incident_a: float = 0.5, incident_b: float = 0.8,
                       **source_overrides) -> tuple[SourceSpec, PulseSchedule, DetectorSpec]:
    """Source, schedule and detector at the default operating point.

    ``incident_a``/``incident_b`` are mean atom numbers in the default
    integration volumes after the Raman transfer.
    """
    sched = PulseSchedule(overlap_offset_us=50.0)
    base = SourceSpec(family="independent_poisson", pair_fraction=1.0, **source_overrides)
    src = replace(
        base,
        mean_n_a=source_mean_for_incident(incident_a, base, sched),
        mean_n_b=source_mean_for_incident(incident_b, base, sched),
    )
    return src, sched, DetectorSpec()


# -- exact single-mode predictions ------------------------------------------------------------


def _thinning_matrix(n_max: int, survival: float) -> np.ndarray:
    m = np.zeros((n_max + 1, n_max + 1))
    for n in range(n_max + 1):
        for k in range(n + 1):
            m[k, n] = math.comb(n, k) * survival ** k * (1 - survival) ** (n - k)
    return m


def central_mode_distribution(source: SourceSpec, survival: float = 1.0,
                              n_max: int = 40) -> np.ndarray:
    """Joint ``P(n_a, n_b)`` of the central mode after binomial loss ``survival``.

    Computed on ``0 .. n_max`` per channel without the sampler's truncation.
    """
    r = np.arange(n_max + 1)
    if source.family == "fixed_fock":
        p = np.zeros((n_max + 1, n_max + 1))
        p[int(round(source.mean_n_a)), int(round(source.mean_n_b))] = 1.0
    elif source.family == "tmsv":
        m = source.mean_n_a
        p = np.diag(m ** r / (1 + m) ** (r + 1))
    else:
        mu = source.pair_fraction * min(source.mean_n_a, source.mean_n_b)
        pois = lambda lam: np.array([math.exp(-lam) * lam ** k / math.factorial(k) for k in r])
        pa, pb, pp = pois(source.mean_n_a - mu), pois(source.mean_n_b - mu), pois(mu)
        p = np.zeros((n_max + 1, n_max + 1))
        for k in range(n_max + 1):
            p[k:, k:] += pp[k] * np.outer(pa[:n_max + 1 - k], pb[:n_max + 1 - k])
    t = _thinning_matrix(n_max, survival)
    return t @ p @ t.T


def exact_mode_coincidence(dist: np.ndarray, overlap: float, transmittance: float,
                           max_per_channel: int = MAX_PER_CHANNEL) -> tuple[float, float]:
    """``<n_c n_d>`` for one mode from exact splitter tables, plus the probability mass used.

    Occupations above ``max_per_channel`` are dropped; the result is conditioned
    on the retained mass.
    """
    total = 0.0
    mass = 0.0
    for na in range(min(max_per_channel, dist.shape[0] - 1) + 1):
        for nb in range(min(max_per_channel, dist.shape[1] - 1) + 1):
            w = dist[na, nb]
            if w == 0:
                continue
            p = port_table(na, nb, float(overlap), float(transmittance))
            k = np.arange(len(p))
            total += w * float(p @ (k * (na + nb - k)))
            mass += w
    return total / mass, mass
