"""Closed-form and Fock-derived predictions for the dip visibility."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import fock
from .errors import DomainError, UndefinedVisibilityError


@dataclass(frozen=True)
class InputMoments:
    """Normally ordered second moments of the two input channels, in detected units."""

    g2_aa: float
    g2_bb: float
    g2_ab: float
    eta: float = 1.0

    def __post_init__(self):
        for name in ("g2_aa", "g2_bb", "g2_ab"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise DomainError(f"{name} must be finite and >= 0, got {v}")
        if not 0.0 < self.eta <= 1.0:
            raise DomainError(f"eta must lie in (0, 1], got {self.eta}")


@dataclass(frozen=True)
class VisibilityPrediction:
    v_max: float
    g2_dip: float
    g2_background: float
    delta_amplitude: float = 0.0


def visibility_bound(m: InputMoments) -> VisibilityPrediction:
    """Maximum dip visibility allowed by the input number statistics."""
    auto = m.g2_aa + m.g2_bb
    total = auto + 2.0 * m.g2_ab
    if total <= 0:
        raise UndefinedVisibilityError("all input moments vanish; visibility undefined")
    return VisibilityPrediction(
        v_max=1.0 - auto / total,
        g2_dip=auto / 4.0,
        g2_background=total / 4.0,
    )


def tmsv_visibility(mean_n: float) -> float:
    """Visibility bound for a two-mode squeezed vacuum with ``mean_n`` atoms per mode."""
    if mean_n <= 0:
        raise DomainError("mean_n must be > 0")
    return (2.0 * mean_n + 1.0) / (4.0 * mean_n + 1.0)


def cauchy_schwarz_check(m: InputMoments) -> bool:
    """True when the moments are admissible for classical fields."""
    return m.g2_ab <= math.sqrt(m.g2_aa * m.g2_bb) + 1e-12


def classical_wave_dip(intensity_a: float, intensity_b: float, phase_samples: int,
                       rng: np.random.Generator | None = None,
                       transmittance: float = 0.5) -> float:
    """Dip visibility for two classical fields averaged over their relative phase.

    Phases are a uniform midpoint grid unless ``rng`` is given, in which case they
    are drawn uniformly from ``[0, 2 pi)``. The background is the product of the
    phase-averaged output intensities.
    """
    if intensity_a < 0 or intensity_b < 0:
        raise DomainError("intensities must be non-negative")
    if phase_samples < 1:
        raise DomainError("phase_samples must be >= 1")
    if intensity_a == 0 and intensity_b == 0:
        raise UndefinedVisibilityError("both intensities are zero")
    if rng is None:
        theta = 2 * np.pi * (np.arange(phase_samples) + 0.5) / phase_samples
    else:
        theta = rng.uniform(0.0, 2 * np.pi, size=phase_samples)
    u = fock.BeamSplitterSpec(transmittance).matrix()
    ea = math.sqrt(intensity_a)
    eb = math.sqrt(intensity_b) * np.exp(1j * theta)
    ic = np.abs(u[0, 0] * ea + u[0, 1] * eb) ** 2
    id_ = np.abs(u[1, 0] * ea + u[1, 1] * eb) ** 2
    return float(1.0 - np.mean(ic * id_) / (np.mean(ic) * np.mean(id_)))


def classical_dip_limit(intensity_a: float, intensity_b: float) -> float:
    """Infinite-sample limit of :func:`classical_wave_dip` for a balanced splitter."""
    s = intensity_a + intensity_b
    if s == 0:
        raise UndefinedVisibilityError("both intensities are zero")
    return 2.0 * intensity_a * intensity_b / s ** 2


# -- Fock-derived quantities -------------------------------------------------------

Ensemble = Sequence[tuple[float, fock.FockState]]


def _as_ensemble(state) -> list[tuple[float, fock.FockState]]:
    if isinstance(state, fock.FockState):
        return [(1.0, state)]
    return [(float(w), s) for w, s in state]


def input_moments(state, eta: float = 1.0) -> InputMoments:
    """Second moments of channels a and b of a state or weighted ensemble."""
    aa = bb = ab = 0.0
    for w, s in _as_ensemble(state):
        aa += w * fock.correlator_g2(s, "a", "a")
        bb += w * fock.correlator_g2(s, "b", "b")
        ab += w * fock.correlator_g2(s, "a", "b")
    return InputMoments(aa, bb, ab, eta)


def pair_coherence(state: fock.FockState) -> complex:
    """``<a^dag a^dag b b>``, the coherence that drives the single-particle interference term."""
    ia = state.index("a")
    ib = state.index("b")
    total = 0j
    for occ, amp in state.amplitudes.items():
        if occ[ib] < 2:
            continue
        # b b lowers n_b by 2; a^dag a^dag raises n_a by 2
        src = list(occ)
        tgt = list(occ)
        tgt[ib] -= 2
        tgt[ia] += 2
        bra = state.amplitudes.get(tuple(tgt))
        if bra is None:
            continue
        nb, na = src[ib], src[ia]
        total += bra.conjugate() * amp * math.sqrt(nb * (nb - 1) * (na + 1) * (na + 2))
    return total


def delta_term(state, phase: float) -> float:
    """Phase-dependent part of the balanced-splitter coincidence, ``2 Re[e^{-2i phi} <a^dag a^dag b b>]``.

    The sign of the exponent follows this package's splitter convention.
    """
    return float(sum(w * 2.0 * (np.exp(-2j * phase) * pair_coherence(s)).real
                     for w, s in _as_ensemble(state)))


def splitter_coincidence(state, phase: float, overlap: float = 1.0,
                         transmittance: float = 0.5) -> float:
    """``<N_c N_d>`` after the splitter, for a state or weighted ensemble on channels a, b."""
    spec = fock.BeamSplitterSpec(transmittance, phase)
    total = 0.0
    for w, s in _as_ensemble(state):
        s = fock.decompose_overlap(s, "b", overlap)
        out = fock.apply_beam_splitter(s, spec)
        total += w * fock.correlator_g2(out, "c", "d")
    return total


def phase_grid(n: int) -> np.ndarray:
    return 2 * np.pi * np.arange(n) / n


def phase_averaged_coincidence(state, overlap: float = 1.0, n_phases: int = 64,
                               transmittance: float = 0.5) -> float:
    return float(np.mean([splitter_coincidence(state, p, overlap, transmittance)
                          for p in phase_grid(n_phases)]))


def coincidence_vs_overlap(state, overlaps: Iterable[float], n_phases: int = 64,
                           transmittance: float = 0.5) -> list[tuple[float, float]]:
    return [(float(o), phase_averaged_coincidence(state, o, n_phases, transmittance))
            for o in overlaps]


def poisson_ensemble(mean_a: float, mean_b: float,
                     max_per_channel: int = 3) -> list[tuple[float, fock.FockState]]:
    """Independent Poisson occupations as a weighted ensemble of product Fock states.

    Weights are the exact Poisson probabilities restricted to the listed occupations.
    """
    out = []
    for na, nb in fock.fock_product_states(max_per_channel):
        w = (math.exp(-mean_a) * mean_a ** na / math.factorial(na)
             * math.exp(-mean_b) * mean_b ** nb / math.factorial(nb))
        out.append((w, fock.make_input_state({"a": na, "b": nb}, na + nb)))
    return out
