"""Sparse bosonic Fock states and passive linear transforms.

A :class:`FockState` is a map from occupation tuples to complex amplitudes over
an ordered list of :class:`ModeId`. Every transform here is a linear map on
creation operators, ``in_k^dagger -> sum_j M[j, k] out_j^dagger``, applied by
expanding each basis ket as a polynomial in the output creation operators.
That keeps the particle number of every term fixed, so a state built under a
cutoff never needs re-truncation.

Beam-splitter convention (Heisenberg picture, annihilation operators)::

    c = i e^{i phi} sqrt(1 - T) a + sqrt(T) b
    d = sqrt(T) a + i e^{-i phi} sqrt(1 - T) b

At ``T = 1/2`` this is the Bragg pi/2-pulse matrix ``(i e^{i phi}, 1; 1, i e^{-i phi}) / sqrt(2)``.
"""

from __future__ import annotations

import cmath
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import CutoffError, DomainError, ModeError

CHANNELS = ("a", "b", "c", "d", "loss", "aux")
TEMPORAL_LABELS = ("matched", "orthogonal")

#: Truncation budget for state construction.
EPS_TRUNC = 1e-9


@dataclass(frozen=True, order=True)
class ModeId:
    """One bosonic mode: a detection channel plus a wave-packet label.

    ``index`` only distinguishes repeated ``loss``/``aux`` modes.
    """

    channel: str
    temporal_label: str = "matched"
    index: int = 0

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise ModeError(f"unknown channel {self.channel!r}")
        if self.temporal_label not in TEMPORAL_LABELS:
            raise ModeError(f"unknown temporal label {self.temporal_label!r}")

    def __str__(self):
        s = self.channel
        if self.temporal_label != "matched":
            s += "~" + self.temporal_label[0]
        if self.index:
            s += str(self.index)
        return s


def as_mode(m) -> ModeId:
    if isinstance(m, ModeId):
        return m
    if isinstance(m, str):
        return ModeId(m)
    if isinstance(m, tuple):
        return ModeId(*m)
    raise ModeError(f"cannot interpret {m!r} as a mode")


@dataclass(frozen=True)
class FockState:
    modes: tuple[ModeId, ...]
    amplitudes: Mapping[tuple[int, ...], complex]
    cutoff: int

    def __post_init__(self):
        if len(set(self.modes)) != len(self.modes):
            raise ModeError("duplicate modes in state")
        n = len(self.modes)
        for occ in self.amplitudes:
            if len(occ) != n:
                raise ValueError(f"occupation {occ} does not match {n} modes")
            if sum(occ) > self.cutoff:
                raise CutoffError(f"occupation {occ} exceeds cutoff {self.cutoff}")

    # -- inspection ---------------------------------------------------------

    def index(self, mode) -> int:
        mode = as_mode(mode)
        try:
            return self.modes.index(mode)
        except ValueError:
            raise ModeError(f"mode {mode} not in state {self.mode_names()}") from None

    def has_mode(self, mode) -> bool:
        return as_mode(mode) in self.modes

    def mode_names(self) -> list[str]:
        return [str(m) for m in self.modes]

    def norm_squared(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def probabilities(self) -> dict[tuple[int, ...], float]:
        return {k: abs(a) ** 2 for k, a in self.amplitudes.items()}

    def amplitude(self, occupation: Mapping) -> complex:
        """Amplitude of the basis ket given as ``{mode: n}``; unlisted modes are empty."""
        occ = [0] * len(self.modes)
        for m, n in occupation.items():
            occ[self.index(m)] = int(n)
        return complex(self.amplitudes.get(tuple(occ), 0.0))

    def channel_indices(self, channel: str) -> list[int]:
        return [i for i, m in enumerate(self.modes) if m.channel == channel]

    def number_distribution(self, groups: Iterable[Iterable[int]]) -> dict[tuple[int, ...], float]:
        """Joint distribution of summed occupations over the given index groups."""
        groups = [list(g) for g in groups]
        out: dict[tuple[int, ...], float] = {}
        for occ, a in self.amplitudes.items():
            key = tuple(sum(occ[i] for i in g) for g in groups)
            out[key] = out.get(key, 0.0) + abs(a) ** 2
        return out

    def total_number_distribution(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for occ, a in self.amplitudes.items():
            n = sum(occ)
            out[n] = out.get(n, 0.0) + abs(a) ** 2
        return out

    def check_norm(self, budget: float = EPS_TRUNC) -> None:
        n2 = self.norm_squared()
        if not (1.0 - budget - 1e-12 <= n2 <= 1.0 + 1e-12):
            raise CutoffError(f"state norm {n2!r} outside [1 - {budget}, 1]")

    # -- serialization --------------------------------------------------------

    def to_json(self) -> str:
        terms = [[list(occ), a.real, a.imag] for occ, a in sorted(self.amplitudes.items())]
        modes = [[m.channel, m.temporal_label, m.index] for m in self.modes]
        return json.dumps({"modes": modes, "cutoff": self.cutoff, "terms": terms})

    @classmethod
    def from_json(cls, text: str) -> "FockState":
        d = json.loads(text)
        modes = tuple(ModeId(*m) for m in d["modes"])
        amps = {tuple(occ): complex(re, im) for occ, re, im in d["terms"]}
        return cls(modes, amps, int(d["cutoff"]))


@dataclass(frozen=True)
class BeamSplitterSpec:
    transmittance: float = 0.5
    phase: float = 0.0
    input_pair: tuple[ModeId, ModeId] = (ModeId("a"), ModeId("b"))
    output_pair: tuple[ModeId, ModeId] = (ModeId("c"), ModeId("d"))

    def __post_init__(self):
        if not 0.0 <= self.transmittance <= 1.0:
            raise DomainError(f"transmittance {self.transmittance} outside [0, 1]")
        object.__setattr__(self, "input_pair", tuple(as_mode(m) for m in self.input_pair))
        object.__setattr__(self, "output_pair", tuple(as_mode(m) for m in self.output_pair))
        object.__setattr__(self, "phase", float(self.phase) % (2 * math.pi))

    def matrix(self) -> np.ndarray:
        """2x2 mode matrix U with ``out_j = sum_k U[j, k] in_k``."""
        t = math.sqrt(self.transmittance)
        r = math.sqrt(1.0 - self.transmittance)
        p = cmath.exp(1j * self.phase)
        return np.array([[1j * p * r, t], [t, 1j * r / p]], dtype=complex)


@dataclass(frozen=True)
class LossSpec:
    survival: float
    target: ModeId = field(default_factory=lambda: ModeId("a"))

    def __post_init__(self):
        if not 0.0 <= self.survival <= 1.0:
            raise DomainError(f"survival probability {self.survival} outside [0, 1]")
        object.__setattr__(self, "target", as_mode(self.target))


# -- constructors -----------------------------------------------------------


def make_input_state(occupations: Mapping, cutoff: int) -> FockState:
    """Product Fock state ``|n_1, n_2, ...>`` with unit amplitude."""
    items = [(as_mode(m), int(n)) for m, n in occupations.items()]
    if any(n < 0 for _, n in items):
        raise DomainError("occupations must be non-negative")
    total = sum(n for _, n in items)
    if total > cutoff:
        raise CutoffError(f"total occupation {total} exceeds cutoff {cutoff}", required=total)
    modes = tuple(m for m, _ in items)
    return FockState(modes, {tuple(n for _, n in items): 1.0 + 0j}, int(cutoff))


def vacuum(modes: Iterable = ("a", "b"), cutoff: int = 0) -> FockState:
    modes = tuple(as_mode(m) for m in modes)
    return FockState(modes, {(0,) * len(modes): 1.0 + 0j}, cutoff)


def tmsv_required_cutoff(mean_n: float, budget: float = EPS_TRUNC) -> int:
    """Smallest per-mode cutoff whose discarded tail probability is below ``budget``."""
    if mean_n <= 0:
        return 0
    x = mean_n / (mean_n + 1.0)
    # tail beyond cutoff N is x**(N + 1)
    return max(0, math.ceil(math.log(budget) / math.log(x)) - 1)


def make_two_mode_squeezed(mean_n: float, cutoff: int, pair=("a", "b"),
                           budget: float = EPS_TRUNC) -> FockState:
    """Two-mode squeezed vacuum ``sum_n tanh(r)^n / cosh(r) |n, n>``, ``mean_n = sinh(r)^2``.

    ``cutoff`` bounds the occupation of each mode of the pair, so the returned
    state has total cutoff ``2 * cutoff``. The truncated series is not
    renormalized; its squared norm is ``1 - tanh(r)^(2 (cutoff + 1))``.
    """
    if mean_n < 0:
        raise DomainError("mean_n must be non-negative")
    ma, mb = (as_mode(m) for m in pair)
    if mean_n == 0:
        return FockState((ma, mb), {(0, 0): 1.0 + 0j}, 2 * cutoff)
    x = mean_n / (mean_n + 1.0)  # tanh(r)^2
    tail = x ** (cutoff + 1)
    if tail > budget:
        need = tmsv_required_cutoff(mean_n, budget)
        raise CutoffError(
            f"truncation tail {tail:.3g} exceeds budget {budget:g}; need cutoff >= {need}",
            required=need,
        )
    c0 = math.sqrt(1.0 - x)  # 1 / cosh(r)
    t = math.sqrt(x)
    amps = {(n, n): complex(c0 * t ** n) for n in range(cutoff + 1)}
    return FockState((ma, mb), amps, 2 * cutoff)


# -- linear maps --------------------------------------------------------------


def _power_expansion(coeffs: list[tuple[int, complex]], n: int, n_out: int):
    """Terms of ``(sum_j c_j o_j^dag)^n / sqrt(n!)`` as {exponent tuple: coefficient}."""
    out: dict[tuple[int, ...], complex] = {}
    k = len(coeffs)
    norm = 1.0 / math.sqrt(math.factorial(n))
    for parts in _compositions(n, k):
        c = complex(math.factorial(n))
        exps = [0] * n_out
        for (j, cj), kj in zip(coeffs, parts):
            if kj:
                c *= cj ** kj / math.factorial(kj)
                exps[j] += kj
        if c != 0:
            key = tuple(exps)
            out[key] = out.get(key, 0) + c * norm
    return out


def _compositions(n: int, k: int):
    if k == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, k - 1):
            yield (first,) + rest


def _apply_creation_map(state: FockState, images: Mapping[int, list[tuple[int, complex]]],
                        out_modes: tuple[ModeId, ...], carry: Mapping[int, int]) -> FockState:
    """Apply ``in_k^dag -> sum_j c_jk out_j^dag`` for k in ``images``.

    ``carry`` maps untouched input indices to their output index.
    """
    n_out = len(out_modes)
    result: dict[tuple[int, ...], complex] = {}
    for occ, amp in state.amplitudes.items():
        base = [0] * n_out
        c0 = complex(amp)
        for i, j in carry.items():
            base[j] = occ[i]
            c0 /= math.sqrt(math.factorial(occ[i]))
        poly = {tuple(base): c0}
        for k, coeffs in images.items():
            n = occ[k]
            if n == 0:
                continue
            factor = _power_expansion(coeffs, n, n_out)
            new: dict[tuple[int, ...], complex] = {}
            for e1, c1 in poly.items():
                for e2, c2 in factor.items():
                    key = tuple(x + y for x, y in zip(e1, e2))
                    new[key] = new.get(key, 0) + c1 * c2
            poly = new
        for exps, c in poly.items():
            c *= math.sqrt(math.prod(math.factorial(e) for e in exps))
            result[exps] = result.get(exps, 0) + c
    result = {k: v for k, v in result.items() if abs(v) > 1e-15}
    return FockState(out_modes, result, state.cutoff)


def apply_beam_splitter(state: FockState, spec: BeamSplitterSpec) -> FockState:
    """Mix the two input channels; every temporal label block gets the same matrix."""
    in_a, in_b = spec.input_pair
    out_c, out_d = spec.output_pair
    for m in (in_a, in_b):
        if not any(x.channel == m.channel for x in state.modes):
            raise ModeError(f"input mode {m} not in state {state.mode_names()}")
    u = spec.matrix()

    labels = sorted({m.temporal_label for m in state.modes
                     if m.channel in (in_a.channel, in_b.channel)}, key=TEMPORAL_LABELS.index)
    consumed = {i for i, m in enumerate(state.modes) if m.channel in (in_a.channel, in_b.channel)}
    kept = [m for i, m in enumerate(state.modes) if i not in consumed]

    fresh: list[ModeId] = []
    for lab in labels:
        for ch in (out_c.channel, out_d.channel):
            m = ModeId(ch, lab)
            if m in kept:
                raise ModeError(f"output mode {m} already occupied by another transform")
            fresh.append(m)
    out_modes = tuple(kept) + tuple(fresh)
    pos = {m: j for j, m in enumerate(out_modes)}
    carry = {i: pos[m] for i, m in enumerate(state.modes) if i not in consumed}

    images: dict[int, list[tuple[int, complex]]] = {}
    for i, m in enumerate(state.modes):
        if i not in consumed:
            continue
        col = 0 if m.channel == in_a.channel else 1
        jc = pos[ModeId(out_c.channel, m.temporal_label)]
        jd = pos[ModeId(out_d.channel, m.temporal_label)]
        images[i] = [(jc, complex(u[0, col])), (jd, complex(u[1, col]))]
    return _apply_creation_map(state, images, out_modes, carry)


def _next_index(state: FockState, channel: str) -> int:
    used = [m.index for m in state.modes if m.channel == channel]
    return max(used) + 1 if used else 0


def apply_loss(state: FockState, spec: LossSpec) -> FockState:
    """Fictitious splitter: ``target^dag -> sqrt(T) target^dag + sqrt(1-T) loss^dag``."""
    k = state.index(spec.target)
    if spec.survival == 1.0:
        return state
    loss = ModeId("loss", "matched", _next_index(state, "loss"))
    out_modes = state.modes + (loss,)
    carry = {i: i for i in range(len(state.modes)) if i != k}
    images = {k: [(k, complex(math.sqrt(spec.survival))),
                  (len(state.modes), complex(math.sqrt(1.0 - spec.survival)))]}
    return _apply_creation_map(state, images, out_modes, carry)


def apply_mirror(state: FockState, reflectivity: float, channels=("a", "b")) -> FockState:
    """Bragg mirror with imperfect reflectivity: each reflected channel leaks into its own loss mode.

    The velocity swap itself is a relabeling and is left implicit.
    """
    for ch in channels:
        for m in [m for m in state.modes if m.channel == ch]:
            state = apply_loss(state, LossSpec(reflectivity, m))
    return state


def decompose_overlap(state: FockState, channel, overlap: float) -> FockState:
    """Split a channel's wave packet into matched and orthogonal temporal modes.

    ``ch^dag -> O ch_matched^dag + sqrt(1 - O^2) ch_orthogonal^dag``.
    """
    if not 0.0 <= overlap <= 1.0:
        raise DomainError(f"overlap {overlap} outside [0, 1]")
    ch = as_mode(channel).channel
    matched = ModeId(ch, "matched")
    k = state.index(matched)
    if state.has_mode(ModeId(ch, "orthogonal")):
        raise ModeError(f"channel {ch} already carries an orthogonal component")
    if overlap == 1.0:
        return state
    orth = ModeId(ch, "orthogonal")
    out_modes = state.modes + (orth,)
    carry = {i: i for i in range(len(state.modes)) if i != k}
    images = {k: [(k, complex(overlap)), (len(state.modes), complex(math.sqrt(1.0 - overlap ** 2)))]}
    return _apply_creation_map(state, images, out_modes, carry)


# -- observables ----------------------------------------------------------------


def _resolve(state: FockState, modes) -> frozenset[int]:
    """Mode selection -> indices, widened to every temporal label of the named channels."""
    if isinstance(modes, (str, ModeId, tuple)):
        modes = [modes]
    channels = {as_mode(m).channel if not isinstance(m, str) else m for m in modes}
    idx = frozenset(i for i, m in enumerate(state.modes) if m.channel in channels)
    if not idx:
        raise ModeError(f"no modes of channels {sorted(channels)} in state {state.mode_names()}")
    return idx


def correlator_g2(state: FockState, m1, m2) -> float:
    """Normally ordered second moment between two detection channels.

    Equal selections give ``<N (N - 1)>``; disjoint ones give ``<N1 N2>``.
    Temporal labels within a channel are summed.
    """
    i1, i2 = _resolve(state, m1), _resolve(state, m2)
    if i1 == i2:
        f = lambda occ: (lambda n: n * (n - 1))(sum(occ[i] for i in i1))
    elif i1.isdisjoint(i2):
        f = lambda occ: sum(occ[i] for i in i1) * sum(occ[i] for i in i2)
    else:
        raise ModeError("mode selections must be equal or disjoint")
    return float(sum(abs(a) ** 2 * f(occ) for occ, a in state.amplitudes.items()))


def mean_number(state: FockState, modes) -> float:
    idx = _resolve(state, modes)
    return float(sum(abs(a) ** 2 * sum(occ[i] for i in idx) for occ, a in state.amplitudes.items()))


def coincidence_probability(state: FockState, m1="c", m2="d") -> float:
    """Probability that both selections register at least one particle."""
    i1, i2 = _resolve(state, m1), _resolve(state, m2)
    p = 0.0
    for occ, a in state.amplitudes.items():
        if any(occ[i] for i in i1) and any(occ[i] for i in i2):
            p += abs(a) ** 2
    return p


def port_distribution(state: FockState, m1="c", m2="d") -> dict[tuple[int, int], float]:
    """Joint distribution of detected counts in two channels (temporal labels summed)."""
    return state.number_distribution([sorted(_resolve(state, m1)), sorted(_resolve(state, m2))])


def hom_output(n_a: int, n_b: int, overlap: float = 1.0, transmittance: float = 0.5,
               phase: float = 0.0) -> FockState:
    """``|n_a, n_b>`` with the given packet overlap, sent through one splitter."""
    state = make_input_state({"a": n_a, "b": n_b}, n_a + n_b)
    state = decompose_overlap(state, "b", overlap)
    return apply_beam_splitter(state, BeamSplitterSpec(transmittance, phase))


def fock_product_states(max_per_channel: int):
    """All ``(n_a, n_b)`` pairs with at most ``max_per_channel`` particles each."""
    r = range(max_per_channel + 1)
    return list(itertools.product(r, r))
