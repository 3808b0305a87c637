"""Passive-basis polarization BB84: source, receiver, sifting and key fraction."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .optics import (
    SIGNAL_NM,
    ChannelSpec,
    ClickSplit,
    DetectorSpec,
    Pulse,
    SplitterSpec,
    check_wavelength,
    click_split,
)
from .states import ALL_STATES, Basis, PolarizationState

#: Shor-Preskill rate ``1 - 2 h(e)`` reaches zero just above this QBER.
SHOR_PRESKILL_THRESHOLD = 0.11


@dataclass(frozen=True)
class SourceSpec:
    wavelength: float = SIGNAL_NM
    mean_photon_number: float = 1.0
    states: tuple[PolarizationState, ...] = ALL_STATES

    def __post_init__(self):
        object.__setattr__(self, "wavelength", check_wavelength(self.wavelength))
        if not self.mean_photon_number >= 0:
            raise ValueError(f"mean photon number must be >= 0, got {self.mean_photon_number!r}")
        states = tuple(PolarizationState(s) for s in self.states)
        if not states or len(set(states)) != len(states):
            raise ValueError("source states must be a non-empty list without repeats")
        object.__setattr__(self, "states", states)


@dataclass(frozen=True)
class ReceiverSpec:
    """Bob's passive-basis station plus the Alice-to-Bob fibre."""

    splitter: SplitterSpec
    detector: DetectorSpec
    channel: ChannelSpec = ChannelSpec()
    intrinsic_error: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.intrinsic_error <= 1.0:
            raise ValueError(f"intrinsic_error must lie in [0, 1], got {self.intrinsic_error!r}")


@dataclass(frozen=True)
class AliceRecord:
    index: int
    state: PolarizationState


class ClickKind(enum.Enum):
    NO_CLICK = "no_click"
    CLICK = "click"
    MULTI_CLICK = "multi_click"


@dataclass(frozen=True)
class BobRecord:
    """What Bob's detectors reported for one gate.

    ``MULTI_CLICK`` means two or more photons were detected and squashed to
    a single ``(basis, bit)``; ``dark`` marks clicks with no detected photon.
    """

    index: int
    kind: ClickKind = ClickKind.NO_CLICK
    basis: Basis | None = None
    bit: int | None = None
    dark: bool = False

    def __post_init__(self):
        if (self.kind is ClickKind.NO_CLICK) != (self.basis is None or self.bit is None):
            raise ValueError("basis and bit must be set exactly when a click occurred")

    @property
    def clicked(self) -> bool:
        return self.kind is not ClickKind.NO_CLICK


@dataclass(frozen=True)
class SiftedPair:
    index: int
    alice_bit: int
    bob_bit: int
    basis: Basis

    @property
    def error(self) -> bool:
        return self.alice_bit != self.bob_bit


def alice_prepare(rng: np.random.Generator, source: SourceSpec = SourceSpec(), index: int = 0):
    """Draw one state uniformly from ``source.states``; returns ``(Pulse, AliceRecord)``."""
    u = rng.random()
    state = source.states[min(int(u * len(source.states)), len(source.states) - 1)]
    pulse = Pulse(state, source.wavelength, source.mean_photon_number)
    return pulse, AliceRecord(index, state)


def measurement_outcome_prob(incident: PolarizationState, measured_basis: Basis, bit: int) -> float:
    """Born-rule probability of reading ``bit`` when measuring ``incident`` in ``measured_basis``."""
    incident = PolarizationState(incident)
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit!r}")
    if incident.basis != Basis(measured_basis):
        return 0.5
    return 1.0 if incident.bit == bit else 0.0


def detect_from_uniforms(
    state: PolarizationState | None,
    ratio: float,
    split: ClickSplit,
    flip_prob: float,
    u_click: float,
    u_route: float,
    u_bit: float,
    u_flip: float = 1.0,
) -> tuple[ClickKind, Basis | None, int | None, bool]:
    """Receiver pipeline driven by explicit uniforms in [0, 1).

    ``u_click`` picks multi / single / dark-only / no click from ``split``,
    ``u_route`` the splitter port, ``u_bit`` the PBS output and ``u_flip``
    the misalignment flip. Returns ``(kind, basis, bit, dark)``. The batch
    kernels implement the same decision rules so the two agree on identical
    uniforms.
    """
    if u_click < split.signal:
        kind = ClickKind.MULTI_CLICK if u_click < split.multi else ClickKind.CLICK
        basis = Basis.RECTILINEAR if u_route < ratio else Basis.DIAGONAL
        bit = 0 if u_bit < measurement_outcome_prob(state, basis, 0) else 1
        if u_flip < flip_prob:
            bit ^= 1
        return kind, basis, bit, False
    if u_click < split.signal + split.dark_only:
        basis = Basis.RECTILINEAR if u_route < 0.5 else Basis.DIAGONAL
        return ClickKind.CLICK, basis, 0 if u_bit < 0.5 else 1, True
    return ClickKind.NO_CLICK, None, None, False


def bob_measure(
    pulse: Pulse | None,
    splitter: SplitterSpec,
    detector: DetectorSpec,
    channel: ChannelSpec,
    intrinsic_error: float,
    rng: np.random.Generator,
    index: int = 0,
) -> BobRecord:
    """Passive-basis measurement of one pulse (``None`` is an empty gate).

    Port 1 of the splitter leads to the rectilinear PBS, port 2 to the
    diagonal one. Multi-photon detections are squashed to one outcome drawn
    from the single-photon distribution.
    """
    split = click_split(pulse, channel, detector)
    if pulse is None:
        state, ratio = None, 0.5
    else:
        state, ratio = pulse.polarization, splitter.ratio(pulse.wavelength)
    u = rng.random(4)
    kind, basis, bit, dark = detect_from_uniforms(state, ratio, split, intrinsic_error, *u)
    return BobRecord(index, kind, basis, bit, dark)


def sift(alice: Sequence[AliceRecord], bob: Sequence[BobRecord]) -> list[SiftedPair]:
    """Keep clicked rounds where Bob's passive basis matches Alice's."""
    if len(alice) != len(bob):
        raise ValueError(f"record count mismatch: {len(alice)} Alice vs {len(bob)} Bob")
    out = []
    for a, b in zip(alice, bob):
        if a.index != b.index:
            raise ValueError(f"index mismatch: Alice {a.index} vs Bob {b.index}")
        if b.clicked and b.basis == a.state.basis:
            out.append(SiftedPair(a.index, a.state.bit, b.bit, b.basis))
    return out


@dataclass(frozen=True)
class QberEstimate:
    """Sifted-key error rates; ``None`` marks an undefined (empty) estimate.

    ``basis_averaged`` is the unweighted mean of the two per-basis rates,
    which differs from ``pooled`` whenever the bases sift unequally.
    """

    sifted: int
    errors: int
    sifted_by_basis: tuple[int, int]
    errors_by_basis: tuple[int, int]

    @classmethod
    def from_counts(cls, sifted_by_basis, errors_by_basis) -> "QberEstimate":
        sb = tuple(int(x) for x in sifted_by_basis)
        eb = tuple(int(x) for x in errors_by_basis)
        return cls(sum(sb), sum(eb), sb, eb)

    @property
    def pooled(self) -> float | None:
        return self.errors / self.sifted if self.sifted else None

    @property
    def rectilinear(self) -> float | None:
        n = self.sifted_by_basis[Basis.RECTILINEAR]
        return self.errors_by_basis[Basis.RECTILINEAR] / n if n else None

    @property
    def diagonal(self) -> float | None:
        n = self.sifted_by_basis[Basis.DIAGONAL]
        return self.errors_by_basis[Basis.DIAGONAL] / n if n else None

    @property
    def per_basis(self) -> tuple[float | None, float | None]:
        return self.rectilinear, self.diagonal

    @property
    def basis_averaged(self) -> float | None:
        r, d = self.per_basis
        if r is None or d is None:
            return None
        return 0.5 * (r + d)


def estimate_qber(sifted: Iterable[SiftedPair]) -> QberEstimate:
    n = [0, 0]
    e = [0, 0]
    for pair in sifted:
        n[pair.basis] += 1
        e[pair.basis] += pair.error
    return QberEstimate.from_counts(n, e)


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {p!r}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def secret_key_fraction(e: float) -> float:
    """Asymptotic Shor-Preskill fraction ``max(0, 1 - 2 h(e))`` for ``e`` in [0, 0.5]."""
    if not 0.0 <= e <= 0.5:
        raise ValueError(f"QBER must lie in [0, 0.5], got {e!r}")
    return max(0.0, 1.0 - 2.0 * binary_entropy(e))


def compose_error_rates(baseline: float, attack: float) -> float:
    """QBER of two independent bit flips: ``e0 (1 - ea) + (1 - e0) ea``."""
    return baseline * (1.0 - attack) + (1.0 - baseline) * attack
