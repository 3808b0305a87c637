"""Intercept-and-resend with wavelength-steered resends.

Eve measures each pulse with a copy of Bob's passive receiver and re-prepares
the result on a laser whose wavelength the receiver splitter routes almost
deterministically into the matching basis.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .optics import (
    DIAG_RESEND_NM,
    RECT_RESEND_NM,
    SIGNAL_NM,
    ChannelSpec,
    DetectorSpec,
    Pulse,
    SplitterSpec,
    check_wavelength,
    click_split,
    detection_probability,
    reference_splitter,
)
from .protocol import ReceiverSpec, detect_from_uniforms
from .states import Basis, PolarizationState

#: Default Eve-to-Bob fibre loss per resend laser.
DEFAULT_LINK_DB = {RECT_RESEND_NM: 3.3, DIAG_RESEND_NM: 0.0}


def _eve_splitter() -> SplitterSpec:
    return dataclasses.replace(reference_splitter(), name="eve splitter")


def ideal_eve_detector() -> DetectorSpec:
    return DetectorSpec({SIGNAL_NM: 1.0}, name="eve detector")


def _db_map(name: str, mapping: Mapping) -> Mapping[float, float]:
    out = {}
    for w, db in mapping.items():
        db = float(db)
        if not (db >= 0 and math.isfinite(db)):
            raise ValueError(f"{name} at {w} nm must be finite and >= 0, got {db!r}")
        out[check_wavelength(w)] = db
    return MappingProxyType(dict(sorted(out.items())))


@dataclass(frozen=True)
class EveStrategy:
    """Eve's resend plan.

    The loss seen by a resend at wavelength ``w`` is ``link_db[w]`` (the
    Eve-to-Bob fibre) plus ``added_attenuation_db.get(w, 0)`` (her own
    balancing attenuator).
    """

    resend_wavelength: Mapping[Basis, float] = field(
        default_factory=lambda: {Basis.RECTILINEAR: RECT_RESEND_NM, Basis.DIAGONAL: DIAG_RESEND_NM}
    )
    resend_mu: float = 2.0
    link_db: Mapping[float, float] = field(default_factory=lambda: dict(DEFAULT_LINK_DB))
    added_attenuation_db: Mapping[float, float] = field(default_factory=dict)
    eve_splitter: SplitterSpec = field(default_factory=_eve_splitter)
    eve_channel_from_alice: ChannelSpec = ChannelSpec(0.0)

    def __post_init__(self):
        rw = {Basis(b): check_wavelength(w) for b, w in self.resend_wavelength.items()}
        if set(rw) != set(Basis):
            raise ValueError("resend_wavelength must map both bases")
        object.__setattr__(self, "resend_wavelength", MappingProxyType(rw))
        if not (self.resend_mu >= 0 and math.isfinite(self.resend_mu)):
            raise ValueError(f"resend_mu must be >= 0, got {self.resend_mu!r}")
        object.__setattr__(self, "link_db", _db_map("link_db", self.link_db))
        object.__setattr__(
            self, "added_attenuation_db", _db_map("added_attenuation_db", self.added_attenuation_db)
        )

    def resend_channel(self, wavelength: float) -> ChannelSpec:
        w = check_wavelength(wavelength)
        return ChannelSpec(self.link_db.get(w, 0.0) + self.added_attenuation_db.get(w, 0.0))


@dataclass(frozen=True)
class EveRecord:
    index: int
    detected: bool = False
    measured_basis: Basis | None = None
    measured_bit: int | None = None

    def __post_init__(self):
        if self.detected != (self.measured_basis is not None and self.measured_bit is not None):
            raise ValueError("basis and bit are present exactly when detected")


def eve_intercept(
    pulse: Pulse,
    strategy: EveStrategy,
    eve_detector: DetectorSpec,
    rng: np.random.Generator,
    index: int = 0,
) -> EveRecord:
    """Measure Alice's pulse on Eve's copy of the passive receiver."""
    split = click_split(pulse, strategy.eve_channel_from_alice, eve_detector)
    ratio = strategy.eve_splitter.ratio(pulse.wavelength)
    u = rng.random(3)
    kind, basis, bit, _ = detect_from_uniforms(pulse.polarization, ratio, split, 0.0, *u)
    if basis is None:
        return EveRecord(index)
    return EveRecord(index, True, basis, bit)


def eve_resend(record: EveRecord, strategy: EveStrategy) -> Pulse | None:
    """Re-prepare Eve's result on the laser assigned to her measured basis."""
    if not record.detected:
        return None
    state = PolarizationState.from_basis_bit(record.measured_basis, record.measured_bit)
    return Pulse(state, strategy.resend_wavelength[record.measured_basis], strategy.resend_mu)


def _bob_click_rate(strategy: EveStrategy, detector: DetectorSpec, wavelength: float, extra_db: float) -> float:
    channel = ChannelSpec(strategy.link_db.get(wavelength, 0.0) + extra_db)
    return detection_probability(Pulse(PolarizationState.H, wavelength, strategy.resend_mu), channel, detector)


def unattenuated_click_rates(strategy: EveStrategy, receiver: ReceiverSpec) -> dict[float, float]:
    return {
        w: _bob_click_rate(strategy, receiver.detector, w, 0.0)
        for w in sorted(set(strategy.resend_wavelength.values()))
    }


def balance_attenuation(
    strategy: EveStrategy, receiver: ReceiverSpec, target_click_rate: float, tol_db: float = 1e-12
) -> dict[float, float]:
    """Extra dB per resend wavelength that brings Bob's click rate to ``target_click_rate``.

    Bob's click probability falls strictly with added loss, so each root is
    found by bisection.

    Raises:
        ValueError: the target is above the unattenuated rate, or at or below
            the dark-count floor, for some wavelength.
    """
    if not 0.0 <= target_click_rate <= 1.0:
        raise ValueError(f"target_click_rate must lie in [0, 1], got {target_click_rate!r}")
    det = receiver.detector
    out = {}
    for w in sorted(set(strategy.resend_wavelength.values())):
        rate0 = _bob_click_rate(strategy, det, w, 0.0)
        if target_click_rate > rate0:
            raise ValueError(
                f"{w:g} nm: target click rate {target_click_rate:g} exceeds the "
                f"unattenuated rate {rate0:g}"
            )
        if target_click_rate == rate0:
            out[w] = 0.0
            continue
        if target_click_rate <= det.dark_count_prob:
            raise ValueError(
                f"{w:g} nm: target click rate {target_click_rate:g} is not above the "
                f"dark-count floor {det.dark_count_prob:g}"
            )
        lo, hi = 0.0, 1.0
        while _bob_click_rate(strategy, det, w, hi) > target_click_rate:
            lo, hi = hi, 2.0 * hi
        for _ in range(200):
            if hi - lo <= tol_db:
                break
            mid = 0.5 * (lo + hi)
            if _bob_click_rate(strategy, det, w, mid) > target_click_rate:
                lo = mid
            else:
                hi = mid
        out[w] = 0.5 * (lo + hi)
    return out


def with_balanced_attenuation(
    strategy: EveStrategy, receiver: ReceiverSpec, target_click_rate: float | None = None
) -> EveStrategy:
    """Copy of ``strategy`` whose resends all reach ``target_click_rate`` at Bob.

    ``None`` equalises to the weakest unattenuated resend laser.
    """
    if target_click_rate is None:
        target_click_rate = min(unattenuated_click_rates(strategy, receiver).values())
    added = balance_attenuation(strategy, receiver, target_click_rate)
    return dataclasses.replace(strategy, added_attenuation_db=added)
