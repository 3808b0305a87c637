"""Seeded Monte Carlo driver and the aggregated report.

Pulses are processed in fixed-size chunks. Chunk ``i`` draws its uniforms
from ``SeedSequence(seed, spawn_key=(i,))``, so the result does not depend
on how chunks are spread over workers, and merging is plain count addition.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _pykernel as layout
from .adversary import EveRecord, eve_intercept, eve_resend
from .config import ScenarioConfig
from .kernel import BACKEND, get_kernel
from .optics import ChannelSpec, Pulse, click_split
from .protocol import (
    AliceRecord,
    BobRecord,
    QberEstimate,
    alice_prepare,
    bob_measure,
    secret_key_fraction,
)
from .states import Basis, PolarizationState

CHUNK_SIZE = 1 << 16

#: Outcome column order used by histograms: (basis, bit).
OUTCOME_COLUMNS = tuple((b, bit) for b in Basis for bit in (0, 1))


def kernel_params(config: ScenarioConfig) -> np.ndarray:
    """Pack per-wavelength click and routing probabilities for the kernels."""
    rx = config.receiver
    st = config.strategy
    lam_a = config.source.wavelength
    mu_a = config.source.mean_photon_number
    p = np.zeros(layout.N_PARAMS)
    p[layout.PARAM_BOB_FLIP] = rx.intrinsic_error

    def slot(offset, ratio, split):
        p[offset:offset + 4] = (ratio, split.multi, split.signal, split.dark_only)

    probe = PolarizationState.H
    if config.eve_enabled:
        p[layout.PARAM_EVE_ENABLED] = 1.0
        slot(
            layout.PARAM_EVE_SLOT,
            st.eve_splitter.ratio(lam_a),
            click_split(Pulse(probe, lam_a, mu_a), st.eve_channel_from_alice, config.eve_detector),
        )
        for basis, s in ((Basis.RECTILINEAR, layout.SLOT_RECT), (Basis.DIAGONAL, layout.SLOT_DIAG)):
            w = st.resend_wavelength[basis]
            pulse = Pulse(probe, w, st.resend_mu)
            slot(layout.PARAM_BOB_SLOTS + 4 * s, rx.splitter.ratio(w), click_split(pulse, st.resend_channel(w), rx.detector))
    else:
        slot(
            layout.PARAM_BOB_SLOTS + 4 * layout.SLOT_DIRECT,
            rx.splitter.ratio(lam_a),
            click_split(Pulse(probe, lam_a, mu_a), rx.channel, rx.detector),
        )
    slot(layout.PARAM_BOB_SLOTS + 4 * layout.SLOT_VACUUM, 0.5, click_split(None, ChannelSpec(), rx.detector))
    return p


def chunk_uniforms(seed: int, chunk: int, n: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))
    return rng.random((n, layout.N_UNIFORMS))


@dataclass(frozen=True, eq=False)
class SimulationReport:
    """Counts from one run and everything derived from them.

    ``joint_counts[a, e, b]`` counts pulses by Alice state ``a``, Eve outcome
    code ``e`` and Bob outcome code ``b`` (0 = no click, else
    ``1 + 2 * basis + bit``). Without Eve, ``e`` is always 0.
    """

    total_pulses: int
    eve_enabled: bool
    joint_counts: np.ndarray
    bob_multi_clicks: int
    bob_dark_clicks: int
    eve_multi_clicks: int
    eve_dark_clicks: int
    seed: int
    config_digest: str

    def __eq__(self, other):
        if not isinstance(other, SimulationReport):
            return NotImplemented
        return (
            np.array_equal(self.joint_counts, other.joint_counts)
            and self.total_pulses == other.total_pulses
            and self.eve_enabled == other.eve_enabled
            and self.bob_multi_clicks == other.bob_multi_clicks
            and self.bob_dark_clicks == other.bob_dark_clicks
            and self.eve_multi_clicks == other.eve_multi_clicks
            and self.eve_dark_clicks == other.eve_dark_clicks
            and self.seed == other.seed
            and self.config_digest == other.config_digest
        )

    __hash__ = None

    @classmethod
    def empty(cls, config: ScenarioConfig) -> "SimulationReport":
        return cls(0, config.eve_enabled, np.zeros((4, 5, 5), dtype=np.int64), 0, 0, 0, 0,
                   config.seed, config.digest())

    def merge(self, other: "SimulationReport") -> "SimulationReport":
        if (self.eve_enabled, self.seed, self.config_digest) != (other.eve_enabled, other.seed, other.config_digest):
            raise ValueError("can only merge shards of the same run")
        return SimulationReport(
            self.total_pulses + other.total_pulses,
            self.eve_enabled,
            self.joint_counts + other.joint_counts,
            self.bob_multi_clicks + other.bob_multi_clicks,
            self.bob_dark_clicks + other.bob_dark_clicks,
            self.eve_multi_clicks + other.eve_multi_clicks,
            self.eve_dark_clicks + other.eve_dark_clicks,
            self.seed,
            self.config_digest,
        )

    # -- click counts -------------------------------------------------------

    @cached_property
    def clicks(self) -> int:
        return int(self.joint_counts[:, :, 1:].sum())

    @cached_property
    def clicks_by(self) -> np.ndarray:
        """Bob's clicks as ``[sent_state, basis, bit]``.

        The sent state is whatever entered Bob's channel last: Alice's state
        without Eve, Eve's re-prepared state with her. Clicks in gates Eve
        left empty are in ``vacuum_clicks`` instead.
        """
        if self.eve_enabled:
            m = self.joint_counts[:, 1:, 1:].sum(axis=0)
        else:
            m = self.joint_counts[:, 0, 1:]
        return m.reshape(4, 2, 2).astype(np.int64)

    @cached_property
    def vacuum_clicks(self) -> int:
        return int(self.joint_counts[:, 0, 1:].sum()) if self.eve_enabled else 0

    @cached_property
    def clicks_by_alice(self) -> np.ndarray:
        """Bob's clicks as ``[alice_state, basis, bit]``."""
        return self.joint_counts[:, :, 1:].sum(axis=1).reshape(4, 2, 2).astype(np.int64)

    @cached_property
    def eve_resends(self) -> int:
        return int(self.joint_counts[:, 1:, :].sum())

    # -- sifting ------------------------------------------------------------

    @cached_property
    def qber(self) -> QberEstimate:
        sifted = [0, 0]
        errors = [0, 0]
        m = self.clicks_by_alice
        for state in PolarizationState:
            b = state.basis
            sifted[b] += int(m[state, b].sum())
            errors[b] += int(m[state, b, 1 - state.bit])
        return QberEstimate.from_counts(sifted, errors)

    @property
    def sifted_count(self) -> int:
        return self.qber.sifted

    @property
    def pooled_qber(self) -> float | None:
        return self.qber.pooled

    @property
    def per_basis_qber(self) -> tuple[float | None, float | None]:
        return self.qber.per_basis

    @property
    def basis_averaged_qber(self) -> float | None:
        return self.qber.basis_averaged

    @cached_property
    def eve_basis_match_fraction(self) -> float | None:
        """Share of sifted bits for which Eve measured in Alice's basis."""
        if not self.eve_enabled or not self.sifted_count:
            return None
        match = 0
        for state in PolarizationState:
            b = int(state.basis)
            eve_code = 1 + 2 * b + np.arange(2)
            bob_code = 1 + 2 * b + np.arange(2)
            match += int(self.joint_counts[state][np.ix_(eve_code, bob_code)].sum())
        return match / self.sifted_count

    @property
    def key_fraction(self) -> float | None:
        e = self.pooled_qber
        if e is None:
            return None
        return secret_key_fraction(min(e, 0.5))

    @property
    def click_fraction(self) -> float | None:
        return self.clicks / self.total_pulses if self.total_pulses else None

    def tree_counts(self, alice_basis: Basis) -> tuple[int, int, int]:
        """``(sifted_correct, sifted_error, discarded)`` among Bob's clicks
        that followed one of Eve's resends, for Alice states in ``alice_basis``."""
        correct = error = discarded = 0
        for state in PolarizationState:
            if state.basis != alice_basis:
                continue
            for code in range(1, 5):
                basis, bit = Basis((code - 1) // 2), (code - 1) % 2
                n = int(self.joint_counts[state, 1:, code].sum())
                if basis != state.basis:
                    discarded += n
                elif bit == state.bit:
                    correct += n
                else:
                    error += n
        return correct, error, discarded


def detection_histogram(report: SimulationReport) -> np.ndarray:
    """Bob's clicks as a 4x4 matrix: rows H, V, D, A sent; columns
    ``OUTCOME_COLUMNS`` (rect 0, rect 1, diag 0, diag 1)."""
    return report.clicks_by.reshape(4, 4).copy()


def run_simulation(
    config: ScenarioConfig,
    seed: int | None = None,
    pulses: int | None = None,
    workers: int = 1,
    backend: str | None = None,
    chunk_size: int = CHUNK_SIZE,
) -> SimulationReport:
    """Simulate ``config`` end to end; the report depends only on config and seed.

    ``seed`` and ``pulses`` override the values in ``config`` (and so enter
    the digest). ``workers`` and ``backend`` never change the result.
    """
    overrides = {}
    if seed is not None:
        overrides["seed"] = seed
    if pulses is not None:
        overrides["pulses"] = pulses
    if overrides:
        config = config.replace(**overrides)
    config.validate()
    kernel = get_kernel(backend)
    params = kernel_params(config)
    states = np.array([int(s) for s in config.source.states], dtype=np.int64)
    n_chunks = -(-config.pulses // chunk_size)

    def one(i):
        n = min(chunk_size, config.pulses - i * chunk_size)
        return kernel(chunk_uniforms(config.seed, i, n), states, params)

    if workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, range(n_chunks)))
    else:
        parts = [one(i) for i in range(n_chunks)]
    counts = np.zeros(100, dtype=np.int64)
    aux = np.zeros(4, dtype=np.int64)
    for c, a in parts:
        counts += c
        aux += a
    return SimulationReport(
        total_pulses=config.pulses,
        eve_enabled=config.eve_enabled,
        joint_counts=counts.reshape(4, 5, 5),
        bob_multi_clicks=int(aux[0]),
        bob_dark_clicks=int(aux[1]),
        eve_multi_clicks=int(aux[2]),
        eve_dark_clicks=int(aux[3]),
        seed=config.seed,
        config_digest=config.digest(),
    )


@dataclass(frozen=True)
class PulseTrace:
    alice: AliceRecord
    eve: EveRecord | None
    bob: BobRecord
    resent: Pulse | None


def simulate_records(config: ScenarioConfig, n: int, rng: np.random.Generator) -> list[PulseTrace]:
    """Per-pulse reference path through the scalar protocol operations.

    Slow; meant for small runs and for checking the batch kernels. Each
    pulse consumes eight uniforms in kernel column order, so a generator
    seeded like chunk 0 reproduces the kernel's counts exactly.
    """
    config.validate()
    rx = config.receiver
    out = []
    for i in range(n):
        pulse, a = alice_prepare(rng, config.source, index=i)
        if config.eve_enabled:
            e = eve_intercept(pulse, config.strategy, config.eve_detector, rng, index=i)
            resent = eve_resend(e, config.strategy)
            channel = config.strategy.resend_channel(resent.wavelength) if resent else ChannelSpec()
            b = bob_measure(resent, rx.splitter, rx.detector, channel, rx.intrinsic_error, rng, index=i)
        else:
            e, resent = None, None
            rng.random(3)
            b = bob_measure(pulse, rx.splitter, rx.detector, rx.channel, rx.intrinsic_error, rng, index=i)
        out.append(PulseTrace(a, e, b, resent))
    return out


__all__ = [
    "BACKEND",
    "CHUNK_SIZE",
    "OUTCOME_COLUMNS",
    "PulseTrace",
    "SimulationReport",
    "chunk_uniforms",
    "detection_histogram",
    "kernel_params",
    "run_simulation",
    "simulate_records",
]
