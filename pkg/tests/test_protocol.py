import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wdbs_qkd.optics import ChannelSpec, DetectorSpec, Pulse, SplitterSpec, reference_detector, reference_splitter
from wdbs_qkd.protocol import (
    AliceRecord,
    BobRecord,
    ClickKind,
    SiftedPair,
    SourceSpec,
    alice_prepare,
    binary_entropy,
    bob_measure,
    compose_error_rates,
    estimate_qber,
    measurement_outcome_prob,
    secret_key_fraction,
    sift,
)
from wdbs_qkd.states import Basis, PolarizationState

from conftest import assert_binomial

R, D = Basis.RECTILINEAR, Basis.DIAGONAL
S = PolarizationState


def test_state_basis_bit_bijection():
    pairs = {(s.basis, s.bit) for s in S}
    assert len(pairs) == 4
    for s in S:
        assert S.from_basis_bit(s.basis, s.bit) is s
    assert (S.H.basis, S.H.bit) == (R, 0)
    assert (S.V.basis, S.V.bit) == (R, 1)
    assert (S.D.basis, S.D.bit) == (D, 0)
    assert (S.A.basis, S.A.bit) == (D, 1)


# -- source -------------------------------------------------------------------

def test_alice_uniform_states():
    rng = np.random.default_rng(11)
    n = 400_000
    counts = np.zeros(4, dtype=int)
    for i in range(n):
        _, rec = alice_prepare(rng, index=i)
        counts[rec.state] += 1
    for k in counts:
        assert_binomial(k, n, 0.25)


def test_alice_default_pulse():
    pulse, rec = alice_prepare(np.random.default_rng(0), index=7)
    assert pulse.wavelength == 1550.0
    assert pulse.mean_photon_number == 1.0
    assert pulse.polarization is rec.state and rec.index == 7


def test_alice_seeded_sequence_repeats():
    def seq(seed):
        rng = np.random.default_rng(seed)
        return [alice_prepare(rng)[1].state for _ in range(200)]

    assert seq(3) == seq(3)
    assert seq(3) != seq(4)


def test_alice_restricted_states():
    rng = np.random.default_rng(1)
    src = SourceSpec(states=(S.H,))
    assert {alice_prepare(rng, src)[1].state for _ in range(50)} == {S.H}
    with pytest.raises(ValueError):
        SourceSpec(states=())


# -- Born rule ----------------------------------------------------------------

def test_measurement_probabilities():
    assert measurement_outcome_prob(S.H, R, 0) == 1.0
    assert measurement_outcome_prob(S.H, R, 1) == 0.0
    assert measurement_outcome_prob(S.D, R, 0) == 0.5
    assert measurement_outcome_prob(S.A, D, 1) == 1.0
    assert measurement_outcome_prob(S.V, D, 0) == 0.5


@pytest.mark.parametrize("state", list(S))
@pytest.mark.parametrize("basis", list(Basis))
def test_measurement_normalised(state, basis):
    assert measurement_outcome_prob(state, basis, 0) + measurement_outcome_prob(state, basis, 1) == 1.0


# -- receiver -----------------------------------------------------------------

def _ideal_det(eta=1.0, dark=0.0):
    return DetectorSpec({1550: eta, 1470: eta, 1290: eta}, dark_count_prob=dark)


def test_bob_ratio_one_always_rectilinear():
    rng = np.random.default_rng(2)
    sp = SplitterSpec.from_table({1550: 1.0})
    recs = [bob_measure(Pulse(S.D, 1550, 5.0), sp, _ideal_det(), ChannelSpec(), 0.0, rng) for _ in range(2000)]
    clicked = [r for r in recs if r.clicked]
    assert len(clicked) > 1900
    assert {r.basis for r in clicked} == {R}


def test_bob_matched_basis_exact_unmatched_half():
    # H at 1550 nm through a lossless 50/50 receiver with a perfect detector.
    rng = np.random.default_rng(3)
    sp = reference_splitter()
    rect = [0, 0]
    diag = [0, 0]
    for _ in range(200_000):
        r = bob_measure(Pulse(S.H, 1550, 1.0), sp, _ideal_det(), ChannelSpec(), 0.0, rng)
        if r.clicked:
            (rect if r.basis is R else diag)[r.bit] += 1
    assert rect[1] == 0 and rect[0] > 0
    assert_binomial(diag[0], sum(diag), 0.5)


def test_bob_basis_fraction_at_1470():
    rng = np.random.default_rng(4)
    n_rect = n = 0
    for _ in range(150_000):
        r = bob_measure(Pulse(S.H, 1470, 2.0), reference_splitter(), _ideal_det(), ChannelSpec(), 0.0, rng)
        if r.clicked:
            n += 1
            n_rect += r.basis is R
    assert_binomial(n_rect, n, 0.986)


def test_bob_click_rate_matches_detection_probability():
    rng = np.random.default_rng(5)
    det = reference_detector()
    n = 200_000
    k = sum(
        bob_measure(Pulse(S.V, 1550, 1.0), reference_splitter(), det, ChannelSpec(10.79), 0.0, rng).clicked
        for _ in range(n)
    )
    assert_binomial(k, n, 1 - math.exp(-10**-1.079 * 0.121))


def test_bob_intrinsic_error_flips():
    rng = np.random.default_rng(6)
    sp = SplitterSpec.from_table({1550: 1.0})
    recs = [bob_measure(Pulse(S.H, 1550, 10.0), sp, _ideal_det(), ChannelSpec(), 0.1, rng) for _ in range(50_000)]
    clicked = [r for r in recs if r.clicked]
    assert_binomial(sum(r.bit for r in clicked), len(clicked), 0.1)


def test_bob_dark_counts_uniform():
    rng = np.random.default_rng(7)
    det = _ideal_det(dark=0.5)
    recs = [bob_measure(None, reference_splitter(), det, ChannelSpec(), 0.0, rng) for _ in range(40_000)]
    clicked = [r for r in recs if r.clicked]
    assert all(r.dark for r in clicked)
    assert_binomial(len(clicked), len(recs), 0.5)
    assert_binomial(sum(r.basis is R for r in clicked), len(clicked), 0.5)
    assert_binomial(sum(r.bit for r in clicked), len(clicked), 0.5)


def test_bob_multi_click_squashed():
    rng = np.random.default_rng(8)
    sp = SplitterSpec.from_table({1550: 1.0})
    recs = [bob_measure(Pulse(S.H, 1550, 5.0), sp, _ideal_det(), ChannelSpec(), 0.0, rng) for _ in range(5000)]
    multi = [r for r in recs if r.kind is ClickKind.MULTI_CLICK]
    p_multi = 1 - math.exp(-5) - 5 * math.exp(-5)
    assert_binomial(len(multi), len(recs), p_multi)
    assert all(r.basis is R and r.bit == 0 for r in multi)


def test_bob_unknown_wavelength():
    with pytest.raises(LookupError):
        bob_measure(Pulse(S.H, 1310, 1.0), reference_splitter(), reference_detector(), ChannelSpec(), 0.0,
                    np.random.default_rng(0))


def test_bob_record_invariants():
    with pytest.raises(ValueError):
        BobRecord(0, ClickKind.CLICK)
    with pytest.raises(ValueError):
        BobRecord(0, ClickKind.NO_CLICK, R, 0)


# -- sifting and QBER ---------------------------------------------------------

def _click(i, basis, bit):
    return BobRecord(i, ClickKind.CLICK, basis, bit)


def test_sift_all_no_click_is_empty():
    alice = [AliceRecord(i, S.H) for i in range(5)]
    assert sift(alice, [BobRecord(i) for i in range(5)]) == []


def test_sift_full_mismatch_is_empty():
    alice = [AliceRecord(i, S.H if i % 2 else S.V) for i in range(6)]
    bob = [_click(i, D, i % 2) for i in range(6)]
    assert sift(alice, bob) == []


def test_sift_keeps_matching_basis():
    alice = [AliceRecord(0, S.H), AliceRecord(1, S.D), AliceRecord(2, S.A), AliceRecord(3, S.V)]
    bob = [_click(0, R, 0), _click(1, R, 1), BobRecord(2, ClickKind.MULTI_CLICK, D, 0), BobRecord(3)]
    assert sift(alice, bob) == [SiftedPair(0, 0, 0, R), SiftedPair(2, 1, 0, D)]


def test_sift_misaligned_records():
    with pytest.raises(ValueError):
        sift([AliceRecord(0, S.H)], [BobRecord(1)])
    with pytest.raises(ValueError):
        sift([AliceRecord(0, S.H)], [])


record_pairs = st.lists(
    st.tuples(st.sampled_from(list(S)), st.sampled_from([None, R, D]), st.integers(0, 1)), max_size=60
)


def _records(pairs):
    alice = [AliceRecord(i, s) for i, (s, _, _) in enumerate(pairs)]
    bob = [BobRecord(i) if b is None else _click(i, b, bit) for i, (_, b, bit) in enumerate(pairs)]
    return alice, bob


@given(record_pairs, st.sampled_from(list(Basis)))
def test_sift_commutes_with_basis_filter(pairs, basis):
    alice, bob = _records(pairs)
    out = sift(alice, bob)
    clicked = {b.index for b in bob if b.clicked}
    assert {p.index for p in out} <= clicked
    keep = [i for i, a in enumerate(alice) if a.state.basis is basis]
    filtered_first = sift([alice[i] for i in keep], [bob[i] for i in keep])
    assert filtered_first == [p for p in out if p.basis is basis]


def test_qber_all_agree_is_zero():
    est = estimate_qber([SiftedPair(i, i % 2, i % 2, Basis(i % 2)) for i in range(10)])
    assert est.pooled == 0.0 and est.basis_averaged == 0.0


def test_qber_empty_is_undefined():
    est = estimate_qber([])
    assert est.pooled is None and est.basis_averaged is None and est.per_basis == (None, None)


def test_qber_per_basis_and_average():
    pairs = [SiftedPair(i, 0, 1 if i < 1 else 0, R) for i in range(4)]  # 1/4 rect errors
    pairs += [SiftedPair(10 + i, 0, 1 if i < 1 else 0, D) for i in range(2)]  # 1/2 diag errors
    est = estimate_qber(pairs)
    assert est.pooled == pytest.approx(2 / 6)
    assert est.per_basis == (0.25, 0.5)
    assert est.basis_averaged == pytest.approx(0.375)


def test_qber_one_basis_empty_average_undefined():
    est = estimate_qber([SiftedPair(0, 0, 1, R)])
    assert est.pooled == 1.0 and est.diagonal is None and est.basis_averaged is None


# -- key fraction -------------------------------------------------------------

def test_key_fraction_values():
    assert secret_key_fraction(0.0) == 1.0
    assert secret_key_fraction(0.05) == pytest.approx(0.4272060858, abs=1e-9)
    assert secret_key_fraction(0.12) == 0.0
    assert secret_key_fraction(0.10) > 0
    for bad in (-0.01, 0.51):
        with pytest.raises(ValueError):
            secret_key_fraction(bad)


def test_binary_entropy_edges():
    assert binary_entropy(0) == binary_entropy(1) == 0.0
    assert binary_entropy(0.5) == 1.0


@given(st.floats(0, 0.5), st.floats(0, 0.5))
def test_key_fraction_nonincreasing(a, b):
    lo, hi = sorted((a, b))
    assert secret_key_fraction(lo) >= secret_key_fraction(hi)


def _bisect_zero(f, lo, hi, iters=200):
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_key_fraction_threshold_location():
    h = lambda e: -e * math.log2(e) - (1 - e) * math.log2(1 - e)
    root = _bisect_zero(lambda e: 1 - 2 * h(e), 0.01, 0.3)
    assert root == pytest.approx(0.1100, abs=0.0005)
    assert secret_key_fraction(root - 1e-6) > 0
    assert secret_key_fraction(root + 1e-6) == 0
    # single positive-to-zero transition on a fine grid
    grid = np.linspace(0, 0.5, 5001)
    positive = np.array([secret_key_fraction(e) > 0 for e in grid])
    assert np.count_nonzero(np.diff(positive.astype(int))) == 1


def test_compose_error_rates():
    assert compose_error_rates(0.013, 0.00425) == pytest.approx(0.0171395, abs=1e-9)
    assert compose_error_rates(0.0, 0.2) == 0.2
    assert compose_error_rates(0.5, 0.3) == 0.5
