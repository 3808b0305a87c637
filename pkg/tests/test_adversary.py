import dataclasses
import math

import numpy as np
import pytest

from wdbs_qkd.adversary import (
    EveRecord,
    EveStrategy,
    balance_attenuation,
    eve_intercept,
    eve_resend,
    ideal_eve_detector,
    unattenuated_click_rates,
    with_balanced_attenuation,
)
from wdbs_qkd.errors import UnknownWavelengthError
from wdbs_qkd.optics import ChannelSpec, DetectorSpec, Pulse, detection_probability, reference_detector, reference_splitter
from wdbs_qkd.protocol import ReceiverSpec
from wdbs_qkd.states import Basis, PolarizationState

from conftest import assert_binomial

R, D = Basis.RECTILINEAR, Basis.DIAGONAL
S = PolarizationState


@pytest.fixture
def receiver():
    return ReceiverSpec(reference_splitter(), reference_detector())


def test_intercept_distribution_for_h():
    rng = np.random.default_rng(21)
    strat = EveStrategy()
    det = DetectorSpec({1550: 1.0})
    hits = {(R, 0): 0, (R, 1): 0, (D, 0): 0, (D, 1): 0}
    detected = 0
    n = 100_000
    for i in range(n):
        rec = eve_intercept(Pulse(S.H, 1550, 20.0), strat, det, rng, i)
        if rec.detected:
            detected += 1
            hits[(rec.measured_basis, rec.measured_bit)] += 1
    assert detected > n - 5  # 1 - e^-20
    assert hits[(R, 1)] == 0
    assert_binomial(hits[(R, 0)], detected, 0.5)
    assert_binomial(hits[(D, 0)], detected, 0.25)
    assert_binomial(hits[(D, 1)], detected, 0.25)


def test_intercept_ideal_detector_rate():
    rng = np.random.default_rng(22)
    n = 100_000
    k = sum(eve_intercept(Pulse(S.D), EveStrategy(), ideal_eve_detector(), rng).detected for _ in range(n))
    assert_binomial(k, n, 1 - math.exp(-1))


def test_resend_wavelength_mapping():
    strat = EveStrategy()
    p = eve_resend(EveRecord(0, True, R, 1), strat)
    assert (p.polarization, p.wavelength, p.mean_photon_number) == (S.V, 1470.0, 2.0)
    p = eve_resend(EveRecord(0, True, D, 0), strat)
    assert (p.polarization, p.wavelength) == (S.D, 1290.0)
    assert eve_resend(EveRecord(0), strat) is None


def test_resend_channels_combine_link_and_added():
    strat = EveStrategy(added_attenuation_db={1290: 1.5})
    assert strat.resend_channel(1470).attenuation_db == 3.3
    assert strat.resend_channel(1290).attenuation_db == 1.5


def test_strategy_validation():
    with pytest.raises(ValueError):
        EveStrategy(resend_wavelength={R: 1470})
    with pytest.raises(ValueError):
        EveStrategy(resend_mu=-1)
    with pytest.raises(ValueError):
        EveStrategy(added_attenuation_db={1470: -0.1})
    with pytest.raises(ValueError):
        EveRecord(0, True)


def test_unknown_resend_wavelength_names_device(receiver):
    strat = EveStrategy(resend_wavelength={R: 1480, D: 1290})
    with pytest.raises(UnknownWavelengthError) as info:
        unattenuated_click_rates(strat, receiver)
    assert "1480" in str(info.value)
    with pytest.raises(UnknownWavelengthError):
        reference_splitter().ratio(1480)


def _closed_form_db(strategy, det, w, target):
    # Solve 1 - exp(-mu 10^(-(L+x)/10) eta) = target for x.
    t_needed = -math.log(1 - target) / (strategy.resend_mu * det.efficiency_at(w))
    return -10 * math.log10(t_needed) - strategy.link_db.get(w, 0.0)


def test_balance_matches_closed_form(receiver):
    strat = EveStrategy()
    out = balance_attenuation(strat, receiver, 0.01)
    for w, db in out.items():
        assert db == pytest.approx(_closed_form_db(strat, receiver.detector, w, 0.01), abs=1e-9)
    assert out[1470.0] == pytest.approx(9.982331985, abs=1e-8)
    assert out[1290.0] == pytest.approx(9.978194251, abs=1e-8)


def test_balance_equalises_rates(receiver):
    strat = with_balanced_attenuation(EveStrategy(), receiver)
    rates = [
        detection_probability(Pulse(S.H, w, strat.resend_mu), strat.resend_channel(w), receiver.detector)
        for w in (1470.0, 1290.0)
    ]
    assert rates[0] == pytest.approx(rates[1], rel=1e-10)
    assert strat.added_attenuation_db[1290.0] == 0.0
    assert strat.added_attenuation_db[1470.0] == pytest.approx(0.00414, abs=5e-5)


def test_balance_adds_3db_for_half_target(receiver):
    # In the weak-pulse limit halving the target click rate costs about 3 dB.
    strat = EveStrategy()
    a = balance_attenuation(strat, receiver, 1e-4)
    b = balance_attenuation(strat, receiver, 5e-5)
    for w in a:
        assert b[w] - a[w] == pytest.approx(10 * math.log10(2), abs=1e-3)


def test_balance_rejects_unreachable_target(receiver):
    strat = EveStrategy()
    rates = unattenuated_click_rates(strat, receiver)
    with pytest.raises(ValueError, match="1290"):
        balance_attenuation(strat, receiver, rates[1290.0] * 1.01)
    dark_rx = dataclasses.replace(receiver, detector=dataclasses.replace(reference_detector(), dark_count_prob=1e-3))
    with pytest.raises(ValueError, match="dark-count floor"):
        balance_attenuation(strat, dark_rx, 1e-3)


def test_balance_exact_rate_needs_nothing(receiver):
    strat = EveStrategy()
    rates = unattenuated_click_rates(strat, receiver)
    out = balance_attenuation(strat, receiver, min(rates.values()))
    assert out[1290.0] == 0.0
