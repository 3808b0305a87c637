"""Wavelength-dependent beam-splitter attack on passive-basis polarization BB84.

Closed-form attack statistics, a fit of the fused-coupler wavelength law and
a seeded Monte Carlo of the full Alice/Eve/Bob chain.
"""
from .adversary import (
    EveRecord,
    EveStrategy,
    balance_attenuation,
    eve_intercept,
    eve_resend,
    ideal_eve_detector,
    with_balanced_attenuation,
)
from .analysis import (
    AttackParameters,
    Category,
    TreeLeaf,
    enumerate_attack,
    eve_basis_match_closed_form,
    pooled_qber_closed_form,
    qber_eq2,
    sweep_correlation,
    tree_probabilities,
)
from .config import ScenarioConfig, load_config, reference_scenario, read_table
from .errors import (
    ConfigError,
    DegenerateParametersError,
    FitError,
    TableError,
    UnknownWavelengthError,
    WdbsError,
)
from .kernel import BACKEND
from .optics import (
    ChannelSpec,
    CouplingModel,
    DetectorSpec,
    Pulse,
    SplitterSpec,
    coupling_ratio,
    detection_probability,
    fit_candidates,
    fit_coupling_model,
    reference_detector,
    reference_splitter,
    route_photon,
    transmission,
)
from .protocol import (
    AliceRecord,
    BobRecord,
    ClickKind,
    QberEstimate,
    ReceiverSpec,
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
from .simulation import SimulationReport, detection_histogram, run_simulation, simulate_records
from .states import Basis, PolarizationState

__version__ = "0.1.0"
