"""Wavelength-dependent splitter, lossy channel and detector models.

All wavelengths are plain floats in nanometres. Calibration tables are
looked up exactly; a wavelength missing from a table is an error, never an
interpolation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from scipy.optimize import least_squares

from .errors import DegenerateParametersError, FitError, UnknownWavelengthError
from .states import PolarizationState

Wavelength = float

SIGNAL_NM = 1550.0
RECT_RESEND_NM = 1470.0
DIAG_RESEND_NM = 1290.0

#: Exponent of the wavelength dependence of the coupling coefficient.
COUPLING_EXPONENT = 2.5


def check_wavelength(value) -> float:
    w = float(value)
    if not math.isfinite(w) or w <= 0:
        raise ValueError(f"wavelength must be a positive number of nm, got {value!r}")
    return w


def _check_probability(name: str, value) -> float:
    p = float(value)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    return p


def _frozen_table(name: str, table: Mapping) -> Mapping[float, float]:
    items = {}
    for w, v in table.items():
        items[check_wavelength(w)] = _check_probability(f"{name} at {w} nm", v)
    return MappingProxyType(dict(sorted(items.items())))


@dataclass(frozen=True)
class CouplingModel:
    """Periodic coupling law ``r = F**2 * sin(K * lambda**2.5 / F)**2``.

    ``K`` lumps the proportionality constant of the coupling coefficient and
    the heated-zone width into one phase coefficient, in nm**-2.5.
    """

    F: float
    K: float

    def __post_init__(self):
        if not (0.0 < self.F <= 1.0):
            raise ValueError(f"F must lie in (0, 1], got {self.F!r}")
        if not (self.K >= 0.0 and math.isfinite(self.K)):
            raise ValueError(f"K must be finite and >= 0, got {self.K!r}")

    def phase(self, wavelength) -> float:
        return self.K * float(wavelength) ** COUPLING_EXPONENT / self.F

    def __call__(self, wavelength):
        lam = np.asarray(wavelength, dtype=float)
        out = self.F**2 * np.sin(self.K * lam**COUPLING_EXPONENT / self.F) ** 2
        return float(out) if out.ndim == 0 else out


def coupling_ratio(model: CouplingModel, wavelength: Wavelength) -> float:
    """Port-1 probability predicted by ``model`` at ``wavelength``."""
    lam = check_wavelength(wavelength)
    return model.F**2 * math.sin(model.phase(lam)) ** 2


@dataclass(frozen=True)
class SplitterSpec:
    """1x2 splitter; ``ratio(lambda)`` is the probability of exiting port 1.

    Exactly one of ``table`` (measured ratios) or ``model`` is set.
    """

    table: Mapping[float, float] | None = None
    model: CouplingModel | None = None
    name: str = "splitter"

    def __post_init__(self):
        if (self.table is None) == (self.model is None):
            raise ValueError("SplitterSpec needs exactly one of table or model")
        if self.table is not None:
            object.__setattr__(self, "table", _frozen_table("coupling ratio", self.table))

    @classmethod
    def from_table(cls, table: Mapping, name: str = "splitter") -> "SplitterSpec":
        return cls(table=table, name=name)

    @classmethod
    def from_model(cls, model: CouplingModel, name: str = "splitter") -> "SplitterSpec":
        return cls(model=model, name=name)

    def ratio(self, wavelength: Wavelength) -> float:
        lam = check_wavelength(wavelength)
        if self.model is not None:
            return coupling_ratio(self.model, lam)
        try:
            return self.table[lam]
        except KeyError:
            raise UnknownWavelengthError(self.name, lam, self.table) from None

    def knows(self, wavelength: Wavelength) -> bool:
        return self.model is not None or float(wavelength) in self.table

    def describe(self) -> dict:
        if self.model is not None:
            return {"model": {"F": self.model.F, "K": self.model.K}}
        return {"table": {f"{w:g}": r for w, r in self.table.items()}}


@dataclass(frozen=True)
class DetectorSpec:
    efficiency: Mapping[float, float]
    dark_count_prob: float = 0.0
    name: str = "detector"

    def __post_init__(self):
        object.__setattr__(self, "efficiency", _frozen_table("efficiency", self.efficiency))
        object.__setattr__(
            self, "dark_count_prob", _check_probability("dark_count_prob", self.dark_count_prob)
        )

    def efficiency_at(self, wavelength: Wavelength) -> float:
        lam = check_wavelength(wavelength)
        try:
            return self.efficiency[lam]
        except KeyError:
            raise UnknownWavelengthError(self.name, lam, self.efficiency) from None

    def describe(self) -> dict:
        return {
            "efficiency": {f"{w:g}": e for w, e in self.efficiency.items()},
            "dark_count_prob": self.dark_count_prob,
        }


@dataclass(frozen=True)
class ChannelSpec:
    attenuation_db: float = 0.0

    def __post_init__(self):
        db = float(self.attenuation_db)
        if not (db >= 0.0 and math.isfinite(db)):
            raise ValueError(f"attenuation_db must be finite and >= 0, got {self.attenuation_db!r}")
        object.__setattr__(self, "attenuation_db", db)

    @property
    def transmission(self) -> float:
        return 10.0 ** (-self.attenuation_db / 10.0)


@dataclass(frozen=True)
class Pulse:
    polarization: PolarizationState
    wavelength: float = SIGNAL_NM
    mean_photon_number: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "polarization", PolarizationState(self.polarization))
        object.__setattr__(self, "wavelength", check_wavelength(self.wavelength))
        mu = float(self.mean_photon_number)
        if not (mu >= 0.0 and math.isfinite(mu)):
            raise ValueError(f"mean photon number must be >= 0, got {self.mean_photon_number!r}")
        object.__setattr__(self, "mean_photon_number", mu)


def transmission(channel: ChannelSpec) -> float:
    return channel.transmission


def detection_probability(pulse: Pulse | None, channel: ChannelSpec, detector: DetectorSpec) -> float:
    """Probability of at least one click in the gate.

    Poissonian photon statistics with an independent dark count:
    ``1 - (1 - dark) * exp(-mu * t * eta)``. ``pulse=None`` is an empty gate.
    """
    return click_split(pulse, channel, detector).total


class ClickSplit(NamedTuple):
    """Click probabilities partitioned by cause.

    ``multi`` <= ``signal`` are the probabilities of >= 2 and >= 1 detected
    photons; ``dark_only`` is a dark count in a gate with no detected photon.
    """

    multi: float
    signal: float
    dark_only: float

    @property
    def total(self) -> float:
        return self.signal + self.dark_only


def click_split(pulse: Pulse | None, channel: ChannelSpec, detector: DetectorSpec) -> ClickSplit:
    dark = detector.dark_count_prob
    if pulse is None:
        return ClickSplit(0.0, 0.0, dark)
    eta = detector.efficiency_at(pulse.wavelength)
    m = pulse.mean_photon_number * channel.transmission * eta
    none = math.exp(-m)
    signal = -math.expm1(-m)
    multi = max(0.0, signal - m * none)
    return ClickSplit(multi, signal, (1.0 - signal) * dark)


def route_photon(splitter: SplitterSpec, wavelength: Wavelength, rng: np.random.Generator, size=None):
    """Draw the output port (1 or 2); port 1 with probability ``ratio(wavelength)``."""
    r = splitter.ratio(wavelength)
    u = rng.random(size)
    if size is None:
        return 1 if u < r else 2
    return np.where(u < r, 1, 2)


# ---------------------------------------------------------------------------
# Fitting the coupling law


@dataclass(frozen=True)
class FitCandidate:
    model: CouplingModel
    residuals: tuple[float, ...]
    objective: float
    branch: int = field(compare=False)

    @property
    def max_abs_residual(self) -> float:
        return max(abs(r) for r in self.residuals)


#: Candidates whose sum of squares is within this of the best are ties.
FIT_TIE_TOLERANCE = 1e-9


def _validate_points(points) -> tuple[np.ndarray, np.ndarray]:
    pts = [(check_wavelength(w), float(r)) for w, r in points]
    if len(pts) < 2:
        raise ValueError(f"need at least 2 points to fit, got {len(pts)}")
    lam = np.array([p[0] for p in pts])
    ratio = np.array([p[1] for p in pts])
    if np.any((ratio < 0) | (ratio > 1)) or not np.all(np.isfinite(ratio)):
        raise ValueError("all ratios must lie in [0, 1]")
    if len(np.unique(lam)) != len(lam):
        raise ValueError("wavelengths must be distinct")
    if np.all(ratio == 0):
        raise DegenerateParametersError("all ratios are 0: F is unidentifiable")
    return lam, ratio


def fit_candidates(points: Sequence[tuple[float, float]], branch_limit: int = 20) -> list[FitCandidate]:
    """Local least-squares optima of the coupling law, best first.

    The sin**2 law is periodic so the objective has many local minima. Each
    start pins the first point's phase to one of the two in-branch solutions
    for branches ``0..branch_limit`` and a small grid of amplitudes, then
    polishes with bounded least squares. Duplicate optima are merged.
    """
    if int(branch_limit) != branch_limit or branch_limit < 0:
        raise ValueError(f"branch_limit must be a non-negative integer, got {branch_limit!r}")
    lam, ratio = _validate_points(points)
    lam0 = lam[0]
    scale = (lam / lam0) ** COUPLING_EXPONENT
    # optimise (F, g) with g = K * lam0**2.5, which is O(phase) rather than O(1e-8)

    def resid(p):
        F, g = p
        return F**2 * np.sin(g * scale / F) ** 2 - ratio

    def jac(p):
        F, g = p
        arg = g * scale / F
        s, c = np.sin(arg), np.cos(arg)
        d_arg_F = -arg / F
        d_F = 2 * F * s**2 + F**2 * 2 * s * c * d_arg_F
        d_g = F**2 * 2 * s * c * scale / F
        return np.column_stack([d_F, d_g])

    def solve(p0, tol, nfev):
        try:
            sol = least_squares(
                resid, p0, jac=jac, bounds=([1e-9, 0.0], [1.0, np.inf]),
                xtol=tol, ftol=tol, gtol=tol, max_nfev=nfev,
            )
        except (ValueError, FloatingPointError):
            return None
        if not np.all(np.isfinite(sol.x)):
            return None
        return sol

    f_min = math.sqrt(ratio.max())
    f_starts = np.unique(np.linspace(max(f_min, 1e-3), 1.0, 4))
    coarse: dict[tuple, tuple] = {}
    best_failed = None
    for n in range(int(branch_limit) + 1):
        for F0 in f_starts:
            a = math.asin(min(1.0, math.sqrt(ratio[0]) / F0))
            for phi in (a + n * math.pi, (n + 1) * math.pi - a):
                sol = solve([F0, phi * F0], 1e-8, 200)
                if sol is None:
                    continue
                if best_failed is None or sol.cost < best_failed.cost:
                    best_failed = sol
                if sol.status <= 0:
                    continue
                key = (round(sol.x[0], 5), round(sol.x[1], 4))
                if key not in coarse or sol.cost < coarse[key][1]:
                    coarse[key] = (n, sol.cost, sol.x)

    found: dict[tuple, FitCandidate] = {}
    for n, _, x0 in coarse.values():
        sol = solve(x0, 1e-15, 2000)
        if sol is None or sol.status <= 0:
            continue
        F, g = (float(v) for v in sol.x)
        model = CouplingModel(F=min(F, 1.0), K=max(g, 0.0) / float(lam0) ** COUPLING_EXPONENT)
        res = resid([model.F, model.K * float(lam0) ** COUPLING_EXPONENT])
        cand = FitCandidate(model, tuple(float(x) for x in res), float(res @ res), n)
        key = (round(model.F, 9), round(g, 7))
        if key not in found or cand.objective < found[key].objective:
            found[key] = cand
    if not found:
        residuals = None if best_failed is None else [float(x) for x in best_failed.fun]
        raise FitError(f"no start converged over branches 0..{branch_limit}", residuals)
    return sorted(found.values(), key=lambda c: (c.objective, c.model.K))


def fit_coupling_model(
    points: Sequence[tuple[float, float]], branch_limit: int = 20
) -> tuple[CouplingModel, list[float]]:
    """Least-squares ``(F, K)`` for measured ``(wavelength_nm, ratio)`` points.

    Among optima whose objective is within ``FIT_TIE_TOLERANCE`` of the best,
    the smallest ``K`` wins, so the result is deterministic.

    Raises:
        ValueError: fewer than two points, ratios outside [0, 1] or repeated
            wavelengths.
        DegenerateParametersError: every ratio is zero.
        FitError: no start converged; ``residuals`` holds the best attempt.
    """
    cands = fit_candidates(points, branch_limit)
    best = cands[0].objective
    tied = [c for c in cands if c.objective <= best + FIT_TIE_TOLERANCE]
    pick = min(tied, key=lambda c: c.model.K)
    return pick.model, list(pick.residuals)


# ---------------------------------------------------------------------------
# Measured devices


def reference_splitter() -> SplitterSpec:
    """The FBT splitter measured at the three laser wavelengths."""
    return SplitterSpec.from_table(
        {SIGNAL_NM: 0.5, RECT_RESEND_NM: 0.986, DIAG_RESEND_NM: 0.003}, name="bob splitter"
    )


def reference_detector(dark_count_prob: float = 0.0) -> DetectorSpec:
    """InGaAs gated detector efficiencies at the three laser wavelengths."""
    return DetectorSpec(
        {SIGNAL_NM: 0.121, RECT_RESEND_NM: 0.107, DIAG_RESEND_NM: 0.050},
        dark_count_prob=dark_count_prob,
        name="bob detector",
    )


REFERENCE_COUPLING_POINTS = ((SIGNAL_NM, 0.5), (RECT_RESEND_NM, 0.986), (DIAG_RESEND_NM, 0.003))
NO_EVE_CHANNEL_DB = 10.79
