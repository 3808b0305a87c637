"""Scenario configuration, device tables and the config digest.

Device tables are line-oriented text, one ``wavelength_nm<TAB>value``
record per line; blank lines and ``#`` comments are ignored, and any run
of whitespace or a comma is accepted as the separator.

Scenario files are INI (``configparser``)::

    [source]
    wavelength_nm = 1550
    mean_photon_number = 1
    states = H V D A

    [bob]
    splitter_table = reference_splitter.tsv   ; or splitter_F + splitter_K
    detector_table = reference_detector.tsv
    dark_count_prob = 0
    channel_db = 10.79
    intrinsic_error = 0.013

    [eve]
    enabled = true
    rect_wavelength_nm = 1470
    diag_wavelength_nm = 1290
    resend_mu = 2
    link_db = 1470:3.3, 1290:0
    added_attenuation_db =                ; explicit per-wavelength dB, or
    balance_target = auto                 ; auto | none | click probability
    channel_from_alice_db = 0
    splitter_table = reference_splitter.tsv
    detector_table = eve_detector.tsv
    dark_count_prob = 0

    [run]
    pulses = 1000000
    seed = 1

Table paths are relative to the scenario file. A path written
``bundled:NAME`` refers to the copies shipped in ``wdbs_qkd/data``.
"""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .adversary import EveStrategy, ideal_eve_detector, with_balanced_attenuation
from .errors import ConfigError, TableError, WdbsError
from .optics import (
    NO_EVE_CHANNEL_DB,
    ChannelSpec,
    CouplingModel,
    DetectorSpec,
    SplitterSpec,
    reference_detector,
    reference_splitter,
)
from .protocol import ReceiverSpec, SourceSpec
from .states import Basis, PolarizationState

BUNDLED_PREFIX = "bundled:"

DEFAULT_PULSES = 1_000_000
DEFAULT_SEED = 20120


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("wdbs_qkd") / "data" / name))


def resolve_path(value: str, base_dir: Path | None = None) -> Path:
    if value.startswith(BUNDLED_PREFIX):
        return bundled_path(value[len(BUNDLED_PREFIX):])
    p = Path(value)
    if not p.is_absolute() and base_dir is not None:
        p = base_dir / p
    return p


def read_table(path) -> dict[float, float]:
    """Parse a device table into ``{wavelength_nm: value}``."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise TableError(path, f"cannot read table: {exc.strerror or exc}") from None
    table: dict[float, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise TableError(path, f"expected 'wavelength_nm<TAB>value', got {raw.strip()!r}", lineno)
        try:
            w, v = float(parts[0]), float(parts[1])
        except ValueError:
            raise TableError(path, f"non-numeric field in {raw.strip()!r}", lineno) from None
        if not w > 0:
            raise TableError(path, f"wavelength must be positive, got {parts[0]}", lineno)
        if w in table:
            raise TableError(path, f"duplicate wavelength {parts[0]}", lineno)
        table[w] = v
    if not table:
        raise TableError(path, "table is empty")
    return table


def write_table(path, table, header: str | None = None) -> None:
    lines = [f"# {header}"] if header else []
    lines += [f"{w:g}\t{v:g}" for w, v in sorted(table.items())]
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class ScenarioConfig:
    source: SourceSpec = field(default_factory=SourceSpec)
    receiver: ReceiverSpec = field(
        default_factory=lambda: ReceiverSpec(reference_splitter(), reference_detector(), ChannelSpec(NO_EVE_CHANNEL_DB))
    )
    eve_enabled: bool = False
    strategy: EveStrategy = field(default_factory=EveStrategy)
    eve_detector: DetectorSpec = field(default_factory=ideal_eve_detector)
    pulses: int = DEFAULT_PULSES
    seed: int = DEFAULT_SEED
    balance_target: str = "none"

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def with_intrinsic_error(self, e: float) -> "ScenarioConfig":
        return self.replace(receiver=dataclasses.replace(self.receiver, intrinsic_error=e))

    def describe(self) -> dict:
        """Plain-data view of every resolved field; the digest is taken over this."""
        rx = self.receiver
        st = self.strategy
        return {
            "source": {
                "wavelength_nm": self.source.wavelength,
                "mean_photon_number": self.source.mean_photon_number,
                "states": [s.name for s in self.source.states],
            },
            "bob": {
                "splitter": rx.splitter.describe(),
                "detector": rx.detector.describe(),
                "channel_db": rx.channel.attenuation_db,
                "intrinsic_error": rx.intrinsic_error,
            },
            "eve": {
                "enabled": self.eve_enabled,
                "resend_wavelength": {b.label: st.resend_wavelength[b] for b in Basis},
                "resend_mu": st.resend_mu,
                "link_db": {f"{w:g}": v for w, v in st.link_db.items()},
                "added_attenuation_db": {f"{w:g}": v for w, v in st.added_attenuation_db.items()},
                "balance_target": self.balance_target,
                "channel_from_alice_db": st.eve_channel_from_alice.attenuation_db,
                "splitter": st.eve_splitter.describe(),
                "detector": self.eve_detector.describe(),
            },
            "run": {"pulses": self.pulses, "seed": self.seed},
        }

    def digest(self) -> str:
        blob = json.dumps(self.describe(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def validate(self) -> "ScenarioConfig":
        """Check that every device can resolve every wavelength on its path."""
        problems = []
        lam_a = self.source.wavelength
        rx = self.receiver
        if not isinstance(self.pulses, int) or self.pulses < 0:
            problems.append(("run.pulses", f"must be a non-negative integer, got {self.pulses!r}"))
        if not isinstance(self.seed, int) or self.seed < 0:
            problems.append(("run.seed", f"must be a non-negative integer, got {self.seed!r}"))
        if self.eve_enabled:
            if not self.strategy.eve_splitter.knows(lam_a):
                problems.append(("eve.splitter_table", f"no coupling ratio for source wavelength {lam_a:g} nm"))
            if lam_a not in self.eve_detector.efficiency:
                problems.append(("eve.detector_table", f"no efficiency for source wavelength {lam_a:g} nm"))
            for basis in Basis:
                w = self.strategy.resend_wavelength[basis]
                key = "rect_wavelength_nm" if basis is Basis.RECTILINEAR else "diag_wavelength_nm"
                if not rx.splitter.knows(w):
                    problems.append(("bob.splitter_table", f"no coupling ratio for eve.{key} = {w:g} nm"))
                if w not in rx.detector.efficiency:
                    problems.append(("bob.detector_table", f"no efficiency for eve.{key} = {w:g} nm"))
        else:
            if not rx.splitter.knows(lam_a):
                problems.append(("bob.splitter_table", f"no coupling ratio for source wavelength {lam_a:g} nm"))
            if lam_a not in rx.detector.efficiency:
                problems.append(("bob.detector_table", f"no efficiency for source wavelength {lam_a:g} nm"))
        if problems:
            raise ConfigError(problems)
        return self


def reference_scenario(eve: bool = False, intrinsic_error: float = 0.0, **run) -> ScenarioConfig:
    """The two laboratory runs: 10.79 dB fibre without Eve, balanced attack with her."""
    cfg = ScenarioConfig(eve_enabled=eve, **run).with_intrinsic_error(intrinsic_error)
    if eve:
        cfg = cfg.replace(
            strategy=with_balanced_attenuation(cfg.strategy, cfg.receiver), balance_target="auto"
        )
    return cfg.validate()


# ---------------------------------------------------------------------------
# INI loading

_SECTIONS = {
    "source": {"wavelength_nm", "mean_photon_number", "states"},
    "bob": {"splitter_table", "splitter_F", "splitter_K", "detector_table", "dark_count_prob",
            "channel_db", "intrinsic_error"},
    "eve": {"enabled", "rect_wavelength_nm", "diag_wavelength_nm", "resend_mu", "link_db",
            "added_attenuation_db", "balance_target", "channel_from_alice_db", "splitter_table",
            "splitter_F", "splitter_K", "detector_table", "dark_count_prob"},
    "run": {"pulses", "seed"},
}


class _Reader:
    """Pulls typed values out of a ConfigParser while collecting problems."""

    def __init__(self, parser: configparser.ConfigParser, base_dir: Path | None):
        self.cp = parser
        self.base_dir = base_dir
        self.problems: list[tuple[str, str]] = []

    def has(self, section, key):
        return self.cp.has_option(section, key) and self.cp.get(section, key).strip() != ""

    def raw(self, section, key, default=None):
        return self.cp.get(section, key).strip() if self.has(section, key) else default

    def number(self, section, key, default, kind=float):
        text = self.raw(section, key)
        if text is None:
            return default
        try:
            return kind(text)
        except ValueError:
            self.problems.append((f"{section}.{key}", f"expected {kind.__name__}, got {text!r}"))
            return default

    def boolean(self, section, key, default):
        if not self.has(section, key):
            return default
        try:
            return self.cp.getboolean(section, key)
        except ValueError:
            self.problems.append((f"{section}.{key}", f"expected true/false, got {self.raw(section, key)!r}"))
            return default

    def table(self, section, key):
        text = self.raw(section, key)
        if text is None:
            return None
        try:
            return read_table(resolve_path(text, self.base_dir))
        except TableError as exc:
            self.problems.append((f"{section}.{key}", str(exc)))
            return None

    def db_map(self, section, key, default):
        text = self.raw(section, key)
        if text is None:
            return default
        out = {}
        for item in text.split(","):
            item = item.strip()
            if not item:
                continue
            try:
                w, db = item.split(":")
                out[float(w)] = float(db)
            except ValueError:
                self.problems.append((f"{section}.{key}", f"expected 'nm:dB, ...', got {item!r}"))
                return default
        return out

    def build(self, section, key, factory, *args, **kwargs):
        try:
            return factory(*args, **kwargs)
        except (ValueError, WdbsError) as exc:
            self.problems.append((f"{section}.{key}", str(exc)))
            return None


def _splitter(rd: _Reader, section: str, default: SplitterSpec, name: str):
    if rd.has(section, "splitter_F") or rd.has(section, "splitter_K"):
        F = rd.number(section, "splitter_F", 1.0)
        K = rd.number(section, "splitter_K", 0.0)
        model = rd.build(section, "splitter_F", CouplingModel, F, K)
        return SplitterSpec.from_model(model, name) if model else default
    table = rd.table(section, "splitter_table")
    if table is None:
        return default
    return rd.build(section, "splitter_table", SplitterSpec.from_table, table, name) or default


def _detector(rd: _Reader, section: str, default: DetectorSpec, name: str):
    table = rd.table(section, "detector_table")
    dark = rd.number(section, "dark_count_prob", default.dark_count_prob)
    eff = table if table is not None else default.efficiency
    return rd.build(section, "detector_table", DetectorSpec, eff, dark, name) or default


def config_from_parser(cp: configparser.ConfigParser, base_dir: Path | None = None) -> ScenarioConfig:
    rd = _Reader(cp, base_dir)
    for section in cp.sections():
        if section not in _SECTIONS:
            rd.problems.append((section, "unknown section"))
            continue
        for key in cp.options(section):
            if key not in _SECTIONS[section]:
                rd.problems.append((f"{section}.{key}", "unknown key"))
    base = ScenarioConfig()

    states_txt = rd.raw("source", "states")
    states = base.source.states
    if states_txt is not None:
        try:
            states = tuple(PolarizationState[s.upper()] for s in states_txt.replace(",", " ").split())
        except KeyError as exc:
            rd.problems.append(("source.states", f"unknown state {exc.args[0]!r}; use H, V, D, A"))
    source = rd.build(
        "source", "wavelength_nm", SourceSpec,
        rd.number("source", "wavelength_nm", base.source.wavelength),
        rd.number("source", "mean_photon_number", base.source.mean_photon_number),
        states,
    ) or base.source

    brx = base.receiver
    receiver = rd.build(
        "bob", "channel_db", ReceiverSpec,
        _splitter(rd, "bob", brx.splitter, "bob splitter"),
        _detector(rd, "bob", brx.detector, "bob detector"),
        rd.build("bob", "channel_db", ChannelSpec, rd.number("bob", "channel_db", brx.channel.attenuation_db))
        or brx.channel,
        rd.number("bob", "intrinsic_error", brx.intrinsic_error),
    ) or brx

    bst = base.strategy
    resend = {
        Basis.RECTILINEAR: rd.number("eve", "rect_wavelength_nm", bst.resend_wavelength[Basis.RECTILINEAR]),
        Basis.DIAGONAL: rd.number("eve", "diag_wavelength_nm", bst.resend_wavelength[Basis.DIAGONAL]),
    }
    strategy = rd.build(
        "eve", "resend_mu", EveStrategy,
        resend_wavelength=resend,
        resend_mu=rd.number("eve", "resend_mu", bst.resend_mu),
        link_db=rd.db_map("eve", "link_db", dict(bst.link_db)),
        added_attenuation_db=rd.db_map("eve", "added_attenuation_db", {}),
        eve_splitter=_splitter(rd, "eve", bst.eve_splitter, "eve splitter"),
        eve_channel_from_alice=rd.build(
            "eve", "channel_from_alice_db", ChannelSpec, rd.number("eve", "channel_from_alice_db", 0.0)
        ) or ChannelSpec(0.0),
    ) or bst
    eve_detector = _detector(rd, "eve", base.eve_detector, "eve detector")
    eve_enabled = rd.boolean("eve", "enabled", False)

    balance = (rd.raw("eve", "balance_target", "none") or "none").lower()
    if eve_enabled and balance != "none":
        if rd.has("eve", "added_attenuation_db"):
            rd.problems.append(("eve.balance_target", "conflicts with eve.added_attenuation_db; set only one"))
        else:
            target = None
            if balance != "auto":
                try:
                    target = float(balance)
                except ValueError:
                    rd.problems.append(("eve.balance_target", f"expected auto, none or a probability, got {balance!r}"))
                    balance = "none"
            if balance != "none":
                strategy = rd.build(
                    "eve", "balance_target", with_balanced_attenuation, strategy, receiver, target
                ) or strategy

    cfg = ScenarioConfig(
        source=source,
        receiver=receiver,
        eve_enabled=eve_enabled,
        strategy=strategy,
        eve_detector=eve_detector,
        pulses=rd.number("run", "pulses", DEFAULT_PULSES, int),
        seed=rd.number("run", "seed", DEFAULT_SEED, int),
        balance_target=balance if eve_enabled else "none",
    )
    if rd.problems:
        raise ConfigError(rd.problems)
    return cfg.validate()


def load_config(path) -> ScenarioConfig:
    """Read and validate a scenario file (``bundled:NAME`` allowed)."""
    path = resolve_path(str(path))
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError([(str(path), f"cannot read config: {exc.strerror or exc}")]) from None
    except configparser.Error as exc:
        raise ConfigError([(str(path), f"syntax error: {exc}")]) from None
    return config_from_parser(cp, path.parent)
