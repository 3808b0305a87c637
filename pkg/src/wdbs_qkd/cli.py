"""Command-line interface: ``qber``, ``fit``, ``simulate`` and ``sweep``.

Exit status is 0 on success, 1 on invalid input (arguments, tables,
configs, degenerate parameters) and 2 on runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from pathlib import Path

from .analysis import (
    AttackParameters,
    eve_basis_match_closed_form,
    pooled_qber_closed_form,
    qber_eq2,
    sweep_correlation,
)
from .config import load_config, read_table, resolve_path
from .errors import ConfigError, DegenerateParametersError, FitError, TableError, WdbsError
from .optics import coupling_ratio, fit_candidates, fit_coupling_model
from .protocol import secret_key_fraction
from .simulation import OUTCOME_COLUMNS, SimulationReport, detection_histogram, run_simulation
from .states import PolarizationState

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

HISTOGRAM_HEADER = ("sent_state", "basis", "bit", "count")
SUMMARY_HEADER = (
    "total_pulses", "clicks", "sifted", "pooled_qber", "basis_avg_qber", "qber_rect",
    "qber_diag", "eve_basis_match", "key_fraction", "seed", "config_digest",
)
SWEEP_HEADER = ("r1", "r2", "err_eq2", "err_pooled", "eve_basis_match", "key_fraction", "degenerate_flag")
CURVE_HEADER = ("lambda_nm", "ratio")
CURVE_RANGE_NM = (1200, 1700)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def fmt(x) -> str:
    """Fixed six-decimal rendering; ``None``/NaN become ``nan``."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return f"{x:.6f}"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def histogram_csv(report: SimulationReport) -> str:
    hist = detection_histogram(report)
    rows = []
    for state in PolarizationState:
        for col, (basis, bit) in enumerate(OUTCOME_COLUMNS):
            rows.append((state.name, basis.label, bit, int(hist[state, col])))
    return _csv_text(HISTOGRAM_HEADER, rows)


def summary_csv(report: SimulationReport) -> str:
    rect, diag = report.per_basis_qber
    row = (
        report.total_pulses, report.clicks, report.sifted_count,
        fmt(report.pooled_qber), fmt(report.basis_averaged_qber), fmt(rect), fmt(diag),
        fmt(report.eve_basis_match_fraction), fmt(report.key_fraction),
        report.seed, report.config_digest,
    )
    return _csv_text(SUMMARY_HEADER, [row])


def _write(out_dir: Path, name: str, text: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(text)
    return path


# ---------------------------------------------------------------------------


def cmd_qber(args) -> int:
    try:
        p = AttackParameters(args.r1, args.r2)
        err = qber_eq2(p)
    except (ValueError, DegenerateParametersError) as exc:
        print(f"qber: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(f"err_eq2 {fmt(err)}")
    print(f"err_pooled {fmt(pooled_qber_closed_form(p))}")
    print(f"eve_basis_match {fmt(eve_basis_match_closed_form(p))}")
    print(f"key_fraction {fmt(secret_key_fraction(err))}")
    return EXIT_OK


def cmd_fit(args) -> int:
    table = read_table(resolve_path(args.table))
    points = list(table.items())
    model, residuals = fit_coupling_model(points, args.branch_limit)
    n_cand = len(fit_candidates(points, args.branch_limit)) if args.candidates else None
    print(f"F {model.F:.9f}")
    print(f"K {model.K:.9e}")
    for (w, r), res in zip(points, residuals):
        print(f"residual {w:g} {r:.6f} {res:+.6e}")
    print(f"max_abs_residual {max(abs(x) for x in residuals):.6e}")
    if n_cand is not None:
        print(f"candidates {n_cand}")
    lo, hi = CURVE_RANGE_NM
    rows = [(w, fmt(coupling_ratio(model, w))) for w in range(lo, hi + 1)]
    path = _write(Path(args.out_dir), "curve.csv", _csv_text(CURVE_HEADER, rows))
    print(f"curve {path}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = load_config(args.config)
    report = run_simulation(config, seed=args.seed, pulses=args.pulses, workers=args.workers, backend=args.backend)
    out = Path(args.out_dir)
    _write(out, "histogram.csv", histogram_csv(report))
    _write(out, "summary.csv", summary_csv(report))
    print(
        f"pulses={report.total_pulses} clicks={report.clicks} sifted={report.sifted_count} "
        f"pooled_qber={fmt(report.pooled_qber)} basis_avg_qber={fmt(report.basis_averaged_qber)} "
        f"eve_basis_match={fmt(report.eve_basis_match_fraction)} key_fraction={fmt(report.key_fraction)} "
        f"seed={report.seed} digest={report.config_digest}"
    )
    return EXIT_OK


def parse_range(text: str) -> tuple[float, float]:
    parts = text.split(":")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"malformed range {text!r}; use MIN:MAX or a single value") from None
    if len(vals) == 1:
        vals = vals * 2
    if len(vals) != 2 or vals[0] > vals[1]:
        raise UsageError(f"malformed range {text!r}; use MIN:MAX with MIN <= MAX")
    return vals[0], vals[1]


def grid_values(lo: float, hi: float, step: float) -> list[float]:
    if not step > 0:
        raise UsageError(f"step must be > 0, got {step!r}")
    n = int(math.floor((hi - lo) / step + 1e-9))
    return [min(hi, round(lo + i * step, 12)) for i in range(n + 1)]


def cmd_sweep(args) -> int:
    r1s = grid_values(*parse_range(args.r1), args.step)
    r2s = grid_values(*parse_range(args.r2), args.step)
    rows = sweep_correlation((a, b) for a in r1s for b in r2s)
    table = [
        (fmt(r.r1), fmt(r.r2), fmt(r.err_eq2), fmt(r.err_pooled), fmt(r.eve_basis_match),
         fmt(r.key_fraction), int(r.degenerate))
        for r in rows
    ]
    path = _write(Path(args.out_dir), "sweep.csv", _csv_text(SWEEP_HEADER, table))
    flagged = sum(r.degenerate for r in rows)
    print(f"rows={len(rows)} degenerate={flagged} sweep={path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wdbs-qkd", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    q = sub.add_parser("qber", help="closed-form QBER, Eve basis match and key fraction")
    q.add_argument("--r1", type=float, required=True, help="port-1 ratio at the rectilinear resend wavelength")
    q.add_argument("--r2", type=float, required=True, help="port-1 ratio at the diagonal resend wavelength")
    q.set_defaults(func=cmd_qber)

    f = sub.add_parser("fit", help="fit the coupling law to a wavelength/ratio table")
    f.add_argument("table", help="wavelength_nm<TAB>ratio table")
    f.add_argument("--branch-limit", type=int, default=20, help="highest phase branch tried (default 20)")
    f.add_argument("--out-dir", default=".", help="where curve.csv is written")
    f.add_argument("--candidates", action="store_true", help="also report the number of distinct local optima")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", help="run a scenario config and write histogram.csv and summary.csv")
    s.add_argument("config", help="scenario .cfg path, or bundled:no_eve.cfg / bundled:attack.cfg")
    s.add_argument("--seed", type=int, default=None, help="override run.seed")
    s.add_argument("--pulses", type=int, default=None, help="override run.pulses")
    s.add_argument("--out-dir", default=".")
    s.add_argument("--workers", type=int, default=1, help="threads; never changes the output")
    s.add_argument("--backend", choices=("python", "cython"), default=None, help="kernel backend")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="closed-form table over a (r1, r2) grid")
    w.add_argument("--r1", default="0:1", help="MIN:MAX or a single value (default 0:1)")
    w.add_argument("--r2", default="0:1", help="MIN:MAX or a single value (default 0:1)")
    w.add_argument("--step", type=float, default=0.1)
    w.add_argument("--out-dir", default=".")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "pulses", None) is not None and args.pulses < 0:
            raise UsageError("--pulses must be >= 0")
        if getattr(args, "seed", None) is not None and args.seed < 0:
            raise UsageError("--seed must be >= 0")
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except (ConfigError, TableError, DegenerateParametersError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.residuals is not None:
            print(f"best residuals: {', '.join(f'{r:+.3e}' for r in exc.residuals)}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (WdbsError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
