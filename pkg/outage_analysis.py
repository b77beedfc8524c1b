"""
Command-line front end: single-point outage, P_T sweeps, truncation and ℓ studies,
diversity estimates and standalone Monte Carlo runs.

    python outage_analysis.py sweep --config configs/outage_vs_power.json --out outage_vs_power.csv

Exit codes: 0 success, 2 configuration error, 3 series term cap exceeded.
"""
from __future__ import annotations

import argparse
import json
import logging
import logging.config
import os
import sys
import time
import tracemalloc
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from apps.harq import config as run_config
from apps.harq.channel_model import ChannelSpec
from apps.harq.errors import ConfigError, HarqError
from apps.harq.services import (
    ELL_HEADER,
    SWEEP_HEADER,
    TRUNCATION_GRID_HEADER,
    TRUNCATION_HEADER,
    svc_diversity,
    svc_ell_study,
    svc_mc,
    svc_outage,
    svc_series_cost,
    svc_sweep,
    svc_truncation_grid,
    svc_truncation_study,
)
from build_report import build_reports, render_output

logger = logging.getLogger("outage_analysis")

LOG_CONFIG_ENV = "HARQ_LOG_CONFIG"
DEFAULT_LOG_CONFIG = Path(__file__).resolve().parent / "logging.ini"
BOUND_NOTE = "outage_true lies in [outage_series, outage_series + bound]; bound = q^(N+1), q = S/(1+S)"
MC_HEADER = ("p_total_db", "p_hat", "stderr", "samples", "failures", "ci95_low", "ci95_high", "rare_event")
DIVERSITY_HEADER = ("p_total_db", "p_total_linear", "outage_series")


def load_json_config(file_path: str) -> tuple[dict, str]:
    """
    Reads a JSON run configuration and returns its contents as a python dictionary,
    plus an error string when the file could not be parsed.
    """
    data = {}
    error = ""

    path = Path(file_path)

    if not path.is_file():
        raise ConfigError(f"config file not found: {file_path}")

    with path.open("r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except Exception as e:
            error = str(e)

    if not error and not isinstance(data, dict):
        error = "config must be a JSON object"
    return data, error


def configure_logging(verbose: bool = False) -> None:
    path = Path(os.getenv(LOG_CONFIG_ENV) or DEFAULT_LOG_CONFIG)
    if path.is_file():
        logging.config.fileConfig(path, disable_existing_loggers=False)
    else:
        logging.basicConfig(level=logging.WARNING, format="%(levelname)-5.5s [%(name)s] %(message)s")
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)


def _channel_notes(spec: ChannelSpec, fractions: Sequence[float], eps: Optional[float] = None) -> List[str]:
    line = (
        f"K={spec.K} rho={spec.rho!r} delta={spec.delta!r} rate={spec.rate!r} "
        f"sigma_sq={list(spec.sigma_sq)} p_fractions={list(fractions)}"
    )
    if eps is not None:
        line += f" eps={eps!r}"
    return [line]


def _document(command: str, raw: Dict[str, Any], columns, rows, notes, summary=None) -> Dict[str, Any]:
    return {
        "command": command,
        "config": raw,
        "notes": notes,
        "columns": list(columns),
        "rows": rows,
        "summary": summary or {},
    }


def cmd_outage(raw: Dict[str, Any], args: argparse.Namespace) -> Dict[str, Any]:
    """Single point: series value, certified bound, N used, asymptotic and optional cross-checks."""
    spec, fractions = run_config.parse_channel(raw)
    eps = run_config.parse_eps(raw)
    db = run_config.parse_point_db(raw)
    mc = run_config.parse_mc(raw, args.seed)
    cost = svc_series_cost(spec, eps)
    logger.info("eps=%g needs N=%d (%d terms)", eps, cost["order"], cost["terms"])

    report = svc_outage(spec, fractions, db, eps, mc, run_config.parse_nodes(raw))
    row = {col: report.get(col) for col in SWEEP_HEADER}
    if "mc" in report:
        row["mc_p_hat"] = report["mc"]["p_hat"]
        row["mc_stderr"] = report["mc"]["stderr"]
    notes = [BOUND_NOTE] + _channel_notes(spec, fractions, eps)
    if report.get("mc", {}).get("rare_event"):
        notes.append("mc: rare-event regime, estimate unreliable")
    return _document("outage", raw, SWEEP_HEADER, [row], notes, report)


def cmd_sweep(raw: Dict[str, Any], args: argparse.Namespace) -> Dict[str, Any]:
    """P_T sweep, one CSV row per dB grid point."""
    spec, fractions = run_config.parse_channel(raw)
    eps = run_config.parse_eps(raw)
    grid = run_config.parse_db_grid(raw)
    mc = run_config.parse_mc(raw, args.seed)
    deltas = run_config.parse_delta_list(raw)
    rounds = run_config.parse_sweep_rounds(raw)
    workers = raw.get("workers", 1)
    if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
        raise ConfigError(f"workers must be an integer ≥ 1, got {workers!r}")

    rows = svc_sweep(spec, fractions, grid, eps, mc, deltas, workers, rounds)
    columns = SWEEP_HEADER + (("K",) if rounds else ()) + (("delta",) if deltas else ())
    notes = [BOUND_NOTE] + _channel_notes(spec, fractions, eps)
    if rounds:
        notes.append(f"one curve per K in {list(rounds)}; K above is only the first entry")
    if mc is not None:
        notes.append(f"mc: samples={mc.samples} seed={mc.seed} streams={mc.streams} (same seed at every point)")
    return _document("sweep", raw, columns, [r.as_record() for r in rows], notes)


def cmd_truncation_study(raw: Dict[str, Any], args: argparse.Namespace) -> Dict[str, Any]:
    """Truncated value, bound and measured error for a list of truncation orders."""
    spec, fractions = run_config.parse_channel(raw)
    orders = run_config.parse_orders(raw)
    reference_note = f"reference = truncated value at N={max(orders)}+20; error_vs_reference = reference - value(N)"
    settings = run_config.parse_truncation_settings(raw, spec)
    if settings is not None:
        # one block of rows per (rho, p_total_db) setting
        records = svc_truncation_grid(spec, fractions, settings, orders)
        notes = [reference_note] + _channel_notes(spec, fractions)
        return _document("truncation-study", raw, TRUNCATION_GRID_HEADER, records, notes)

    db = run_config.parse_point_db(raw)
    rows = svc_truncation_study(spec, fractions, db, orders)
    notes = [reference_note, f"p_total_db={db!r}"] + _channel_notes(spec, fractions)
    return _document("truncation-study", raw, TRUNCATION_HEADER, [vars(r) for r in rows], notes)


def cmd_ell_study(raw: Dict[str, Any], args: argparse.Namespace) -> Dict[str, Any]:
    """Correlation penalty ell(rho, K) over a rho grid for several K."""
    ks, rhos, delta = run_config.parse_ell_study(raw)
    rows = svc_ell_study(ks, rhos, delta)
    notes = [f"ell(rho,K) = (1 + sum_k s_k) * prod_k (1 - rho^(2(k+delta-1))), delta={delta!r}"]
    return _document("ell-study", raw, ELL_HEADER, [vars(r) for r in rows], notes)


def cmd_diversity(raw: Dict[str, Any], args: argparse.Namespace) -> Dict[str, Any]:
    """Least-squares diversity order over a high-SNR dB window."""
    spec, fractions = run_config.parse_channel(raw)
    eps = run_config.parse_eps(raw)
    window = run_config.parse_window(raw)
    report = svc_diversity(spec, fractions, window, eps)
    rows = [
        {"p_total_db": db, "p_total_linear": p, "outage_series": v}
        for db, p, v in zip(report["window_db"], report["p_total_linear"], report["outage_series"])
    ]
    summary = {k: report[k] for k in ("target_K", "slope_series", "slope_asymptotic")}
    notes = [
        f"diversity estimate (least squares) = {report['slope_series']!r}, target K = {spec.K}",
    ] + _channel_notes(spec, fractions, eps)
    logger.info("diversity estimate %.4f (target %d)", report["slope_series"], spec.K)
    return _document("diversity", raw, DIVERSITY_HEADER, rows, notes, summary)


def cmd_mc(raw: Dict[str, Any], args: argparse.Namespace) -> Dict[str, Any]:
    """Monte Carlo estimate alone, with its standard error."""
    spec, fractions = run_config.parse_channel(raw)
    db = run_config.parse_point_db(raw)
    mc = run_config.parse_mc(raw, args.seed, required=True)
    report = svc_mc(spec, fractions, db, mc)
    notes = [f"mc: samples={mc.samples} seed={mc.seed} streams={mc.streams}"] + _channel_notes(spec, fractions)
    if report["rare_event"]:
        notes.append("rare-event regime, estimate unreliable")
    return _document("mc", raw, MC_HEADER, [report], notes)


COMMANDS: Dict[str, Callable[[Dict[str, Any], argparse.Namespace], Dict[str, Any]]] = {
    "outage": cmd_outage,
    "sweep": cmd_sweep,
    "truncation-study": cmd_truncation_study,
    "ell-study": cmd_ell_study,
    "diversity": cmd_diversity,
    "mc": cmd_mc,
}


def _seed(value: str) -> int:
    seed = int(value, 0)
    if not 0 <= seed < 1 << 64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {value}")
    return seed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="outage_analysis.py",
        description="Outage probability of Type I HARQ over exponentially time-correlated Rayleigh fading.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in COMMANDS.items():
        p = sub.add_parser(name, help=(func.__doc__ or "").strip() or None)
        p.add_argument("--config", required=True, help="Path to the JSON run configuration.")
        p.add_argument("--out", help="Write the table here instead of stdout.")
        p.add_argument("--format", choices=("csv", "json"), default="csv", help="Output format (default: csv).")
        p.add_argument("--seed", type=_seed, help="Override mc.seed.")
        p.add_argument("--report-dir", help="Also write JSON + HTML report artifacts into this directory.")
        p.add_argument("--profile", action="store_true", help="Log peak memory use (tracemalloc).")
        p.add_argument("--verbose", action="store_true", help="Debug logging.")
    return parser


def run(args: argparse.Namespace) -> int:
    data, error = load_json_config(args.config)
    if error:
        raise ConfigError(f"could not parse config {args.config}: {error}")

    document = COMMANDS[args.command](data, args)
    text = render_output(document, args.format)
    if args.out:
        out_path = Path(args.out)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(text, encoding="utf-8")
        logger.info("wrote %d rows to %s", len(document["rows"]), args.out)
    else:
        sys.stdout.write(text)
    if args.report_dir:
        build_reports(document, out_dir=Path(args.report_dir))
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)

    # We'll use this to measure how long the whole run takes.
    start_time = time.perf_counter()
    if args.profile:
        tracemalloc.start()
    try:
        code = run(args)
    except HarqError as e:
        logger.error("%s", e)
        return e.exit_code
    finally:
        elapsed_time = time.perf_counter() - start_time
        if args.profile:
            current, peak = tracemalloc.get_traced_memory()
            tracemalloc.stop()
            logger.info("memory: current %.2f MB, peak %.2f MB", current / 10**6, peak / 10**6)
        logger.info("%s finished in %.4f seconds", args.command, elapsed_time)
    return code


if __name__ == "__main__":
    sys.exit(main())
