from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

from apps.harq.asymptotics import asymptotic_breakdown, diversity_slope, ell, outage_asymptotic
from apps.harq.channel_model import DEFAULT_FRACTION, ChannelSpec, PowerProfile, db_to_linear, tail_ratio
from apps.harq.errors import ConfigError
from apps.harq.monte_carlo import MCConfig, MCEstimate, estimate_outage
from apps.harq.series_outage import (
    TruncatedOutage,
    choose_truncation,
    outage_adaptive,
    outage_layers,
    outage_quadrature_oracle,
    term_count,
)

logger = logging.getLogger(__name__)

SWEEP_HEADER = (
    "p_total_db", "outage_series", "bound", "n_used", "outage_asymptotic", "mc_p_hat", "mc_stderr",
)
TRUNCATION_HEADER = ("N", "value", "bound", "error_vs_reference")
TRUNCATION_GRID_HEADER = ("rho", "p_total_db") + TRUNCATION_HEADER
ELL_HEADER = ("rho", "K", "ell")
# the truncation-study reference sits this many layers past the largest requested N.
REFERENCE_EXTRA_LAYERS = 20


@dataclass(frozen=True)
class SweepRow:
    p_total_db: float
    outage_series: float
    bound: float
    n_used: int
    outage_asymptotic: float
    mc_p_hat: Optional[float] = None
    mc_stderr: Optional[float] = None
    K: Optional[int] = None
    delta: Optional[float] = None

    def as_record(self) -> Dict[str, Any]:
        record = asdict(self)
        for key in ("K", "delta"):
            if record[key] is None:
                record.pop(key)
        return record


@dataclass(frozen=True)
class OutageEstimate:
    """One outage figure with its method tag and whatever backs it: a certified bound or a standard error."""

    value: float
    method: str
    bound: Optional[float] = None
    stderr: Optional[float] = None
    order: Optional[int] = None

    @classmethod
    def from_series(cls, result: TruncatedOutage) -> "OutageEstimate":
        return cls(value=result.value, method="series", bound=result.bound, order=result.order)

    @classmethod
    def from_monte_carlo(cls, estimate: MCEstimate) -> "OutageEstimate":
        return cls(value=estimate.p_hat, method="monte_carlo", stderr=estimate.stderr)


@dataclass(frozen=True)
class TruncationRow:
    N: int
    value: float
    bound: float
    error_vs_reference: float


@dataclass(frozen=True)
class EllRow:
    rho: float
    K: int
    ell: float


def svc_evaluate_point(
    spec: ChannelSpec,
    fractions: Sequence[float],
    p_total_db: float,
    eps: float,
    mc: Optional[MCConfig] = None,
    with_delta: bool = False,
    with_rounds: bool = False,
) -> SweepRow:
    power = PowerProfile.from_db(p_total_db, fractions)
    series = outage_adaptive(spec, power, eps)
    estimate = estimate_outage(spec, power, mc) if mc is not None else None
    return SweepRow(
        p_total_db=p_total_db,
        outage_series=series.value,
        bound=series.bound,
        n_used=series.order,
        outage_asymptotic=outage_asymptotic(spec, power),
        mc_p_hat=estimate.p_hat if estimate else None,
        mc_stderr=estimate.stderr if estimate else None,
        K=spec.K if with_rounds else None,
        delta=spec.delta if with_delta else None,
    )


def svc_outage(
    spec: ChannelSpec,
    fractions: Sequence[float],
    p_total_db: float,
    eps: float,
    mc: Optional[MCConfig] = None,
    nodes: Optional[int] = None,
) -> Dict[str, Any]:
    """Single-point report: series value with its bound, the high-SNR form and optional cross-checks."""
    power = PowerProfile.from_db(p_total_db, fractions)
    series = outage_adaptive(spec, power, eps)
    breakdown = asymptotic_breakdown(spec, power)
    report: Dict[str, Any] = {
        "p_total_db": p_total_db,
        "outage_series": series.value,
        "bound": series.bound,
        "outage_upper": series.upper,
        "n_used": series.order,
        "terms_evaluated": series.terms_evaluated,
        "tail_ratio": tail_ratio(spec),
        "outage_asymptotic": breakdown.product,
        "asymptotic_breakdown": asdict(breakdown),
        "ell": ell(spec),
    }
    estimates = [
        OutageEstimate.from_series(series),
        OutageEstimate(value=breakdown.product, method="asymptotic"),
    ]
    if nodes is not None:
        report["outage_quadrature"] = outage_quadrature_oracle(spec, power, nodes)
        estimates.append(OutageEstimate(value=report["outage_quadrature"], method="quadrature"))
    if mc is not None:
        estimate = estimate_outage(spec, power, mc)
        report["mc"] = svc_mc_report(estimate)
        estimates.append(OutageEstimate.from_monte_carlo(estimate))
    report["estimates"] = [asdict(e) for e in estimates]
    return report


def svc_mc_report(estimate: MCEstimate) -> Dict[str, Any]:
    low, high = estimate.confidence_interval()
    return {
        "p_hat": estimate.p_hat,
        "stderr": estimate.stderr,
        "samples": estimate.samples,
        "failures": estimate.failures,
        "ci95_low": low,
        "ci95_high": high,
        "rare_event": estimate.rare_event,
    }


def svc_mc(spec: ChannelSpec, fractions: Sequence[float], p_total_db: float, mc: MCConfig) -> Dict[str, Any]:
    power = PowerProfile.from_db(p_total_db, fractions)
    return {"p_total_db": p_total_db, **svc_mc_report(estimate_outage(spec, power, mc))}


def svc_sweep(
    spec: ChannelSpec,
    fractions: Sequence[float],
    db_grid: Sequence[float],
    eps: float,
    mc: Optional[MCConfig] = None,
    delta_list: Optional[Sequence[float]] = None,
    workers: int = 1,
    rounds: Optional[Sequence[int]] = None,
) -> List[SweepRow]:
    """
    One row per grid point, repeated per K when a round list is given and per δ
    when a δ list is given (K outermost). Round lists run with unit gains and
    full power in every round. Every point reuses the same Monte Carlo seed,
    i.e. common random numbers along the curve. Rows come back in that order
    whatever order the workers finish in.
    """
    if rounds:
        channels = [(spec.with_rounds(K), (DEFAULT_FRACTION,) * K) for K in rounds]
    else:
        channels = [(spec, tuple(fractions))]
    jobs = [
        (s.with_delta(d), f, db)
        for s, f in channels
        for d in (delta_list or (s.delta,))
        for db in db_grid
    ]
    with_delta = bool(delta_list)
    with_rounds = bool(rounds)

    def run(job):
        s, f, db = job
        return svc_evaluate_point(s, f, db, eps, mc, with_delta, with_rounds)

    if workers <= 1:
        return [run(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, jobs))


def svc_truncation_study(
    spec: ChannelSpec,
    fractions: Sequence[float],
    p_total_db: float,
    orders: Sequence[int],
) -> List[TruncationRow]:
    """Truncated value, bound and measured error for each N against the value at max(N) + 20."""
    power = PowerProfile.from_db(p_total_db, fractions)
    reference_order = max(orders) + REFERENCE_EXTRA_LAYERS
    layers = outage_layers(spec, power, reference_order)
    reference = math.fsum(layers)
    q = tail_ratio(spec)
    rows = []
    for n in sorted(orders):
        value = math.fsum(layers[: n + 1])
        bound = q ** (n + 1)
        error = reference - value
        if error > 0:
            logger.info("N=%d: measured error %.3e, bound %.3e (ratio %.3g)", n, error, bound, bound / error)
        rows.append(TruncationRow(N=n, value=value, bound=bound, error_vs_reference=error))
    return rows


def svc_truncation_grid(
    spec: ChannelSpec,
    fractions: Sequence[float],
    settings: Sequence[Tuple[float, float]],
    orders: Sequence[int],
) -> List[Dict[str, Any]]:
    """Truncation study repeated for each (ρ, P_T dB) setting; every row is tagged with its setting."""
    records = []
    for rho, p_total_db in settings:
        # with_rho re-validates 0 ≤ ρ < 1
        for row in svc_truncation_study(spec.with_rho(rho), fractions, p_total_db, orders):
            records.append({"rho": rho, "p_total_db": p_total_db, **asdict(row)})
    return records


def svc_ell_study(K_list: Sequence[int], rho_grid: Sequence[float], delta: float) -> List[EllRow]:
    rows = []
    for K in sorted(K_list):
        for rho in sorted(rho_grid):
            rows.append(EllRow(rho=rho, K=K, ell=ell(ChannelSpec(K=K, rho=rho, delta=delta))))
    return rows


def svc_diversity(
    spec: ChannelSpec,
    fractions: Sequence[float],
    window_db: Sequence[float],
    eps: float,
) -> Dict[str, Any]:
    """Least-squares diversity order over a dB window, from series data and from the asymptotic form."""
    series_points = []
    asymptotic_points = []
    for db in window_db:
        power = PowerProfile.from_db(db, fractions)
        value = outage_adaptive(spec, power, eps).value
        # A log-log fit needs 0 < P_out < 1. Outside that range the window has left the
        # high-SNR regime, or the outage has underflowed.
        if not 0.0 < value < 1.0:
            raise ConfigError(
                f"window_db must lie in the high-SNR regime with 0 < P_out < 1: outage at {db!r} dB is {value!r}"
            )
        series_points.append((power.p_total, value))
        asymptotic_points.append((power.p_total, outage_asymptotic(spec, power)))
    usable = [(p, v) for p, v in asymptotic_points if v < 1.0]
    return {
        "window_db": list(window_db),
        "target_K": spec.K,
        "slope_series": diversity_slope(series_points),
        "slope_asymptotic": diversity_slope(usable) if len(usable) >= 2 else None,
        "p_total_linear": [db_to_linear(db) for db in window_db],
        "outage_series": [v for _, v in series_points],
    }


def svc_series_cost(spec: ChannelSpec, eps: float) -> Dict[str, int]:
    """Truncation order and term count a given eps will cost, without evaluating anything."""
    order = choose_truncation(spec, eps)
    return {"order": order, "terms": term_count(order, spec.K)}
