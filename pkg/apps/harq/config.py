from __future__ import annotations

import math
import os
from numbers import Integral, Real
from typing import Any, Dict, List, Optional, Sequence, Tuple

from apps.harq.channel_model import DEFAULT_DELTA, DEFAULT_RATE, ChannelSpec
from apps.harq.errors import ConfigError
from apps.harq.monte_carlo import MCConfig


# --------- Run defaults ----------
# series term cap; HARQ_TERM_CAP overrides it.
DEFAULT_TERM_CAP = 10_000_000
TERM_CAP_ENV = "HARQ_TERM_CAP"
# target truncation error when a config gives no eps.
DEFAULT_EPS = 1e-9
# Gauss-Laguerre nodes for the quadrature cross-check.
DEFAULT_QUADRATURE_NODES = 64
# Monte Carlo defaults when the "mc" block leaves a field out.
DEFAULT_MC_SAMPLES = 1_000_000
DEFAULT_MC_SEED = 0
DEFAULT_MC_STREAMS = 1


def term_cap() -> int:
    """The series term cap, read from the environment at call time."""
    raw = os.getenv(TERM_CAP_ENV)
    if raw is None or raw.strip() == "":
        return DEFAULT_TERM_CAP
    try:
        cap = int(float(raw))
    except ValueError:
        raise ConfigError(f"{TERM_CAP_ENV} must be a positive integer, got {raw!r}") from None
    if cap < 1:
        raise ConfigError(f"{TERM_CAP_ENV} must be a positive integer, got {raw!r}")
    return cap


def _real(raw: Dict[str, Any], key: str, default: Optional[float] = None, *aliases: str) -> Optional[float]:
    value = None
    for name in (key, *aliases):
        if name in raw and raw[name] is not None:
            value = raw[name]
            break
    if value is None:
        return default
    if isinstance(value, bool) or not isinstance(value, Real) or not math.isfinite(float(value)):
        raise ConfigError(f"{key} must be a finite number, got {value!r}")
    return float(value)


def _integer(raw: Dict[str, Any], key: str, default: Optional[int] = None) -> Optional[int]:
    value = raw.get(key)
    if value is None:
        return default
    if isinstance(value, bool) or not isinstance(value, Integral):
        if isinstance(value, float) and value.is_integer():
            return int(value)
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    return int(value)


def _real_list(raw: Dict[str, Any], key: str) -> Optional[List[float]]:
    value = raw.get(key)
    if value is None:
        return None
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"{key} must be a list of numbers, got {value!r}")
    out = []
    for item in value:
        if isinstance(item, bool) or not isinstance(item, Real) or not math.isfinite(float(item)):
            raise ConfigError(f"{key} entries must be finite numbers, got {item!r}")
        out.append(float(item))
    return out


def _ascending(key: str, values: Sequence[float]) -> Tuple[float, ...]:
    if not values:
        raise ConfigError(f"{key} must be a nonempty ascending list")
    for prev, cur in zip(values, values[1:]):
        if cur <= prev:
            raise ConfigError(f"{key} must be strictly ascending, got {list(values)}")
    return tuple(values)


def parse_channel(raw: Dict[str, Any]) -> Tuple[ChannelSpec, Tuple[float, ...]]:
    """Build the channel model and the per-round power fractions from a config document."""
    K = _integer(raw, "K")
    if K is None and isinstance(raw.get("K_list"), (list, tuple)) and raw["K_list"]:
        # a sweep over K_list only needs a K to validate the shared fields against
        K = _integer({"K": raw["K_list"][0]}, "K")
    if K is None:
        raise ConfigError("K is required (maximum number of transmissions, K ≥ 1)")
    rho = _real(raw, "rho")
    if rho is None and _real_list(raw, "rho_list"):
        rho = _real_list(raw, "rho_list")[0]
    if rho is None:
        raise ConfigError("rho is required (time correlation, 0 ≤ ρ < 1)")
    spec = ChannelSpec(
        K=K,
        rho=rho,
        delta=_real(raw, "delta", DEFAULT_DELTA),
        sigma_sq=tuple(_real_list(raw, "sigma_sq") or ()),
        rate=_real(raw, "rate", DEFAULT_RATE, "R"),
    )
    fractions = _real_list(raw, "p_fractions") or [1.0] * spec.K
    if len(fractions) != spec.K:
        raise ConfigError(f"p_fractions must have K={spec.K} entries, got {len(fractions)}")
    for k, frac in enumerate(fractions, start=1):
        if frac <= 0:
            raise ConfigError(f"p_fractions[{k}] must be positive, got {frac!r}")
    return spec, tuple(fractions)


def parse_eps(raw: Dict[str, Any]) -> float:
    eps = _real(raw, "eps", DEFAULT_EPS)
    if not 0.0 < eps < 1.0:
        raise ConfigError(f"eps must satisfy 0 < eps < 1, got {eps!r}")
    return eps


def parse_point_db(raw: Dict[str, Any]) -> float:
    db = _real(raw, "p_total_db", None, "P_T_dB")
    if db is None:
        grid = _real_list(raw, "db_grid")
        if grid and len(grid) == 1:
            return grid[0]
        raise ConfigError("p_total_db is required for a single-point evaluation")
    return db


def parse_db_grid(raw: Dict[str, Any]) -> Tuple[float, ...]:
    grid = _real_list(raw, "db_grid")
    if grid is None:
        db = _real(raw, "p_total_db", None, "P_T_dB")
        if db is None:
            raise ConfigError("db_grid must be a nonempty ascending list of P_T values in dB")
        grid = [db]
    return _ascending("db_grid", grid)


def parse_delta_list(raw: Dict[str, Any]) -> Optional[Tuple[float, ...]]:
    deltas = _real_list(raw, "delta_list")
    if deltas is None:
        return None
    if not deltas:
        raise ConfigError("delta_list must not be empty when given")
    for d in deltas:
        if d <= 0:
            raise ConfigError(f"delta_list entries must satisfy δ > 0, got {d!r}")
    return tuple(deltas)


def _round_counts(key: str, values: Any) -> Tuple[int, ...]:
    if not isinstance(values, (list, tuple)) or not values:
        raise ConfigError(f"{key} must be a nonempty list of round counts (K ≥ 1)")
    for k in values:
        if isinstance(k, bool) or not isinstance(k, Integral) or k < 1:
            raise ConfigError(f"{key} entries must be integers ≥ 1, got {k!r}")
    return tuple(sorted(set(int(k) for k in values)))


def parse_sweep_rounds(raw: Dict[str, Any]) -> Optional[Tuple[int, ...]]:
    """K_list for a sweep: one curve per K, each with unit gains and full power per round."""
    if raw.get("K_list") is None:
        return None
    rounds = _round_counts("K_list", raw["K_list"])
    for key in ("sigma_sq", "p_fractions"):
        if raw.get(key):
            raise ConfigError(f"{key} is per round and cannot be combined with K_list; leave it out")
    return rounds


def parse_truncation_settings(raw: Dict[str, Any], spec: ChannelSpec) -> Optional[Tuple[Tuple[float, float], ...]]:
    """
    rho_list × p_total_db_list for a truncation study over several settings.
    Either list may be left out; it then falls back to the single rho / p_total_db.
    Returns None when neither list is given.
    """
    rhos = _real_list(raw, "rho_list")
    dbs = _real_list(raw, "p_total_db_list")
    if rhos is None and dbs is None:
        return None
    if rhos is not None and not rhos:
        raise ConfigError("rho_list must not be empty when given")
    if dbs is not None and not dbs:
        raise ConfigError("p_total_db_list must not be empty when given")
    rhos = rhos or [spec.rho]
    dbs = dbs or [parse_point_db(raw)]
    for rho in rhos:
        if not 0.0 <= rho < 1.0:
            raise ConfigError(f"rho_list entries must satisfy 0 ≤ ρ < 1, got {rho!r}")
    return tuple((rho, db) for rho in rhos for db in dbs)


def parse_mc(raw: Dict[str, Any], seed_override: Optional[int] = None, required: bool = False) -> Optional[MCConfig]:
    block = raw.get("mc")
    if block is None:
        if not required:
            return None
        block = {}
    if not isinstance(block, dict):
        raise ConfigError(f"mc must be an object with samples/seed/streams, got {block!r}")
    seed = _integer(block, "seed", DEFAULT_MC_SEED) if seed_override is None else seed_override
    return MCConfig(
        samples=_integer(block, "samples", DEFAULT_MC_SAMPLES),
        seed=seed,
        streams=_integer(block, "streams", DEFAULT_MC_STREAMS),
    )


def parse_nodes(raw: Dict[str, Any]) -> Optional[int]:
    nodes = _integer(raw, "nodes")
    if nodes is not None and nodes < 8:
        raise ConfigError(f"nodes must be ≥ 8 for the quadrature cross-check, got {nodes}")
    return nodes


def parse_orders(raw: Dict[str, Any]) -> Tuple[int, ...]:
    orders = raw.get("N_list")
    if not isinstance(orders, (list, tuple)) or not orders:
        raise ConfigError("N_list must be a nonempty list of truncation orders")
    out = []
    for n in orders:
        if isinstance(n, bool) or not isinstance(n, Integral) or n < 0:
            raise ConfigError(f"N_list entries must be nonnegative integers, got {n!r}")
        out.append(int(n))
    return tuple(sorted(set(out)))


def parse_ell_study(raw: Dict[str, Any]) -> Tuple[Tuple[int, ...], Tuple[float, ...], float]:
    ks = raw.get("K_list")
    if ks is None and raw.get("K") is not None:
        ks = [raw["K"]]
    ks = _round_counts("K_list", ks)
    rhos = _real_list(raw, "rho_grid")
    if not rhos:
        raise ConfigError("rho_grid must be a nonempty list within 0 ≤ ρ < 1")
    for rho in rhos:
        if not 0.0 <= rho < 1.0:
            raise ConfigError(f"rho_grid entries must satisfy 0 ≤ ρ < 1, got {rho!r}")
    delta = _real(raw, "delta", DEFAULT_DELTA)
    if delta <= 0:
        raise ConfigError(f"delta must satisfy δ > 0, got {delta!r}")
    return ks, tuple(sorted(set(rhos))), delta


def parse_window(raw: Dict[str, Any]) -> Tuple[float, ...]:
    window = _real_list(raw, "window_db") or _real_list(raw, "db_grid")
    if window is None:
        raise ConfigError("window_db must list at least 3 high-SNR points in dB")
    window = _ascending("window_db", window)
    if len(window) < 3:
        raise ConfigError(f"window_db must list at least 3 points, got {len(window)}")
    return window
