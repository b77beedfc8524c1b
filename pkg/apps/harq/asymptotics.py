from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np

from apps.harq.channel_model import (
    ChannelSpec,
    PowerProfile,
    correlation_exponent,
    gamma_scale,
    snr_threshold,
    total_correlation_load,
)


@dataclass(frozen=True)
class AsymptoticBreakdown:
    """High-SNR outage split into its rate (A), power (B) and correlation (C) factors."""

    term_a: float
    term_b: float
    term_c: float
    product: float


def ell(spec: ChannelSpec) -> float:
    """
    Correlation penalty ℓ(ρ, K) = (1 + Σ_k s_k) · Π_k (1 - ρ^{2(k+δ-1)}).
    It decreases in ρ and equals 1 at ρ = 0, so 1/ℓ ≥ 1 is the high-SNR cost of correlation.
    """
    # The product is how much fresh fading each round keeps; it shrinks as ρ grows.
    decorrelated = math.prod(1.0 - correlation_exponent(spec, k) for k in spec.rounds())
    # (1 + S) grows with ρ as well, but never fast enough to make up for the product.
    return (1.0 + total_correlation_load(spec)) * decorrelated


def asymptotic_breakdown(spec: ChannelSpec, power: PowerProfile) -> AsymptoticBreakdown:
    # A depends only on the rate, B only on the powers, and C only on the correlation.
    term_a = snr_threshold(spec) ** spec.K
    term_b = math.prod(1.0 / (power.per_round_power(k) * spec.sigma_sq[k - 1]) for k in spec.rounds())
    term_c = 1.0 / ell(spec)
    return AsymptoticBreakdown(term_a=term_a, term_b=term_b, term_c=term_c, product=term_a * term_b * term_c)


def outage_asymptotic(spec: ChannelSpec, power: PowerProfile) -> float:
    """(2^R - 1)^K · Π_k 1/(P_k σ_k²) · 1/ℓ(ρ, K). Only meaningful at high SNR; it can exceed 1."""
    return asymptotic_breakdown(spec, power).product


def asymptotic_leading_with_w0(spec: ChannelSpec, power: PowerProfile) -> float:
    """Leading term of the series, W_0 · Π_k z/θ_k; algebraically the same as outage_asymptotic."""
    threshold = snr_threshold(spec)
    w0 = 1.0 / (1.0 + total_correlation_load(spec))
    return w0 * math.prod(threshold / gamma_scale(spec, power, k) for k in spec.rounds())


def diversity_slope(points: Iterable[Tuple[float, float]]) -> float:
    """
    Diversity order estimate: minus the least-squares slope of ln P_out against ln P_T.
    Powers are linear (not dB).
    """
    pairs = [(float(p), float(v)) for p, v in points]
    if len(pairs) < 2:
        raise ValueError(f"diversity slope needs at least 2 points, got {len(pairs)}")
    powers = np.array([p for p, _ in pairs])
    outages = np.array([v for _, v in pairs])
    if np.any(~np.isfinite(powers)) or np.any(powers <= 0):
        raise ValueError("powers must be finite and positive")
    if len(np.unique(powers)) != len(powers):
        raise ValueError("powers must be distinct")
    if np.any(~np.isfinite(outages)) or np.any(outages <= 0) or np.any(outages >= 1):
        raise ValueError("outage values must lie strictly between 0 and 1")
    # On log-log axes the high-SNR outage is a straight line whose slope is minus the diversity order.
    slope, _ = np.polyfit(np.log(powers), np.log(outages), 1)
    return -float(slope)
