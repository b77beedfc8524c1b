"""
Exact outage probability of Type I HARQ through the Gamma-mixture series.

Conditioned on the common anchor h_0, the K rounds are independent Rician
variables; expanding the Rician law as a Poisson mixture of Gamma laws and
integrating the anchor out gives

    P_out = Σ_n W_n · Π_k P(n_k + 1, (2^R - 1) / θ_k)

with W_n a negative-multinomial weight. Terms are grouped by layer t = Σ n_k;
layer t carries total weight (1 - q) q^t, which is what makes the truncation
bound q^{N+1} certified.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gammaln, xlogy

from apps.harq import config
from apps.harq.channel_model import (
    ChannelSpec,
    PowerProfile,
    correlation_load,
    gamma_scale,
    snr_threshold,
    tail_ratio,
    total_correlation_load,
)
from apps.harq.errors import TermCapExceeded
from apps.harq.special_functions import log_factorial, marcum_p1, regularized_lower_gamma

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MixtureIndex:
    """One series term n = [n_1, ..., n_K]."""

    n: Tuple[int, ...]

    def __post_init__(self):
        n = tuple(int(v) for v in self.n)
        if any(v < 0 for v in n):
            raise ValueError(f"mixture index entries must be nonnegative, got {self.n!r}")
        object.__setattr__(self, "n", n)

    @property
    def layer(self) -> int:
        return sum(self.n)

    @classmethod
    def zero(cls, K: int) -> "MixtureIndex":
        return cls((0,) * K)


@dataclass(frozen=True)
class TruncatedOutage:
    """Series outage summed up to layer N. The exact value lies in [value, value + bound]."""

    value: float
    order: int
    bound: float
    terms_evaluated: int

    @property
    def upper(self) -> float:
        return min(1.0, self.value + self.bound)


def compositions(t: int, K: int) -> Iterator[Tuple[int, ...]]:
    """Every n with K nonnegative entries summing to t, in lexicographic order."""
    if K == 1:
        yield (t,)
        return
    for first in range(t + 1):
        for rest in compositions(t - first, K - 1):
            yield (first,) + rest


def layer_size(t: int, K: int) -> int:
    return math.comb(t + K - 1, K - 1)


def term_count(order: int, K: int) -> int:
    """Σ_{t ≤ N} C(t+K-1, K-1) = C(N+K, K)."""
    return math.comb(order + K, K)


def _enforce_cap(terms: int, order: int, K: int, term_cap: Optional[int]) -> None:
    cap = config.term_cap() if term_cap is None else term_cap
    if terms > cap:
        raise TermCapExceeded(terms, cap, order, K)


def _log_ratios(spec: ChannelSpec) -> Tuple[np.ndarray, float]:
    load = total_correlation_load(spec)
    # Each round's share of the total load, s_k / (1 + S). These add up to q = S / (1 + S) < 1.
    ratios = np.array([correlation_load(spec, k) / (1.0 + load) for k in spec.rounds()])
    # log of the 1 / (1 + S) prefactor that every weight shares
    return ratios, -math.log1p(load)


def _layer_log_weights(comps: np.ndarray, t: int, ratios: np.ndarray, log_norm: float) -> np.ndarray:
    # One row per composition n of the layer. log W_n is the shared prefactor, plus the
    # multinomial coefficient t! / Π n_k!, plus Σ n_k log(ratio_k).
    # The multinomial overflows a double long before the weight itself gets small, so
    # everything stays in logs until the caller exponentiates.
    # xlogy keeps 0·log(0) = 0, so the n = 0 term survives when ρ = 0.
    return (
        log_norm
        + float(gammaln(t + 1))
        - gammaln(comps + 1.0).sum(axis=1)
        + xlogy(comps, ratios).sum(axis=1)
    )


def _layer_array(t: int, K: int) -> np.ndarray:
    return np.array(list(compositions(t, K)), dtype=np.int64).reshape(-1, K)


def weight(spec: ChannelSpec, index: MixtureIndex) -> float:
    """W_n = 1/(1+S) · (Σn_k)!/Πn_k! · Π (s_k/(1+S))^{n_k}, evaluated in the log domain."""
    if len(index.n) != spec.K:
        raise ValueError(f"mixture index has {len(index.n)} entries, expected K={spec.K}")
    ratios, log_norm = _log_ratios(spec)
    log_w = log_norm + log_factorial(index.layer)
    for n_k, ratio in zip(index.n, ratios):
        log_w += float(xlogy(n_k, ratio)) - log_factorial(n_k)
    return min(1.0, math.exp(log_w))


def gamma_mixture_cdf(spec: ChannelSpec, power: PowerProfile, index: MixtureIndex, z: Sequence[float]) -> float:
    """F_An(z) = Π_k P(n_k + 1, z_k / θ_k), the joint CDF of K independent Gamma variables."""
    if len(index.n) != spec.K or len(z) != spec.K:
        raise ValueError(f"index and threshold vector must both have K={spec.K} entries")
    value = 1.0
    for k, (n_k, z_k) in enumerate(zip(index.n, z), start=1):
        if z_k < 0:
            raise ValueError(f"threshold z_{k} must be nonnegative, got {z_k!r}")
        value *= regularized_lower_gamma(n_k + 1, z_k / gamma_scale(spec, power, k))
    return value


def independent_outage(spec: ChannelSpec, power: PowerProfile) -> float:
    """Π_k (1 - e^{-(2^R-1)/(P_k σ_k²)}): the outage when rounds fade independently."""
    threshold = snr_threshold(spec)
    value = 1.0
    for k in spec.rounds():
        value *= -math.expm1(-threshold / (power.per_round_power(k) * spec.sigma_sq[k - 1]))
    return value


def outage_layers(
    spec: ChannelSpec,
    power: PowerProfile,
    order: int,
    term_cap: Optional[int] = None,
) -> List[float]:
    """
    Contribution of every layer t = 0..N to the outage series.
    Studies that look at many truncation orders compute these once and
    accumulate prefixes instead of re-enumerating.
    """
    if isinstance(order, bool) or not isinstance(order, int) or order < 0:
        raise ValueError(f"truncation order must be a nonnegative integer, got {order!r}")
    K = spec.K
    _enforce_cap(term_count(order, K), order, K, term_cap)

    threshold = snr_threshold(spec)
    scales = [gamma_scale(spec, power, k) for k in spec.rounds()]
    # cdf_table[k, m] = P(m + 1, threshold / θ_k) for every shape a layer ≤ N can ask for.
    cdf_table = np.array(
        [[regularized_lower_gamma(m + 1, threshold / theta) for m in range(order + 1)] for theta in scales]
    )
    ratios, log_norm = _log_ratios(spec)
    rows = np.arange(K)

    layers = []
    for t in range(order + 1):
        # We walk layer by layer so each layer's contribution can be checked against its weight (1 - q) q^t.
        comps = _layer_array(t, K)
        log_w = _layer_log_weights(comps, t, ratios, log_norm)
        # Gamma CDF for each term: look up row k, column n_k of the table and multiply across the rounds.
        cdf = np.prod(cdf_table[rows, comps], axis=1)
        layer = math.fsum(np.exp(log_w) * cdf)
        logger.debug("layer t=%d: %d terms, contribution %.17g", t, len(comps), layer)
        layers.append(layer)
    return layers


def outage_truncated(
    spec: ChannelSpec,
    power: PowerProfile,
    order: int,
    term_cap: Optional[int] = None,
) -> TruncatedOutage:
    """Series outage over every n with Σ n_k ≤ N, with its certified tail bound q^{N+1}."""
    layers = outage_layers(spec, power, order, term_cap)
    value = min(1.0, math.fsum(layers))
    bound = tail_ratio(spec) ** (order + 1)
    return TruncatedOutage(value=value, order=order, bound=bound, terms_evaluated=term_count(order, spec.K))


def truncation_order_for_ratio(q: float, target_eps: float) -> int:
    """Smallest N with q^{N+1} ≤ eps."""
    if not 0.0 < target_eps < 1.0:
        raise ValueError(f"target eps must satisfy 0 < eps < 1, got {target_eps!r}")
    if not 0.0 <= q < 1.0:
        raise ValueError(f"tail ratio must satisfy 0 ≤ q < 1, got {q!r}")
    if q == 0.0:
        return 0
    order = max(0, math.ceil(math.log(target_eps) / math.log(q)) - 1)
    # the logarithms can land one step off either way
    while q ** (order + 1) > target_eps:
        order += 1
    while order > 0 and q ** order <= target_eps:
        order -= 1
    return order


def choose_truncation(spec: ChannelSpec, target_eps: float) -> int:
    return truncation_order_for_ratio(tail_ratio(spec), target_eps)


def outage_adaptive(
    spec: ChannelSpec,
    power: PowerProfile,
    target_eps: float = config.DEFAULT_EPS,
    term_cap: Optional[int] = None,
) -> TruncatedOutage:
    order = choose_truncation(spec, target_eps)
    result = outage_truncated(spec, power, order, term_cap)
    logger.info(
        "series outage %.6e with N=%d (bound %.3e, %d terms)",
        result.value, result.order, result.bound, result.terms_evaluated,
    )
    return result


def layer_weight_sum(spec: ChannelSpec, t: int, term_cap: Optional[int] = None) -> float:
    """Σ_{Σn=t} W_n by explicit enumeration; equals (1 - q) q^t."""
    if isinstance(t, bool) or not isinstance(t, int) or t < 0:
        raise ValueError(f"layer must be a nonnegative integer, got {t!r}")
    _enforce_cap(layer_size(t, spec.K), t, spec.K, term_cap)
    ratios, log_norm = _log_ratios(spec)
    comps = _layer_array(t, spec.K)
    return math.fsum(np.exp(_layer_log_weights(comps, t, ratios, log_norm)))


def outage_quadrature_oracle(
    spec: ChannelSpec,
    power: PowerProfile,
    nodes: int = config.DEFAULT_QUADRATURE_NODES,
) -> float:
    """
    Independent cross-check of the series. Given |h_0|² = t ~ Exp(1) the rounds are
    independent, round k failing with probability 1 - Q1(sqrt(2 s_k t), sqrt(2 z / θ_k)),
    so the outage is a single e^{-t}-weighted integral, done by Gauss-Laguerre quadrature.
    Meant for small K.
    """
    if isinstance(nodes, bool) or not isinstance(nodes, int) or nodes < 8:
        raise ValueError(f"quadrature needs at least 8 nodes, got {nodes!r}")
    threshold = snr_threshold(spec)
    loads = [correlation_load(spec, k) for k in spec.rounds()]
    cutoffs = [math.sqrt(2.0 * threshold / gamma_scale(spec, power, k)) for k in spec.rounds()]

    abscissae, weights = np.polynomial.laguerre.laggauss(nodes)
    integrand = np.empty(nodes)
    for i, t in enumerate(abscissae):
        value = 1.0
        for load, cutoff in zip(loads, cutoffs):
            value *= marcum_p1(math.sqrt(2.0 * load * t), cutoff)
        integrand[i] = value
    logger.debug("quadrature oracle with %d Gauss-Laguerre nodes", nodes)
    return min(1.0, max(0.0, math.fsum(weights * integrand)))
