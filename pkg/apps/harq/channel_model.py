from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

from apps.harq.errors import ConfigError


# --------- Model defaults ----------
# feedback delay used when a config does not give one; the exponent k + δ - 1 then reduces to k.
DEFAULT_DELTA = 1.0
# average channel power gain per round.
DEFAULT_SIGMA_SQ = 1.0
# per-round power fraction, P_k = p_k · P_T.
DEFAULT_FRACTION = 1.0
# packet rate in bits/s/Hz.
DEFAULT_RATE = 2.0


def db_to_linear(db: float) -> float:
    """Noise is unit variance, so a power in dB is an SNR in dB."""
    try:
        value = 10.0 ** (float(db) / 10.0)
    except OverflowError:
        value = math.inf
    if not math.isfinite(value):
        raise ConfigError(f"power {db!r} dB does not fit in a double (the largest is about 3080 dB)")
    return value


def _positive_vector(name: str, values: Optional[Sequence[float]], size: int, default: float) -> Tuple[float, ...]:
    if values is None or len(values) == 0:
        return (default,) * size
    if len(values) != size:
        raise ConfigError(f"{name} must have K={size} entries, got {len(values)}")
    out = tuple(float(v) for v in values)
    for k, v in enumerate(out, start=1):
        if not math.isfinite(v) or v <= 0:
            raise ConfigError(f"{name}[{k}] must be a finite positive real, got {v!r}")
    return out


@dataclass(frozen=True)
class ChannelSpec:
    """
    Exponentially time-correlated Rayleigh channel seen by K HARQ rounds:
    h_k = ρ^{k+δ-1} σ_k h_0 + sqrt(1 - ρ^{2(k+δ-1)}) σ_k w_k, with h_0, w_k ~ CN(0, 1).
    """

    K: int
    rho: float
    delta: float = DEFAULT_DELTA
    sigma_sq: Tuple[float, ...] = field(default=())
    rate: float = DEFAULT_RATE

    def __post_init__(self):
        if isinstance(self.K, bool) or not isinstance(self.K, int) or self.K < 1:
            raise ConfigError(f"K must be an integer ≥ 1, got {self.K!r}")
        rho = float(self.rho)
        if not (0.0 <= rho < 1.0):
            raise ConfigError(f"rho must satisfy 0 ≤ ρ < 1, got {self.rho!r}")
        delta = float(self.delta)
        if not math.isfinite(delta) or delta <= 0:
            raise ConfigError(f"delta must satisfy δ > 0, got {self.delta!r}")
        rate = float(self.rate)
        if not math.isfinite(rate) or rate <= 0:
            raise ConfigError(f"rate must satisfy R > 0, got {self.rate!r}")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "rate", rate)
        object.__setattr__(self, "sigma_sq", _positive_vector("sigma_sq", self.sigma_sq, self.K, DEFAULT_SIGMA_SQ))

    def with_rho(self, rho: float) -> "ChannelSpec":
        return replace(self, rho=rho)

    def with_rounds(self, K: int) -> "ChannelSpec":
        """Same channel over K rounds; per-round gains fall back to the default."""
        return replace(self, K=K, sigma_sq=())

    def with_delta(self, delta: float) -> "ChannelSpec":
        return replace(self, delta=delta)

    def rounds(self) -> range:
        return range(1, self.K + 1)


@dataclass(frozen=True)
class PowerProfile:
    """Total transmit power P_T (linear, noise-normalized) and the per-round fractions p_k."""

    p_total: float
    fractions: Tuple[float, ...]

    def __post_init__(self):
        p_total = float(self.p_total)
        if not math.isfinite(p_total) or p_total <= 0:
            raise ConfigError(f"p_total must be a finite positive power, got {self.p_total!r}")
        fractions = _positive_vector("p_fractions", self.fractions, len(self.fractions), DEFAULT_FRACTION)
        if not fractions:
            raise ConfigError("p_fractions must have at least one entry")
        for k, frac in enumerate(fractions, start=1):
            if not math.isfinite(frac * p_total):
                raise ConfigError(f"per-round power P_{k} = p_{k}·P_T must be finite")
        object.__setattr__(self, "p_total", p_total)
        object.__setattr__(self, "fractions", fractions)

    @classmethod
    def equal(cls, K: int, p_total: float) -> "PowerProfile":
        return cls(p_total, (DEFAULT_FRACTION,) * K)

    @classmethod
    def from_db(cls, p_total_db: float, fractions: Sequence[float]) -> "PowerProfile":
        return cls(db_to_linear(p_total_db), tuple(fractions))

    def per_round_power(self, k: int) -> float:
        if not 1 <= k <= len(self.fractions):
            raise IndexError(f"round index k={k} outside 1..{len(self.fractions)}")
        return self.fractions[k - 1] * self.p_total


def _check_round(spec: ChannelSpec, k: int) -> None:
    if not 1 <= k <= spec.K:
        raise IndexError(f"round index k={k} outside 1..{spec.K}")


def _check_power(spec: ChannelSpec, power: PowerProfile) -> None:
    if len(power.fractions) != spec.K:
        raise ConfigError(f"p_fractions must have K={spec.K} entries, got {len(power.fractions)}")


def correlation_exponent(spec: ChannelSpec, k: int) -> float:
    """ρ^{2(k+δ-1)}: squared correlation between round k and the anchor h_0."""
    _check_round(spec, k)
    return spec.rho ** (2.0 * (k + spec.delta - 1.0))


def gamma_scale(spec: ChannelSpec, power: PowerProfile, k: int) -> float:
    """θ_k = P_k σ_k² (1 - ρ^{2(k+δ-1)}), the scale of every Gamma factor of round k."""
    _check_power(spec, power)
    e_k = correlation_exponent(spec, k)
    return power.per_round_power(k) * spec.sigma_sq[k - 1] * (1.0 - e_k)


def correlation_load(spec: ChannelSpec, k: int) -> float:
    # e_k is the part of round k's gain that comes from the common anchor h_0,
    # 1 - e_k the part from its own fresh fading w_k.
    e_k = correlation_exponent(spec, k)
    # s_k is the ratio of the two. It is 0 at ρ = 0, and ρ < 1 keeps the division finite.
    return e_k / (1.0 - e_k)


def total_correlation_load(spec: ChannelSpec) -> float:
    """S = Σ_k s_k."""
    # Later rounds carry much smaller loads than the first one, so we add them with fsum
    # to keep their digits.
    return math.fsum(correlation_load(spec, k) for k in spec.rounds())


def tail_ratio(spec: ChannelSpec) -> float:
    """q = S / (1 + S): the geometric ratio of the mixture layers and of the truncation bound."""
    load = total_correlation_load(spec)
    return load / (1.0 + load)


def snr_threshold(spec: ChannelSpec) -> float:
    """A round fails when log2(1 + γ_k) < R, i.e. when γ_k < 2^R - 1."""
    return 2.0 ** spec.rate - 1.0
