"""Monte Carlo simulation of HARQ episodes over the correlated channel."""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from apps.harq.channel_model import ChannelSpec, PowerProfile, correlation_exponent, snr_threshold
from apps.harq.errors import ConfigError

logger = logging.getLogger(__name__)


# --------- Simulation knobs ----------
# episodes generated per batch inside one stream; fixed so that a stream's draws never depend on memory limits.
MC_CHUNK = 1 << 18
# below this many failures the normal-approximation interval is not trusted.
RARE_EVENT_MIN_FAILURES = 100
SEED_LIMIT = 1 << 64


@dataclass(frozen=True)
class MCConfig:
    samples: int
    seed: int = 0
    streams: int = 1

    def __post_init__(self):
        if isinstance(self.samples, bool) or not isinstance(self.samples, int) or self.samples < 1:
            raise ConfigError(f"mc.samples must be an integer ≥ 1, got {self.samples!r}")
        if isinstance(self.streams, bool) or not isinstance(self.streams, int) or self.streams < 1:
            raise ConfigError(f"mc.streams must be an integer ≥ 1, got {self.streams!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < SEED_LIMIT:
            raise ConfigError(f"mc.seed must be an unsigned 64-bit integer, got {self.seed!r}")

    def stream_shares(self) -> List[int]:
        """Episodes per stream; the first samples % streams streams take one extra."""
        base, extra = divmod(self.samples, self.streams)
        return [base + (1 if i < extra else 0) for i in range(self.streams)]


@dataclass(frozen=True)
class MCEstimate:
    p_hat: float
    stderr: float
    samples: int
    failures: int

    @classmethod
    def from_counts(cls, failures: int, samples: int) -> "MCEstimate":
        p_hat = failures / samples
        return cls(p_hat=p_hat, stderr=math.sqrt(p_hat * (1.0 - p_hat) / samples), samples=samples, failures=failures)

    @property
    def rare_event(self) -> bool:
        """p_hat < 100 / samples: too few failures for the interval to mean much."""
        return self.failures < RARE_EVENT_MIN_FAILURES

    def confidence_interval(self, z: float = 1.96) -> Tuple[float, float]:
        return max(0.0, self.p_hat - z * self.stderr), min(1.0, self.p_hat + z * self.stderr)


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    # two real N(0, 1/2) parts give unit total variance
    parts = rng.standard_normal((2,) + tuple(shape))
    return (parts[0] + 1j * parts[1]) / math.sqrt(2.0)


def sample_channels(spec: ChannelSpec, rng: np.random.Generator, count: int) -> np.ndarray:
    """(count, K) complex gains h_k = ρ^{k+δ-1} σ_k h_0 + sqrt(1 - ρ^{2(k+δ-1)}) σ_k w_k."""
    exponents = np.array([correlation_exponent(spec, k) for k in spec.rounds()])
    sigma = np.sqrt(np.array(spec.sigma_sq))
    anchor_gain = np.sqrt(exponents) * sigma
    private_gain = np.sqrt(1.0 - exponents) * sigma
    # One anchor per episode, shared by every round of that episode. This is where the correlation comes from.
    h0 = _complex_normal(rng, (count, 1))
    # and one fresh draw per round
    w = _complex_normal(rng, (count, spec.K))
    return anchor_gain * h0 + private_gain * w


def sample_episodes(spec: ChannelSpec, power: PowerProfile, rng: np.random.Generator, count: int) -> np.ndarray:
    """Received SNRs γ_k = P_k |h_k|² for `count` independent HARQ episodes."""
    per_round = np.array([power.per_round_power(k) for k in spec.rounds()])
    return per_round * np.abs(sample_channels(spec, rng, count)) ** 2


def sample_episode(spec: ChannelSpec, power: PowerProfile, rng: np.random.Generator) -> np.ndarray:
    return sample_episodes(spec, power, rng, 1)[0]


def _count_stream_failures(spec: ChannelSpec, power: PowerProfile, seed: np.random.SeedSequence, episodes: int) -> int:
    rng = np.random.default_rng(seed)
    threshold = snr_threshold(spec)
    failures = 0
    remaining = episodes
    # We draw in fixed-size chunks so memory stays bounded, and the draws depend only on the episode count.
    while remaining > 0:
        batch = min(MC_CHUNK, remaining)
        snrs = sample_episodes(spec, power, rng, batch)
        # Type I HARQ fails only if every round is below threshold
        failures += int(np.count_nonzero(np.all(snrs < threshold, axis=1)))
        remaining -= batch
    return failures


def estimate_outage(spec: ChannelSpec, power: PowerProfile, mc: MCConfig) -> MCEstimate:
    """
    Empirical outage over mc.samples episodes. Each stream draws from its own
    generator spawned from mc.seed, so the failure count depends only on
    (seed, streams, samples), whatever order the threads finish in.
    """
    seeds = np.random.SeedSequence(mc.seed).spawn(mc.streams)
    shares = mc.stream_shares()
    workers = min(mc.streams, os.cpu_count() or 1)
    logger.info("Monte Carlo: %d episodes over %d streams (%d workers)", mc.samples, mc.streams, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        counts = list(pool.map(lambda job: _count_stream_failures(spec, power, *job), zip(seeds, shares)))
    estimate = MCEstimate.from_counts(sum(counts), mc.samples)
    if estimate.rare_event:
        logger.warning(
            "rare-event regime, estimate unreliable: %d failures in %d episodes",
            estimate.failures, estimate.samples,
        )
    return estimate
