from __future__ import annotations

import pytest

from apps.harq.channel_model import ChannelSpec, PowerProfile


def make_power(spec: ChannelSpec, p_total_db: float) -> PowerProfile:
    return PowerProfile.from_db(p_total_db, (1.0,) * spec.K)


@pytest.fixture
def baseline_spec() -> ChannelSpec:
    """K=4, ρ=0.5, δ=1, R=2, σ=1: the setting of the outage-versus-power curves."""
    return ChannelSpec(K=4, rho=0.5, delta=1.0, rate=2.0)


@pytest.fixture
def unit_power():
    return lambda spec: PowerProfile.equal(spec.K, 1.0)
