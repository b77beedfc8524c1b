import math

import pytest

from apps.harq.channel_model import (
    ChannelSpec,
    PowerProfile,
    correlation_exponent,
    correlation_load,
    db_to_linear,
    gamma_scale,
    snr_threshold,
    tail_ratio,
    total_correlation_load,
)
from apps.harq.errors import ConfigError


def test_db_conversions():
    assert db_to_linear(0) == 1.0
    assert db_to_linear(10) == pytest.approx(10.0, rel=1e-15)
    assert db_to_linear(20) == pytest.approx(100.0, rel=1e-15)
    assert db_to_linear(3000) == pytest.approx(1e300, rel=1e-12)


@pytest.mark.parametrize("db", [4000, 1e6, float("inf")])
def test_db_beyond_double_range(db):
    with pytest.raises(ConfigError, match="does not fit in a double"):
        db_to_linear(db)


class TestChannelSpec:
    def test_defaults(self):
        spec = ChannelSpec(K=3, rho=0.2)
        assert spec.delta == 1.0
        assert spec.rate == 2.0
        assert spec.sigma_sq == (1.0, 1.0, 1.0)
        assert list(spec.rounds()) == [1, 2, 3]

    def test_rho_one_rejected_with_invariant(self):
        with pytest.raises(ConfigError, match="0 ≤ ρ < 1"):
            ChannelSpec(K=2, rho=1.0)

    @pytest.mark.parametrize(
        "kwargs,message",
        [
            ({"K": 0, "rho": 0.5}, "K must be an integer"),
            ({"K": 2.5, "rho": 0.5}, "K must be an integer"),
            ({"K": 2, "rho": -0.1}, "0 ≤ ρ < 1"),
            ({"K": 2, "rho": 0.5, "delta": 0.0}, "δ > 0"),
            ({"K": 2, "rho": 0.5, "rate": 0.0}, "R > 0"),
            ({"K": 2, "rho": 0.5, "sigma_sq": (1.0,)}, "K=2 entries"),
            ({"K": 2, "rho": 0.5, "sigma_sq": (1.0, -2.0)}, "sigma_sq"),
        ],
    )
    def test_invalid(self, kwargs, message):
        with pytest.raises(ConfigError, match=message):
            ChannelSpec(**kwargs)

    def test_config_error_is_value_error(self):
        with pytest.raises(ValueError):
            ChannelSpec(K=1, rho=2.0)

    def test_with_rho_and_delta(self):
        spec = ChannelSpec(K=2, rho=0.3, sigma_sq=(1.0, 2.0))
        assert spec.with_rho(0.6).rho == 0.6
        assert spec.with_rho(0.6).sigma_sq == (1.0, 2.0)
        assert spec.with_delta(2.0).delta == 2.0
        with pytest.raises(ConfigError):
            spec.with_rho(1.5)

    def test_with_rounds(self):
        spec = ChannelSpec(K=2, rho=0.3, delta=1.5, sigma_sq=(1.0, 2.0), rate=1.0)
        wider = spec.with_rounds(4)
        assert wider.K == 4
        assert wider.sigma_sq == (1.0,) * 4
        assert (wider.rho, wider.delta, wider.rate) == (0.3, 1.5, 1.0)
        with pytest.raises(ConfigError):
            spec.with_rounds(0)


class TestPowerProfile:
    def test_per_round_power(self):
        power = PowerProfile(10.0, (0.5, 1.0, 2.0))
        assert [power.per_round_power(k) for k in (1, 2, 3)] == [5.0, 10.0, 20.0]

    def test_round_index_checked(self):
        power = PowerProfile.equal(2, 1.0)
        with pytest.raises(IndexError):
            power.per_round_power(0)
        with pytest.raises(IndexError):
            power.per_round_power(3)

    def test_from_db(self):
        power = PowerProfile.from_db(20.0, (1.0, 1.0))
        assert power.p_total == pytest.approx(100.0)
        assert power.fractions == (1.0, 1.0)
        with pytest.raises(ConfigError):
            PowerProfile.from_db(4000.0, (1.0,))

    @pytest.mark.parametrize("p_total", [0.0, -1.0, float("inf")])
    def test_invalid_total(self, p_total):
        with pytest.raises(ConfigError):
            PowerProfile(p_total, (1.0,))

    def test_invalid_fraction(self):
        with pytest.raises(ConfigError):
            PowerProfile(1.0, (1.0, 0.0))


class TestCorrelation:
    def test_exponent_examples(self):
        assert correlation_exponent(ChannelSpec(K=1, rho=0.0), 1) == 0.0
        spec = ChannelSpec(K=3, rho=0.5)
        assert correlation_exponent(spec, 1) == pytest.approx(0.25, rel=1e-15)
        assert correlation_exponent(spec, 3) == pytest.approx(0.015625, rel=1e-15)

    def test_exponent_with_delay(self):
        spec = ChannelSpec(K=2, rho=0.5, delta=2.0)
        assert correlation_exponent(spec, 1) == pytest.approx(0.0625, rel=1e-15)

    def test_exponent_decreasing_in_round(self):
        spec = ChannelSpec(K=6, rho=0.9)
        exponents = [correlation_exponent(spec, k) for k in spec.rounds()]
        assert all(b < a for a, b in zip(exponents, exponents[1:]))
        assert all(0.0 <= e < 1.0 for e in exponents)

    def test_round_index_checked(self):
        with pytest.raises(IndexError):
            correlation_exponent(ChannelSpec(K=2, rho=0.5), 3)

    def test_load_examples(self):
        assert correlation_load(ChannelSpec(K=1, rho=0.0), 1) == 0.0
        assert correlation_load(ChannelSpec(K=1, rho=0.5), 1) == pytest.approx(1.0 / 3.0, rel=1e-15)

    def test_total_load(self):
        spec = ChannelSpec(K=4, rho=0.9)
        direct = sum(0.81**k / (1 - 0.81**k) for k in range(1, 5))
        assert total_correlation_load(spec) == pytest.approx(direct, rel=1e-13)
        assert tail_ratio(spec) == pytest.approx(direct / (1 + direct), rel=1e-13)

    def test_load_increasing_in_rho(self):
        loads = [total_correlation_load(ChannelSpec(K=3, rho=r)) for r in (0.0, 0.2, 0.5, 0.8, 0.95)]
        assert loads[0] == 0.0
        assert all(b > a for a, b in zip(loads, loads[1:]))

    def test_tail_ratio_range(self):
        assert tail_ratio(ChannelSpec(K=5, rho=0.0)) == 0.0
        assert 0.0 < tail_ratio(ChannelSpec(K=5, rho=0.99)) < 1.0


class TestGammaScale:
    def test_independent_unit(self):
        spec = ChannelSpec(K=1, rho=0.0)
        assert gamma_scale(spec, PowerProfile.equal(1, 1.0), 1) == 1.0

    def test_correlated(self):
        spec = ChannelSpec(K=2, rho=0.5)
        assert gamma_scale(spec, PowerProfile.equal(2, 10.0), 1) == pytest.approx(7.5, rel=1e-15)

    def test_sigma_and_fraction_enter(self):
        spec = ChannelSpec(K=2, rho=0.0, sigma_sq=(2.0, 3.0))
        power = PowerProfile(4.0, (0.5, 0.25))
        assert gamma_scale(spec, power, 1) == pytest.approx(4.0)
        assert gamma_scale(spec, power, 2) == pytest.approx(3.0)

    def test_decreasing_in_rho(self):
        power = PowerProfile.equal(3, 5.0)
        scales = [gamma_scale(ChannelSpec(K=3, rho=r), power, 2) for r in (0.0, 0.3, 0.6, 0.9)]
        assert all(b < a for a, b in zip(scales, scales[1:]))

    def test_fraction_count_checked(self):
        with pytest.raises(ConfigError):
            gamma_scale(ChannelSpec(K=2, rho=0.5), PowerProfile.equal(3, 1.0), 1)


@pytest.mark.parametrize(
    "rate,expected",
    [(1.0, 1.0), (2.0, 3.0), (0.5, math.sqrt(2.0) - 1.0)],
)
def test_snr_threshold(rate, expected):
    assert snr_threshold(ChannelSpec(K=1, rho=0.0, rate=rate)) == pytest.approx(expected, rel=1e-15)
