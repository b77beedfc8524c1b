"""Scalar special functions behind the outage series, the high-SNR forms and the
quadrature cross-check.

Every function here is pure and stateless, so they can be called from any thread.
"""
from __future__ import annotations

import math
from numbers import Integral

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson


# --------- Constants & accuracy knobs ----------
# relative size at which the ascending incomplete-gamma series stops adding terms.
GAMMA_SERIES_REL_TOL = 1e-17
# hard stop for the ascending series, far above what x < a + 1 ever needs.
GAMMA_SERIES_MAX_TERMS = 100_000
# Marcum-Q Poisson mixture: never sum more terms than this.
MARCUM_TERM_CAP = 10_000
# mixture terms below this size (past the Poisson mode) no longer change the result.
MARCUM_TERM_FLOOR = 1e-16


def _check_shape(a) -> int:
    if isinstance(a, bool) or not isinstance(a, Integral) or a < 1:
        raise ValueError(f"gamma shape must be a positive integer, got {a!r}")
    return int(a)


def _check_nonnegative(name: str, value) -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be a finite nonnegative real, got {value!r}")
    return value


def log_factorial(n: int) -> float:
    """ln(n!) through the log-gamma function, accurate to ~1e-15 relative."""
    if isinstance(n, bool) or not isinstance(n, Integral) or n < 0:
        raise ValueError(f"log_factorial needs a nonnegative integer, got {n!r}")
    if n < 2:
        return 0.0
    return float(gammaln(int(n) + 1))


def regularized_lower_gamma(a: int, x: float) -> float:
    """
    P(a, x) = γ(a, x) / Γ(a) for an integer shape a.

    Below x = a + 1 the ascending series x^a e^{-x} / Γ(a) · Σ x^m / (a(a+1)⋯(a+m))
    is used, so the small values in the outage tail never come out of a subtraction.
    Above it, the Poisson complement 1 - e^{-x} Σ_{m<a} x^m / m! is well conditioned.
    """
    a = _check_shape(a)
    x = _check_nonnegative("x", x)
    if x == 0.0:
        return 0.0

    if x < a + 1:
        term = 1.0 / a
        total = term
        for m in range(1, GAMMA_SERIES_MAX_TERMS):
            term *= x / (a + m)
            total += term
            if term < total * GAMMA_SERIES_REL_TOL:
                break
        log_prefix = a * math.log(x) - x - float(gammaln(a))
        return min(1.0, math.exp(log_prefix) * total)

    m = np.arange(a, dtype=float)
    log_terms = -x + m * math.log(x) - gammaln(m + 1.0)
    return max(0.0, 1.0 - math.fsum(np.exp(log_terms)))


def _marcum_window(noncentrality: float) -> np.ndarray:
    # Poisson(λ) mass beyond λ + 12√λ + 40 is far below MARCUM_TERM_FLOOR.
    span = int(noncentrality + 12.0 * math.sqrt(noncentrality) + 40.0)
    return np.arange(min(span, MARCUM_TERM_CAP), dtype=float)


def _marcum_mixture(a: float, b: float, upper: bool) -> float:
    lam = 0.5 * a * a
    y = 0.5 * b * b
    m = _marcum_window(lam)
    weights = poisson.pmf(m, lam)
    # Q1 mixes Pr{Poisson(b²/2) ≤ m}; its complement mixes the survival function.
    tails = poisson.cdf(m, y) if upper else poisson.sf(m, y)
    terms = weights * tails
    past_mode = m > lam
    keep = ~past_mode | (terms >= MARCUM_TERM_FLOOR)
    return min(1.0, max(0.0, math.fsum(terms[keep])))


def marcum_q1(a: float, b: float) -> float:
    """
    First-order Marcum Q function, Q1(a, b) = Σ_m Pois(m; a²/2) · Pr{Poisson(b²/2) ≤ m}.
    This is the complementary CDF of a Rician envelope, which is what each HARQ round
    looks like once the common channel anchor is known.
    """
    a = _check_nonnegative("a", a)
    b = _check_nonnegative("b", b)
    if b == 0.0:
        return 1.0
    if a == 0.0:
        return math.exp(-0.5 * b * b)
    return _marcum_mixture(a, b, upper=True)


def marcum_p1(a: float, b: float) -> float:
    """1 - Q1(a, b), summed directly so that small per-round CDFs keep their digits."""
    a = _check_nonnegative("a", a)
    b = _check_nonnegative("b", b)
    if b == 0.0:
        return 0.0
    if a == 0.0:
        return -math.expm1(-0.5 * b * b)
    return _marcum_mixture(a, b, upper=False)
