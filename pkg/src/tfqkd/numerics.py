"""Scalar special functions and series helpers shared by the rate modules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

ENTROPY_DOMAIN_TOL = 1e-12
BESSEL_MAX_ARG = 700.0
_LOG_SPACE_THRESHOLD = 20


@dataclass(frozen=True)
class TruncatedSeries:
    """Leading terms of a nonnegative series plus a rigorous bound on the rest.

    Attributes:
        terms: the retained terms, all finite and nonnegative.
        tail_bound: upper bound on the sum of every omitted term.
    """

    terms: tuple[float, ...] = field(default_factory=tuple)
    tail_bound: float = 0.0

    def __post_init__(self):
        if self.tail_bound < 0 or not math.isfinite(self.tail_bound):
            raise ValueError(f"tail bound must be finite and >= 0, got {self.tail_bound}")
        for t in self.terms:
            if t < 0 or not math.isfinite(t):
                raise ValueError(f"series terms must be finite and >= 0, got {t}")

    @property
    def partial_sum(self) -> float:
        return math.fsum(self.terms)

    @property
    def upper(self) -> float:
        """Upper bound on the full infinite sum."""
        return self.partial_sum + self.tail_bound


def geometric_tail(next_term: float, ratio: float) -> float:
    """Bound sum_{k>=0} next_term * ratio**k for a series whose term ratios
    never exceed ``ratio`` from ``next_term`` on."""
    if next_term == 0.0:
        return 0.0
    if not 0.0 <= ratio < 1.0:
        raise ValueError(f"geometric majorant needs ratio in [0, 1), got {ratio}")
    return next_term / (1.0 - ratio)


def binary_entropy(x: float) -> float:
    """Binary Shannon entropy h(x) in bits, with 0 log 0 = 0.

    Values within 1e-12 outside [0, 1] are clipped to the boundary; anything
    further out raises ``ValueError``.

    >>> binary_entropy(0.5)
    1.0
    """
    if not (-ENTROPY_DOMAIN_TOL <= x <= 1.0 + ENTROPY_DOMAIN_TOL):
        raise ValueError(f"binary entropy argument outside [0, 1]: {x}")
    x = min(max(x, 0.0), 1.0)
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def poisson_pmf(mean: float, n: int) -> float:
    """Poisson probability e^-mean mean^n / n!.

    Evaluated in log space once n exceeds 20 so large photon numbers do not
    overflow the factorial.
    """
    if mean < 0 or not math.isfinite(mean):
        raise ValueError(f"Poisson mean must be finite and >= 0, got {mean}")
    if n < 0:
        raise ValueError(f"photon number must be >= 0, got {n}")
    if mean == 0.0:
        return 1.0 if n == 0 else 0.0
    if n <= _LOG_SPACE_THRESHOLD:
        return math.exp(-mean) * mean**n / math.factorial(n)
    return math.exp(-mean + n * math.log(mean) - math.lgamma(n + 1))


def poisson_tail(mean: float, n_max: int) -> float:
    """Probability mass of a Poisson(mean) variable above ``n_max``."""
    head = math.fsum(poisson_pmf(mean, n) for n in range(n_max + 1))
    return max(0.0, 1.0 - head)


def bessel_i0(z: float) -> float:
    """Modified Bessel function of the first kind, order zero.

    Sums the power series sum_k (z^2/4)^k / (k!)^2 until the terms stop
    contributing at double precision. All terms are positive so there is no
    cancellation; the accumulated rounding stays near 1e-13 relative even at
    the edge of the supported window |z| <= 700.
    """
    if not math.isfinite(z) or abs(z) > BESSEL_MAX_ARG:
        raise OverflowError(f"bessel_i0 supports |z| <= {BESSEL_MAX_ARG}, got {z}")
    quarter_sq = 0.25 * z * z
    term = 1.0
    terms = [term]
    running = term
    k = 0
    while True:
        k += 1
        term *= quarter_sq / (k * k)
        terms.append(term)
        running += term
        # terms only decrease once k passes |z|/2
        if k > abs(z) / 2 and term < 1e-17 * running:
            break
    return math.fsum(terms)
