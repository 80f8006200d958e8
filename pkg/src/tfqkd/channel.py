"""Closed-form channel model for the interference station.

Each arm (Alice-C, Bob-C) is a pure-loss channel of transmittance sqrt(eta)
that also rotates the polarization by theta_A (theta_B). Bob's pulses pick up
an extra phase phi = delta * pi. The station interferes the arms on a 50:50
beamsplitter; port c is the constructive output, port d the destructive one.
Both threshold detectors are polarization-insensitive and have the same dark
count probability p_d.

Only the key patterns (k_c, k_d) in {(1, 0), (0, 1)} have closed forms here.
The full pattern space is covered by :mod:`tfqkd.fock_oracle`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

from tfqkd.numerics import bessel_i0


class Pattern(NamedTuple):
    """Click flags announced by the station: (k_c, k_d)."""

    k_c: int
    k_d: int

    @property
    def is_key(self) -> bool:
        return (self.k_c ^ self.k_d) == 1

    def __str__(self) -> str:
        return f"{self.k_c}{self.k_d}"


P00 = Pattern(0, 0)
P10 = Pattern(1, 0)
P01 = Pattern(0, 1)
P11 = Pattern(1, 1)
KEY_PATTERNS = (P10, P01)
ALL_PATTERNS = (P00, P10, P01, P11)


@dataclass(frozen=True)
class ChannelParams:
    """Physical parameters of one evaluation point.

    Attributes:
        eta: total Alice-Bob transmittance, detector efficiency included.
            Each arm has transmittance sqrt(eta).
        p_d: dark count probability per detector per pulse.
        theta_A, theta_B: polarization rotation angles of each arm (radians).
        delta: phase mismatch as a fraction of pi, applied to Bob's arm.
    """

    eta: float
    p_d: float = 0.0
    theta_A: float = 0.0
    theta_B: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if not 0.0 <= self.p_d <= 1.0:
            raise ValueError(f"p_d must lie in [0, 1], got {self.p_d}")
        for name in ("theta_A", "theta_B", "delta"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @classmethod
    def from_loss_db(cls, loss_db: float, p_d: float = 0.0,
                     misalignment_percent: float = 0.0, delta: float = 0.0) -> "ChannelParams":
        """Build parameters from a total loss in dB and a misalignment in percent.

        The loss is split evenly between the arms. A misalignment of x percent
        means theta_A = -theta_B = arcsin(sqrt(x / 100)).
        """
        if loss_db < 0:
            raise ValueError(f"loss must be >= 0 dB, got {loss_db}")
        theta = misalignment_angle(misalignment_percent)
        return cls(eta=10.0 ** (-loss_db / 10.0), p_d=p_d, theta_A=theta, theta_B=-theta, delta=delta)

    @property
    def arm_transmittance(self) -> float:
        return math.sqrt(self.eta)

    @property
    def phi(self) -> float:
        return self.delta * math.pi

    @property
    def theta(self) -> float:
        return self.theta_A - self.theta_B

    @property
    def visibility(self) -> float:
        """Interference factor Omega = cos(phi) cos(theta_A - theta_B)."""
        return math.cos(self.phi) * math.cos(self.theta)


def misalignment_angle(percent: float) -> float:
    if not 0.0 <= percent <= 100.0:
        raise ValueError(f"misalignment must be a percentage in [0, 100], got {percent}")
    return math.asin(math.sqrt(percent / 100.0))


def _require_key(pattern: Pattern) -> None:
    if not Pattern(*pattern).is_key:
        raise ValueError(f"closed forms cover single-click patterns only, got {tuple(pattern)}")


def _check_alpha(alpha: float) -> None:
    if alpha < 0 or not math.isfinite(alpha):
        raise ValueError(f"amplitude must be finite and >= 0, got {alpha}")


def _f(gamma: float, sign: int, omega: float) -> float:
    """f^{+/-} = e^{-gamma(1 +/- omega)} - e^{-2 gamma}, without cancellation."""
    return -math.exp(-gamma * (1 + sign * omega)) * math.expm1(-gamma * (1 - sign * omega))


def gain_xx(b_A: int, b_B: int, pattern: Pattern, alpha: float, ch: ChannelParams) -> float:
    """Probability of ``pattern`` when Alice and Bob send |(-1)^b_A alpha>, |(-1)^b_B alpha>."""
    _require_key(pattern)
    _check_alpha(alpha)
    gamma = ch.arm_transmittance * alpha * alpha
    sign = -1 if (pattern[0] ^ b_A ^ b_B) == 1 else 1
    q = _f(gamma, sign, ch.visibility)
    return (1 - ch.p_d) * (ch.p_d * math.exp(-2 * gamma) + q)


def p_xx_total(pattern: Pattern, alpha: float, ch: ChannelParams) -> float:
    """X-basis probability of ``pattern`` averaged over the four bit pairs."""
    _require_key(pattern)
    _check_alpha(alpha)
    gamma = ch.arm_transmittance * alpha * alpha
    omega = ch.visibility
    # 1/2 (1-p_d)(e^{-g W} + e^{g W}) e^{-g} - (1-p_d)^2 e^{-2g}, regrouped as
    # (1-p_d) e^{-2g} [cosh(gW) e^{g} - 1 + p_d]
    bracket = math.cosh(gamma * omega) * math.exp(gamma) - 1.0
    if bracket < 1e-3:
        # cosh(gW) e^g - 1 = expm1(g) + (cosh(gW) - 1) e^g
        bracket = math.expm1(gamma) + 2.0 * math.sinh(gamma * omega / 2) ** 2 * math.exp(gamma)
    return (1 - ch.p_d) * math.exp(-2 * gamma) * (bracket + ch.p_d)


def bit_error_x(alpha: float, ch: ChannelParams) -> float:
    """Bit-error rate of the X-basis key, identical for both key patterns."""
    _check_alpha(alpha)
    gamma = ch.arm_transmittance * alpha * alpha
    omega = ch.visibility
    # multiply numerator and denominator by e^{gamma} to keep the small-gamma
    # differences as expm1 terms
    num = math.expm1(gamma * (1 - omega)) + ch.p_d
    den = num + math.expm1(gamma * (1 + omega)) + ch.p_d
    if den <= 1e-300:
        raise ZeroDivisionError("bit error rate undefined: no single-click events (alpha = 0 and p_d = 0)")
    return num / den


def gain_zz(beta_A: float, beta_B: float, pattern: Pattern, ch: ChannelParams) -> float:
    """Probability of ``pattern`` for phase-randomized coherent inputs of amplitudes beta_A, beta_B."""
    _require_key(pattern)
    _check_alpha(beta_A)
    _check_alpha(beta_B)
    t = ch.arm_transmittance
    mean = (beta_A**2 + beta_B**2) * t
    i0 = bessel_i0(beta_A * beta_B * t * math.cos(ch.theta))
    # e^{-m/2} I0 - e^{-m} = e^{-m/2} [(I0 - 1) - expm1(-m/2)]
    q = math.exp(-mean / 2) * ((i0 - 1.0) - math.expm1(-mean / 2))
    return (1 - ch.p_d) * (ch.p_d * math.exp(-mean) + q)


@lru_cache(maxsize=None)
def _angular_sum(k: int, l: int, theta_A: float, theta_B: float) -> float:
    """Inner triple sum over (m, p, s) of the photon-number yield formula.

    Returns the probability that k photons from Alice's arm and l from Bob's
    arm leave port d empty. Combinatorial prefactors are exact integers, so
    nothing overflows at large photon number.
    """
    cA, sA = math.cos(theta_A), math.sin(theta_A)
    cB, sB = math.cos(theta_B), math.sin(theta_B)
    norm = (2 ** (k + l)) * math.factorial(k) * math.factorial(l)
    terms = []
    for m in range(k + 1):
        for p in range(l + 1):
            mp = m + p
            fact = math.factorial(mp) * math.factorial(k + l - mp)
            for s in range(max(0, mp - l), min(k, mp) + 1):
                weight = (math.comb(k, m) * math.comb(l, p) * math.comb(k, s)
                          * math.comb(l, mp - s) * fact)
                trig = (cA ** (m + s) * cB ** (m + 2 * p - s)
                        * sA ** (2 * k - m - s) * sB ** (2 * l - m - 2 * p + s))
                if trig != 0.0:
                    terms.append((weight / norm) * trig)
    return math.fsum(terms)


def yield_zz(n_A: int, n_B: int, pattern: Pattern, ch: ChannelParams) -> float:
    """Probability of ``pattern`` given n_A photons from Alice and n_B from Bob.

    The phase mismatch does not enter: a phase on one arm is a global phase
    on each photon-number input.
    """
    _require_key(pattern)
    if n_A < 0 or n_B < 0:
        raise ValueError(f"photon numbers must be >= 0, got ({n_A}, {n_B})")
    t = ch.arm_transmittance
    lost = 1.0 - t
    terms = []
    for k in range(n_A + 1):
        for l in range(n_B + 1):
            survive = (math.comb(n_A, k) * math.comb(n_B, l)
                       * t ** (k + l) * lost ** (n_A + n_B - k - l))
            if survive != 0.0:
                terms.append(survive * _angular_sum(k, l, ch.theta_A, ch.theta_B))
    all_vacuum = lost ** (n_A + n_B)
    q = math.fsum(terms) - all_vacuum
    return (1 - ch.p_d) * (ch.p_d * all_vacuum + q)
