"""Brute-force simulator of the interference station on truncated Fock spaces.

Used as the independent check of every closed form in :mod:`tfqkd.channel`
and :mod:`tfqkd.ideal_protocol`. Nothing here reuses those formulas.

States live on four arm modes (aH, aV, bH, bV) and are stored as a dict from
occupation tuples to complex amplitudes. Two code paths feed the detector:

* Photon-number inputs. Loss is applied as exact binomial damping of the
  amplitudes, one Kraus branch per number of photons lost in each mode, so
  the channel output is a list of unnormalized pure branches (the
  purification over loss outcomes). Rotations and Bob's phase then act on
  creation operators of each branch.
* Product coherent inputs. A displaced vacuum stays a product coherent state
  through loss and passive optics, so the arm amplitudes are transformed
  directly and the resulting product state is expanded in truncated Fock
  amplitudes. The truncation is raised until the omitted weight is < 1e-12.

Detection interferes the arms on a 50:50 beamsplitter, c = (a + b)/sqrt(2)
and d = (a - b)/sqrt(2) per polarization, and a port clicks when either of its
polarization modes is occupied. Projecting a port onto vacuum amounts to
dropping its creation operators, so only the surviving port's two modes ever
need expanding.
"""

from __future__ import annotations

import cmath
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping

from tfqkd.channel import ALL_PATTERNS, ChannelParams, Pattern

Occupation = tuple[int, int, int, int]
AH, AV, BH, BV = range(4)

DEFAULT_N_TRUNC = 12
COHERENT_TAIL_TOL = 1e-12
NORM_TOL = 1e-10


class TruncationError(ValueError):
    """Raised when a state does not fit in the requested photon-number cutoff."""


@dataclass
class ModeState:
    """Pure (possibly unnormalized) state of the four arm modes.

    Attributes:
        amplitudes: occupation (n_aH, n_aV, n_bH, n_bV) -> complex amplitude.
        n_trunc: bound on the total photon number of any stored occupation.
        tail: weight of the ideal state dropped by truncation.
    """

    amplitudes: dict[Occupation, complex] = field(default_factory=dict)
    n_trunc: int = DEFAULT_N_TRUNC
    tail: float = 0.0

    def __post_init__(self):
        for occ in self.amplitudes:
            if min(occ) < 0:
                raise ValueError(f"negative occupation {occ}")
            if sum(occ) > self.n_trunc:
                raise TruncationError(f"occupation {occ} exceeds n_trunc={self.n_trunc}")

    def norm_sq(self) -> float:
        return math.fsum(abs(a) ** 2 for a in self.amplitudes.values())

    def __add__(self, other: "ModeState") -> "ModeState":
        out = defaultdict(complex, self.amplitudes)
        for occ, amp in other.amplitudes.items():
            out[occ] += amp
        return ModeState(dict(out), max(self.n_trunc, other.n_trunc), self.tail + other.tail)

    def scaled(self, factor: complex) -> "ModeState":
        return ModeState({o: factor * a for o, a in self.amplitudes.items()}, self.n_trunc,
                         abs(factor) ** 2 * self.tail)


def fock_input(n_A: int, n_B: int, n_trunc: int | None = None) -> ModeState:
    """|n_A>_aH |n_B>_bH."""
    if n_trunc is None:
        n_trunc = max(DEFAULT_N_TRUNC, n_A + n_B)
    if n_A + n_B > n_trunc:
        raise TruncationError(f"n_A + n_B = {n_A + n_B} exceeds n_trunc={n_trunc}")
    return ModeState({(n_A, 0, n_B, 0): 1.0 + 0j}, n_trunc)


def _coherent_amps(beta: complex, n_max: int) -> list[complex]:
    amps = [cmath.exp(-abs(beta) ** 2 / 2)]
    for n in range(1, n_max + 1):
        amps.append(amps[-1] * beta / math.sqrt(n))
    return amps


def coherent_product(betas: tuple[complex, complex, complex, complex], n_trunc: int) -> ModeState:
    """Truncated product of coherent states on (aH, aV, bH, bV), total photons <= n_trunc."""
    per_mode = [_coherent_amps(b, n_trunc) for b in betas]
    amps = {}
    for n0 in range(n_trunc + 1):
        for n1 in range(n_trunc + 1 - n0):
            for n2 in range(n_trunc + 1 - n0 - n1):
                for n3 in range(n_trunc + 1 - n0 - n1 - n2):
                    a = per_mode[0][n0] * per_mode[1][n1] * per_mode[2][n2] * per_mode[3][n3]
                    if a != 0:
                        amps[(n0, n1, n2, n3)] = a
    state = ModeState(amps, n_trunc)
    state.tail = max(0.0, 1.0 - state.norm_sq())
    return state


def coherent_input(alpha_A: complex, alpha_B: complex, n_trunc: int | None = None) -> ModeState:
    """|alpha_A>_aH |alpha_B>_bH, truncated so that the dropped weight is below 1e-12."""
    n = DEFAULT_N_TRUNC if n_trunc is None else n_trunc
    while True:
        state = coherent_product((alpha_A, 0, alpha_B, 0), n)
        if state.tail < COHERENT_TAIL_TOL or n_trunc is not None:
            return state
        n += 4


def _rotation_and_phase(ch: ChannelParams) -> list[list[complex]]:
    """Mode map: column i lists the output-mode coefficients of input creation operator i.

    a_H^+ -> cos(tA) a_H^+ - sin(tA) a_V^+, with the orthogonal input mode
    completing the rotation; Bob's modes also gain exp(i phi).
    """
    cA, sA = math.cos(ch.theta_A), math.sin(ch.theta_A)
    cB, sB = math.cos(ch.theta_B), math.sin(ch.theta_B)
    ph = cmath.exp(1j * ch.phi)
    u = [[0j] * 4 for _ in range(4)]
    u[AH][AH], u[AV][AH] = cA, -sA
    u[AH][AV], u[AV][AV] = sA, cA
    u[BH][BH], u[BV][BH] = ph * cB, -ph * sB
    u[BH][BV], u[BV][BV] = ph * sB, ph * cB
    return u


def _expand_power(coeffs: list[complex], n: int) -> dict[Occupation, complex]:
    """Expand (sum_j coeffs[j] x_j)^n into monomial coefficients."""
    poly = {(0, 0, 0, 0): 1.0 + 0j}
    for _ in range(n):
        nxt = defaultdict(complex)
        for mono, c in poly.items():
            for j, u in enumerate(coeffs):
                if u != 0:
                    m = list(mono)
                    m[j] += 1
                    nxt[tuple(m)] += c * u
        poly = nxt
    return dict(poly)


def apply_linear_optics(state: ModeState, u: list[list[complex]]) -> ModeState:
    """Apply the passive mode transformation a_i^+ -> sum_j u[j][i] a_j^+ exactly."""
    cols = [[u[j][i] for j in range(4)] for i in range(4)]
    powers: dict[tuple[int, int], dict[Occupation, complex]] = {}
    out = defaultdict(complex)
    for occ, amp in state.amplitudes.items():
        poly = {(0, 0, 0, 0): amp / math.sqrt(math.prod(math.factorial(n) for n in occ))}
        for i, n in enumerate(occ):
            if n == 0:
                continue
            key = (i, n)
            if key not in powers:
                powers[key] = _expand_power(cols[i], n)
            nxt = defaultdict(complex)
            for m1, c1 in poly.items():
                for m2, c2 in powers[key].items():
                    nxt[tuple(x + y for x, y in zip(m1, m2))] += c1 * c2
            poly = nxt
        for mono, c in poly.items():
            out[mono] += c * math.sqrt(math.prod(math.factorial(n) for n in mono))
    return ModeState(dict(out), state.n_trunc, state.tail)


def _loss_branches(state: ModeState, t: float) -> dict[Occupation, ModeState]:
    """Kraus decomposition of a pure-loss channel of transmittance t on every mode.

    Branch key = photons lost per mode; K_k |n> = sqrt(C(n,k) t^(n-k) (1-t)^k) |n-k>.
    """
    branches: dict[Occupation, dict[Occupation, complex]] = defaultdict(lambda: defaultdict(complex))
    for occ, amp in state.amplitudes.items():
        ranges = [range(n + 1) for n in occ]
        for k0 in ranges[0]:
            for k1 in ranges[1]:
                for k2 in ranges[2]:
                    for k3 in ranges[3]:
                        lost = (k0, k1, k2, k3)
                        w = 1.0
                        for n, k in zip(occ, lost):
                            w *= math.comb(n, k) * t ** (n - k) * (1 - t) ** k
                        if w == 0.0:
                            continue
                        kept = tuple(n - k for n, k in zip(occ, lost))
                        branches[lost][kept] += amp * math.sqrt(w)
    return {k: ModeState(dict(v), state.n_trunc) for k, v in branches.items()}


@dataclass
class ChannelOutput:
    """Arm-mode state at the station, as a sum of orthogonal unnormalized pure branches."""

    branches: dict[Occupation, ModeState]
    tail: float = 0.0


def apply_losses_and_misalignment(state: ModeState, ch: ChannelParams) -> ChannelOutput:
    """Send a photon-number-basis state through both arms.

    Per-arm transmittance sqrt(eta) (Kraus branches over lost photons), then
    the polarization rotations and Bob's phase shift.
    """
    u = _rotation_and_phase(ch)
    branches = {}
    for lost, branch in _loss_branches(state, ch.arm_transmittance).items():
        branches[lost] = apply_linear_optics(branch, u)
    return ChannelOutput(branches, state.tail)


def coherent_channel_output(alpha_A: complex, alpha_B: complex, ch: ChannelParams,
                            n_trunc: int | None = None) -> ChannelOutput:
    """Coherent inputs through both arms, using the coherent-state algebra path."""
    t = math.sqrt(ch.arm_transmittance)
    u = _rotation_and_phase(ch)
    src = (alpha_A * t, 0, alpha_B * t, 0)
    arm = tuple(sum(u[j][i] * src[i] for i in range(4)) for j in range(4))
    n = DEFAULT_N_TRUNC if n_trunc is None else n_trunc
    while True:
        state = coherent_product(arm, n)
        if state.tail < COHERENT_TAIL_TOL or n_trunc is not None:
            return ChannelOutput({(0, 0, 0, 0): state}, state.tail)
        n += 4


def _port_amplitudes(state: ModeState, keep: str) -> dict[tuple[int, int], complex]:
    """Amplitudes on the kept port's (H, V) modes after projecting the other port onto vacuum.

    keep is 'c', 'd' or '' (project both ports onto vacuum).
    """
    r = 1 / math.sqrt(2)
    sign_b = {"c": 1.0, "d": -1.0}.get(keep)
    coeff = defaultdict(complex)
    for (nah, nav, nbh, nbv), amp in state.amplitudes.items():
        total = nah + nav + nbh + nbv
        if keep == "":
            if total == 0:
                coeff[(0, 0)] += amp
            continue
        c = amp * r**total * sign_b ** (nbh + nbv)
        c /= math.sqrt(math.factorial(nah) * math.factorial(nav) * math.factorial(nbh) * math.factorial(nbv))
        coeff[(nah + nbh, nav + nbv)] += c
    if keep == "":
        return dict(coeff)
    return {(mh, mv): c * math.sqrt(math.factorial(mh) * math.factorial(mv))
            for (mh, mv), c in coeff.items()}


def _overlap(x: Mapping, y: Mapping) -> complex:
    return sum(x[k].conjugate() * y[k] for k in x.keys() & y.keys())


def vacuum_projections(out: ChannelOutput, other: ChannelOutput | None = None) -> dict[str, complex]:
    """<other| P |out> for P = (d empty), (c empty), (both empty), and identity.

    With other=None this gives probabilities; with two different channel
    outputs it gives the matching off-diagonal elements, which Protocol 1
    needs for its qubit-conditioned states.
    """
    other = out if other is None else other
    res = {"d_empty": 0j, "c_empty": 0j, "both_empty": 0j, "total": 0j}
    for lost, br in out.branches.items():
        ob = other.branches.get(lost)
        if ob is None:
            continue
        res["d_empty"] += _overlap(_port_amplitudes(ob, "c"), _port_amplitudes(br, "c"))
        res["c_empty"] += _overlap(_port_amplitudes(ob, "d"), _port_amplitudes(br, "d"))
        res["both_empty"] += _overlap(_port_amplitudes(ob, ""), _port_amplitudes(br, ""))
        res["total"] += _overlap(ob.amplitudes, br.amplitudes)
    return res


def pattern_distribution(proj: Mapping[str, complex], p_d: float) -> dict[Pattern, complex]:
    """Threshold-detector statistics with independent dark counts.

    Works equally for diagonal elements (probabilities) and off-diagonal ones.
    """
    both = proj["both_empty"]
    raw = {
        Pattern(0, 0): both,
        Pattern(1, 0): proj["d_empty"] - both,
        Pattern(0, 1): proj["c_empty"] - both,
        Pattern(1, 1): proj["total"] - proj["d_empty"] - proj["c_empty"] + both,
    }
    stay = 1 - p_d
    out = {}
    for kc, kd in ALL_PATTERNS:
        val = 0j
        for (rc, rd), r in raw.items():
            # a raw click always clicks; a silent detector clicks with prob p_d
            pc = 1.0 if rc else (p_d if kc else stay)
            if rc and not kc:
                continue
            pdd = 1.0 if rd else (p_d if kd else stay)
            if rd and not kd:
                continue
            val += r * pc * pdd
        out[Pattern(kc, kd)] = val
    return out


def detect(out: ChannelOutput, p_d: float) -> dict[Pattern, float]:
    """Distribution over the four click patterns for the channel output ``out``."""
    if not 0.0 <= p_d <= 1.0:
        raise ValueError(f"p_d must lie in [0, 1], got {p_d}")
    dist = pattern_distribution(vacuum_projections(out), p_d)
    return {k: v.real for k, v in dist.items()}


def oracle_yield(n_A: int, n_B: int, pattern: Pattern, ch: ChannelParams) -> float:
    """Exact probability of ``pattern`` for photon-number inputs |n_A>|n_B>."""
    out = apply_losses_and_misalignment(fock_input(n_A, n_B), ch)
    return detect(out, ch.p_d)[Pattern(*pattern)]


def oracle_gain_xx(b_A: int, b_B: int, pattern: Pattern, alpha: float, ch: ChannelParams,
                   n_trunc: int | None = None) -> float:
    """Probability of ``pattern`` for coherent inputs |(-1)^b_A alpha>, |(-1)^b_B alpha>."""
    out = coherent_channel_output((-1) ** b_A * alpha, (-1) ** b_B * alpha, ch, n_trunc)
    return detect(out, ch.p_d)[Pattern(*pattern)]


def oracle_distribution_fock(n_A: int, n_B: int, ch: ChannelParams) -> dict[Pattern, float]:
    return detect(apply_losses_and_misalignment(fock_input(n_A, n_B), ch), ch.p_d)
