import math

import numpy as np
import pytest

from tfqkd.channel import KEY_PATTERNS, P01, P10, ChannelParams, p_xx_total
from tfqkd.decoy_lp import Provenance, YieldBounds
from tfqkd.keyrate import (
    ALPHA_SQ_MIN,
    Scenario,
    evaluate,
    key_rate_pattern,
    key_rate_total,
    optimize_alpha,
    plob_bound,
    resolve_bounds,
    scan_loss,
)
from tfqkd.numerics import binary_entropy
from tfqkd.phase_error import TruncationSets

DEFAULT = TruncationSets.default()
BASE = Scenario(p_d=1e-7, misalignment_percent=2.0)


@pytest.mark.parametrize("eta, expected", [(0.5, 1.0), (0.9, 3.321928094887362), (1e-9, 1e-9 / math.log(2))])
def test_plob_bound(eta, expected):
    assert plob_bound(eta) == pytest.approx(expected, rel=1e-9)


@pytest.mark.parametrize("eta", [0.0, 1.0, -0.5])
def test_plob_domain(eta):
    with pytest.raises(ValueError):
        plob_bound(eta)


def test_pattern_rate_formula():
    ch = ChannelParams.from_loss_db(30, 1e-7, 2.0)
    bounds = resolve_bounds(ch, DEFAULT)
    pr = key_rate_pattern(P10, 0.2, ch, bounds[P10], DEFAULT)
    assert pr.p_xx == p_xx_total(P10, 0.2, ch)
    expected = pr.p_xx * (1 - binary_entropy(pr.e_x) - binary_entropy(pr.e_z_upp))
    assert pr.rate == pytest.approx(expected, rel=1e-14)
    assert not pr.degenerate


def test_pattern_rate_near_full_when_errors_vanish():
    # perfect channel, tiny alpha, every relevant yield bounded by 0
    ch = ChannelParams(0.5)
    sets = TruncationSets.from_n_max(20, m_cut=20)
    bounds = YieldBounds(P10, {p: (0.0, Provenance.EXACT) for j in (0, 1) for p in sets.photon_pairs(j)})
    pr = key_rate_pattern(P10, 1e-3, ch, bounds, sets)
    assert pr.e_x == 0.0
    assert pr.e_z_upp < 1e-12
    assert pr.rate == pytest.approx(pr.p_xx, rel=1e-9)


def test_phase_error_clamped_at_half():
    ch = ChannelParams.from_loss_db(60, 1e-3, 2.0)
    trivial = YieldBounds(P10)
    pr = key_rate_pattern(P10, 0.5, ch, trivial, DEFAULT)
    assert pr.e_z_upp > 0.5
    assert pr.rate == pytest.approx(pr.p_xx * (-binary_entropy(pr.e_x)), rel=1e-12)
    assert pr.rate <= 0.0


def test_total_clamps_each_pattern():
    ch = ChannelParams.from_loss_db(60, 1e-3, 2.0)
    bounds = {p: YieldBounds(p) for p in KEY_PATTERNS}
    pt = key_rate_total(0.5, ch, bounds, DEFAULT)
    assert all(pr.rate < 0 for pr in pt.patterns.values())
    assert pt.rate == 0.0


def test_degenerate_point():
    ch = ChannelParams(0.01, p_d=1.0)
    pt = key_rate_total(0.3, ch, resolve_bounds(ch, DEFAULT), DEFAULT)
    assert pt.rate == 0.0
    assert all(pr.degenerate for pr in pt.patterns.values())
    _, best = optimize_alpha(ch, DEFAULT)
    assert best.rate == 0.0 and best.alpha_sq == ALPHA_SQ_MIN


@pytest.mark.parametrize("loss_db", [10, 40])
def test_symmetric_patterns_contribute_equally(loss_db):
    pt = evaluate(BASE, loss_db)
    assert abs(pt.patterns[P10].rate - pt.patterns[P01].rate) < 1e-12


def test_phase_mismatch_small_effect_at_40db():
    r0 = evaluate(BASE, 40).rate
    r5 = evaluate(Scenario(p_d=1e-7, misalignment_percent=2.0, delta=0.05), 40).rate
    assert abs(r5 - r0) <= 0.2 * r0


def test_alpha_stable_under_grid_refinement():
    ch = BASE.channel(40)
    a40, _ = optimize_alpha(ch, DEFAULT, grid_points=40)
    a80, _ = optimize_alpha(ch, DEFAULT, grid_points=80)
    assert a40**2 == pytest.approx(a80**2, rel=0.02)


def test_alpha_opt_is_local_maximum():
    ch = BASE.channel(40)
    a, pt = optimize_alpha(ch, DEFAULT)
    bounds = resolve_bounds(ch, DEFAULT)
    for f in (0.97, 1.03):
        assert key_rate_total(a * math.sqrt(f), ch, bounds, DEFAULT).rate <= pt.rate * (1 + 1e-9)


def test_alpha_opt_monotone_in_loss_without_dark_counts():
    rows = scan_loss(Scenario(), np.arange(0.0, 81.0, 10.0))
    a2 = [r.alpha_sq for r in rows]
    assert all(x >= y * (1 - 1e-3) for x, y in zip(a2, a2[1:]))


def test_rate_nonincreasing_and_decoy_below_exact():
    losses = np.arange(0.0, 71.0, 5.0)
    exact = scan_loss(BASE, losses)
    decoy = scan_loss(Scenario(p_d=1e-7, misalignment_percent=2.0, yield_mode="decoy"), losses)
    er = [p.rate for p in exact]
    assert all(x >= y for x, y in zip(er, er[1:]))
    for e, d in zip(exact, decoy):
        assert d.rate <= e.rate * (1 + 1e-6)


def test_fixed_alpha_scenario():
    pt = evaluate(Scenario(p_d=1e-7, misalignment_percent=2.0, alpha_sq=0.03), 30)
    assert pt.alpha_sq == pytest.approx(0.03)
    assert pt.rate > 0


def test_scan_rejects_decreasing_grid_and_records_errors():
    with pytest.raises(ValueError):
        scan_loss(BASE, [10, 5])
    rows = scan_loss(Scenario(yield_mode="bogus"), [10.0, 20.0])
    assert all(r.error and math.isnan(r.rate) for r in rows)
    assert [r.loss_db for r in rows] == [10.0, 20.0]


def test_scan_deterministic():
    a = [(p.alpha_sq, p.rate) for p in scan_loss(BASE, [20.0, 45.0])]
    b = [(p.alpha_sq, p.rate) for p in scan_loss(BASE, [20.0, 45.0])]
    assert a == b


def test_beats_plob_at_high_loss():
    pt = evaluate(BASE, 50)
    assert pt.rate > pt.plob
