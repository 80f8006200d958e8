import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tfqkd.channel import KEY_PATTERNS, P01, P10, ChannelParams, yield_zz
from tfqkd.decoy_lp import (
    DEFAULT_DECOYS,
    DecoyObservations,
    InfeasibleObservations,
    LPStatus,
    Provenance,
    YieldBounds,
    build_lp,
    exact_yield_bounds,
    solve_lp,
    yield_upper_bounds,
)
from tfqkd.phase_error import TruncationSets

DEFAULT = TruncationSets.default()
TARGETS = [(a, b) for a in range(5) for b in range(5) if a + b <= 4]


def _obs(loss_db, p_d, decoys=DEFAULT_DECOYS):
    ch = ChannelParams.from_loss_db(loss_db, p_d, 2.0)
    return ch, DecoyObservations.from_channel(ch, decoys)


def test_observation_validation():
    with pytest.raises(ValueError):
        DecoyObservations(((-0.1, 0.0),), {P10: (0.1,)})
    with pytest.raises(ValueError):
        DecoyObservations(((0.1, 0.0),), {P10: (1.2,)})
    with pytest.raises(ValueError):
        DecoyObservations(((0.1, 0.0),), {P10: (0.1, 0.2)})


def test_default_problem_size():
    _, obs = _obs(20, 1e-7)
    lp = build_lp((0, 0), obs, DEFAULT)
    assert len(obs.intensities) == 9
    assert len(lp.variables) == 121
    assert lp.n_constraints == 18
    assert np.all(np.isfinite(lp.A_ub))


def test_pinned_single_variable():
    sets = TruncationSets(frozenset({(0, 0)}), frozenset(), m_cut=0)
    obs = DecoyObservations(((0.0, 0.0),), {P10: (0.0123,)})
    val, status = solve_lp(build_lp((0, 0), obs, sets))
    assert status is LPStatus.OPTIMAL
    assert val == pytest.approx(0.0123, abs=1e-9)


def test_no_observations_gives_box_optimum():
    obs = DecoyObservations((), {})
    assert solve_lp(build_lp((2, 2), obs, DEFAULT)) == (1.0, LPStatus.OPTIMAL)


def test_target_outside_s_cut():
    _, obs = _obs(20, 1e-7)
    with pytest.raises(ValueError):
        build_lp((11, 0), obs, DEFAULT)


def test_inconsistent_gains_are_infeasible():
    # vacuum gain far above every other gain: no yield table matches
    obs = DecoyObservations(((0.0, 0.0), (0.1, 0.0)), {P10: (0.9, 0.0)})
    val, status = solve_lp(build_lp((0, 0), obs, DEFAULT))
    assert status is LPStatus.INFEASIBLE and math.isnan(val)
    with pytest.raises(InfeasibleObservations):
        yield_upper_bounds(obs, DEFAULT, [P10])


@pytest.mark.parametrize("loss_db", [0, 30, 60, 90])
@pytest.mark.parametrize("p_d", [1e-8, 1e-6])
def test_soundness(loss_db, p_d):
    ch, obs = _obs(loss_db, p_d)
    for pat in KEY_PATTERNS:
        for t in TARGETS:
            val, status = solve_lp(build_lp(t, obs, DEFAULT, pat))
            assert status is LPStatus.OPTIMAL
            assert 0.0 <= val <= 1.0
            assert val >= yield_zz(*t, pat, ch)


def test_vacuum_bound_tight_at_20db():
    ch, obs = _obs(20, 1e-7)
    bound = yield_upper_bounds(obs, DEFAULT)[P10][(0, 0)]
    true = yield_zz(0, 0, P10, ch)
    assert true <= bound <= 10 * true


def test_more_intensities_never_loosen():
    ch, obs3 = _obs(40, 1e-7)
    _, obs4 = _obs(40, 1e-7, DEFAULT_DECOYS + (0.02,))
    for t in [(0, 0), (1, 1), (0, 2), (2, 2)]:
        v3, _ = solve_lp(build_lp(t, obs3, DEFAULT))
        v4, _ = solve_lp(build_lp(t, obs4, DEFAULT))
        assert v4 <= v3 + 1e-9


def test_deterministic():
    _, obs = _obs(50, 1e-6)
    vals = {solve_lp(build_lp((2, 2), obs, DEFAULT))[0] for _ in range(3)}
    assert max(vals) - min(vals) < 1e-10


def test_exact_mode_copies_yields():
    ch = ChannelParams.from_loss_db(30, 1e-7, 2.0)
    bounds = exact_yield_bounds(ch, DEFAULT)
    for pat in KEY_PATTERNS:
        for j in (0, 1):
            for pair in DEFAULT.photon_pairs(j):
                assert bounds[pat][pair] == yield_zz(*pair, pat, ch)
                assert bounds[pat].provenance(pair) is Provenance.EXACT
        assert bounds[pat].provenance((5, 5)) is Provenance.TRIVIAL
        assert bounds[pat][(5, 5)] == 1.0


def test_lp_mode_provenance_and_empty_sets():
    _, obs = _obs(30, 1e-7)
    bounds = yield_upper_bounds(obs, DEFAULT, [P01])
    assert bounds[P01].provenance((2, 2)) is Provenance.LP
    empty = yield_upper_bounds(obs, TruncationSets(frozenset(), frozenset()), [P01])[P01]
    assert empty.as_mapping() == {}
    assert isinstance(empty, YieldBounds) and empty[(0, 0)] == 1.0


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 120.0), st.floats(0.0, 1e-5), st.floats(0.0, 10.0),
       st.lists(st.floats(1e-4, 0.5), min_size=1, max_size=3), st.sampled_from(TARGETS))
def test_soundness_random_channels(loss_db, p_d, mis, decoys, target):
    ch = ChannelParams.from_loss_db(loss_db, p_d, mis)
    obs = DecoyObservations.from_channel(ch, (0.0, *decoys), [P10])
    val, status = solve_lp(build_lp(target, obs, DEFAULT, P10))
    assert status is LPStatus.OPTIMAL
    assert val >= yield_zz(*target, P10, ch)
