import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tfqkd.ideal_protocol import (
    _raw_rate,
    error_rates_ideal,
    key_rate_protocol1,
    optimize_q,
    protocol1_with_imperfections,
    single_click_rates,
)

THETA2 = math.asin(math.sqrt(0.02))

# mpmath evaluations at 30 digits
RAW_Q05_ETA1 = -0.426238691777132804761658772491
R_Q088_ETA1 = 0.102339007414219436601226406922
EZ_Q094_20DB = 0.0571715145436308926780341023069
R_Q094_20DB = 0.00594177497327320470633812530336


@pytest.mark.parametrize("q, eta, expected", [
    (1.0, 0.3, (0.0, 0.0)),
    (0.5, 1.0, (0.25, 0.125)),
    (0.5, 0.25, (0.1875, 0.03125)),
    (0.94, 0.01, (0.005964, 0.000018)),
])
def test_single_click_rates(q, eta, expected):
    assert single_click_rates(q, eta) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("q, eta", [(-0.1, 0.5), (1.1, 0.5), (0.5, 0.0), (0.5, 1.5)])
def test_domain_errors(q, eta):
    with pytest.raises(ValueError):
        single_click_rates(q, eta)


def test_error_rates_values():
    assert error_rates_ideal(0.5, 1.0) == pytest.approx((1 / 6, 1 / 3), abs=1e-15)
    e_X, e_Z = error_rates_ideal(0.94, 0.01)
    assert e_Z == pytest.approx(EZ_Q094_20DB, rel=1e-13)
    assert e_Z == 2 * e_X
    with pytest.raises(ZeroDivisionError):
        error_rates_ideal(1.0, 0.5)


def test_error_rates_vanish_as_q_to_one():
    assert error_rates_ideal(1 - 1e-9, 0.1)[1] < 1e-7


@given(st.floats(0.0, 0.999), st.floats(1e-8, 1.0))
def test_error_identity_and_order(q, eta):
    e_X, e_Z = error_rates_ideal(q, eta)
    assert abs(e_Z - 2 * e_X) < 1e-15
    assert 0.0 <= e_X <= e_Z <= 1.0


@given(st.floats(0.0, 1.0), st.floats(1e-6, 0.5))
def test_click_rate_monotone_in_eta(q, eta):
    assert sum(single_click_rates(q, eta)) <= sum(single_click_rates(q, min(1.0, 2 * eta))) + 1e-16


def test_key_rate_values():
    assert key_rate_protocol1(1.0, 0.1) == 0.0
    assert _raw_rate(0.5, 1.0) == pytest.approx(RAW_Q05_ETA1, rel=1e-13)
    assert key_rate_protocol1(0.5, 1.0) == 0.0
    assert key_rate_protocol1(0.88, 1.0) == pytest.approx(R_Q088_ETA1, rel=1e-13)
    assert key_rate_protocol1(0.94, 0.01) == pytest.approx(R_Q094_20DB, rel=1e-13)


def test_key_rate_continuous_in_q():
    qs = np.linspace(0.0, 1.0, 2001)
    vals = np.array([key_rate_protocol1(float(q), 0.01) for q in qs])
    assert np.max(np.abs(np.diff(vals))) < 1e-4
    assert vals[0] == 0.0 and vals[-1] == 0.0


@pytest.mark.parametrize("loss_db, expected", [(0, 0.88), (20, 0.94), (40, 0.94)])
def test_optimize_q_matches_reported_optima(loss_db, expected):
    q_opt, r_opt = optimize_q(10 ** (-loss_db / 10))
    assert abs(q_opt - expected) <= 0.02
    assert r_opt == pytest.approx(key_rate_protocol1(q_opt, 10 ** (-loss_db / 10)), rel=1e-12)
    for dq in (-1e-3, 1e-3):
        assert key_rate_protocol1(q_opt + dq, 10 ** (-loss_db / 10)) <= r_opt


def test_optimize_q_no_positive_rate():
    assert optimize_q(1e-4, p_d=0.5) == (1.0, 0.0)


@pytest.mark.parametrize("q, eta", [(0.5, 1.0), (0.88, 1.0), (0.94, 0.01), (0.3, 0.2)])
def test_enumeration_reduces_to_closed_forms(q, eta):
    pt = protocol1_with_imperfections(q, eta)
    r1, r2 = single_click_rates(q, eta)
    e_X, e_Z = error_rates_ideal(q, eta)
    assert pt.r1 == pytest.approx(r1, abs=1e-12)
    assert pt.r2 == pytest.approx(r2, abs=1e-12)
    assert pt.r0 == pytest.approx(0.0, abs=1e-15)
    assert pt.e_X == pytest.approx(e_X, abs=1e-12)
    assert pt.e_Z == pytest.approx(e_Z, abs=1e-12)
    assert pt.R == pytest.approx(key_rate_protocol1(q, eta), abs=1e-12)


def test_dark_counts_raise_phase_error():
    clean = protocol1_with_imperfections(0.94, 1e-4)
    dark = protocol1_with_imperfections(0.94, 1e-4, p_d=1e-6)
    assert dark.e_Z > clean.e_Z
    assert dark.r0 > 0.0


def test_misalignment_raises_bit_error():
    clean = protocol1_with_imperfections(0.94, 1e-2)
    tilted = protocol1_with_imperfections(0.94, 1e-2, theta_A=THETA2, theta_B=-THETA2)
    assert tilted.e_X > clean.e_X
    assert tilted.R < clean.R


def test_all_dark_counts_give_no_key():
    pt = protocol1_with_imperfections(0.9, 0.1, p_d=1.0)
    assert pt.R == 0.0
    assert pt.e_Z == pytest.approx(0.5)
