import math

import pytest
import scipy.special
from hypothesis import given
from hypothesis import strategies as st

from tfqkd.numerics import (
    TruncatedSeries,
    bessel_i0,
    binary_entropy,
    geometric_tail,
    poisson_pmf,
    poisson_tail,
)

# reference values from mpmath at 30 digits
H_QUARTER = 0.811278124459132863909695792039
POISSON_01_1 = 0.0904837418035959618369959136512
I0_1 = 1.26606587775200833559824462521
I0_2 = 2.27958530233606726743720444081
I0_10 = 2815.71662846625447146981115343
I0_300 = 4.47584736793505211809932800318e128


@pytest.mark.parametrize("x, expected", [(0.0, 0.0), (1.0, 0.0), (0.5, 1.0), (0.25, H_QUARTER)])
def test_binary_entropy_values(x, expected):
    assert binary_entropy(x) == pytest.approx(expected, abs=1e-15)


def test_binary_entropy_clips_tiny_excursions():
    assert binary_entropy(-1e-13) == 0.0
    assert binary_entropy(1 + 1e-13) == 0.0


@pytest.mark.parametrize("x", [-1e-6, 1.01, math.nan])
def test_binary_entropy_domain(x):
    with pytest.raises(ValueError):
        binary_entropy(x)


@given(st.floats(0.0, 1.0))
def test_binary_entropy_symmetric_and_bounded(x):
    h = binary_entropy(x)
    assert 0.0 <= h <= 1.0
    assert abs(h - binary_entropy(1.0 - x)) < 1e-12


@pytest.mark.parametrize("mean, n, expected", [(0.0, 0, 1.0), (0.0, 3, 0.0), (0.1, 1, POISSON_01_1)])
def test_poisson_pmf_values(mean, n, expected):
    assert poisson_pmf(mean, n) == pytest.approx(expected, rel=1e-14, abs=1e-300)


def test_poisson_pmf_log_space_branch_continuous():
    for mean in (0.5, 3.0, 20.0):
        for n in (20, 21, 40, 200):
            ref = math.exp(-mean + n * math.log(mean) - math.lgamma(n + 1))
            assert poisson_pmf(mean, n) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("mean", [0.001, 0.1, 0.5, 1.0])
def test_poisson_mass_deficit(mean):
    total = math.fsum(poisson_pmf(mean, n) for n in range(51))
    assert 1.0 - total < 1e-15
    assert poisson_tail(mean, 50) < 1e-15


def test_poisson_domain():
    with pytest.raises(ValueError):
        poisson_pmf(-0.1, 0)
    with pytest.raises(ValueError):
        poisson_pmf(0.1, -1)


@pytest.mark.parametrize("z, expected", [(0.0, 1.0), (1.0, I0_1), (2.0, I0_2), (10.0, I0_10), (300.0, I0_300)])
def test_bessel_i0_values(z, expected):
    assert bessel_i0(z) == pytest.approx(expected, rel=1e-12)


@given(st.floats(-700.0, 700.0))
def test_bessel_i0_even_and_matches_scipy(z):
    v = bessel_i0(z)
    assert v >= 1.0
    assert v == bessel_i0(-z)
    assert v == pytest.approx(float(scipy.special.i0(z)), rel=1e-12)


@pytest.mark.parametrize("z", [701.0, math.inf, math.nan])
def test_bessel_i0_window(z):
    with pytest.raises(OverflowError):
        bessel_i0(z)


def test_truncated_series_upper():
    s = TruncatedSeries((0.5, 0.25), geometric_tail(0.125, 0.5))
    assert s.partial_sum == 0.75
    assert s.upper == 1.0


def test_truncated_series_rejects_negative():
    with pytest.raises(ValueError):
        TruncatedSeries((1.0, -0.1), 0.0)
    with pytest.raises(ValueError):
        TruncatedSeries((1.0,), -1.0)


def test_geometric_tail_ratio_check():
    assert geometric_tail(0.0, 2.0) == 0.0
    with pytest.raises(ValueError):
        geometric_tail(1.0, 1.0)
