import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dispocf.stats import betainc, bonferroni_adjust, paired_t_test, t_cdf, t_sf_two_sided

from oracles import t_cdf_quad

# t = 3 / sqrt(2.5 / 5); p by quadrature of the t density with df = 4
T_EXAMPLE = 4.242640687119285
P_EXAMPLE = 0.013235599563682698


def test_example_differences():
    t, p = paired_t_test([1, 2, 3, 4, 5], [0, 0, 0, 0, 0])
    assert t == pytest.approx(T_EXAMPLE, rel=1e-12)
    assert p == pytest.approx(P_EXAMPLE, abs=1e-10)


def test_antisymmetric():
    a, b = [3.1, 2.0, 4.4, 1.9], [2.0, 2.5, 3.0, 1.0]
    t1, p1 = paired_t_test(a, b)
    t2, p2 = paired_t_test(b, a)
    assert t1 == -t2 and p1 == p2


def test_zero_differences():
    assert paired_t_test([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == (0.0, 1.0)


def test_constant_nonzero_difference():
    t, p = paired_t_test([2.0, 3.0], [1.0, 2.0])
    assert t == math.inf and p == 0.0


@pytest.mark.parametrize("a, b", [([1.0], [2.0]), ([1.0, 2.0], [1.0])])
def test_errors(a, b):
    with pytest.raises(ValueError):
        paired_t_test(a, b)


@pytest.mark.parametrize("df", [2, 3, 4, 5, 8, 10, 15, 20, 25, 30])
def test_cdf_against_quadrature(df):
    for t in np.linspace(-10, 10, 41):
        assert abs(t_cdf(float(t), df) - t_cdf_quad(float(t), df)) < 1e-6


def test_two_sided_edges():
    assert t_sf_two_sided(0.0, 5) == 1.0
    assert t_sf_two_sided(math.inf, 5) == 0.0
    with pytest.raises(ValueError):
        t_sf_two_sided(1.0, 0)


@settings(max_examples=200)
@given(st.floats(0.1, 50), st.floats(0.1, 50), st.floats(0.0, 1.0))
def test_betainc_symmetry(a, b, x):
    y = 1.0 - x
    x = 1.0 - y  # x and y now sum to 1 exactly
    assert betainc(a, b, x) + betainc(b, a, y) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("a, b, x, expected", [
    (1.0, 1.0, 0.3, 0.3),          # uniform
    (2.0, 1.0, 0.5, 0.25),         # x^2
    (1.0, 3.0, 0.5, 0.875),        # 1 - (1 - x)^3
])
def test_betainc_closed_forms(a, b, x, expected):
    assert betainc(a, b, x) == pytest.approx(expected, abs=1e-13)


@pytest.mark.parametrize("p, expected", [(0.01, 0.03), (0.02, 0.06), (0.5, 1.0), (0.0, 0.0), (1.0, 1.0)])
def test_bonferroni(p, expected):
    assert bonferroni_adjust(p) == pytest.approx(expected)


def test_bonferroni_errors():
    with pytest.raises(ValueError):
        bonferroni_adjust(1.2)
    with pytest.raises(ValueError):
        bonferroni_adjust(0.1, m=0)
