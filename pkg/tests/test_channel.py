import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mp, mpf, erfc as mp_erfc, log as mp_log

from poissonloc.channel import (
    ALPHA,
    ChannelModel,
    ParameterError,
    cutoff_distance,
    link_probability,
    new_channel,
    sample_link,
)

models = st.builds(
    ChannelModel,
    sigma_s=st.floats(0.0, 14.0),
    n_p=st.floats(1.5, 6.0),
    beta_th=st.floats(1.0, 60.0),
)


def test_derived_fields():
    m = new_channel(4, 2, 40)
    assert m.alpha == 10 / (math.sqrt(2) * math.log(10))
    assert m.eta == 2.0
    assert m.d_max == 100.0


def test_d_max_of_figure_scenario():
    # sigma_s = 9 dB, n_p = 4, beta_th = 30 dB quoted as d_max ~ 5.62 m
    assert new_channel(9, 4, 30).d_max == pytest.approx(5.62, abs=5e-3)


def test_small_budget_gives_unit_range():
    assert new_channel(0, 2, 1e-12).d_max == pytest.approx(1.0, abs=1e-12)


def test_zero_shadowing_is_valid():
    m = new_channel(0, 3, 30)
    assert m.eta == 0.0 and m.shadow_gain == 1.0


@pytest.mark.parametrize(
    "args",
    [(-1, 2, 20), (4, 0, 20), (4, -2, 20), (4, 2, 0), (4, 2, -3), (math.nan, 2, 20),
     (4, math.inf, 20), (4, 2, math.nan)],
)
def test_invalid_parameters(args):
    with pytest.raises(ParameterError):
        new_channel(*args)


def test_from_d_max_round_trip():
    m = ChannelModel.from_d_max(4, 2, 100.0)
    assert m.beta_th == pytest.approx(40.0, rel=1e-15)
    with pytest.raises(ParameterError):
        ChannelModel.from_d_max(4, 2, 1.0)


def test_link_probability_at_d_max_is_half():
    for s in (0.0, 0.5, 4.0, 12.0):
        m = new_channel(s, 3, 30)
        assert link_probability(m, m.d_max) == 0.5


def test_link_probability_at_zero():
    assert link_probability(new_channel(4, 2, 40), 0.0) == 1.0
    assert link_probability(new_channel(0, 2, 40), 0.0) == 1.0


def test_link_probability_against_high_precision_erf():
    mp.dps = 40
    alpha = 10 / (mp.sqrt(2) * mp_log(10))
    expected = mp_erfc((alpha / 2) * mp_log(mpf("1.5"))) / 2
    got = link_probability(new_channel(4, 2, 40), 150.0)
    assert got == pytest.approx(float(expected), rel=1e-13, abs=1e-15)
    assert got == pytest.approx(0.1893060856402048, rel=1e-13)


def test_hard_disk():
    m = new_channel(0, 2, 20)
    d = np.array([0.0, 5.0, 9.999, 10.0, 10.001, 50.0])
    np.testing.assert_array_equal(link_probability(m, d), [1, 1, 1, 0.5, 0, 0])


def test_negative_distance_rejected():
    with pytest.raises(ParameterError):
        link_probability(new_channel(4, 2, 20), -1.0)
    with pytest.raises(ParameterError):
        link_probability(new_channel(4, 2, 20), [1.0, -0.5])


@settings(max_examples=200)
@given(models, st.floats(0, 1e4), st.floats(0, 1e4))
def test_monotone_in_distance(model, d1, d2):
    lo, hi = sorted((d1, d2))
    assert link_probability(model, lo) >= link_probability(model, hi)


@settings(max_examples=200)
@given(models, st.floats(-6, 6))
def test_reflection_symmetry(model, x):
    p = link_probability(model, model.d_max * math.exp(x))
    q = link_probability(model, model.d_max * math.exp(-x))
    if x != 0 or model.sigma_s > 0:
        assert p + q == pytest.approx(1.0, abs=1e-15)


@given(st.floats(0.5, 12), st.floats(2, 4), st.floats(10, 50), st.floats(0.01, 20))
def test_depends_on_normalized_distance_only(sigma, n_p, beta, t):
    a = ChannelModel(sigma, n_p, beta)
    b = ChannelModel.from_d_max(sigma, n_p, 3 * a.d_max)
    assert link_probability(a, t * a.d_max) == pytest.approx(link_probability(b, t * b.d_max), rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("t", [0.3, 0.9, 0.99, 1.01, 1.1, 3.0])
def test_converges_to_hard_disk(t):
    hard = link_probability(new_channel(0, 2, 20), 10 * t)
    soft = link_probability(new_channel(1e-3, 2, 20), 10 * t)
    assert soft == pytest.approx(hard, abs=1e-12)


def test_sample_link_extremes():
    rng = np.random.default_rng(3)
    m = new_channel(4, 2, 40)
    assert all(sample_link(m, 0.0, rng) for _ in range(1000))
    hard = new_channel(0, 2, 40)
    assert not any(sample_link(hard, 101.0, rng) for _ in range(1000))


def test_sample_link_consumes_one_uniform():
    m = new_channel(4, 2, 40)
    a = np.random.default_rng(11)
    b = np.random.default_rng(11)
    for _ in range(10):
        sample_link(m, 150.0, a)
    b.random(10)
    assert a.random() == b.random()


def test_sample_link_frequency():
    m = new_channel(4, 2, 40)
    p = link_probability(m, 150.0)
    rng = np.random.default_rng(2024)
    u = rng.random(10**6)
    # same decision rule as sample_link, vectorized
    mean = np.mean(u < p)
    assert abs(mean - p) < 3 * math.sqrt(p * (1 - p) / 1e6)
    rng = np.random.default_rng(7)
    draws = [sample_link(m, 150.0, rng) for _ in range(20000)]
    assert abs(np.mean(draws) - p) < 3 * math.sqrt(p * (1 - p) / 20000)


def test_cutoff_distance():
    m = new_channel(4, 2, 40)
    d = cutoff_distance(m, 1e-9)
    assert link_probability(m, d) == pytest.approx(1e-9, rel=1e-9)
    assert cutoff_distance(new_channel(0, 2, 40)) == 100.0


def test_alpha_constant():
    assert ALPHA == pytest.approx(3.070925731856877, rel=1e-15)
