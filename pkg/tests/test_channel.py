import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy import stats

from aghetnet import channel as ch

MANY = settings(max_examples=1000, deadline=None)


@pytest.mark.parametrize("phi,theta,expected", [(0.0, 90.0, 8.0), (65.0, 90.0, -4.0), (180.0, 90.0, -22.0)])
def test_antenna_gain_examples(phi, theta, expected):
    assert float(ch.antenna_gain(phi, theta)) == pytest.approx(expected, abs=1e-12)


def test_nakagami_moments():
    rng = np.random.default_rng(0)
    for m in (1.0, 3.0):
        w = ch.sample_nakagami_power(m, rng, 200_000)
        assert w.mean() == pytest.approx(1.0, abs=0.01)
        assert w.var() == pytest.approx(1.0 / m, rel=0.03)
    w = ch.sample_nakagami_power(100.0, rng, 100_000)
    assert np.mean(np.abs(w - 1.0) < 0.3) > 0.99


@pytest.mark.parametrize("m", [1.0, 2.0, 3.0])
def test_nakagami_ks(m):
    w = ch.sample_nakagami_power(m, np.random.default_rng(int(m)), 100_000)
    res = stats.kstest(w, stats.gamma(a=m, scale=1.0 / m).cdf)
    assert res.pvalue > 0.01


def test_nakagami_rejects_small_shape():
    with pytest.raises(ValueError):
        ch.sample_nakagami_power(0.3, np.random.default_rng(0), 3)


def test_gtg_meters_examples():
    assert float(ch.pl_gtg(1.0, 763.0, 36.0, 1.5, "m")) == pytest.approx(113.26, abs=1e-2)
    assert float(ch.pl_gtg(10_000.0, 763.0, 36.0, 1.5, "m")) == pytest.approx(266.66, abs=1e-2)


def test_gtg_km_matches_meters_at_scale():
    # the km reading at 1000 m is the meters reading at 1 m
    assert float(ch.pl_gtg(1000.0)) == pytest.approx(113.26, abs=1e-2)
    d = np.array([2000.0, 4000.0])
    assert np.diff(ch.pl_gtg(d))[0] == pytest.approx(38.35 * math.log10(2.0), abs=1e-9)


def test_gtg_free_space_floor():
    # 10 m in km units would be 36.6 dB, below free space
    assert float(ch.pl_gtg(10.0)) == pytest.approx(float(ch.free_space_loss(10.0)), abs=1e-12)
    assert float(ch.free_space_loss(10.0)) == pytest.approx(20 + 20 * math.log10(763) - 27.55, abs=1e-12)


def test_gtg_bad_units():
    with pytest.raises(ValueError):
        ch.pl_gtg(100.0, distance_units="mi")


def test_ata_los_probability_examples():
    assert float(ch.ata_los_probability(10.0, 22.5)) == 1.0
    assert float(ch.ata_los_probability(1000.0, 22.5)) == pytest.approx(0.616, abs=1e-3)
    # held at the 4 km value beyond 4 km
    assert float(ch.ata_los_probability(9000.0, 22.5)) == float(ch.ata_los_probability(4000.0, 22.5))


def test_ata_los_loss_example():
    assert float(ch.pl_ata_los(1000.0)) == pytest.approx(151.65, abs=1e-2)


def test_ata_height_checked():
    with pytest.raises(ValueError):
        ch.pl_ata(100.0, 100.0, 5.0)


def test_atg_los_probability_examples():
    assert float(ch.atg_los_probability(90.0)) == pytest.approx(0.99998, abs=1e-5)
    assert float(ch.atg_los_probability(0.0)) == pytest.approx(0.022, abs=1e-3)
    th = np.linspace(0.0, 90.0, 500)
    assert np.all(np.diff(ch.atg_los_probability(th)) > 0)


def test_atg_overhead_is_ninety_degrees():
    assert float(ch.elevation_deg(0.0, 25.0, 1.5)) == 90.0


def test_atg_requires_uabs_above_ue():
    with pytest.raises(ValueError):
        ch.pl_atg(10.0, 1.0, 1.5)


def test_screens_agree_with_s_curve():
    # two constructions of the urban LOS probability should roughly coincide
    worst = 0.0
    for h in (25.0, 50.0, 100.0, 300.0):
        for r in (10.0, 100.0, 300.0, 1000.0, 3000.0):
            p_fit = float(ch.atg_los_probability(ch.elevation_deg(r, h, 1.5)))
            worst = max(worst, abs(p_fit - ch.atg_los_probability_screens(r, h, 1.5)))
    assert worst < 0.25
    assert ch.atg_los_probability_screens(10.0, 25.0, 1.5) == 1.0


def test_received_power_examples():
    assert float(ch.received_power(46.0, 0.0, 0.0, 1.0)) == pytest.approx(39810.717, rel=1e-6)
    # -46 dBm
    assert float(ch.received_power(46.0, 100.0, 8.0, 1.0)) == pytest.approx(2.512e-5, rel=1e-3)
    with pytest.raises(ValueError):
        ch.received_power(46.0, 100.0, 8.0, 0.0)


def test_channel_config_units_validated():
    with pytest.raises(ValueError):
        ch.ChannelConfig(gtg_distance_units="ft")


# -- properties ---------------------------------------------------------------

phis = st.floats(-180.0, 180.0)
thetas = st.floats(0.0, 180.0)


@MANY
@given(phis, thetas)
def test_gain_bounds_and_peak(phi, theta):
    g = float(ch.antenna_gain(phi, theta))
    assert 8.0 - 30.0 - 1e-12 <= g <= 8.0
    assert g <= float(ch.antenna_gain(0.0, 90.0))


@MANY
@given(phis, st.floats(0.0, 90.0))
def test_gain_even(phi, off):
    assert float(ch.antenna_gain(phi, 90.0 + off)) == float(ch.antenna_gain(-phi, 90.0 + off))
    assert float(ch.antenna_gain(phi, 90.0 + off)) == pytest.approx(float(ch.antenna_gain(phi, 90.0 - off)),
                                                                    abs=1e-9)


@MANY
@given(st.floats(1.0, 50_000.0), st.floats(1.001, 100.0), st.sampled_from(["m", "km"]),
       st.floats(10.0, 60.0))
def test_gtg_increasing(d, k, units, h_bs):
    assert ch.pl_gtg(d * k, h_bs_m=h_bs, distance_units=units) > ch.pl_gtg(d, h_bs_m=h_bs, distance_units=units)


@MANY
@given(st.floats(1.0, 50_000.0), st.floats(1.001, 100.0), st.floats(10.5, 300.0))
def test_ata_losses_increasing(d, k, h):
    assert ch.pl_ata_los(d * k) > ch.pl_ata_los(d)
    assert ch.pl_ata_nlos(d * k, h) > ch.pl_ata_nlos(d, h)


@MANY
@given(st.floats(0.0, 50_000.0), st.floats(10.5, 300.0), st.floats(-90.0, 90.0))
def test_los_probabilities_in_unit_interval(d, h, theta):
    p = float(ch.ata_los_probability(d, h))
    q = float(ch.atg_los_probability(theta))
    assert 0.0 <= p <= 1.0 and 0.0 <= q <= 1.0


@MANY
@given(st.floats(0.0, 20_000.0), st.floats(22.5, 300.0))
def test_ata_average_between_states(d2, h):
    d3 = math.hypot(d2, h - 36.0)
    avg = float(ch.pl_ata(d2, d3, h))
    a, b = float(ch.pl_ata_los(d3)), float(ch.pl_ata_nlos(d3, h))
    assert min(a, b) - 1e-9 <= avg <= max(a, b) + 1e-9


@MANY
@given(st.floats(0.0, 20_000.0), st.floats(2.0, 300.0))
def test_atg_average_between_states(r, h):
    avg = float(ch.pl_atg(r, h, 1.5))
    los = float(ch.pl_atg(r, h, 1.5, mode=ch.SAMPLED, los=np.True_))
    nlos = float(ch.pl_atg(r, h, 1.5, mode=ch.SAMPLED, los=np.False_))
    assert los - 1e-9 <= avg <= nlos + 1e-9


@MANY
@given(st.floats(-10.0, 60.0), st.floats(0.0, 250.0), st.floats(-30.0, 10.0), st.floats(1e-3, 50.0))
def test_received_power_round_trip(p, pl, g, h):
    rx = float(ch.received_power(p, pl, g, h))
    assume(rx > 0.0)
    assert float(ch.path_loss_from_rx(p, rx, g, h)) == pytest.approx(pl, abs=1e-9)


@MANY
@given(st.floats(-10.0, 60.0), st.floats(0.0, 200.0), st.floats(1e-3, 10.0), st.floats(1e-3, 1e3))
def test_received_power_linear_in_fading(p, pl, h, c):
    a = float(ch.received_power(p, pl, 0.0, h))
    b = float(ch.received_power(p, pl, 0.0, h * c))
    assert b == pytest.approx(a * c, rel=1e-12)
