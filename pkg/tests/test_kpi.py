import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aghetnet import channel as ch
from aghetnet import kpi as kp
from aghetnet import radio as rd
from aghetnet.topology import Region, Role, sample_ppp

MANY = settings(max_examples=1000, deadline=None)


def make_scenario(side=2000.0, n_uabs=4, seed=5, **kw):
    region = Region(side, side)
    ss = np.random.SeedSequence(seed).spawn(4)
    return kp.Scenario(region,
                       sample_ppp(4.0, region, 36.0, Role.MBS, ss[0], 46.0),
                       sample_ppp(12.0, region, 15.0, Role.PBS, ss[1], 30.0),
                       sample_ppp(50.0, region, 1.5, Role.GUE, ss[2]),
                       sample_ppp(1.8, region, 22.5, Role.AUE, ss[3]),
                       n_uabs, **kw)


@pytest.fixture(scope="module")
def scenario():
    return make_scenario()


def hex_state(sc, **kw):
    return rd.IcicState(sc.hex_uabs().xy, **kw)


def test_fifth_percentile_examples():
    assert kp.fifth_percentile([1, 1, 1, 1]) == 1.0
    assert kp.fifth_percentile(np.arange(1, 101)) == pytest.approx(5.95, abs=1e-12)
    assert kp.fifth_percentile([7.0]) == 7.0
    with pytest.raises(kp.EvaluationError):
        kp.fifth_percentile([])


def test_config_validation():
    with pytest.raises(ValueError):
        kp.KpiConfig(trials=0)
    with pytest.raises(ValueError):
        kp.KpiConfig(coverage_grid_pitch_m=0.0)
    with pytest.raises(ValueError):
        kp.KpiConfig(coverage_threshold_se=-1.0)


def test_probe_grid_minimum():
    g = kp.probe_grid(Region(100.0, 100.0), 500.0, 1.5)
    assert g.shape == (4, 3)
    np.testing.assert_allclose(np.sort(np.unique(g[:, 0])), [25.0, 75.0])


def test_coverage_threshold_limits(scenario):
    st_ = hex_state(scenario)
    assert kp.coverage_probability(st_, scenario, kp.KpiConfig(coverage_threshold_se=0.0, trials=3)) == 1.0
    assert kp.coverage_probability(st_, scenario, kp.KpiConfig(coverage_threshold_se=np.inf, trials=3)) == 0.0


def test_evaluate_reproducible(scenario):
    cfg = kp.KpiConfig(trials=1)
    a = kp.evaluate(hex_state(scenario), scenario, cfg, seed=11)
    fresh = make_scenario()
    b = kp.evaluate(hex_state(fresh), fresh, cfg, seed=11)
    assert a.value == b.value and a.per_trial_values == b.per_trial_values
    assert a.trial_count == 1 and len(a.per_trial_values) == 1


def test_trial_count_consistency(scenario):
    st_ = hex_state(scenario, tau_uabs_db=6.0)
    for kpi in kp.Kpi:
        a = kp.evaluate(st_, scenario, kp.KpiConfig(kpi, trials=50), seed=1)
        b = kp.evaluate(st_, scenario, kp.KpiConfig(kpi, trials=200), seed=2)
        pooled = np.hypot(a.std_error, b.std_error)
        assert abs(a.value - b.value) <= 2 * pooled, kpi


def test_probe_pitch_convergence():
    sc = make_scenario(side=4000.0, n_uabs=12, seed=8)
    st_ = hex_state(sc)
    cov = {}
    for pitch in (200.0, 100.0):
        cfg = kp.KpiConfig(kp.Kpi.COVERAGE, kp.DEFAULT_COVERAGE_THRESHOLD_SE, pitch, trials=10)
        cov[pitch] = kp.evaluate(st_, sc, cfg, seed=3).value
    assert abs(cov[200.0] - cov[100.0]) < 0.02


def test_objective_reports_both_metrics(scenario):
    obj = kp.KpiObjective(scenario, kp.KpiConfig(kp.Kpi.COVERAGE, trials=4), seed=0)
    v = obj(hex_state(scenario))
    assert obj.calls == 1
    assert v == obj.metrics["coverage"]
    assert set(obj.metrics) == {"5pse", "coverage"}
    assert 0.0 <= v <= 1.0
    assert len(obj.per_trial["5pse"]) == 4


def test_wrong_uabs_count_rejected(scenario):
    with pytest.raises(ValueError):
        kp.evaluate(rd.IcicState(np.zeros((3, 2))), scenario, kp.KpiConfig(trials=1))


def test_feicic_beats_eicic_at_same_cre(scenario):
    cfg = kp.KpiConfig(trials=10)
    e = kp.evaluate(hex_state(scenario, alpha_mbs=0.0, alpha_pbs=0.0, tau_uabs_db=6.0), scenario, cfg)
    f = kp.evaluate(hex_state(scenario, alpha_mbs=0.5, alpha_pbs=0.5, tau_uabs_db=6.0), scenario, cfg)
    assert f.value >= e.value


@pytest.mark.parametrize("mode", [ch.AVERAGE, ch.SAMPLED])
def test_uabs_fast_path_matches_block_powers(mode):
    """The cached UABS pass against the generic per-link route, draw for draw."""
    sc = make_scenario(channel=ch.ChannelConfig(pathloss_mode=mode))
    trials, seed = 3, 21
    real = sc.realization(trials, seed)
    xy = np.random.default_rng(0).uniform(0, 2000, (sc.n_uabs, 2))
    ub, ui, ur = real._uabs_tier(xy)

    n_rx, n_t, n_u = real.rx_pos.shape[0], len(sc.mbs) + len(sc.pbs), sc.n_uabs
    bs = sc.uabs_nodes(xy)
    beams = real._uabs_beams(xy, bs.positions)
    for t, child in enumerate(np.random.SeedSequence(seed).spawn(trials)):
        rng = np.random.default_rng(child)
        # replay the terrestrial draws, then take the UABS ones
        rng.random(n_t)
        rng.random((n_rx, n_t))
        ch.sample_nakagami_power(3.0, rng, (n_rx, n_t))
        ch.sample_nakagami_power(1.0, rng, (n_rx, n_t))
        u_los = rng.random((n_rx, n_u))
        g_los = ch.sample_nakagami_power(3.0, rng, (n_rx, n_u))
        g_nlos = ch.sample_nakagami_power(1.0, rng, (n_rx, n_u))
        served, interf, _ = rd.block_powers(real.rx_pos, real.rx_aerial, bs.positions, True,
                                            np.full(n_u, sc.uabs_power_dbm), beams[t], sc.channel,
                                            u_los, g_los, g_nlos)
        b, i, r = rd.reduce_tier(served, interf)
        np.testing.assert_array_equal(ui[t], i)
        np.testing.assert_allclose(ub[t], b, rtol=2e-5)
        np.testing.assert_allclose(ur[t], r, rtol=2e-4, atol=1e-6 * r.max())


def test_terrestrial_tiers_match_link_matrix():
    """Reduced MBS/PBS tiers against a fresh link table built from the same draws."""
    sc = make_scenario(n_uabs=0)
    real = sc.realization(1, 9, 500.0)
    child = np.random.SeedSequence(9).spawn(1)[0]
    rng = np.random.default_rng(child)
    terr_pos = np.concatenate([sc.mbs.positions, sc.pbs.positions])
    n_t, n_rx = terr_pos.shape[0], real.rx_pos.shape[0]
    pick = rng.random(n_t)
    u_los = rng.random((n_rx, n_t))
    g_los = ch.sample_nakagami_power(3.0, rng, (n_rx, n_t))
    g_nlos = ch.sample_nakagami_power(1.0, rng, (n_rx, n_t))
    ue_xy = real.rx_pos[: real.n_ue, :2]
    nm = len(sc.mbs)
    az = np.concatenate([rd.beam_azimuths(terr_pos[:nm, :2], ue_xy, pick[:nm]),
                         rd.beam_azimuths(terr_pos[nm:, :2], ue_xy, pick[nm:])])
    power = np.concatenate([np.full(nm, 46.0), np.full(n_t - nm, 30.0)])
    served, interf, pl = rd.block_powers(real.rx_pos, real.rx_aerial, terr_pos, False, power, az, sc.channel,
                                         u_los, g_los, g_nlos)
    for tier, sel in ((rd.MBS, slice(0, nm)), (rd.PBS, slice(nm, n_t))):
        b, i, r = rd.reduce_tier(served[:, sel], interf[:, sel])
        np.testing.assert_array_equal(real.index[0, :, tier], i)
        np.testing.assert_allclose(real.best[0, :, tier], b, rtol=1e-12)
    # ground links use Hata, aerial links UMa-AV
    delta = real.rx_pos[:, None, :2] - terr_pos[None, :, :2]
    d2 = np.hypot(delta[..., 0], delta[..., 1])
    gnd = ~real.rx_aerial
    np.testing.assert_allclose(pl[gnd], ch.pl_gtg(d2[gnd], 763.0, terr_pos[None, :, 2].repeat(gnd.sum(), 0), 1.5),
                               rtol=1e-12)


# -- properties ---------------------------------------------------------------

_PROP_SC = make_scenario(seed=13)
_PROP_REAL = _PROP_SC.realization(4, 0)
_HEX = _PROP_SC.hex_uabs().xy

prop_states = st.builds(
    lambda am, ap, bm, bp, tp, tu, rm, rp, ru: rd.IcicState(_HEX, am, bm, rm, ap, bp, rp, tp, ru, tu),
    st.floats(0, 1), st.floats(0, 1), st.floats(0.05, 0.95), st.floats(0.05, 0.95),
    st.floats(0, 12), st.floats(0, 12), st.floats(20, 40), st.floats(-10, 10), st.floats(-5, 5))


@MANY
@given(prop_states, st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_coverage_monotone_in_threshold(state, t1, t2):
    lo, hi = sorted((t1, t2))
    _, c_lo = _PROP_REAL.kpis(state, lo)
    _, c_hi = _PROP_REAL.kpis(state, hi)
    assert np.all(c_hi <= c_lo)


@MANY
@given(st.lists(st.floats(0.0, 1e6), min_size=1, max_size=300))
def test_fifth_percentile_below_median(values):
    assert kp.fifth_percentile(values) <= np.median(values)


@MANY
@given(prop_states)
def test_kpis_reproducible(state):
    a = _PROP_REAL.kpis(state, 0.05)
    b = _PROP_REAL.kpis(state, 0.05)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
