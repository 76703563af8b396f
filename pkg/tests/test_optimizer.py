import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aghetnet import optimizer as opt
from aghetnet.radio import IcicState
from aghetnet.topology import Region, hex_grid

MANY = settings(max_examples=1000, deadline=None)
REGION = Region(4000.0, 4000.0)
TAUS = ("tau_pbs_db", "tau_uabs_db")
PINNED = dict(alpha_mbs=0.5, beta_mbs=0.5, rho_mbs_db=30.0, alpha_pbs=0.5, beta_pbs=0.5, rho_pbs_db=0.0,
              rho_uabs_db=0.0)


def tau_space(step=3.0, n_uabs=0):
    """The 25-point (tau_pbs, tau_uabs) lattice with everything else pinned."""
    return opt.SearchSpace.build(n_uabs, REGION, "feicic").pin(**PINNED).quantize(tau_pbs_db=step, tau_uabs_db=step)


def table_objective(seed):
    """Random lookup over the tau lattice with a unique maximum."""
    vals = np.random.default_rng(seed).permutation(25).astype(float)

    def f(state):
        return vals[int(round(state.tau_pbs_db / 3)) * 5 + int(round(state.tau_uabs_db / 3))]
    return f


def convex_space():
    return opt.SearchSpace.build(0, REGION, "feicic").pin(**{k: v for k, v in PINNED.items() if k != "rho_uabs_db"})


CENTRE = {"tau_pbs_db": 7.3, "tau_uabs_db": 2.1, "rho_uabs_db": -1.7}


def convex(state):
    return -sum((getattr(state, k) - c) ** 2 for k, c in CENTRE.items())


def test_encode_decode_round_trip():
    space = opt.SearchSpace.build(3, REGION)
    st_ = IcicState(np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]), 0.2, 0.3, 25.0, 0.4, 0.6, -3.0, 4.0, 1.0, 9.0)
    assert space.decode(space.encode(st_)) == st_


def test_gene_vector_length_and_clamp():
    space = opt.SearchSpace.build(60, Region())
    assert space.n_genes == 129
    g = space.encode(IcicState(hex_grid(60, Region(), 25.0).xy, tau_pbs_db=15.0))
    assert space.decode(g).tau_pbs_db == 12.0
    with pytest.raises(ValueError):
        space.decode(np.zeros(128))
    with pytest.raises(ValueError):
        space.encode(IcicState(np.zeros((2, 2))))


def test_regime_bounds():
    assert opt.SearchSpace.build(0, REGION, "none").grid_axes()["alpha_mbs"] == (1.0,)
    assert opt.SearchSpace.build(0, REGION, "eicic").grid_axes()["alpha_pbs"] == (0.0,)
    assert len(opt.SearchSpace.build(0, REGION, "feicic").grid_axes()["alpha_pbs"]) == 5


def test_quantised_decode_snaps():
    space = tau_space()
    g = space.encode(IcicState(np.zeros((0, 2)), tau_pbs_db=4.4, tau_uabs_db=10.6))
    st_ = space.decode(g)
    assert (st_.tau_pbs_db, st_.tau_uabs_db) == (3.0, 12.0)
    assert space.grid_size() == 5 * 5


def test_brute_single_point():
    space = tau_space().pin(tau_pbs_db=6.0, tau_uabs_db=3.0)
    rep = opt.brute_force(lambda s: 1.0, space)
    assert rep.evaluations == 1 and rep.best_state.tau_pbs_db == 6.0


def test_brute_picks_max_of_stub():
    space = opt.SearchSpace.build(0, REGION, "feicic", grid={**opt.DEFAULT_GRID, "tau_pbs_db": (0.0, 12.0),
                                                              "tau_uabs_db": (0.0, 12.0)}).pin(**PINNED)
    table = {(0.0, 0.0): 1.0, (0.0, 12.0): 4.0, (12.0, 0.0): 3.0, (12.0, 12.0): 2.0}
    rep = opt.brute_force(lambda s: table[(s.tau_pbs_db, s.tau_uabs_db)], space)
    assert rep.best_value == 4.0
    assert (rep.best_state.tau_pbs_db, rep.best_state.tau_uabs_db) == (0.0, 12.0)
    assert rep.surface["objective"] == table


def test_brute_ties_independent_of_order():
    space = tau_space()
    f = lambda s: float(s.tau_pbs_db + s.tau_uabs_db == 12.0)  # noqa: E731
    ref = opt.brute_force(f, space)
    for seed in range(5):
        assert opt.brute_force(f, space, shuffle_rng=seed).best_state == ref.best_state
    assert (ref.best_state.tau_pbs_db, ref.best_state.tau_uabs_db) == (0.0, 12.0)


def test_brute_budget_refusal():
    space = opt.SearchSpace.build(0, REGION, "feicic")
    assert space.grid_size() == 5 ** 9
    with pytest.raises(opt.BudgetExceeded, match="estimated run time"):
        opt.brute_force(lambda s: 0.0, space, budget=50_000)


def test_ga_convex_stub():
    space = convex_space()
    rep = opt.ga_optimize(convex, space, opt.GaParams(), rng=0)
    span = space.upper - space.lower
    for k, c in CENTRE.items():
        assert abs(getattr(rep.best_state, k) - c) <= 0.01 * span[space.index(k)]


def test_ehsga_convex_stub():
    space = convex_space()
    rep = opt.ehsga_optimize(convex, space, opt.EhsgaParams(), rng=0)
    span = space.upper - space.lower
    for k, c in CENTRE.items():
        assert abs(getattr(rep.best_state, k) - c) <= 0.01 * span[space.index(k)]


def test_ga_without_variation_only_resamples():
    space = convex_space()
    seen = []
    rep = opt.ga_optimize(lambda s: seen.append(s) or convex(s), space,
                          opt.GaParams(pop_size=10, generations=20, crossover_rate=0.0, mutation_rate=0.0), rng=1)
    # no new genomes ever appear, so only the first population is evaluated
    assert rep.evaluations == 10 and len(seen) == 10
    assert rep.best_value == max(convex(s) for s in seen)
    assert np.all(np.diff(rep.trace) >= 0)


@pytest.mark.parametrize("seed", range(5))
def test_heuristics_match_exhaustive_on_tiny_space(seed):
    space, f = tau_space(), table_objective(seed)
    ref = opt.brute_force(f, space)
    ga = opt.ga_optimize(f, space, opt.GaParams(pop_size=20, generations=30), rng=seed)
    hs = opt.ehsga_optimize(f, space, opt.EhsgaParams(hm_size=20, improvisations=30), rng=seed)
    assert ga.best_state == ref.best_state and hs.best_state == ref.best_state


def test_fret_decay():
    frets = []
    opt.ehsga_optimize(lambda s: 0.0, tau_space(), opt.EhsgaParams(hm_size=2, improvisations=100), rng=0,
                       observer=lambda it, fit, fr: frets.append(fr))
    assert len(frets) == 100
    assert frets[-1] == pytest.approx(0.99 ** 100, rel=1e-12)
    assert frets[-1] == pytest.approx(0.366, abs=1e-3)


def test_initial_states_seed_population():
    space = tau_space()
    f = table_objective(3)
    best = opt.brute_force(f, space).best_state
    rep = opt.ga_optimize(f, space, opt.GaParams(pop_size=4, generations=0), rng=0, initial=[best])
    assert rep.best_state == best


def test_report_csv(tmp_path):
    space = tau_space(n_uabs=2)
    rep = opt.ga_optimize(table_objective(0), space, opt.GaParams(pop_size=4, generations=3), rng=0)
    path = tmp_path / "trace.csv"
    rep.write_csv(path, space)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["iteration", "best_value", "evaluations", "wall_time_s"]
    assert [r[0] for r in rows[1:5]] == ["0", "1", "2", "3"]
    assert rows[5][0] == "final" and float(rows[5][1]) == rep.best_value
    assert [r[1] for r in rows[6:]] == space.gene_names
    br = opt.brute_force(table_objective(0), space)
    opt.write_surface_csv(br, tmp_path / "surf.csv")
    assert len(list(csv.reader(open(tmp_path / "surf.csv")))) == 26


def test_param_validation():
    with pytest.raises(ValueError):
        opt.GaParams(pop_size=1)
    with pytest.raises(ValueError):
        opt.GaParams(mutation_rate=1.5)
    with pytest.raises(ValueError):
        opt.EhsgaParams(hm_size=1)
    with pytest.raises(ValueError):
        opt.EhsgaParams(hmcr_min=0.9, hmcr_max=0.1)


# -- properties ---------------------------------------------------------------

def random_objective(seed):
    w = np.random.default_rng(seed).normal(size=11)

    def f(state):
        g = np.concatenate([state.uabs_xy.reshape(-1) / 4000.0, state.params])
        return float(np.sin(w[: g.size] @ g) + 0.1 * w[-1] * g[-1])
    return f


spaces = st.sampled_from([tau_space(), tau_space(n_uabs=1), opt.SearchSpace.build(1, REGION, "feicic"),
                          opt.SearchSpace.build(0, REGION, "eicic").quantize(rho_mbs_db=5.0)])
seeds = st.integers(0, 2 ** 32 - 1)
ga_params = st.builds(opt.GaParams, st.integers(2, 8), st.integers(0, 5), st.floats(0, 1), st.floats(0, 1))
hs_params = st.builds(opt.EhsgaParams, st.integers(2, 8), st.integers(0, 5))


def _in_space(space, state):
    g = space.encode(state)
    ok = np.all(g >= space.lower) and np.all(g <= space.upper)
    q = space.step > 0
    k = (g[q] - space.lower[q]) / space.step[q]
    return ok and np.allclose(k, np.round(k))


@MANY
@given(spaces, seeds, ga_params)
def test_ga_invariants(space, seed, params):
    f = random_objective(seed)
    seen = []
    rep = opt.ga_optimize(lambda s: seen.append(s) or f(s), space, params, rng=seed)
    assert np.all(np.diff(rep.trace) >= 0)
    assert all(_in_space(space, s) for s in seen)
    assert rep.evaluations == len(seen) <= params.pop_size * (params.generations + 1)
    again = opt.ga_optimize(f, space, params, rng=seed)
    assert again.trace == rep.trace and again.best_state == rep.best_state


@MANY
@given(spaces, seeds, hs_params)
def test_ehsga_invariants(space, seed, params):
    f = random_objective(seed)
    seen, memories = [], []
    rep = opt.ehsga_optimize(lambda s: seen.append(s) or f(s), space, params, rng=seed,
                             observer=lambda it, fit, fr: memories.append(fit))
    assert np.all(np.diff(rep.trace) >= 0)
    assert all(np.all(np.diff(m) <= 0) for m in memories)
    assert all(_in_space(space, s) for s in seen)
    assert rep.evaluations == len(seen) <= params.hm_size * (params.improvisations + 1)
    again = opt.ehsga_optimize(f, space, params, rng=seed)
    assert again.trace == rep.trace and again.best_state == rep.best_state


@MANY
@given(seeds, st.integers(0, 2 ** 32 - 1))
def test_brute_trace_and_order_independence(seed, shuffle):
    space = tau_space(n_uabs=1)
    f = random_objective(seed)
    a = opt.brute_force(f, space)
    b = opt.brute_force(f, space, shuffle_rng=shuffle)
    assert np.all(np.diff(a.trace) >= 0) and np.all(np.diff(b.trace) >= 0)
    assert a.best_state == b.best_state and a.best_value == b.best_value
