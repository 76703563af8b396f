"""GA and eHSGA against grid search, jointly placing UABS and tuning FeICIC.

Desk-scale network, UABS at 25 m, 5pSE objective. Both heuristics get the
same 20 x 30 budget and start from the hex-grid placement. Traces go to
ga_trace.csv and ehsga_trace.csv. Takes about two minutes.
"""

import numpy as np

from aghetnet import harness as hn
from aghetnet import kpi as kp
from aghetnet import optimizer as opt
from aghetnet.radio import IcicState

cfg = hn.desk_scale()
sc = hn.build_scenario(cfg, 25.0)
objective = kp.KpiObjective(sc, cfg.kpi_config("5pse"), hn.fading_seed(cfg))
space = opt.SearchSpace.build(cfg.n_uabs, cfg.region, "feicic", cfg.grid())

brute = opt.brute_force(objective, space, sc.hex_uabs())
print(f"grid search: {brute.best_value:.4f} after {brute.evaluations} evaluations, {brute.wall_time_s:.1f} s")

start = [IcicState(sc.hex_uabs().xy)]
ga = opt.ga_optimize(objective, space, cfg.ga_params(), np.random.default_rng(1), start)
hs = opt.ehsga_optimize(objective, space, cfg.ehsga_params(), np.random.default_rng(1), start)
for rep in (ga, hs):
    moved = np.linalg.norm(rep.best_state.uabs_xy - sc.hex_uabs().xy, axis=1).mean()
    print(f"{rep.method}: {rep.best_value:.4f} after {rep.evaluations} evaluations, {rep.wall_time_s:.1f} s; "
          f"UABS moved {moved:.0f} m on average from the hex grid")
    rep.write_csv(f"{rep.method}_trace.csv", space)

# the 5pSE of each answer, re-checked on fresh fading
fresh = kp.KpiConfig(kp.Kpi.FIFTH_PERCENTILE_SE, trials=cfg.trials)
for name, st in (("grid", brute.best_state), ("ga", ga.best_state), ("ehsga", hs.best_state)):
    r = kp.evaluate(st, sc, fresh, seed=12345)
    print(f"{name:6s} on unseen fading: {r.value:.4f} +/- {r.std_error:.4f}")
