"""Brute-force CRE sweep on the desk-scale network.

UABS sit on the hex grid. For each ICIC regime the coarse parameter grid is
searched and the best 5pSE at every (tau_pbs, tau_uabs) pair is printed,
which is the data behind a CRE surface plot. Takes about a minute.
"""

import numpy as np

from aghetnet import harness as hn
from aghetnet import kpi as kp
from aghetnet import optimizer as opt
from aghetnet.optimizer import TAU_GRID

cfg = hn.desk_scale()
sc = hn.build_scenario(cfg, 25.0)
objective = kp.KpiObjective(sc, cfg.kpi_config("5pse"), hn.fading_seed(cfg))

for regime in hn.REGIMES:
    space = opt.SearchSpace.build(cfg.n_uabs, cfg.region, regime, cfg.grid())
    rep = opt.brute_force(objective, space, sc.hex_uabs())
    surf = rep.surface["5pse"]
    print(f"\n{regime}: {rep.evaluations} grid points in {rep.wall_time_s:.1f} s, "
          f"best 5pSE {rep.best_by_metric['5pse'][0]:.4f}, best coverage {rep.best_by_metric['coverage'][0]:.4f}")
    print("tau_pbs \\ tau_uabs " + " ".join(f"{t:7.0f}" for t in TAU_GRID))
    for tp in TAU_GRID:
        print(f"{tp:18.0f} " + " ".join(f"{surf[(tp, tu)]:7.4f}" for tu in TAU_GRID))
    s = rep.best_by_metric["5pse"][1]
    print("best state:", ", ".join(f"{k}={v:g}" for k, v in zip(opt.ICIC_GENES, s.params)))

# where do UEs end up at the FeICIC optimum?
snap = objective.realization.snapshot(s)
tier = snap["tier"][:, : objective.realization.n_ue]
print("\nUE share per tier (MBS, PBS, UABS):", np.round(np.bincount(tier.ravel(), minlength=3) / tier.size, 3))
