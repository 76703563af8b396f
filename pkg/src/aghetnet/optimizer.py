"""Search over UABS positions and ICIC parameters: grid brute force, GA and the eHSGA hybrid.

All three maximise a scalar objective ``f(IcicState) -> float``. States are
flattened into the gene vector

    [x1, y1, ..., xN, yN, alpha_mbs, beta_mbs, rho_mbs, alpha_pbs, beta_pbs,
     rho_pbs, tau_pbs, rho_uabs, tau_uabs]

and every candidate is clamped (and snapped, for quantised genes) before it
is evaluated.
"""

from __future__ import annotations

import csv
import itertools
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .radio import RHO_BOUNDS_DB, TAU_BOUNDS_DB, MBS, PBS, UABS, IcicRegime, IcicState
from .topology import NodeSet, Region

ICIC_GENES = ("alpha_mbs", "beta_mbs", "rho_mbs_db", "alpha_pbs", "beta_pbs", "rho_pbs_db",
              "tau_pbs_db", "rho_uabs_db", "tau_uabs_db")

# Brute-force grids. TAU matches the CRE axes of the KPI surfaces.
TAU_GRID = (0.0, 3.0, 6.0, 9.0, 12.0)
ALPHA_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)
BETA_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)


def _band(lo, hi, n):
    return tuple(float(v) for v in np.linspace(lo, hi, n))


DEFAULT_GRID = {
    "alpha_mbs": ALPHA_GRID, "alpha_pbs": ALPHA_GRID,
    "beta_mbs": BETA_GRID, "beta_pbs": BETA_GRID,
    "rho_mbs_db": _band(*RHO_BOUNDS_DB[MBS], 5),
    "rho_pbs_db": _band(*RHO_BOUNDS_DB[PBS], 5),
    "rho_uabs_db": _band(*RHO_BOUNDS_DB[UABS], 5),
    "tau_pbs_db": TAU_GRID, "tau_uabs_db": TAU_GRID,
}

# A coarser grid that keeps desk-scale sweeps in the minutes range.
DESK_GRID = {
    "alpha_mbs": (0.0, 0.5, 1.0), "alpha_pbs": (0.0, 0.5, 1.0),
    "beta_mbs": (0.3, 0.7), "beta_pbs": (0.3, 0.7),
    "rho_mbs_db": (30.0, 40.0), "rho_pbs_db": (-5.0, 5.0), "rho_uabs_db": (-5.0, 5.0),
    "tau_pbs_db": TAU_GRID, "tau_uabs_db": TAU_GRID,
}


# Smoke-test grid: CRE corners and centre only.
QUICK_GRID = {
    "alpha_mbs": (0.5,), "alpha_pbs": (0.5,), "beta_mbs": (0.5,), "beta_pbs": (0.5,),
    "rho_mbs_db": (30.0,), "rho_pbs_db": (0.0,), "rho_uabs_db": (0.0,),
    "tau_pbs_db": (0.0, 6.0, 12.0), "tau_uabs_db": (0.0, 6.0, 12.0),
}
GRIDS = {"full": DEFAULT_GRID, "desk": DESK_GRID, "quick": QUICK_GRID}


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class SearchSpace:
    """Per-gene bounds, optional quantisation steps and a brute-force grid.

    A gene with ``lower == upper`` is pinned. ``step[i] > 0`` snaps gene i to
    ``lower + k * step`` on decode.
    """

    n_uabs: int
    lower: np.ndarray
    upper: np.ndarray
    step: np.ndarray
    grid: dict = field(default_factory=lambda: dict(DEFAULT_GRID))
    regime: IcicRegime = IcicRegime.FEICIC

    def __post_init__(self):
        for name in ("lower", "upper", "step"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        n = 2 * self.n_uabs + len(ICIC_GENES)
        if not (self.lower.shape == self.upper.shape == self.step.shape == (n,)):
            raise ValueError(f"bounds must have length {n}")
        if np.any(self.lower > self.upper):
            bad = int(np.flatnonzero(self.lower > self.upper)[0])
            raise ValueError(f"gene {self.gene_names[bad]}: lower bound above upper bound")

    @classmethod
    def build(cls, n_uabs: int, region: Region, regime=IcicRegime.FEICIC, grid=None) -> "SearchSpace":
        regime = IcicRegime(regime)
        lo = [0.0, 0.0] * n_uabs
        hi = [region.width_m, region.height_m] * n_uabs
        a_lo, a_hi = {IcicRegime.NONE: (1.0, 1.0), IcicRegime.EICIC: (0.0, 0.0),
                      IcicRegime.FEICIC: (0.0, 1.0)}[regime]
        bounds = {
            "alpha_mbs": (a_lo, a_hi), "alpha_pbs": (a_lo, a_hi),
            "beta_mbs": (0.0, 1.0), "beta_pbs": (0.0, 1.0),
            "rho_mbs_db": RHO_BOUNDS_DB[MBS], "rho_pbs_db": RHO_BOUNDS_DB[PBS],
            "rho_uabs_db": RHO_BOUNDS_DB[UABS],
            "tau_pbs_db": TAU_BOUNDS_DB, "tau_uabs_db": TAU_BOUNDS_DB,
        }
        for g in ICIC_GENES:
            lo.append(bounds[g][0])
            hi.append(bounds[g][1])
        grid = dict(DEFAULT_GRID if grid is None else grid)
        n = len(lo)
        return cls(n_uabs, np.array(lo), np.array(hi), np.zeros(n), grid, regime)

    @property
    def n_genes(self) -> int:
        return self.lower.size

    @property
    def gene_names(self) -> list[str]:
        xy = [f"{c}{i + 1}" for i in range(self.n_uabs) for c in ("x", "y")]
        return xy + list(ICIC_GENES)

    def index(self, name: str) -> int:
        return self.gene_names.index(name)

    def pin(self, **values) -> "SearchSpace":
        """Fix named genes (ICIC names, or 'uabs_xy' with an (N, 2) array)."""
        lo, hi = self.lower.copy(), self.upper.copy()
        for k, v in values.items():
            if k == "uabs_xy":
                flat = np.asarray(v, dtype=float).reshape(-1)
                lo[: flat.size] = flat
                hi[: flat.size] = flat
            else:
                i = self.index(k)
                lo[i] = hi[i] = float(v)
        return replace(self, lower=lo, upper=hi)

    def quantize(self, **steps) -> "SearchSpace":
        st = self.step.copy()
        for k, v in steps.items():
            st[self.index(k)] = float(v)
        return replace(self, step=st)

    def clamp(self, genes) -> np.ndarray:
        g = np.clip(np.asarray(genes, dtype=float), self.lower, self.upper)
        q = self.step > 0
        if q.any():
            k = np.round((g[..., q] - self.lower[q]) / self.step[q])
            g[..., q] = np.minimum(self.lower[q] + k * self.step[q], self.upper[q])
        return g

    def encode(self, state: IcicState) -> np.ndarray:
        xy = np.asarray(state.uabs_xy, dtype=float).reshape(-1)
        if xy.size != 2 * self.n_uabs:
            raise ValueError(f"state has {xy.size // 2} UABS, space expects {self.n_uabs}")
        return np.concatenate([xy, np.array(state.params, dtype=float)])

    def decode(self, genes) -> IcicState:
        g = np.asarray(genes, dtype=float)
        if g.shape != (self.n_genes,):
            raise ValueError(f"gene vector must have length {self.n_genes}, got {g.shape}")
        g = self.clamp(g)
        n2 = 2 * self.n_uabs
        return IcicState(g[:n2].reshape(-1, 2), *(float(v) for v in g[n2:]))

    def draw_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Sampling range per gene. Quantised genes reach half a step past each
        bound so that, after snapping, every lattice value is equally likely."""
        half = np.where(self.upper > self.lower, self.step / 2.0, 0.0)
        return self.lower - half, self.upper + half

    def sample(self, rng, idx=slice(None)) -> np.ndarray:
        """Uniform draws for the genes ``idx`` (unclamped; pass through :meth:`clamp`)."""
        lo, hi = self.draw_bounds()
        return rng.uniform(lo[idx], hi[idx])

    def random(self, rng, n: int) -> np.ndarray:
        lo, hi = self.draw_bounds()
        return self.clamp(rng.uniform(lo, hi, size=(n, self.n_genes)))

    def grid_axes(self) -> dict[str, tuple[float, ...]]:
        """Grid values of every ICIC gene; pinned genes contribute their single value."""
        axes = {}
        for name in ICIC_GENES:
            i = self.index(name)
            if self.lower[i] == self.upper[i]:
                axes[name] = (float(self.lower[i]),)
            else:
                vals = np.asarray(self.grid.get(name, (self.lower[i], self.upper[i])), dtype=float)
                vals = vals[(vals >= self.lower[i]) & (vals <= self.upper[i])]
                axes[name] = tuple(float(v) for v in vals)
        return axes

    def grid_size(self) -> int:
        return math.prod(len(v) for v in self.grid_axes().values())


@dataclass(frozen=True)
class GaParams:
    pop_size: int = 60
    generations: int = 100
    crossover_rate: float = 0.7
    mutation_rate: float = 0.1

    def __post_init__(self):
        if self.pop_size < 2:
            raise ValueError("pop_size must be >= 2")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


@dataclass(frozen=True)
class EhsgaParams:
    hm_size: int = 60
    improvisations: int = 100
    hmcr_min: float = 0.2
    hmcr_max: float = 0.8
    par_min: float = 0.4
    par_max: float = 0.8
    fret: float = 1.0
    fret_decay: float = 0.99
    # fret is measured in units of FRET_SPAN of each gene's range
    fret_span: float = 0.1

    def __post_init__(self):
        if self.hm_size < 2:
            raise ValueError("hm_size must be >= 2")
        if self.improvisations < 0:
            raise ValueError("improvisations must be >= 0")
        for lo, hi in ((self.hmcr_min, self.hmcr_max), (self.par_min, self.par_max)):
            if not 0.0 <= lo <= hi <= 1.0:
                raise ValueError("rate pairs need 0 <= min <= max <= 1")
        if self.fret <= 0:
            raise ValueError("fret must be positive")


@dataclass
class OptimizerReport:
    method: str
    best_state: IcicState
    best_value: float
    trace: list[float]
    evaluations: int
    wall_time_s: float
    # brute force only: {metric: {(tau_pbs, tau_uabs): best value}}
    surface: dict = field(default_factory=dict)
    # {metric: (value, state)} when the objective exposes companion metrics
    best_by_metric: dict = field(default_factory=dict)

    def write_csv(self, path, space: SearchSpace | None = None) -> None:
        """Trace rows, then one ``best`` row per gene of the final state."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "best_value", "evaluations", "wall_time_s"])
            for i, v in enumerate(self.trace):
                w.writerow([i, repr(float(v)), "", ""])
            w.writerow(["final", repr(float(self.best_value)), self.evaluations, repr(self.wall_time_s)])
            names = space.gene_names if space is not None else None
            genes = np.concatenate([self.best_state.uabs_xy.reshape(-1), self.best_state.params])
            for i, v in enumerate(genes):
                w.writerow(["best", names[i] if names else f"g{i}", repr(float(v)), ""])


class _Evaluator:
    """Memoised objective wrapper over clamped gene vectors."""

    def __init__(self, objective, space: SearchSpace):
        self.objective = objective
        self.space = space
        self.cache: dict[bytes, float] = {}
        self.count = 0

    def __call__(self, genes: np.ndarray) -> float:
        key = genes.tobytes()
        v = self.cache.get(key)
        if v is None:
            self.count += 1
            v = float(self.objective(self.space.decode(genes)))
            self.cache[key] = v
        return v

    def many(self, pop: np.ndarray) -> np.ndarray:
        return np.array([self(g) for g in pop])


def _rng(rng):
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


# -- brute force ----------------------------------------------------------------

def brute_force(objective, space: SearchSpace, uabs_grid: NodeSet | np.ndarray | None = None,
                budget: int = 50_000, shuffle_rng=None) -> OptimizerReport:
    """Exhaustive search over the ICIC grid with UABS positions fixed.

    Ties are broken towards the lexicographically smallest parameter tuple so
    the answer does not depend on enumeration order. If ``objective`` exposes a
    ``metrics`` dict after each call, the best value and CRE surface of every
    metric are tracked too.
    """
    t0 = time.perf_counter()
    if uabs_grid is None:
        xy = space.lower[: 2 * space.n_uabs].reshape(-1, 2)
    else:
        xy = uabs_grid.xy if isinstance(uabs_grid, NodeSet) else np.asarray(uabs_grid, dtype=float)
    axes = space.grid_axes()
    n_points = space.grid_size()
    base = IcicState(xy)
    if n_points > budget:
        t = time.perf_counter()
        objective(base.replace(**{k: v[0] for k, v in axes.items()}))
        per_eval = time.perf_counter() - t
        raise BudgetExceeded(
            f"grid has {n_points} points, budget is {budget}; "
            f"estimated run time {n_points * per_eval:.0f} s at {per_eval * 1e3:.1f} ms per evaluation")
    points = list(itertools.product(*axes.values()))
    if shuffle_rng is not None:
        _rng(shuffle_rng).shuffle(points)
    names = list(axes)
    i_tp, i_tu = names.index("tau_pbs_db"), names.index("tau_uabs_db")

    best_key, best_val, best_pt = None, -np.inf, None
    trace = []
    surface: dict = {}
    by_metric: dict = {}
    for pt in points:
        state = base.replace(**dict(zip(names, pt)))
        v = float(objective(state))
        if best_pt is None or v > best_val or (v == best_val and pt < best_pt):
            best_val, best_pt = v, pt
        trace.append(best_val)
        metrics = getattr(objective, "metrics", None) or {"objective": v}
        cell = (pt[i_tp], pt[i_tu])
        for m, mv in metrics.items():
            surf = surface.setdefault(m, {})
            if cell not in surf or mv > surf[cell]:
                surf[cell] = mv
            cur = by_metric.get(m)
            if cur is None or mv > cur[0] or (mv == cur[0] and pt < cur[2]):
                by_metric[m] = (mv, state, pt)
    best_state = base.replace(**dict(zip(names, best_pt)))
    return OptimizerReport(
        "hex-brute", best_state, best_val, trace, len(points), time.perf_counter() - t0,
        surface, {m: (v, s) for m, (v, s, _) in by_metric.items()})


# -- genetic algorithm -------------------------------------------------------------

def _initial_population(space: SearchSpace, n: int, rng, initial) -> np.ndarray:
    pop = space.random(rng, n)
    if initial is not None:
        seeds = [space.clamp(space.encode(s)) for s in initial][:n]
        for i, g in enumerate(seeds):
            pop[i] = g
    return pop


def _roulette(fitness: np.ndarray, rng, k: int) -> np.ndarray:
    w = fitness - fitness.min()
    total = w.sum()
    if not np.isfinite(total) or total <= 0:
        return rng.integers(0, fitness.size, size=k)
    return rng.choice(fitness.size, size=k, p=w / total)


def _single_point(a: np.ndarray, b: np.ndarray, rng):
    cut = int(rng.integers(1, a.size)) if a.size > 1 else 0
    return np.concatenate([a[:cut], b[cut:]]), np.concatenate([b[:cut], a[cut:]])


def ga_optimize(objective, space: SearchSpace, params: GaParams = GaParams(), rng=None,
                initial=None) -> OptimizerReport:
    """Roulette-wheel GA with single-point crossover, uniform mutation and one elite.

    ``initial`` is an optional list of states placed in the first population.
    """
    t0 = time.perf_counter()
    rng = _rng(rng)
    ev = _Evaluator(objective, space)
    pop = _initial_population(space, params.pop_size, rng, initial)
    fit = ev.many(pop)
    trace = [float(fit.max())]
    n = space.n_genes
    for _ in range(params.generations):
        elite = int(fit.argmax())
        children = []
        while len(children) < params.pop_size - 1:
            i, j = _roulette(fit, rng, 2)
            a, b = pop[i].copy(), pop[j].copy()
            if rng.random() < params.crossover_rate:
                a, b = _single_point(a, b, rng)
            for c in (a, b):
                mask = rng.random(n) < params.mutation_rate
                if mask.any():
                    c[mask] = space.sample(rng, mask)
                children.append(space.clamp(c))
        children = np.array(children[: params.pop_size - 1])
        pop = np.vstack([pop[elite][None], children])
        fit = np.concatenate([[fit[elite]], ev.many(children)])
        trace.append(float(fit.max()))
    k = int(fit.argmax())
    return OptimizerReport("ga", space.decode(pop[k]), float(fit[k]), trace, ev.count,
                           time.perf_counter() - t0)


# -- harmony search / GA hybrid ------------------------------------------------------

def _linear(lo, hi, it, n_it):
    return lo if n_it <= 1 else lo + (hi - lo) * it / (n_it - 1)


def _merge_order(genes: np.ndarray, fitness: np.ndarray, k: int) -> np.ndarray:
    """Indices of the best ``k`` rows, best-first, preferring distinct harmonies.

    Repeats of a harmony already kept only fill slots left over once every
    distinct one is in, so the memory cannot collapse onto copies of its head.
    """
    order = np.argsort(-fitness, kind="stable")
    _, first = np.unique(genes[order], axis=0, return_index=True)
    distinct = np.zeros(order.size, dtype=bool)
    distinct[first] = True
    picked = np.concatenate([order[distinct], order[~distinct]])[:k]
    return picked[np.argsort(-fitness[picked], kind="stable")]


def ehsga_optimize(objective, space: SearchSpace, params: EhsgaParams = EhsgaParams(), rng=None,
                   initial=None, observer=None) -> OptimizerReport:
    """Elitist harmony search with GA crossover.

    Each outer iteration improvises one new harmony per memory slot. With
    probability R_HMC the slot's harmony is reused and either pitch-adjusted on
    one random gene (probability par) or crossed with a random member;
    otherwise one random gene is redrawn over its full range. Old and new
    memories are merged and the best ``hm_size`` distinct harmonies kept,
    sorted best-first.
    R_HMC falls linearly from max to min and par rises from min to max; fret
    shrinks by ``fret_decay`` each iteration. ``observer(iteration, fitness, fret)``
    is called after every merge with the memory's fitness column.
    """
    t0 = time.perf_counter()
    rng = _rng(rng)
    ev = _Evaluator(objective, space)
    hm = _initial_population(space, params.hm_size, rng, initial)
    fit = ev.many(hm)
    order = np.argsort(-fit, kind="stable")
    hm, fit = hm[order], fit[order]
    trace = [float(fit[0])]
    span = space.upper - space.lower
    fr = params.fret
    # only genes that can move are worth perturbing
    free = np.flatnonzero(span > 0)
    if free.size == 0:
        free = np.arange(space.n_genes)
    n_it = params.improvisations
    for it in range(n_it):
        hmcr = _linear(params.hmcr_max, params.hmcr_min, it, n_it)
        par = _linear(params.par_min, params.par_max, it, n_it)
        new = np.empty_like(hm)
        for k in range(params.hm_size):
            s = hm[k].copy()
            i = int(free[rng.integers(free.size)])
            if rng.random() < hmcr:
                if rng.random() < par:
                    s[i] = s[i] + (2.0 * rng.random() - 1.0) * fr * params.fret_span * span[i]
                else:
                    s, _ = _single_point(s, hm[int(rng.integers(params.hm_size))], rng)
            else:
                s[i] = space.sample(rng, i)
            new[k] = space.clamp(s)
        new_fit = ev.many(new)
        allg = np.vstack([hm, new])
        allf = np.concatenate([fit, new_fit])
        order = _merge_order(allg, allf, params.hm_size)
        hm, fit = allg[order], allf[order]
        trace.append(float(fit[0]))
        fr *= params.fret_decay
        if observer is not None:
            observer(it, fit.copy(), fr)
    return OptimizerReport("ehsga", space.decode(hm[0]), float(fit[0]), trace, ev.count,
                           time.perf_counter() - t0)


def write_surface_csv(report: OptimizerReport, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "tau_pbs_db", "tau_uabs_db", "value"])
        for m, surf in report.surface.items():
            for (tp, tu), v in sorted(surf.items()):
                w.writerow([m, tp, tu, repr(float(v))])
