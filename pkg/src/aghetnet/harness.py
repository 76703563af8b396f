"""Experiment orchestration: config files, presets, regime x height x optimizer sweeps, CSV reports."""

from __future__ import annotations

import contextlib
import csv
import dataclasses
import logging
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import channel as ch
from . import kpi as kp
from . import optimizer as opt
from .radio import IcicRegime, IcicState, pin_regime
from .topology import Region, Role, sample_ppp

log = logging.getLogger(__name__)

REGIMES = ("none", "eicic", "feicic")
OPTIMIZERS = ("hex-brute", "ga", "ehsga")
KPI_NAMES = tuple(k.value for k in kp.Kpi)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Every knob of an experiment. Defaults are the full-scale reference scenario."""

    width_m: float = 10_000.0
    height_m: float = 10_000.0
    lambda_mbs: float = 4.0
    lambda_pbs: float = 12.0
    lambda_gue: float = 100.0
    lambda_aue: float = 1.8
    n_uabs: int = 60
    h_mbs: float = 36.0
    h_pbs: float = 15.0
    uabs_heights: tuple = (25.0, 36.0, 50.0)
    h_gue: float = 1.5
    h_aue: float = 22.5
    p_mbs: float = 46.0
    p_pbs: float = 30.0
    p_uabs: float = 26.0
    fc_mhz: float = 763.0
    gtg_distance_units: str = "km"
    ata_fc_units: str = "mhz"
    pathloss_mode: str = ch.AVERAGE
    eta_los_db: float = 1.0
    eta_nlos_db: float = 20.0
    m_los: float = 3.0
    m_nlos: float = 1.0
    schedule_rule: str = "tiered"
    regimes: tuple = REGIMES
    optimizers: tuple = OPTIMIZERS
    kpis: tuple = KPI_NAMES
    coverage_threshold_se: float = kp.DEFAULT_COVERAGE_THRESHOLD_SE
    coverage_grid_pitch_m: float = 200.0
    trials: int = 20
    seed: int = 2019
    brute_grid: str = "full"
    brute_budget: int = 50_000
    ga_pop: int = 60
    ga_generations: int = 100
    ga_cxr: float = 0.7
    ga_mr: float = 0.1
    hm_size: int = 60
    hs_improvisations: int = 100
    hmcr_min: float = 0.2
    hmcr_max: float = 0.8
    par_min: float = 0.4
    par_max: float = 0.8
    fret: float = 1.0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("h_mbs", "h_pbs", "h_gue", "h_aue", "width_m", "height_m", "fc_mhz"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if any(h <= 0 for h in self.uabs_heights):
            raise ConfigError("uabs_heights must be positive")
        for r in self.regimes:
            if r not in REGIMES:
                raise ConfigError(f"unknown regime {r!r}")
        for o in self.optimizers:
            if o not in OPTIMIZERS:
                raise ConfigError(f"unknown optimizer {o!r}")
        for k in self.kpis:
            if k not in KPI_NAMES:
                raise ConfigError(f"unknown kpi {k!r}")
        if self.brute_grid not in opt.GRIDS:
            raise ConfigError(f"brute_grid must be one of {sorted(opt.GRIDS)}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")

    @property
    def region(self) -> Region:
        return Region(self.width_m, self.height_m)

    def channel(self) -> ch.ChannelConfig:
        return ch.ChannelConfig(
            fc_mhz=self.fc_mhz, ata_fc_units=self.ata_fc_units, gtg_distance_units=self.gtg_distance_units,
            pathloss_mode=self.pathloss_mode,
            fading=ch.FadingModel(self.m_los, self.m_nlos),
            atg=dataclasses.replace(ch.AtgEnvironment(), eta_los_db=self.eta_los_db, eta_nlos_db=self.eta_nlos_db),
        )

    def kpi_config(self, kpi: str) -> kp.KpiConfig:
        return kp.KpiConfig(kp.Kpi(kpi), self.coverage_threshold_se, self.coverage_grid_pitch_m, self.trials)

    def ga_params(self) -> opt.GaParams:
        return opt.GaParams(self.ga_pop, self.ga_generations, self.ga_cxr, self.ga_mr)

    def ehsga_params(self) -> opt.EhsgaParams:
        return opt.EhsgaParams(self.hm_size, self.hs_improvisations, self.hmcr_min, self.hmcr_max,
                               self.par_min, self.par_max, self.fret)

    def grid(self) -> dict:
        return dict(opt.GRIDS[self.brute_grid])

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)


def full_scale(**kw) -> ExperimentConfig:
    return ExperimentConfig(**kw)


def desk_scale(**kw) -> ExperimentConfig:
    base = dict(width_m=4000.0, height_m=4000.0, lambda_mbs=4.0, lambda_pbs=12.0, lambda_gue=50.0,
                lambda_aue=1.8, n_uabs=12, ga_pop=20, ga_generations=30, hm_size=20, hs_improvisations=30,
                trials=20, brute_grid="desk")
    base.update(kw)
    return ExperimentConfig(**base)


# -- key=value config files ----------------------------------------------------------

def _parse(raw: str, default):
    if isinstance(default, tuple):
        items = [s.strip() for s in raw.split(",") if s.strip()]
        if default and isinstance(default[0], float):
            return tuple(float(s) for s in items)
        return tuple(items)
    if isinstance(default, bool):
        return raw.strip().lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw.strip()


def _format(value) -> str:
    if isinstance(value, tuple):
        return ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_config(cfg: ExperimentConfig, path) -> None:
    with open(path, "w") as fh:
        for f in fields(cfg):
            fh.write(f"{f.name}={_format(getattr(cfg, f.name))}\n")


def load_config(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Read a flat ``key=value`` file; blank lines and ``#`` comments are skipped."""
    base = base or ExperimentConfig()
    known = {f.name: getattr(base, f.name) for f in fields(base)}
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            values[key] = _parse(raw, known[key])
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    for key in known.keys() - values.keys():
        log.info("config key %s missing, using default %r", key, known[key])
    return base.replace(**values)


# -- scenario construction ------------------------------------------------------------

def build_scenario(cfg: ExperimentConfig, uabs_height_m: float) -> kp.Scenario:
    """PPP draws for MBS/PBS/GUE/AUE. The draws depend only on ``cfg.seed``, not on the UABS height."""
    reg = cfg.region
    ss = np.random.SeedSequence(cfg.seed).spawn(4)
    mbs = sample_ppp(cfg.lambda_mbs, reg, cfg.h_mbs, Role.MBS, ss[0], cfg.p_mbs)
    pbs = sample_ppp(cfg.lambda_pbs, reg, cfg.h_pbs, Role.PBS, ss[1], cfg.p_pbs)
    gue = sample_ppp(cfg.lambda_gue, reg, cfg.h_gue, Role.GUE, ss[2])
    aue = sample_ppp(cfg.lambda_aue, reg, cfg.h_aue, Role.AUE, ss[3])
    return kp.Scenario(reg, mbs, pbs, gue, aue, cfg.n_uabs, uabs_height_m, cfg.p_uabs, cfg.channel(),
                       cfg.schedule_rule, cfg.h_gue)


def fading_seed(cfg: ExperimentConfig) -> np.random.SeedSequence:
    return np.random.SeedSequence([cfg.seed, 1])


def run_seed(cfg: ExperimentConfig, height_ix: int, regime: str, optimizer: str, kpi: str):
    return np.random.SeedSequence([cfg.seed, 2, height_ix, REGIMES.index(regime),
                                   OPTIMIZERS.index(optimizer), KPI_NAMES.index(kpi)])


# -- reports ------------------------------------------------------------------------------

REPORT_COLUMNS = ("regime", "optimizer", "uabs_height_m", "tau_pbs_db", "tau_uabs_db", "kpi_name",
                  "kpi_value", "wall_time_s", "seed")


@dataclass(frozen=True)
class ReportRow:
    regime: str
    optimizer: str
    uabs_height_m: float
    tau_pbs_db: float
    tau_uabs_db: float
    kpi_name: str
    kpi_value: float
    wall_time_s: float
    seed: int

    def sort_key(self):
        return (self.uabs_height_m, REGIMES.index(self.regime), OPTIMIZERS.index(self.optimizer),
                self.kpi_name, self.tau_pbs_db, self.tau_uabs_db)


@contextlib.contextmanager
def _sink(target):
    """Open ``target`` for writing unless it is already a file-like object."""
    if hasattr(target, "write"):
        yield target
    else:
        with open(target, "w", newline="") as fh:
            yield fh


def write_report(rows, path) -> None:
    with _sink(path) as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for r in rows:
            w.writerow([_format(getattr(r, c)) if isinstance(getattr(r, c), float) else getattr(r, c)
                        for c in REPORT_COLUMNS])


def read_report(path) -> list[ReportRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != REPORT_COLUMNS:
            raise ValueError(f"unexpected report header {reader.fieldnames}")
        out = []
        for rec in reader:
            out.append(ReportRow(rec["regime"], rec["optimizer"], float(rec["uabs_height_m"]),
                                 float(rec["tau_pbs_db"]), float(rec["tau_uabs_db"]), rec["kpi_name"],
                                 float(rec["kpi_value"]), float(rec["wall_time_s"]), int(rec["seed"])))
    return out


def runtime_meter(task, repeats: int = 1) -> float:
    """Mean monotonic wall time of ``task()`` over ``repeats`` calls."""
    times = []
    for _ in range(max(1, repeats)):
        t = time.perf_counter()
        task()
        times.append(time.perf_counter() - t)
    return float(np.mean(times))


# -- experiments --------------------------------------------------------------------------

@dataclass
class ExperimentResult:
    rows: list[ReportRow]
    # keyed by (height, regime, optimizer, kpi); hex-brute reports are shared by both KPIs
    reports: dict = field(default_factory=dict)
    # per-trial KPI values of each cell's best state, same keys
    per_trial: dict = field(default_factory=dict)

    def best(self, height, regime, optimizer, kpi) -> float:
        rep = self.reports[(height, regime, optimizer, kpi)]
        if optimizer == "hex-brute":
            return rep.best_by_metric[kpi][0]
        return rep.best_value

    def best_state(self, height, regime, optimizer, kpi) -> IcicState:
        rep = self.reports[(height, regime, optimizer, kpi)]
        if optimizer == "hex-brute":
            return rep.best_by_metric[kpi][1]
        return rep.best_state


def _hex_state(sc: kp.Scenario, regime: str) -> IcicState:
    return pin_regime(IcicState(sc.hex_uabs().xy), IcicRegime(regime))


def run_cells(cfg: ExperimentConfig) -> ExperimentResult:
    """Run every requested (height, regime, optimizer, kpi) cell and keep the optimizer reports.

    Regimes run in the order none, eICIC, FeICIC. Heuristic runs start from the
    hex-grid placement, the brute-force optimum of their regime (when computed)
    and any earlier-regime optimum that is feasible in the current regime.
    """
    cfg.validate()
    result = ExperimentResult([])
    regimes = [r for r in REGIMES if r in cfg.regimes]
    for h_ix, h in enumerate(cfg.uabs_heights):
        sc = build_scenario(cfg, h)
        objectives = {k: kp.KpiObjective(sc, cfg.kpi_config(k), fading_seed(cfg)) for k in cfg.kpis}
        earlier: dict = {}
        for regime in regimes:
            space = opt.SearchSpace.build(cfg.n_uabs, cfg.region, regime, cfg.grid())
            hex_state = _hex_state(sc, regime)
            brute = None
            if "hex-brute" in cfg.optimizers:
                brute = opt.brute_force(objectives[cfg.kpis[0]], space, sc.hex_uabs(), cfg.brute_budget)
                for k in cfg.kpis:
                    result.reports[(h, regime, "hex-brute", k)] = brute
                    v, st = brute.best_by_metric[k]
                    objectives[k](st)
                    result.per_trial[(h, regime, "hex-brute", k)] = objectives[k].per_trial[k]
                    result.rows.append(ReportRow(regime, "hex-brute", h, st.tau_pbs_db, st.tau_uabs_db, k, v,
                                                 brute.wall_time_s, cfg.seed))
                    for (tp, tu), sv in brute.surface[k].items():
                        result.rows.append(ReportRow(regime, "hex-brute", h, tp, tu, f"{k}_surface", sv,
                                                     brute.wall_time_s, cfg.seed))
            for name in ("ga", "ehsga"):
                if name not in cfg.optimizers:
                    continue
                for k in cfg.kpis:
                    initial = [hex_state]
                    if brute is not None:
                        initial.append(brute.best_by_metric[k][1])
                    for st in earlier.get((name, k), []):
                        g = space.encode(st)
                        if np.array_equal(space.clamp(g), g):
                            initial.append(st)
                    rng = np.random.default_rng(run_seed(cfg, h_ix, regime, name, k))
                    if name == "ga":
                        rep = opt.ga_optimize(objectives[k], space, cfg.ga_params(), rng, initial)
                    else:
                        rep = opt.ehsga_optimize(objectives[k], space, cfg.ehsga_params(), rng, initial)
                    earlier.setdefault((name, k), []).append(rep.best_state)
                    result.reports[(h, regime, name, k)] = rep
                    st = rep.best_state
                    objectives[k](st)
                    result.per_trial[(h, regime, name, k)] = objectives[k].per_trial[k]
                    result.rows.append(ReportRow(regime, name, h, st.tau_pbs_db, st.tau_uabs_db, k,
                                                 rep.best_value, rep.wall_time_s, cfg.seed))
    result.rows.sort(key=ReportRow.sort_key)
    return result


def run_experiment(cfg: ExperimentConfig) -> list[ReportRow]:
    return run_cells(cfg).rows


# -- path-loss distributions -----------------------------------------------------------------

def pathloss_samples(cfg: ExperimentConfig, uabs_height_m: float | None = None, chunk: int = 2048):
    """Average path loss over every realised BS-UE pair, grouped by link type (GTG, ATA, ATG)."""
    from .radio import block_powers

    h = cfg.uabs_heights[0] if uabs_height_m is None else uabs_height_m
    sc = build_scenario(cfg, h)
    uabs = sc.hex_uabs()
    chan = dataclasses.replace(cfg.channel(), pathloss_mode=ch.AVERAGE)
    terr = np.concatenate([sc.mbs.positions, sc.pbs.positions])
    bs = np.concatenate([terr, uabs.positions])
    is_uabs = np.r_[np.zeros(len(terr), bool), np.ones(len(uabs), bool)]
    power = np.zeros(len(bs))
    out = {"GTG": [], "ATA": [], "ATG": []}
    ue = np.concatenate([sc.gue.positions, sc.aue.positions])
    aerial = np.r_[np.zeros(len(sc.gue), bool), np.ones(len(sc.aue), bool)]
    ones = np.ones((1, len(bs)))
    for lo in range(0, len(ue), chunk):
        hi = min(lo + chunk, len(ue))
        n = hi - lo
        u = np.zeros((n, len(bs)))
        g = np.broadcast_to(ones, (n, len(bs)))
        _, _, pl = block_powers(ue[lo:hi], aerial[lo:hi], bs, is_uabs, power, np.zeros(len(bs)), chan, u, g, g)
        a = aerial[lo:hi]
        out["ATA"].append(pl[a].ravel())
        out["GTG"].append(pl[~a][:, ~is_uabs].ravel())
        out["ATG"].append(pl[~a][:, is_uabs].ravel())
    return {k: np.sort(np.concatenate(v)) if v else np.zeros(0) for k, v in out.items()}


def write_pathloss_cdf(samples: dict, path, points: int = 1001) -> None:
    """Empirical CDF at ``points`` evenly spaced probabilities per link type."""
    q = np.linspace(0.0, 1.0, points)
    with _sink(path) as fh:
        w = csv.writer(fh)
        w.writerow(["link", "path_loss_db", "cdf"])
        for kind, v in samples.items():
            if v.size == 0:
                continue
            for p, x in zip(q, np.quantile(v, q)):
                w.writerow([kind, repr(float(x)), repr(float(p))])
