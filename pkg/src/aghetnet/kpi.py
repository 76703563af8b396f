"""Network KPIs: fifth-percentile spectral efficiency and area coverage probability.

A :class:`Scenario` freezes the terrestrial nodes and users. A
:class:`Realization` freezes ``trials`` independent fading/beam snapshots of
that scenario so that every candidate UABS placement and ICIC setting is
scored against the same random numbers.
"""

from __future__ import annotations

import enum
import logging
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from . import channel as ch
from . import radio
from .radio import MBS, PBS, UABS, IcicState
from .topology import NodeSet, Region, Role, hex_grid, pairwise_distance

log = logging.getLogger(__name__)


class EvaluationError(ValueError):
    pass


class Kpi(str, enum.Enum):
    FIFTH_PERCENTILE_SE = "5pse"
    COVERAGE = "coverage"


# Calibrated once against the full-scale no-ICIC hex-grid scenario; see demos/calibrate_threshold.py.
DEFAULT_COVERAGE_THRESHOLD_SE = 0.038


@dataclass(frozen=True)
class KpiConfig:
    kpi: Kpi = Kpi.FIFTH_PERCENTILE_SE
    coverage_threshold_se: float = DEFAULT_COVERAGE_THRESHOLD_SE
    coverage_grid_pitch_m: float = 200.0
    trials: int = 20

    def __post_init__(self):
        object.__setattr__(self, "kpi", Kpi(self.kpi))
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.coverage_threshold_se >= 0:
            raise ValueError("coverage threshold must be non-negative")
        if self.coverage_grid_pitch_m <= 0:
            raise ValueError("probe pitch must be positive")


@dataclass
class KpiResult:
    value: float
    per_trial_values: list[float]
    trial_count: int

    @property
    def std_error(self) -> float:
        v = np.asarray(self.per_trial_values)
        return float(v.std(ddof=1) / np.sqrt(len(v))) if len(v) > 1 else 0.0


def fifth_percentile(values) -> float:
    """5th percentile with linear interpolation between order statistics."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise EvaluationError("fifth percentile of an empty set")
    return float(np.percentile(v, 5.0))


def probe_grid(region: Region, pitch_m: float, height_m: float) -> np.ndarray:
    """Cell-centred probe points at roughly ``pitch_m`` spacing, at least 2 x 2."""
    nx = max(2, int(round(region.width_m / pitch_m)))
    ny = max(2, int(round(region.height_m / pitch_m)))
    x = (np.arange(nx) + 0.5) * region.width_m / nx
    y = (np.arange(ny) + 0.5) * region.height_m / ny
    gx, gy = np.meshgrid(x, y, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, float(height_m))])


@dataclass(eq=False)
class Scenario:
    """Frozen terrestrial geometry plus the UABS fleet description."""

    region: Region
    mbs: NodeSet
    pbs: NodeSet
    gue: NodeSet
    aue: NodeSet
    n_uabs: int
    uabs_height_m: float = 25.0
    uabs_power_dbm: float = 26.0
    channel: ch.ChannelConfig = field(default_factory=ch.ChannelConfig)
    schedule_rule: str = "tiered"
    gue_height_m: float = 1.5
    _realizations: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.schedule_rule not in radio.SCHEDULE_RULES:
            raise ValueError(f"unknown schedule rule {self.schedule_rule!r}")
        if len(self.mbs) == 0:
            log.warning("scenario has no MBS")

    @property
    def n_ue(self) -> int:
        return len(self.gue) + len(self.aue)

    def hex_uabs(self) -> NodeSet:
        return hex_grid(self.n_uabs, self.region, self.uabs_height_m, self.uabs_power_dbm)

    def uabs_nodes(self, uabs_xy) -> NodeSet:
        xy = np.asarray(uabs_xy, dtype=float).reshape(-1, 2)
        pos = np.column_stack([xy, np.full(len(xy), self.uabs_height_m)])
        return NodeSet(Role.UABS, pos, self.uabs_power_dbm)

    def realization(self, trials: int, seed, probe_pitch_m: float = 200.0) -> "Realization":
        key = (trials, _seed_key(seed), probe_pitch_m)
        if key not in self._realizations:
            self._realizations[key] = Realization(self, trials, seed, probe_pitch_m)
        return self._realizations[key]


def _reduce_first(served, interf):
    """``radio.reduce_tier`` over the leading axis, done as a short loop over cells."""
    best = served[0].copy()
    idx = np.zeros(best.shape, dtype=np.intp)
    for n in range(1, served.shape[0]):
        better = served[n] > best
        np.maximum(best, served[n], out=best)
        idx += better * (n - idx)
    own = np.take_along_axis(interf, idx[None], 0)[0]
    # accumulate in double so that removing the serving cell does not cancel badly
    rest = interf.sum(axis=0, dtype=np.float64)
    rest -= own
    return best.astype(np.float64), idx, np.maximum(rest, 0.0, out=rest)


def _seed_key(seed):
    if isinstance(seed, np.random.SeedSequence):
        ent = seed.entropy
        return ("ss", tuple(ent) if isinstance(ent, (list, tuple)) else ent, tuple(seed.spawn_key))
    return seed


class Realization:
    """``trials`` frozen snapshots (fading, LOS states, beam targets) of a scenario.

    Terrestrial links do not depend on the optimisation state, so they are
    reduced to per-tier strongest-cell power and residual interference once.
    UABS links are recomputed per placement and memoised.
    """

    CHUNK = 2048
    CACHE_SIZE = 64

    def __init__(self, scenario: Scenario, trials: int, seed, probe_pitch_m: float = 200.0):
        self.scenario = sc = scenario
        self.trials = trials
        self.cfg = sc.channel
        ue_pos = [sc.gue.positions, sc.aue.positions]
        self.n_ue = sc.n_ue
        self.probes = probe_grid(sc.region, probe_pitch_m, sc.gue_height_m)
        self.rx_pos = np.concatenate(ue_pos + [self.probes])
        self.rx_aerial = np.concatenate([
            np.zeros(len(sc.gue), bool), np.ones(len(sc.aue), bool), np.zeros(len(self.probes), bool)])
        n_rx = self.rx_pos.shape[0]
        n_u = sc.n_uabs

        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        children = ss.spawn(trials)
        terr_pos = np.concatenate([sc.mbs.positions, sc.pbs.positions])
        terr_tier = np.concatenate([np.full(len(sc.mbs), MBS), np.full(len(sc.pbs), PBS)])
        terr_power = np.concatenate([np.full(len(sc.mbs), sc.mbs.tx_power_dbm or 0.0),
                                     np.full(len(sc.pbs), sc.pbs.tx_power_dbm or 0.0)])
        n_t = terr_pos.shape[0]

        self.best = np.zeros((trials, n_rx, 3))
        self.index = np.full((trials, n_rx, 3), -1)
        self.rest = np.zeros((trials, n_rx, 3))
        self.u_los = np.empty((trials, n_rx, n_u))
        self.g_los = np.empty((trials, n_rx, n_u))
        self.g_nlos = np.empty((trials, n_rx, n_u))
        self.pick_uabs = np.empty((trials, n_u))
        fm = self.cfg.fading
        ue_xy = self.rx_pos[: self.n_ue, :2]
        for t, child in enumerate(children):
            rng = np.random.default_rng(child)
            pick = rng.random(n_t)
            az = np.empty(n_t)
            for tier in (MBS, PBS):
                sel = terr_tier == tier
                az[sel] = radio.beam_azimuths(terr_pos[sel, :2], ue_xy, pick[sel])
            u_los = rng.random((n_rx, n_t))
            g_los = ch.sample_nakagami_power(fm.m_los, rng, (n_rx, n_t))
            g_nlos = ch.sample_nakagami_power(fm.m_nlos, rng, (n_rx, n_t))
            self.u_los[t] = rng.random((n_rx, n_u))
            self.g_los[t] = ch.sample_nakagami_power(fm.m_los, rng, (n_rx, n_u))
            self.g_nlos[t] = ch.sample_nakagami_power(fm.m_nlos, rng, (n_rx, n_u))
            self.pick_uabs[t] = rng.random(n_u)
            if n_t == 0:
                continue
            for lo in range(0, n_rx, self.CHUNK):
                hi = min(lo + self.CHUNK, n_rx)
                served, interf, _ = radio.block_powers(
                    self.rx_pos[lo:hi], self.rx_aerial[lo:hi], terr_pos, False, terr_power, az, self.cfg,
                    u_los[lo:hi], g_los[lo:hi], g_nlos[lo:hi])
                for tier, sel in ((MBS, slice(0, len(sc.mbs))), (PBS, slice(len(sc.mbs), n_t))):
                    b, i, r = radio.reduce_tier(served[:, sel], interf[:, sel])
                    self.best[t, lo:hi, tier] = b
                    self.index[t, lo:hi, tier] = i
                    self.rest[t, lo:hi, tier] = r
        # UABS draws are kept UABS-first, (n_uabs, trials, n_rx), so per-UE reductions over
        # the UABS tier run over contiguous slices
        # and in single precision, which halves the cost of the per-placement pass
        f32 = np.float32
        self.u_los = np.ascontiguousarray(self.u_los.transpose(2, 0, 1), dtype=f32)
        self.g_nlos = np.ascontiguousarray(self.g_nlos.transpose(2, 0, 1), dtype=f32)
        self.g_gap = np.ascontiguousarray(self.g_los.transpose(2, 0, 1), dtype=f32) - self.g_nlos
        del self.g_los
        self._cache: OrderedDict = OrderedDict()
        self.n_cells_max = max(len(sc.mbs), len(sc.pbs), n_u, 1)

    # -- UABS tier -----------------------------------------------------------

    def _uabs_tier(self, uabs_xy: np.ndarray):
        key = uabs_xy.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            self._cache.move_to_end(key)
            return hit
        sc = self.scenario
        n_u = sc.n_uabs
        shape = (self.trials, self.rx_pos.shape[0])
        if n_u == 0:
            out = (np.zeros(shape), np.full(shape, -1), np.zeros(shape))
        else:
            out = self._compute_uabs(uabs_xy)
        self._cache[key] = out
        if len(self._cache) > self.CACHE_SIZE:
            self._cache.popitem(last=False)
        return out

    def _compute_uabs(self, uabs_xy):
        sc, cfg = self.scenario, self.cfg
        bs = np.column_stack([uabs_xy, np.full(len(uabs_xy), sc.uabs_height_m)])
        rx = self.rx_pos
        d2, d3 = pairwise_distance(rx, bs)
        aer = self.rx_aerial
        gnd = ~aer
        sampled = cfg.pathloss_mode == ch.SAMPLED

        p_los = np.empty(d2.shape)
        los_db = np.empty(d2.shape)
        nlos_db = np.empty(d2.shape)
        if aer.any():
            h = rx[aer, 2][:, None]
            p_los[aer] = ch.ata_los_probability(d2[aer], h)
            los_db[aer] = ch.pl_ata_los(d3[aer], cfg.fc_mhz, cfg.ata_fc_units)
            nlos_db[aer] = ch.pl_ata_nlos(d3[aer], h, cfg.fc_mhz, cfg.ata_fc_units)
        if gnd.any():
            h = rx[gnd, 2][:, None]
            p_los[gnd] = ch.atg_los_probability(ch.elevation_deg(d2[gnd], sc.uabs_height_m, h),
                                                cfg.atg.s_curve_a, cfg.atg.s_curve_b)
            fspl = ch.free_space_loss(d3[gnd], cfg.fc_mhz)
            los_db[gnd] = fspl + cfg.atg.eta_los_db
            nlos_db[gnd] = fspl + cfg.atg.eta_nlos_db

        # everything below is laid out (n_uabs, trials, n_rx)
        f32 = np.float32
        p_los, los_db, nlos_db = p_los.T[:, None, :], los_db.T[:, None, :], nlos_db.T[:, None, :]
        los = self.u_los < p_los.astype(f32)
        gain = los * self.g_gap
        gain += self.g_nlos
        pat = cfg.pattern
        # fold transmit power and peak element gain into one factor
        p_mw = ch.dbm_to_mw(sc.uabs_power_dbm + pat.g_e_max_dbi)
        if sampled:
            gain *= np.where(los, p_mw / ch.db_to_linear(los_db), p_mw / ch.db_to_linear(nlos_db)).astype(f32)
        else:
            gain *= (p_mw / ch.db_to_linear(p_los * los_db + (1.0 - p_los) * nlos_db)).astype(f32)

        delta = rx[None, :, :] - bs[:, None, :]
        az = np.degrees(np.arctan2(delta[..., 1], delta[..., 0]))
        theta = np.degrees(np.arctan2(np.hypot(delta[..., 0], delta[..., 1]), delta[..., 2]))
        served = gain * ch.db_to_linear(ch.antenna_gain(0.0, theta, pat) - pat.g_e_max_dbi).astype(f32)[:, None, :]
        # ch.antenna_gain evaluated in place, in nepers (x ln10/10) relative to the peak gain
        c = np.log(10.0) / 10.0
        a_v = np.minimum(12.0 * ((theta - pat.theta_tilt_deg) / pat.theta_3db_deg) ** 2, pat.slav_db)
        att = (az[:, None, :] - self._uabs_beams(uabs_xy, bs).T[:, :, None]).astype(f32)
        np.abs(att, out=att)
        np.minimum(att, 360.0 - att, out=att)
        att *= att
        att *= -c * 12.0 / pat.phi_3db_deg ** 2
        np.maximum(att, -c * pat.a_m_db, out=att)
        att -= (c * a_v).astype(f32)[:, None, :]
        np.maximum(att, -c * pat.a_m_db, out=att)
        np.exp(att, out=att)
        att *= gain
        return _reduce_first(served, att)

    def _uabs_beams(self, uabs_xy, bs):
        ue_xy = self.rx_pos[: self.n_ue, :2]
        n_u = len(uabs_xy)
        if ue_xy.shape[0] == 0:
            return 360.0 * self.pick_uabs - 180.0
        nearest = ((ue_xy[:, None, :] - uabs_xy[None, :, :]) ** 2).sum(-1).argmin(axis=1)
        order = np.argsort(nearest, kind="stable")
        counts = np.bincount(nearest, minlength=n_u)
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        k = starts[None, :] + np.minimum((self.pick_uabs * counts[None, :]).astype(int),
                                         np.maximum(counts - 1, 0)[None, :])
        target = ue_xy[order[np.minimum(k, len(order) - 1)]]
        az = np.degrees(np.arctan2(target[..., 1] - uabs_xy[None, :, 1], target[..., 0] - uabs_xy[None, :, 0]))
        return np.where(counts[None, :] > 0, az, 360.0 * self.pick_uabs - 180.0)

    # -- full pipeline -------------------------------------------------------

    def snapshot(self, state: IcicState, trials: int | None = None):
        """Association and SE of every receiver in every trial.

        Returns a dict of (trials, n_rx) arrays: tier, cell, subframe, se, and
        the (trials, n_rx, 6) SIR block. Probe SEs assume the probe joins its pool.
        """
        trials = self.trials if trials is None else trials
        xy = np.ascontiguousarray(state.uabs_xy, dtype=float)
        if xy.shape[0] != self.scenario.n_uabs:
            raise ValueError(f"state has {xy.shape[0]} UABS, scenario expects {self.scenario.n_uabs}")
        ub, ui, ur = self._uabs_tier(xy)
        best = self.best[:trials].copy()
        index = self.index[:trials].copy()
        rest = self.rest[:trials].copy()
        best[..., UABS] = ub[:trials]
        index[..., UABS] = ui[:trials]
        rest[..., UABS] = ur[:trials]

        inert = state.alpha_mbs == 1.0 and state.alpha_pbs == 1.0
        sir = radio.sir_six(best, rest, state, csf=not inert)
        tier = radio.select_tier(sir, state)
        sub = radio.schedule(tier, sir, state, self.scenario.schedule_rule)
        cell = np.take_along_axis(index, tier[..., None], -1)[..., 0]
        trial_ix = np.arange(trials)[:, None]
        key = radio.pool_keys(tier, cell, sub, self.n_cells_max, trial_ix)
        n_ue = self.n_ue
        counts = np.bincount(key[:, :n_ue].ravel(), minlength=trials * 3 * self.n_cells_max * 2)
        n_pool = counts[key]
        n_pool[:, n_ue:] += 1
        se = radio.spectral_efficiency(tier, sub, sir, state, n_pool)
        return dict(tier=tier, cell=cell, subframe=sub, sir=sir, se=se)

    def kpis(self, state: IcicState, threshold_se: float, trials: int | None = None):
        """Per-trial (5pSE, coverage) arrays from one snapshot pass."""
        snap = self.snapshot(state, trials)
        se = snap["se"]
        n_ue = self.n_ue
        if n_ue == 0:
            warnings.warn("no scheduled UEs; 5pSE set to 0", RuntimeWarning, stacklevel=2)
            p5 = np.zeros(se.shape[0])
        else:
            p5 = np.percentile(se[:, :n_ue], 5.0, axis=1)
        cov = (se[:, n_ue:] > threshold_se).mean(axis=1)
        return p5, cov


def evaluate(state: IcicState, scenario: Scenario, cfg: KpiConfig, seed=0) -> KpiResult:
    """Mean of the configured KPI over ``cfg.trials`` frozen snapshots."""
    real = scenario.realization(cfg.trials, seed, cfg.coverage_grid_pitch_m)
    p5, cov = real.kpis(state, cfg.coverage_threshold_se)
    vals = p5 if cfg.kpi is Kpi.FIFTH_PERCENTILE_SE else cov
    return KpiResult(float(np.mean(vals)), [float(v) for v in vals], len(vals))


def coverage_probability(state: IcicState, scenario: Scenario, cfg: KpiConfig, seed=0) -> float:
    cfg = KpiConfig(Kpi.COVERAGE, cfg.coverage_threshold_se, cfg.coverage_grid_pitch_m, cfg.trials)
    return evaluate(state, scenario, cfg, seed).value


class KpiObjective:
    """Callable ``state -> mean KPI`` on one frozen realization.

    Each call also leaves both mean KPIs of that state in ``metrics`` so a
    brute-force sweep can report 5pSE and coverage from a single pass.
    """

    def __init__(self, scenario: Scenario, cfg: KpiConfig, seed=0):
        self.scenario = scenario
        self.cfg = cfg
        self.realization = scenario.realization(cfg.trials, seed, cfg.coverage_grid_pitch_m)
        self.calls = 0
        self.metrics: dict[str, float] = {}
        self.per_trial: dict[str, np.ndarray] = {}

    def __call__(self, state: IcicState) -> float:
        self.calls += 1
        p5, cov = self.realization.kpis(state, self.cfg.coverage_threshold_se)
        self.per_trial = {Kpi.FIFTH_PERCENTILE_SE.value: p5, Kpi.COVERAGE.value: cov}
        self.metrics = {k: float(v.mean()) for k, v in self.per_trial.items()}
        return self.metrics[self.cfg.kpi.value]
