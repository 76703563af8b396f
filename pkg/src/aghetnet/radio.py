"""ICIC frame structure, CRE-biased cell selection, USF/CSF scheduling and per-UE spectral efficiency.

Tiers are indexed MBS=0, PBS=1, UABS=2 throughout. Subframes are USF=0, CSF=1.
The six SIRs of a UE are packed along the last axis in the order
``[mbs_usf, mbs_csf, pbs_usf, pbs_csf, uabs_usf, uabs_csf]``.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, replace

import numpy as np

from . import channel as ch
from .topology import NodeSet, Role, pairwise_distance

MBS, PBS, UABS = 0, 1, 2
USF, CSF = 0, 1
TIER_NAMES = ("MOI", "POI", "UOI")
SUBFRAME_NAMES = ("USF", "CSF")
SIR_CAP = 1e6  # +60 dB
SCHEDULE_RULES = ("ge_usf", "ge_csf", "tiered")

GTG, ATA, ATG = "GTG", "ATA", "ATG"


class IcicRegime(str, enum.Enum):
    NONE = "none"
    EICIC = "eicic"
    FEICIC = "feicic"


RHO_BOUNDS_DB = {MBS: (20.0, 40.0), PBS: (-10.0, 10.0), UABS: (-5.0, 5.0)}
TAU_BOUNDS_DB = (0.0, 12.0)


@dataclass(frozen=True, eq=False)
class IcicState:
    """Joint UABS placement and per-tier ICIC parameters (shared by every cell of a tier)."""

    uabs_xy: np.ndarray
    alpha_mbs: float = 1.0
    beta_mbs: float = 0.5
    rho_mbs_db: float = 30.0
    alpha_pbs: float = 1.0
    beta_pbs: float = 0.5
    rho_pbs_db: float = 0.0
    tau_pbs_db: float = 0.0
    rho_uabs_db: float = 0.0
    tau_uabs_db: float = 0.0

    def __post_init__(self):
        xy = np.asarray(self.uabs_xy, dtype=float).reshape(-1, 2)
        xy.setflags(write=False)
        object.__setattr__(self, "uabs_xy", xy)

    @property
    def params(self) -> tuple[float, ...]:
        return (self.alpha_mbs, self.beta_mbs, self.rho_mbs_db, self.alpha_pbs, self.beta_pbs,
                self.rho_pbs_db, self.tau_pbs_db, self.rho_uabs_db, self.tau_uabs_db)

    def __eq__(self, other):
        if not isinstance(other, IcicState):
            return NotImplemented
        return np.array_equal(self.uabs_xy, other.uabs_xy) and self.params == other.params

    def __hash__(self):
        return hash((self.uabs_xy.tobytes(), self.params))

    def replace(self, **kw) -> "IcicState":
        return replace(self, **kw)

    def validate(self) -> None:
        for name in ("alpha_mbs", "alpha_pbs", "beta_mbs", "beta_pbs"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        for name in ("tau_pbs_db", "tau_uabs_db"):
            v = getattr(self, name)
            if not TAU_BOUNDS_DB[0] <= v <= TAU_BOUNDS_DB[1]:
                raise ValueError(f"{name}={v} outside {TAU_BOUNDS_DB}")
        for tier, name in ((MBS, "rho_mbs_db"), (PBS, "rho_pbs_db"), (UABS, "rho_uabs_db")):
            lo, hi = RHO_BOUNDS_DB[tier]
            v = getattr(self, name)
            if not lo <= v <= hi:
                raise ValueError(f"{name}={v} outside [{lo}, {hi}]")


def pin_regime(state: IcicState, regime: IcicRegime) -> IcicState:
    """Force the power-reduction factors a regime prescribes."""
    regime = IcicRegime(regime)
    if regime is IcicRegime.NONE:
        return state.replace(alpha_mbs=1.0, alpha_pbs=1.0)
    if regime is IcicRegime.EICIC:
        return state.replace(alpha_mbs=0.0, alpha_pbs=0.0)
    return state


@dataclass
class Association:
    ue_index: int
    serving_tier: str
    serving_cell_index: int
    subframe: str
    sir_linear: float


# -- link table ---------------------------------------------------------------

def link_kind(ue_role: Role, bs_role: Role) -> str:
    """Path-loss family for a UE/base-station pair."""
    if Role(ue_role) is Role.AUE:
        return ATA
    return ATG if Role(bs_role) is Role.UABS else GTG


def beam_azimuths(bs_xy: np.ndarray, ue_xy: np.ndarray, pick: np.ndarray) -> np.ndarray:
    """Azimuth each base station steers towards.

    Each base station beams at one of the UEs for which it is the closest cell
    of its tier; ``pick`` in [0, 1) chooses which. Cells with no such UE point
    at ``360 * pick`` degrees.
    """
    n_bs = bs_xy.shape[0]
    az = 360.0 * np.asarray(pick, dtype=float)
    if n_bs == 0 or ue_xy.shape[0] == 0:
        return az
    d2 = ((ue_xy[:, None, :] - bs_xy[None, :, :]) ** 2).sum(-1)
    nearest = d2.argmin(axis=1)
    order = np.argsort(nearest, kind="stable")
    counts = np.bincount(nearest, minlength=n_bs)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    has = counts > 0
    k = starts[has] + np.minimum((pick[has] * counts[has]).astype(int), counts[has] - 1)
    target = ue_xy[order[k]]
    az[has] = np.degrees(np.arctan2(target[:, 1] - bs_xy[has, 1], target[:, 0] - bs_xy[has, 0]))
    return az


def block_powers(ue_pos, ue_aerial, bs_pos, bs_is_uabs, bs_power_dbm, beam_az, cfg: ch.ChannelConfig,
                 u_los, g_los, g_nlos):
    """Received power (mW) over a UE x BS block, for a served link and for interference.

    The served-link power assumes the cell steers its beam at this UE (zero
    azimuth offset); the interference power uses the cell's actual beam
    azimuth. ``u_los`` are uniform draws deciding the LOS state of air links,
    ``g_los``/``g_nlos`` unit-mean Nakagami power draws for each state.
    """
    ue_pos = np.asarray(ue_pos, dtype=float)
    bs_pos = np.asarray(bs_pos, dtype=float)
    d2, d3 = pairwise_distance(ue_pos, bs_pos)
    ue_aerial = np.asarray(ue_aerial, dtype=bool)
    bs_is_uabs = np.broadcast_to(np.asarray(bs_is_uabs, dtype=bool), (bs_pos.shape[0],))
    pl = np.empty(d2.shape)
    los = np.zeros(d2.shape, dtype=bool)
    sampled = cfg.pathloss_mode == ch.SAMPLED

    if ue_aerial.any():
        ia = np.flatnonzero(ue_aerial)
        h = ue_pos[ia, 2][:, None]
        p = ch.ata_los_probability(d2[ia], h)
        los[ia] = u_los[ia] < p
        kw = dict(fc_units=cfg.ata_fc_units)
        if sampled:
            pl[ia] = ch.pl_ata(d2[ia], d3[ia], h, cfg.fc_mhz, ch.SAMPLED, los=los[ia], **kw)
        else:
            pl[ia] = ch.pl_ata(d2[ia], d3[ia], h, cfg.fc_mhz, ch.AVERAGE, **kw)
    ig = np.flatnonzero(~ue_aerial)
    if ig.size:
        ju = np.flatnonzero(bs_is_uabs)
        jt = np.flatnonzero(~bs_is_uabs)
        h_ue = ue_pos[ig, 2][:, None]
        if ju.size:
            sub = np.ix_(ig, ju)
            h_bs = bs_pos[ju, 2][None, :]
            p = ch.atg_los_probability(ch.elevation_deg(d2[sub], h_bs, h_ue), cfg.atg.s_curve_a, cfg.atg.s_curve_b)
            los[sub] = u_los[sub] < p
            mode = ch.SAMPLED if sampled else ch.AVERAGE
            pl[sub] = ch.pl_atg(d2[sub], h_bs, h_ue, cfg.atg, cfg.fc_mhz, mode, los=los[sub])
        if jt.size:
            sub = np.ix_(ig, jt)
            pl[sub] = ch.pl_gtg(d2[sub], cfg.fc_mhz, bs_pos[jt, 2][None, :], h_ue, cfg.gtg_distance_units)

    fading = np.where(los, g_los, g_nlos)
    phi, theta = ch.beam_angles(bs_pos, ue_pos, beam_az)
    pat = cfg.pattern
    base_mw = ch.dbm_to_mw(np.asarray(bs_power_dbm, dtype=float))[None, :] * fading / ch.db_to_linear(pl)
    served = base_mw * ch.db_to_linear(ch.antenna_gain(0.0, theta, pat))
    interf = base_mw * ch.db_to_linear(ch.antenna_gain(phi, theta, pat))
    return served, interf, pl


@dataclass
class LinkTable:
    served_mw: np.ndarray       # (n_ue, n_cell)
    interf_mw: np.ndarray       # (n_ue, n_cell)
    path_loss_db: np.ndarray    # (n_ue, n_cell)
    kind: np.ndarray            # (n_ue, n_cell) of GTG/ATA/ATG
    cell_tier: np.ndarray       # (n_cell,)
    cell_index: np.ndarray      # (n_cell,) index inside its tier


def link_matrix(ues: list[NodeSet], cells_by_tier: dict[int, NodeSet], cfg: ch.ChannelConfig, rng) -> LinkTable:
    """Received power of every UE/cell pair with one fading snapshot.

    ``ues`` is a list of GUE/AUE node sets; ``cells_by_tier`` maps MBS/PBS/UABS
    to node sets carrying a transmit power.
    """
    ue_pos = np.concatenate([u.positions for u in ues]) if ues else np.zeros((0, 3))
    ue_aerial = np.concatenate([np.full(len(u), u.role is Role.AUE) for u in ues]) if ues else np.zeros(0, bool)
    pos, tier, idx, power = [], [], [], []
    for t in (MBS, PBS, UABS):
        ns = cells_by_tier.get(t)
        if ns is None or len(ns) == 0:
            continue
        pos.append(ns.positions)
        tier.append(np.full(len(ns), t))
        idx.append(np.arange(len(ns)))
        power.append(np.full(len(ns), ns.tx_power_dbm, dtype=float))
    if not pos:
        raise ValueError("at least one tier must hold a cell")
    bs_pos = np.concatenate(pos)
    cell_tier = np.concatenate(tier)
    cell_index = np.concatenate(idx)
    bs_power = np.concatenate(power)
    shape = (ue_pos.shape[0], bs_pos.shape[0])
    u_los = rng.random(shape)
    g_los = ch.sample_nakagami_power(cfg.fading.m_los, rng, shape)
    g_nlos = ch.sample_nakagami_power(cfg.fading.m_nlos, rng, shape)
    pick = rng.random(bs_pos.shape[0])
    az = np.empty(bs_pos.shape[0])
    for t in np.unique(cell_tier):
        sel = cell_tier == t
        az[sel] = beam_azimuths(bs_pos[sel, :2], ue_pos[:, :2], pick[sel])
    served, interf, pl = block_powers(ue_pos, ue_aerial, bs_pos, cell_tier == UABS, bs_power, az, cfg,
                                      u_los, g_los, g_nlos)
    kinds = np.where(ue_aerial[:, None], ATA, np.where((cell_tier == UABS)[None, :], ATG, GTG))
    return LinkTable(served, interf, pl, kinds, cell_tier, cell_index)


# -- per-tier reduction -------------------------------------------------------

def reduce_tier(served: np.ndarray, interf: np.ndarray):
    """Strongest cell of one tier and the interference of the remaining cells.

    Returns ``(best_power, best_index, rest_interference)`` over the last axis;
    an empty tier yields zeros and index -1.
    """
    if served.shape[-1] == 0:
        z = np.zeros(served.shape[:-1])
        return z, np.full(served.shape[:-1], -1), z.copy()
    idx = served.argmax(axis=-1)
    best = np.take_along_axis(served, idx[..., None], -1)[..., 0]
    own = np.take_along_axis(interf, idx[..., None], -1)[..., 0]
    rest = interf.sum(axis=-1) - own
    return best, idx, np.maximum(rest, 0.0)


def reduce_link_table(table: LinkTable):
    """Per-UE strongest power/index and residual interference for each tier, shape (n_ue, 3)."""
    n = table.served_mw.shape[0]
    best = np.zeros((n, 3))
    index = np.full((n, 3), -1)
    rest = np.zeros((n, 3))
    for t in (MBS, PBS, UABS):
        sel = table.cell_tier == t
        if not sel.any():
            continue
        b, i, r = reduce_tier(table.served_mw[:, sel], table.interf_mw[:, sel])
        best[:, t] = b
        index[:, t] = table.cell_index[sel][i]
        rest[:, t] = r
    return best, index, rest


# -- SIR, selection, scheduling, SE ------------------------------------------

def _ratio(num, den):
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        g = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, SIR_CAP, 0.0))
    return np.minimum(g, SIR_CAP)


def sir_six(best: np.ndarray, rest: np.ndarray, state: IcicState, csf: bool = True) -> np.ndarray:
    """The six USF/CSF SIRs per UE, from per-tier strongest powers and residual interference.

    In the CSF phase every MBS scales by ``alpha_mbs`` and every PBS by
    ``alpha_pbs``, including the aggregate interference. With ``csf=False``
    the CSF entries are copied from USF, which is exact when both alphas are 1.
    """
    r0, r1, r2 = best[..., 0], best[..., 1], best[..., 2]
    i_usf = rest[..., 0] + rest[..., 1] + rest[..., 2]
    out = np.empty(best.shape[:-1] + (6,))
    out[..., 0] = _ratio(r0, r1 + r2 + i_usf)
    out[..., 2] = _ratio(r1, r0 + r2 + i_usf)
    out[..., 4] = _ratio(r2, r0 + r1 + i_usf)
    if not csf:
        out[..., 1] = out[..., 0]
        out[..., 3] = out[..., 2]
        out[..., 5] = out[..., 4]
        return out
    am, ap = state.alpha_mbs, state.alpha_pbs
    i_csf = am * rest[..., 0] + ap * rest[..., 1] + rest[..., 2]
    out[..., 1] = _ratio(am * r0, ap * r1 + r2 + i_csf)
    out[..., 3] = _ratio(ap * r1, am * r0 + r2 + i_csf)
    out[..., 5] = _ratio(r2, am * r0 + ap * r1 + i_csf)
    return out


def select_tier(sir: np.ndarray, state: IcicState) -> np.ndarray:
    """Camped tier: argmax of USF SIRs with CRE bias on PBS and UABS. Ties go MBS > PBS > UABS."""
    biased = np.stack([
        sir[..., 0],
        sir[..., 2] * 10.0 ** (state.tau_pbs_db / 10.0),
        sir[..., 4] * 10.0 ** (state.tau_uabs_db / 10.0),
    ], axis=-1)
    return biased.argmax(axis=-1)


def schedule(tier: np.ndarray, sir: np.ndarray, state: IcicState, rule: str = "ge_usf") -> np.ndarray:
    """USF/CSF pool of each UE by comparing its USF SIR on the camped tier with that tier's threshold.

    ``ge_usf``: SIR >= rho goes to USF, the rest to CSF. ``ge_csf``: the
    opposite. ``tiered``: macro UEs at or above rho go to CSF, small-cell UEs
    at or above rho go to USF.
    """
    if rule not in SCHEDULE_RULES:
        raise ValueError(f"unknown schedule rule {rule!r}")
    rho = 10.0 ** (np.array([state.rho_mbs_db, state.rho_pbs_db, state.rho_uabs_db]) / 10.0)
    g = np.take_along_axis(sir, (2 * tier)[..., None], -1)[..., 0]
    above = g >= rho[tier]
    if rule == "ge_usf":
        return np.where(above, USF, CSF)
    if rule == "ge_csf":
        return np.where(above, CSF, USF)
    flip = tier == MBS
    return np.where(above ^ flip, USF, CSF)


def pool_shares(state: IcicState) -> np.ndarray:
    """(3, 2) resource share of each tier's USF and CSF pools."""
    bm, bp = state.beta_mbs, state.beta_pbs
    return np.array([
        [bm, 1.0 - bm],
        [bp, 1.0 - bp],
        [bm + bp, 2.0 - (bm + bp)],
    ])


def spectral_efficiency(tier, subframe, sir, state: IcicState, n_pool):
    """SE (bps/Hz) of UEs given camped tier, pool, six SIRs and the size of their pool."""
    tier = np.asarray(tier)
    subframe = np.asarray(subframe)
    g = np.take_along_axis(np.asarray(sir), (2 * tier + subframe)[..., None], -1)[..., 0]
    share = pool_shares(state)[tier, subframe]
    n = np.asarray(n_pool, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        se = np.where(n > 0, share * np.log2(1.0 + g) / np.where(n > 0, n, 1.0), 0.0)
    return se


def pool_keys(tier, cell, subframe, n_cells_max: int, trial=None):
    """Flat integer key of (trial, tier, cell, subframe) pools."""
    key = (np.asarray(tier) * n_cells_max + np.asarray(cell)) * 2 + np.asarray(subframe)
    if trial is not None:
        key = key + np.asarray(trial) * (3 * n_cells_max * 2)
    return key


def load_counts(tier, cell, subframe, n_cells_max: int):
    """Pool occupancy of every UE's own pool, for a single snapshot (1-D inputs)."""
    key = pool_keys(tier, cell, subframe, n_cells_max)
    counts = np.bincount(key, minlength=3 * n_cells_max * 2)
    return counts, counts[key]


def associate(best, index, rest, state: IcicState, rule: str = "ge_usf"):
    """Full single-snapshot pipeline for 1-D UE arrays.

    Returns ``(tier, cell, subframe, sir_six, se)``.
    """
    sir = sir_six(best, rest, state)
    tier = select_tier(sir, state)
    sub = schedule(tier, sir, state, rule)
    cell = np.take_along_axis(index, tier[:, None], 1)[:, 0]
    n_max = int(index.max()) + 1 if index.size else 1
    _, n_pool = load_counts(tier, cell, sub, n_max)
    se = spectral_efficiency(tier, sub, sir, state, n_pool)
    return tier, cell, sub, sir, se


def to_associations(tier, cell, sub, sir) -> list[Association]:
    out = []
    for i, (t, c, s) in enumerate(zip(tier, cell, sub)):
        out.append(Association(i, TIER_NAMES[t], int(c), SUBFRAME_NAMES[s], float(sir[i, 2 * t + s])))
    return out


def write_associations_csv(path, ue_positions, tier, cell, sub, sir, se) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["ue", "x", "y", "tier", "cell", "subframe", "sir_db", "se"])
        for i in range(len(tier)):
            g = sir[i, 2 * tier[i] + sub[i]]
            sir_db = 10.0 * np.log10(g) if g > 0 else float("-inf")
            w.writerow([i, repr(float(ue_positions[i, 0])), repr(float(ue_positions[i, 1])), TIER_NAMES[tier[i]],
                        int(cell[i]), SUBFRAME_NAMES[sub[i]], repr(float(sir_db)), repr(float(se[i]))])
