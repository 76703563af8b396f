"""Link-level physics: 3D beamforming element gain, Nakagami-m fading, path loss, received power.

Three path-loss families are used depending on the link kind:

* GTG (ground user to terrestrial MBS/PBS): Okumura-Hata, urban.
* ATA (aerial user to any base station): 3GPP UMa-AV LOS/NLOS with a
  distance-dependent LOS probability.
* ATG (UAV base station to ground user): free-space loss plus LOS/NLOS excess
  loss, weighted by an elevation-angle sigmoid LOS probability.

Every loss function broadcasts over numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

AVERAGE = "average"
SAMPLED = "sampled"


@dataclass(frozen=True)
class AntennaPattern:
    g_e_max_dbi: float = 8.0
    a_m_db: float = 30.0
    slav_db: float = 30.0
    phi_3db_deg: float = 65.0
    theta_3db_deg: float = 65.0
    theta_tilt_deg: float = 90.0

    def __post_init__(self):
        if self.phi_3db_deg <= 0 or self.theta_3db_deg <= 0:
            raise ValueError("beamwidths must be positive")
        if self.a_m_db <= 0:
            raise ValueError("front-to-back ratio must be positive")


@dataclass(frozen=True)
class FadingModel:
    m_los: float = 3.0
    m_nlos: float = 1.0

    def __post_init__(self):
        if self.m_los < 1 or self.m_nlos < 1:
            raise ValueError("Nakagami shapes must be >= 1")


@dataclass(frozen=True)
class AtgEnvironment:
    """Urban built-up statistics and the matching S-curve fit."""

    zeta: float = 0.3          # built-up area fraction
    xi: float = 500.0          # buildings per km^2
    omega_m: float = 15.0      # Rayleigh scale of building height
    s_curve_a: float = 9.61
    s_curve_b: float = 0.16
    eta_los_db: float = 1.0
    eta_nlos_db: float = 20.0

    def __post_init__(self):
        if not (0 < self.zeta <= 1):
            raise ValueError("zeta must lie in (0, 1]")
        if self.xi <= 0 or self.omega_m <= 0:
            raise ValueError("xi and omega must be positive")


@dataclass(frozen=True)
class ChannelConfig:
    fc_mhz: float = 763.0
    ata_fc_units: str = "mhz"
    gtg_distance_units: str = "km"
    pathloss_mode: str = AVERAGE
    pattern: AntennaPattern = field(default_factory=AntennaPattern)
    fading: FadingModel = field(default_factory=FadingModel)
    atg: AtgEnvironment = field(default_factory=AtgEnvironment)

    def __post_init__(self):
        if self.ata_fc_units not in ("mhz", "ghz"):
            raise ValueError(f"ata_fc_units must be mhz or ghz, got {self.ata_fc_units!r}")
        if self.gtg_distance_units not in ("m", "km"):
            raise ValueError(f"gtg_distance_units must be m or km, got {self.gtg_distance_units!r}")
        if self.pathloss_mode not in (AVERAGE, SAMPLED):
            raise ValueError(f"pathloss_mode must be average or sampled, got {self.pathloss_mode!r}")


@dataclass
class LinkBudget:
    path_loss_db: float
    antenna_gain_db: float
    fading_linear: float
    rx_power_mw: float


def antenna_gain(phi_deg, theta_deg, pattern: AntennaPattern = AntennaPattern()):
    """3DBF element gain in dB for azimuth offset ``phi`` and zenith angle ``theta``."""
    phi = np.asarray(phi_deg, dtype=float)
    theta = np.asarray(theta_deg, dtype=float)
    a_h = -np.minimum(12.0 * (phi / pattern.phi_3db_deg) ** 2, pattern.a_m_db)
    a_v = -np.minimum(12.0 * ((theta - pattern.theta_tilt_deg) / pattern.theta_3db_deg) ** 2, pattern.slav_db)
    return pattern.g_e_max_dbi - np.minimum(-(a_h + a_v), pattern.a_m_db)


def sample_nakagami_power(m: float, rng, size=None):
    """Power gain of a Nakagami-m channel: Gamma(shape=m, rate=m), unit mean."""
    if m < 0.5:
        raise ValueError(f"Nakagami shape must be >= 0.5, got {m}")
    return rng.gamma(shape=m, scale=1.0 / m, size=size)


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


def dbm_to_mw(dbm):
    return db_to_linear(dbm)


# -- ground to ground ---------------------------------------------------------

def pl_gtg(d_m, fc_mhz=763.0, h_bs_m=36.0, h_gue_m=1.5, distance_units: str = "km"):
    """Okumura-Hata urban loss, never below free-space loss.

    ``d_m`` is always in meters; ``distance_units`` picks the unit the
    log-distance term is evaluated in ("km" is the usual Hata convention,
    "m" the literal reading). Distances under 1 m are clamped to 1 m.
    """
    if distance_units not in ("m", "km"):
        raise ValueError(f"distance_units must be 'm' or 'km', got {distance_units!r}")
    d = np.maximum(np.asarray(d_m, dtype=float), 1.0)
    d_u = d / 1000.0 if distance_units == "km" else d
    hata = (
        74.52 + 26.16 * math.log10(fc_mhz) - 20.37 * np.log10(h_bs_m)
        - 3.2 * np.log10(11.75 * np.asarray(h_gue_m, dtype=float)) ** 2
        + 38.35 * np.log10(d_u)
    )
    return np.maximum(hata, free_space_loss(d, fc_mhz))


# -- any to air ---------------------------------------------------------------

ATA_LOS_HEIGHT = (22.5, 300.0)
ATA_NLOS_HEIGHT = (10.0, 100.0)
ATA_LOS_PROB_MAX_D2D = 4000.0


def _check_aue_height(h):
    h = np.asarray(h, dtype=float)
    if np.any(h <= ATA_NLOS_HEIGHT[0]) or np.any(h > ATA_LOS_HEIGHT[1]):
        raise ValueError(f"aerial UE height outside (10, 300] m: {h}")


def _ata_fc(fc_mhz, units):
    return fc_mhz / 1000.0 if units == "ghz" else fc_mhz


def pl_ata_los(d3d_m, fc_mhz=763.0, fc_units="mhz"):
    d = np.maximum(np.asarray(d3d_m, dtype=float), 1.0)
    return 28.0 + 22.0 * np.log10(d) + 20.0 * math.log10(_ata_fc(fc_mhz, fc_units))


def pl_ata_nlos(d3d_m, h_aue_m, fc_mhz=763.0, fc_units="mhz"):
    d = np.maximum(np.asarray(d3d_m, dtype=float), 1.0)
    h = np.asarray(h_aue_m, dtype=float)
    return (
        -17.5 + (46.0 - 7.0 * np.log10(h)) * np.log10(d)
        + 20.0 * math.log10(40.0 * math.pi * _ata_fc(fc_mhz, fc_units) / 3.0)
    )


def ata_los_probability(d2d_m, h_aue_m):
    """UMa-AV LOS probability; beyond 4 km the 4 km value is held."""
    h = np.asarray(h_aue_m, dtype=float)
    d = np.minimum(np.asarray(d2d_m, dtype=float), ATA_LOS_PROB_MAX_D2D)
    p1 = 4300.0 * np.log10(h) - 3800.0
    d1 = np.maximum(460.0 * np.log10(h) - 700.0, 18.0)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        far = d1 / d + np.exp(-d / p1) * (1.0 - d1 / d)
    return np.where(d <= d1, 1.0, far)


def pl_ata(d2d_m, d3d_m, h_aue_m, fc_mhz=763.0, mode=AVERAGE, rng=None, fc_units="mhz", los=None):
    """UMa-AV loss.

    ``mode="average"`` returns the LOS-probability weighted loss. ``"sampled"``
    draws the LOS state (or takes it from the boolean array ``los``).
    """
    _check_aue_height(h_aue_m)
    p = ata_los_probability(d2d_m, h_aue_m)
    los_db = pl_ata_los(d3d_m, fc_mhz, fc_units)
    nlos_db = pl_ata_nlos(d3d_m, h_aue_m, fc_mhz, fc_units)
    if mode == AVERAGE:
        return p * los_db + (1.0 - p) * nlos_db
    if los is None:
        los = rng.random(np.shape(p)) < p
    return np.where(los, los_db, nlos_db)


# -- air to ground ------------------------------------------------------------

def elevation_deg(r_m, h_uabs_m, h_gue_m):
    return np.degrees(np.arctan2(np.asarray(h_uabs_m, dtype=float) - h_gue_m, np.asarray(r_m, dtype=float)))


def atg_los_probability(theta_deg, a=9.61, b=0.16):
    """S-curve LOS probability as a function of elevation angle in degrees."""
    return 1.0 / (1.0 + a * np.exp(-b * (np.asarray(theta_deg, dtype=float) - a)))


def atg_los_probability_screens(r_m, h_uabs_m, h_gue_m, env: AtgEnvironment = AtgEnvironment()):
    """Building-screen LOS probability (ITU-R P.1410 construction).

    Product over the buildings crossed by the ground projection of the ray of
    the probability that each building is lower than the ray at that point.
    """
    r_km = float(r_m) / 1000.0
    n = math.floor(r_km * math.sqrt(env.zeta * env.xi) - 1.0)
    if n < 0:
        return 1.0
    x = np.arange(n + 1)
    h_ray = h_uabs_m - (x + 0.5) * (h_uabs_m - h_gue_m) / (n + 1)
    return float(np.prod(1.0 - np.exp(-(h_ray ** 2) / (2.0 * env.omega_m ** 2))))


def free_space_loss(d3d_m, fc_mhz=763.0):
    d = np.maximum(np.asarray(d3d_m, dtype=float), 1.0)
    return 20.0 * np.log10(d) + 20.0 * math.log10(fc_mhz) - 27.55


def pl_atg(r_m, h_uabs_m, h_gue_m, env: AtgEnvironment = AtgEnvironment(), fc_mhz=763.0,
           mode=AVERAGE, rng=None, los=None):
    """Free-space loss at the slant range plus LOS/NLOS excess loss."""
    if np.any(np.asarray(h_uabs_m) <= np.asarray(h_gue_m)):
        raise ValueError("UABS must fly above the ground user")
    r = np.asarray(r_m, dtype=float)
    dh = np.asarray(h_uabs_m, dtype=float) - h_gue_m
    fspl = free_space_loss(np.sqrt(r ** 2 + dh ** 2), fc_mhz)
    p = atg_los_probability(elevation_deg(r, h_uabs_m, h_gue_m), env.s_curve_a, env.s_curve_b)
    if mode == AVERAGE:
        return fspl + p * env.eta_los_db + (1.0 - p) * env.eta_nlos_db
    if los is None:
        los = rng.random(np.shape(p)) < p
    return fspl + np.where(los, env.eta_los_db, env.eta_nlos_db)


# -- received power -----------------------------------------------------------

def received_power(tx_power_dbm, pl_db, antenna_gain_db, fading_linear):
    """Reference-symbol received power in mW."""
    fading_linear = np.asarray(fading_linear, dtype=float)
    if np.any(fading_linear <= 0):
        raise ValueError("fading power gain must be positive")
    return dbm_to_mw(tx_power_dbm) * db_to_linear(antenna_gain_db) * fading_linear / db_to_linear(pl_db)


def link_budget(tx_power_dbm, pl_db, antenna_gain_db, fading_linear) -> LinkBudget:
    rx = float(received_power(tx_power_dbm, pl_db, antenna_gain_db, fading_linear))
    return LinkBudget(float(pl_db), float(antenna_gain_db), float(fading_linear), rx)


def path_loss_from_rx(tx_power_dbm, rx_power_mw, antenna_gain_db, fading_linear):
    """Inverse of :func:`received_power` for the loss term."""
    return tx_power_dbm + antenna_gain_db + linear_to_db(fading_linear) - linear_to_db(rx_power_mw)


def beam_angles(bs_positions, ue_positions, target_azimuth_deg):
    """Azimuth offset from each base station's beam and zenith angle, (n_ue, n_bs) each.

    Zenith angle is measured from straight up, so 90 deg is the horizon.
    """
    delta = ue_positions[:, None, :] - bs_positions[None, :, :]
    az = np.degrees(np.arctan2(delta[..., 1], delta[..., 0]))
    phi = (az - np.asarray(target_azimuth_deg)[None, :] + 180.0) % 360.0 - 180.0
    d2 = np.hypot(delta[..., 0], delta[..., 1])
    theta = np.degrees(np.arctan2(d2, delta[..., 2]))
    return phi, theta
