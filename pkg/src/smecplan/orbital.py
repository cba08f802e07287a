"""Orbital geometry for a single circular ring of satellites and one ground station.

Everything here is a pure function of immutable configs: period, ground-track
frame period, positions over time, slant ranges, visibility, and selection of
the satellite that currently owns the ground-station link.

Model assumptions: one orbital plane, circular orbit, spherical Earth. The
ground station sits in a rotation-free frame by default (rotation can be
toggled on). Satellite 0 crosses the ground-station zenith at t=0 unless the
constellation carries a phase offset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import CONSTANTS, EARTH_ROTATION_RATE


class NoVisibleSatellite(Exception):
    """Raised when no satellite is above the elevation mask at the given time."""


@dataclass(frozen=True)
class ConstellationConfig:
    """Ring geometry: N uniformly spaced satellites at a common altitude."""

    n_sats: int = 20
    altitude_m: float = 600e3
    min_elevation_rad: float = 0.0  # geometric horizon by default
    gs_latitude_rad: float = 0.0
    gs_longitude_rad: float = 0.0
    phase_offset_rad: float = 0.0  # rotates the whole ring at t=0
    earth_rotation: bool = False

    def __post_init__(self):
        if self.n_sats < 1:
            raise ValueError("n_sats must be >= 1")
        if self.altitude_m <= 0:
            raise ValueError("altitude_m must be > 0")
        if not 0.0 <= self.min_elevation_rad < math.pi / 2:
            raise ValueError("min_elevation_rad must lie in [0, pi/2)")


@dataclass(frozen=True)
class ImagingConfig:
    """Camera frame geometry; height is the along-track side."""

    width_px: int = 1920
    height_px: int = 1080
    bits_per_px: int = 24
    gsd_m: float = 0.5

    def __post_init__(self):
        if min(self.width_px, self.height_px, self.bits_per_px) <= 0 or self.gsd_m <= 0:
            raise ValueError("all imaging fields must be > 0")
        if self.height_px >= self.width_px:
            raise ValueError("height_px must be smaller than width_px (along-track side)")


def image_size_bits(img: ImagingConfig) -> int:
    """Raw size of one image in bits."""
    return img.width_px * img.height_px * img.bits_per_px


def orbital_period(altitude_m: float) -> float:
    """Circular orbital period at the given altitude [s]."""
    if altitude_m < 0:
        raise ValueError("altitude must be >= 0")
    r = CONSTANTS.earth_radius_m + altitude_m
    return math.sqrt(4.0 * math.pi**2 * r**3 / CONSTANTS.G_times_ME)


def gtfp(height_px: float, gsd_m: float, altitude_m: float) -> float:
    """Ground-track frame period [s]: the longest capture period with no coverage holes.

    One frame advances h_px * d_gsd metres along track, and the ground track
    wraps the full circumference 2*pi*R_E once per orbital period.
    """
    if height_px <= 0 or gsd_m <= 0 or altitude_m <= 0:
        raise ValueError("gtfp arguments must be > 0")
    t_o = orbital_period(altitude_m)
    return height_px * gsd_m * t_o / (2.0 * math.pi * CONSTANTS.earth_radius_m)


def satellite_position(cfg: ConstellationConfig, sat_index: int, t: float) -> np.ndarray:
    """ECI-like position of one satellite [m]; the ring lies in the z=0 plane."""
    if not 0 <= sat_index < cfg.n_sats:
        raise ValueError(f"sat_index {sat_index} outside [0, {cfg.n_sats})")
    r = CONSTANTS.earth_radius_m + cfg.altitude_m
    t_o = orbital_period(cfg.altitude_m)
    phase = cfg.phase_offset_rad + 2.0 * math.pi * (sat_index / cfg.n_sats + t / t_o)
    return np.array([r * math.cos(phase), r * math.sin(phase), 0.0])


def gs_position(cfg: ConstellationConfig, t: float) -> np.ndarray:
    """Ground-station position [m]; rotates with the Earth only when enabled."""
    lon = cfg.gs_longitude_rad + (EARTH_ROTATION_RATE * t if cfg.earth_rotation else 0.0)
    lat = cfg.gs_latitude_rad
    re = CONSTANTS.earth_radius_m
    return np.array([re * math.cos(lat) * math.cos(lon), re * math.cos(lat) * math.sin(lon), re * math.sin(lat)])


def slant_distance(cfg: ConstellationConfig, sat_index: int, t: float) -> float:
    """Euclidean satellite-to-ground-station distance [m]."""
    diff = satellite_position(cfg, sat_index, t) - gs_position(cfg, t)
    return float(np.linalg.norm(diff))


def elevation(cfg: ConstellationConfig, sat_index: int, t: float) -> float:
    """Elevation of the satellite above the ground-station horizon [rad]."""
    gs = gs_position(cfg, t)
    line = satellite_position(cfg, sat_index, t) - gs
    up = gs / np.linalg.norm(gs)
    return math.asin(float(np.dot(line, up) / np.linalg.norm(line)))


def is_visible(cfg: ConstellationConfig, sat_index: int, t: float) -> bool:
    return elevation(cfg, sat_index, t) >= cfg.min_elevation_rad


def destination_satellite(cfg: ConstellationConfig, t: float) -> int:
    """Index of the visible satellite closest to the ground station.

    Ties break toward the lowest index. Raises NoVisibleSatellite when the
    whole ring is below the mask (callers treat that slot as rate zero).
    """
    best = None
    best_d = math.inf
    for idx in range(cfg.n_sats):
        if not is_visible(cfg, idx, t):
            continue
        d = slant_distance(cfg, idx, t)
        if d < best_d - 1e-9 or (abs(d - best_d) <= 1e-9 and (best is None or idx < best)):
            best, best_d = idx, d
    if best is None:
        raise NoVisibleSatellite(f"no satellite above {cfg.min_elevation_rad} rad at t={t}")
    return best


def edge_phase_angle(cfg: ConstellationConfig, slant_m: float) -> float:
    """Central angle between GS zenith and a satellite at the given slant range.

    Inverse of the law-of-cosines slant distance; used to place a satellite at
    a calibrated coverage-edge distance.
    """
    re = CONSTANTS.earth_radius_m
    r = re + cfg.altitude_m
    cos_theta = (re**2 + r**2 - slant_m**2) / (2.0 * re * r)
    if not -1.0 <= cos_theta <= 1.0:
        raise ValueError(f"slant distance {slant_m} unreachable at altitude {cfg.altitude_m}")
    return math.acos(cos_theta)
