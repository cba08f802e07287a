"""Downlink SNR, adaptive rate selection, and fixed ISL link parameters.

The downlink is an AWGN free-space channel: SNR falls with the inverse square
of slant range. A rate table maps minimum SNR thresholds to spectral
efficiencies; the selected downlink rate is the highest table entry whose
threshold the worst-case SNR over a slot still clears. ISLs are fixed-rate
optical links and carry no adaptive machinery at all.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

from .constants import CONSTANTS

# Spectral-efficiency grid [b/s/Hz] in the style of the DVB-S2X normal-frame
# MODCOD ladder (QPSK 2/9 up to 256APSK-class). Thresholds are the ideal
# Shannon bounds 2^r - 1; real MODCOD tables can be loaded from CSV instead.
# 4.32 b/s/Hz is present so a 500 MHz carrier can hit 2.16 Gbps exactly.
_DVBS2X_EFFICIENCIES = (
    0.43, 0.49, 0.57, 0.62, 0.67, 0.74, 0.80, 0.89, 0.99, 1.09,
    1.19, 1.29, 1.39, 1.49, 1.59, 1.69, 1.79, 1.89, 1.98, 2.08,
    2.18, 2.28, 2.37, 2.46, 2.56, 2.66, 2.76, 2.85, 2.96, 3.05,
    3.17, 3.28, 3.40, 3.52, 3.64, 3.76, 3.90, 4.05, 4.20, 4.32,
    4.45, 4.62, 4.80, 4.99, 5.16, 5.34, 5.51, 5.70, 5.90,
)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class LinkConfig:
    """RF downlink and optical ISL parameters."""

    tx_power_rf_w: float = 10.0
    amp_inefficiency_rf: float = 1.0
    gain_tx_dbi: float = 32.13
    gain_rx_dbi: float = 34.20
    carrier_hz: float = 20e9
    bandwidth_hz: float = 500e6
    noise_power_dbw: float = -119.32
    isl_rate_bps: float = 10e9
    isl_power_w: float = 60.0
    isl_tx_fraction: float = 1.0  # eta: share of ISL power drawn by actual transmission

    def __post_init__(self):
        if min(self.tx_power_rf_w, self.carrier_hz, self.bandwidth_hz, self.isl_rate_bps, self.isl_power_w) <= 0:
            raise ValueError("powers, rates and frequencies must be > 0")
        if self.amp_inefficiency_rf < 1.0:
            raise ValueError("amp_inefficiency_rf is a >= 1 scale factor")
        if not 0.0 <= self.isl_tx_fraction <= 1.0:
            raise ValueError("isl_tx_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class RateTable:
    """Ordered (spectral efficiency, minimum linear SNR) pairs."""

    efficiencies: tuple = ()
    snr_thresholds: tuple = ()

    def __post_init__(self):
        eff, thr = self.efficiencies, self.snr_thresholds
        if len(eff) != len(thr) or not eff:
            raise ValueError("table must hold matching, non-empty columns")
        for i in range(len(eff)):
            if thr[i] < 2.0 ** eff[i] - 1.0 - 1e-12:
                raise ValueError(f"threshold below the Shannon bound at row {i}")
            if i and (eff[i] <= eff[i - 1] or thr[i] <= thr[i - 1]):
                raise ValueError("both columns must be strictly increasing")

    @classmethod
    def shannon_default(cls) -> "RateTable":
        eff = _DVBS2X_EFFICIENCIES
        return cls(efficiencies=eff, snr_thresholds=tuple(2.0**r - 1.0 for r in eff))

    @classmethod
    def from_csv(cls, path) -> "RateTable":
        """Load `spectral_efficiency,snr_min_db` rows (strictly increasing)."""
        eff, thr = [], []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                eff.append(float(row["spectral_efficiency"]))
                thr.append(db_to_linear(float(row["snr_min_db"])))
        return cls(efficiencies=tuple(eff), snr_thresholds=tuple(thr))

    def step_bps(self, bandwidth_hz: float) -> float:
        """Largest gap between adjacent achievable rates, in bps."""
        gaps = [self.efficiencies[0]] + [
            self.efficiencies[i] - self.efficiencies[i - 1] for i in range(1, len(self.efficiencies))
        ]
        return max(gaps) * bandwidth_hz


def snr(distance_m: float, cfg: LinkConfig) -> float:
    """Linear downlink SNR at the given slant range (AWGN, free-space loss)."""
    if distance_m <= 0:
        raise ValueError("distance must be > 0")
    g_tx = db_to_linear(cfg.gain_tx_dbi)
    g_rx = db_to_linear(cfg.gain_rx_dbi)
    noise = db_to_linear(cfg.noise_power_dbw)
    amplitude = CONSTANTS.light_speed / (4.0 * math.pi * distance_m * cfg.carrier_hz)
    return g_tx * g_rx * cfg.tx_power_rf_w * amplitude**2 / noise


N_SLOT_SAMPLES = 8  # interior SNR samples per slot; endpoints dominate for monotone range


def select_rate(
    distance_at: Callable[[float], float],
    slot_start: float,
    slot_len: float,
    cfg: LinkConfig,
    table: RateTable,
) -> float:
    """Downlink rate [bps] sustainable through the whole slot, 0 if none.

    `distance_at(t)` may raise NoVisibleSatellite-style errors; any failure to
    produce a distance makes the slot rateless.
    """
    if slot_len <= 0:
        raise ValueError("slot_len must be > 0")
    times = [slot_start + slot_len * i / (N_SLOT_SAMPLES + 1) for i in range(N_SLOT_SAMPLES + 2)]
    worst = math.inf
    for t in times:
        try:
            d = distance_at(t)
        except Exception:
            return 0.0
        if d is None or not math.isfinite(d):
            return 0.0
        worst = min(worst, snr(d, cfg))
    best = 0.0
    for eff, thr in zip(table.efficiencies, table.snr_thresholds):
        if worst >= thr:
            best = eff
    return best * cfg.bandwidth_hz


def transmission_time(bits: float, rate_bps: float) -> float:
    """Seconds to push `bits` through a link; infinite when the link is down."""
    if bits < 0:
        raise ValueError("bits must be >= 0")
    if bits == 0:
        return 0.0
    if rate_bps <= 0:
        return math.inf
    return bits / rate_bps


EDGE_ANCHOR_EFFICIENCY = 4.32  # default-table entry the geometry is calibrated to


def edge_of_coverage_distance(cfg: LinkConfig, table: RateTable, efficiency: float = None) -> float:
    """Largest slant range whose SNR still clears the anchor-rate threshold.

    Used to calibrate scenario geometry: the destination satellite starts at
    this range so the first-slot downlink lands on the matching table rate.
    The anchor is the requested efficiency when given; otherwise the largest
    table entry at or below the default anchor (or the table's lowest entry
    for tables that start above it). A hair of margin keeps the boundary
    comparison on the inclusive side.
    """
    if efficiency is None:
        at_or_below = [e for e in table.efficiencies if e <= EDGE_ANCHOR_EFFICIENCY + 1e-9]
        efficiency = max(at_or_below) if at_or_below else table.efficiencies[0]
    thr = None
    for eff, t in zip(table.efficiencies, table.snr_thresholds):
        if abs(eff - efficiency) < 1e-9:
            thr = t
    if thr is None:
        raise ValueError(f"rate table holds no {efficiency} b/s/Hz entry")
    # snr(d) = K / d^2  =>  d = sqrt(K / thr)
    k_const = snr(1.0, cfg)
    return math.sqrt(k_const / thr) * (1.0 - 1e-9)
