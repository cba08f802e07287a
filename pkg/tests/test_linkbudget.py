import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smecplan.linkbudget import (
    LinkConfig,
    RateTable,
    edge_of_coverage_distance,
    linear_to_db,
    select_rate,
    snr,
    transmission_time,
)

C_LIGHT = 2.998e8


def snr_db_ledger(d_m, cfg: LinkConfig) -> float:
    """Independent dB-budget: EIRP + gains + |noise| - free-space path loss."""
    fspl = 20 * math.log10(4 * math.pi * d_m * cfg.carrier_hz / C_LIGHT)
    return (
        10 * math.log10(cfg.tx_power_rf_w)
        + cfg.gain_tx_dbi
        + cfg.gain_rx_dbi
        - cfg.noise_power_dbw
        - fspl
    )


class TestSnr:
    def test_600km_budget(self, link_cfg):
        got_db = linear_to_db(snr(600e3, link_cfg))
        assert got_db == pytest.approx(snr_db_ledger(600e3, link_cfg), abs=1e-9)
        assert got_db == pytest.approx(21.6, abs=0.05)

    def test_inverse_square_law(self, link_cfg):
        assert snr(600e3, link_cfg) / snr(1200e3, link_cfg) == pytest.approx(4.0, rel=1e-12)

    def test_1200km(self, link_cfg):
        assert linear_to_db(snr(1200e3, link_cfg)) == pytest.approx(21.6188 - 6.0206, abs=0.01)

    def test_rejects_nonpositive_distance(self, link_cfg):
        with pytest.raises(ValueError):
            snr(0.0, link_cfg)


class TestRateTable:
    def test_default_table_spans_dvbs2x_range(self, rate_table):
        assert rate_table.efficiencies[0] == pytest.approx(0.43)
        assert rate_table.efficiencies[-1] == pytest.approx(5.90)
        assert 4.32 in rate_table.efficiencies
        assert len(rate_table.efficiencies) >= 40

    def test_thresholds_meet_shannon_bound(self, rate_table):
        for eff, thr in zip(rate_table.efficiencies, rate_table.snr_thresholds):
            assert thr >= 2**eff - 1 - 1e-12

    def test_shannon_identity_at_thresholds(self, rate_table):
        # B log2(1 + gamma_min) == B * R' exactly on the default grid
        for eff, thr in zip(rate_table.efficiencies, rate_table.snr_thresholds):
            assert math.log2(1 + thr) == pytest.approx(eff, rel=1e-12)

    def test_rejects_non_increasing(self):
        with pytest.raises(ValueError):
            RateTable(efficiencies=(1.0, 1.0), snr_thresholds=(1.0, 3.0))

    def test_rejects_below_shannon(self):
        with pytest.raises(ValueError):
            RateTable(efficiencies=(2.0,), snr_thresholds=(1.0,))

    def test_csv_round_trip(self, tmp_path, rate_table):
        path = tmp_path / "modcods.csv"
        rows = ["spectral_efficiency,snr_min_db"]
        rows += [
            f"{eff},{linear_to_db(thr)}"
            for eff, thr in zip(rate_table.efficiencies, rate_table.snr_thresholds)
        ]
        path.write_text("\n".join(rows))
        loaded = RateTable.from_csv(path)
        assert loaded.efficiencies == pytest.approx(rate_table.efficiencies)
        assert loaded.snr_thresholds == pytest.approx(rate_table.snr_thresholds)


class TestSelectRate:
    def test_calibrated_edge_hits_2p16_gbps(self, link_cfg, rate_table):
        d_edge = edge_of_coverage_distance(link_cfg, rate_table)
        rate = select_rate(lambda t: d_edge, 0.0, 0.078, link_cfg, rate_table)
        assert rate == pytest.approx(2.16e9, rel=1e-12)

    def test_no_link_below_lowest_threshold(self, link_cfg, rate_table):
        assert select_rate(lambda t: 1e9, 0.0, 0.078, link_cfg, rate_table) == 0.0

    def test_threshold_is_inclusive(self, link_cfg, rate_table):
        # an SNR within a ulp of the threshold earns that rate; a hair over
        # the distance drops exactly one step
        target = rate_table.snr_thresholds[10]
        d = math.sqrt(snr(1.0, link_cfg) / target)
        at_rate = select_rate(lambda t: d * (1 - 1e-12), 0.0, 0.078, link_cfg, rate_table)
        below = select_rate(lambda t: d * (1 + 1e-9), 0.0, 0.078, link_cfg, rate_table)
        assert at_rate == pytest.approx(rate_table.efficiencies[10] * link_cfg.bandwidth_hz, rel=1e-12)
        assert below == pytest.approx(rate_table.efficiencies[9] * link_cfg.bandwidth_hz, rel=1e-12)

    def test_worst_sample_in_slot_governs(self, link_cfg, rate_table):
        d_edge = edge_of_coverage_distance(link_cfg, rate_table)
        growing = lambda t: d_edge * (1 + 10 * t)  # drifts out of range inside the slot
        rate = select_rate(growing, 0.0, 0.078, link_cfg, rate_table)
        shrinking = lambda t: d_edge * (1 - 0.1 * t)
        rate2 = select_rate(shrinking, 0.0, 0.078, link_cfg, rate_table)
        assert rate < 2.16e9
        assert rate2 == pytest.approx(2.16e9, rel=1e-12)

    def test_monotone_in_worst_distance(self, link_cfg, rate_table):
        rates = [
            select_rate(lambda t, dd=d: dd, 0.0, 0.078, link_cfg, rate_table)
            for d in (0.8e6, 1.2e6, 1.66e6, 2.2e6, 3.5e6)
        ]
        assert rates == sorted(rates, reverse=True)

    def test_rateless_on_unavailable_distance(self, link_cfg, rate_table):
        def boom(t):
            raise RuntimeError("no satellite")

        assert select_rate(boom, 0.0, 0.078, link_cfg, rate_table) == 0.0

    @given(st.floats(min_value=3e5, max_value=4e6))
    @settings(max_examples=200)
    def test_rate_is_table_member_or_zero(self, d):
        link_cfg = LinkConfig()
        table = RateTable.shannon_default()
        rate = select_rate(lambda t: d, 0.0, 0.078, link_cfg, table)
        if rate == 0.0:
            return
        eff = rate / link_cfg.bandwidth_hz
        assert any(abs(eff - e) < 1e-9 for e in table.efficiencies)


class TestTransmissionTime:
    def test_isl_second(self):
        assert transmission_time(10e9, 10e9) == 1.0

    def test_hd_frame_over_edge_rate(self):
        t = transmission_time(49_766_400, 2.16e9)
        assert t == pytest.approx(0.02304, rel=1e-6)
        assert 3 * t < 0.078  # three images fit inside one slot

    def test_zero_bits(self):
        assert transmission_time(0, 1.0) == 0.0

    def test_no_link_sentinel(self):
        assert transmission_time(1.0, 0.0) == math.inf
