import math

import numpy as np
import pytest

from canyonsim.distributions import MpcDraw
from canyonsim.errors import ConfigError
from canyonsim.evolution import Cluster, PathState, Subpath
from canyonsim.geometry import SPEED_OF_LIGHT, Side
from canyonsim.synthesis import (
    ArrayGeometry,
    Cir,
    Mpc,
    assemble_snapshot,
    cir,
    frequency_response,
    polar_export,
    steering_vector,
)

WL = SPEED_OF_LIGHT / 5.8e9
ARRAY = ArrayGeometry(rows=4, cols=8, spacing_wavelengths=0.5)


class TestSteeringVector:
    def test_broadside_all_ones(self):
        a = steering_vector(ARRAY, 90.0, 90.0, WL)
        assert np.allclose(a, np.ones(32))

    def test_unit_modulus_everywhere(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            a = steering_vector(ARRAY, rng.uniform(0, 180), rng.uniform(0, 180), WL)
            assert np.allclose(np.abs(a), 1.0)

    def test_two_element_endfire_phase_difference_pi(self):
        two = ArrayGeometry(rows=1, cols=2, spacing_wavelengths=0.5)
        a = steering_vector(two, 0.0, 90.0, WL)  # arrival along the element baseline
        dphi = np.angle(a[1] / a[0])
        assert abs(abs(dphi) - math.pi) < 1e-9

    def test_continuity_in_angles(self):
        base = steering_vector(ARRAY, 60.0, 85.0, WL)
        nudged = steering_vector(ARRAY, 60.0 + 1e-6, 85.0 + 1e-6, WL)
        assert np.max(np.abs(base - nudged)) < 1e-4

    def test_element_count(self):
        assert steering_vector(ARRAY, 45.0, 90.0, WL).shape == (32,)


def cluster_with_draws(draws, side=Side.LEFT, width=15.0, cid=1):
    subs = [Subpath(draw=d, state=PathState(1, birth=0)) for d in draws]
    return Cluster(cluster_id=cid, side=side, width_m=width, subpaths=subs)


def reference(power=-30.0, delay=1e-7):
    return Mpc(power_db=power, delay_s=delay, aoa_deg=90.0, eoa_deg=90.0,
               phase_rad=0.0, cluster_id=-1, is_direct=True)


class TestAssembleSnapshot:
    def test_no_clusters_is_direct_only(self, rng):
        mpcs = assemble_snapshot([], reference(), rng)
        assert len(mpcs) == 1 and mpcs[0].is_direct

    def test_zero_offset_subpath_matches_direct_power(self, rng):
        d = MpcDraw(0.0, 5e-8, 45.0, 92.0, 0.1)
        mpcs = assemble_snapshot([cluster_with_draws([d])], reference(-30.0), rng)
        assert mpcs[1].power_db == pytest.approx(-30.0)

    def test_all_delays_at_least_direct(self, rng):
        draws = [MpcDraw(-6.0, 1e-8 * (k + 1), 30.0, 91.0, 0.0) for k in range(5)]
        mpcs = assemble_snapshot([cluster_with_draws(draws)], reference(), rng)
        assert all(m.delay_s >= mpcs[0].delay_s for m in mpcs)

    def test_dead_subpaths_excluded(self, rng):
        c = cluster_with_draws([MpcDraw(-3.0, 1e-8, 30.0, 91.0, 0.0)] * 4)
        c.subpaths[1].state.state = 0
        c.subpaths[3].state.state = 0
        mpcs = assemble_snapshot([c], reference(), rng)
        assert len(mpcs) == 1 + 2

    def test_missing_reference_rejected(self, rng):
        with pytest.raises(ConfigError):
            assemble_snapshot([], None, rng)

    def test_provenance_carried(self, rng):
        c = cluster_with_draws([MpcDraw(-3.0, 1e-8, 30.0, 91.0, 0.0)], Side.RIGHT, 25.0, cid=7)
        m = assemble_snapshot([c], reference(), rng)[1]
        assert (m.cluster_id, m.side, m.width_m) == (7, Side.RIGHT, 25.0)


class TestCir:
    def test_single_mpc_single_tap_magnitude(self):
        m = Mpc(power_db=-20.0, delay_s=1e-7, aoa_deg=90.0, eoa_deg=90.0, phase_rad=0.3)
        c = cir([m], ARRAY, WL)
        assert len(c.taps) == 1
        delay, amps = c.taps[0]
        assert delay == 1e-7
        assert np.allclose(np.abs(amps), 10 ** (-20.0 / 20.0))

    def test_destructive_interference(self):
        kw = dict(power_db=-20.0, delay_s=1e-7, aoa_deg=60.0, eoa_deg=90.0)
        a = Mpc(phase_rad=0.0, **kw)
        b = Mpc(phase_rad=math.pi, **kw)
        c = cir([a, b], ARRAY, WL)
        total = c.taps[0][1] + c.taps[1][1]
        assert np.allclose(np.abs(total), 0.0, atol=1e-12)

    def test_tap_energy_additive_for_distinct_delays(self):
        rng = np.random.default_rng(8)
        mpcs = [
            Mpc(power_db=float(rng.uniform(-40, -20)), delay_s=float(k) * 1e-7,
                aoa_deg=float(rng.uniform(0, 180)), eoa_deg=90.0,
                phase_rad=float(rng.uniform(-math.pi, math.pi)))
            for k in range(1, 7)
        ]
        c = cir(mpcs, ARRAY, WL)
        total = sum(float(np.sum(np.abs(a) ** 2)) for _, a in c.taps)
        expected = sum(ARRAY.n_elements * 10 ** (m.power_db / 10.0) for m in mpcs)
        assert total == pytest.approx(expected)

    def test_linearity_over_disjoint_sets(self):
        a = [Mpc(-20.0, 1e-7, 45.0, 90.0, 0.1)]
        b = [Mpc(-25.0, 2e-7, 100.0, 85.0, -0.4)]
        ca, cb, cab = cir(a, ARRAY, WL), cir(b, ARRAY, WL), cir(a + b, ARRAY, WL)
        assert len(cab.taps) == len(ca.taps) + len(cb.taps)
        assert np.allclose(cab.taps[0][1], ca.taps[0][1])
        assert np.allclose(cab.taps[1][1], cb.taps[0][1])

    def test_empty_rejected(self):
        with pytest.raises(ConfigError):
            cir([], ARRAY, WL)


class TestFrequencyResponse:
    def test_zero_delay_flat_spectrum(self):
        m = Mpc(power_db=0.0, delay_s=0.0, aoa_deg=90.0, eoa_deg=90.0, phase_rad=0.0)
        h = frequency_response(cir([m], ARRAY, WL), 64, 30e6)
        assert np.allclose(h, h[:, :1])

    def test_idft_peak_at_nearest_bin(self):
        m = Mpc(power_db=0.0, delay_s=100e-9, aoa_deg=90.0, eoa_deg=90.0, phase_rad=0.0)
        h = frequency_response(cir([m], ARRAY, WL), 1024, 30e6)
        taps = np.fft.ifft(h[0])
        peak_bin = int(np.argmax(np.abs(taps)))
        assert peak_bin == round(100e-9 * 30e6)

    def test_parseval_for_distinct_delays(self):
        mpcs = [
            Mpc(power_db=-10.0, delay_s=0.0, aoa_deg=90.0, eoa_deg=90.0, phase_rad=0.0),
            Mpc(power_db=-13.0, delay_s=400e-9, aoa_deg=70.0, eoa_deg=90.0, phase_rad=1.0),
            Mpc(power_db=-17.0, delay_s=800e-9, aoa_deg=120.0, eoa_deg=90.0, phase_rad=-1.0),
        ]
        n = 4096
        h = frequency_response(cir(mpcs, ARRAY, WL), n, 30e6)
        mean_h2 = float(np.mean(np.abs(h[0]) ** 2))
        tap_power = sum(10 ** (m.power_db / 10.0) for m in mpcs)
        # delays are near delay-grid multiples so cross terms stay small
        assert mean_h2 == pytest.approx(tap_power, rel=0.01)

    def test_grid_validation(self):
        m = Mpc(power_db=0.0, delay_s=0.0, aoa_deg=90.0, eoa_deg=90.0, phase_rad=0.0)
        with pytest.raises(ConfigError):
            frequency_response(cir([m], ARRAY, WL), 1, 30e6)


class TestPolarExport:
    def test_two_rows_per_mpc(self, tmp_path):
        mpcs = [
            Mpc(power_db=-20.0, delay_s=1e-7, aoa_deg=45.0, eoa_deg=92.0, phase_rad=0.0),
            Mpc(power_db=-25.0, delay_s=2e-7, aoa_deg=120.0, eoa_deg=88.0, phase_rad=0.0),
        ]
        path = tmp_path / "polar.csv"
        polar_export(mpcs, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "semicircle,angle_deg,delay_s,power_db"
        assert len(lines) == 1 + 2 * len(mpcs)
        assert lines[1].startswith("upper,45.0")
        assert lines[2].startswith("lower,92.0")

    def test_empty_snapshot_header_only(self, tmp_path):
        path = tmp_path / "polar.csv"
        polar_export([], path)
        assert path.read_text().strip() == "semicircle,angle_deg,delay_s,power_db"
