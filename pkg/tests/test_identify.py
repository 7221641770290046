import numpy as np
import pytest

from canyonsim.errors import ConfigError, NumericalError
from canyonsim.geometry import SPEED_OF_LIGHT, Side
from canyonsim.identify import (
    DEFAULT_DELTA_S,
    SnapshotObservation,
    WidthAssignment,
    assign_clusters,
    constraint_residual,
    default_width_grid,
    reconstruct_longitudinal,
    reconstruct_width,
)
from canyonsim.synthesis import Mpc

from oracle import bounce_mpc, forward_single_bounce


class TestConstraintResidual:
    def test_zero_at_exact_geometry(self, rng):
        for _ in range(300):
            d = float(rng.uniform(5, 60))
            l = float(rng.uniform(10, 200))
            L = l + float(rng.uniform(5, 200))
            side = "left" if rng.random() < 0.5 else "right"
            direct, refl = bounce_mpc(L, d, l, side)
            assert abs(constraint_residual(refl, direct, d)) < 1e-12

    def test_width_offset_exceeds_threshold(self, rng):
        for _ in range(300):
            d = float(rng.uniform(5, 60))
            l = float(rng.uniform(10, 200))
            L = l + float(rng.uniform(5, 200))
            direct, refl = bounce_mpc(L, d, l)
            assert abs(constraint_residual(refl, direct, d + 20.0)) > DEFAULT_DELTA_S

    def test_boresight_angle_is_singular(self):
        direct, refl = bounce_mpc(100.0, 15.0, 40.0)
        sing = Mpc(power_db=refl.power_db, delay_s=refl.delay_s, aoa_deg=90.0,
                   eoa_deg=refl.eoa_deg, phase_rad=0.0)
        with pytest.raises(NumericalError):
            constraint_residual(sing, direct, 15.0)

    def test_residual_strictly_increasing_in_width(self):
        direct, refl = bounce_mpc(120.0, 25.0, 60.0)
        grid = np.linspace(1.0, 80.0, 100)
        res = [constraint_residual(refl, direct, d) for d in grid]
        assert np.all(np.diff(res) > 0)

    def test_nonpositive_width_rejected(self):
        direct, refl = bounce_mpc(100.0, 15.0, 40.0)
        with pytest.raises(ConfigError):
            constraint_residual(refl, direct, 0.0)


class TestReconstructWidth:
    def test_exact_recovery(self):
        direct, refl = bounce_mpc(150.0, 15.0, 70.0)
        assert reconstruct_width(refl, direct) == pytest.approx(15.0, abs=1e-6)

    def test_randomized_inverse_forward_identity(self, rng):
        for _ in range(500):
            d = float(rng.uniform(5, 60))
            l = float(rng.uniform(10, 200))
            L = l + float(rng.uniform(5, 200))
            side = "left" if rng.random() < 0.5 else "right"
            direct, refl = bounce_mpc(L, d, l, side)
            assert abs(reconstruct_width(refl, direct) - d) < 1e-6

    def test_reconstruction_satisfies_constraint(self, rng):
        for _ in range(100):
            d = float(rng.uniform(5, 60))
            l = float(rng.uniform(10, 150))
            direct, refl = bounce_mpc(l + 80.0, d, l)
            d_hat = reconstruct_width(refl, direct)
            assert abs(constraint_residual(refl, direct, d_hat)) <= DEFAULT_DELTA_S

    def test_delay_bin_sensitivity_bounded(self, rng):
        # one delay-resolution bin of error moves the width by a bounded
        # geometry factor; report-style check, generous bound
        bin_s = 1.0 / 30e6
        worst = 0.0
        for _ in range(200):
            d = float(rng.uniform(5, 60))
            l = float(rng.uniform(10, 200))
            direct, refl = bounce_mpc(l + 100.0, d, l)
            bumped = Mpc(power_db=refl.power_db, delay_s=refl.delay_s + bin_s,
                         aoa_deg=refl.aoa_deg, eoa_deg=refl.eoa_deg, phase_rad=0.0)
            worst = max(worst, abs(reconstruct_width(bumped, direct) - d))
        assert worst < 3.0 * bin_s * SPEED_OF_LIGHT

    def test_unreachable_geometry_raises(self):
        direct, refl = bounce_mpc(100.0, 15.0, 40.0)
        junk = Mpc(power_db=0.0, delay_s=direct.delay_s * 0.5, aoa_deg=refl.aoa_deg,
                   eoa_deg=90.0, phase_rad=0.0)
        with pytest.raises(NumericalError):
            reconstruct_width(junk, direct)


class TestReconstructLongitudinal:
    def test_abeam_of_tx(self):
        # reflection point directly abeam TX: longitudinal offset zero
        direct, refl = bounce_mpc(100.0, 20.0, 0.0 + 1e-9)
        d_hat = reconstruct_width(refl, direct)
        assert abs(reconstruct_longitudinal(refl, direct, d_hat)) < 1.0

    def test_recovers_ground_truth_offset(self, rng):
        for _ in range(200):
            d = float(rng.uniform(5, 60))
            l = float(rng.uniform(5, 150))
            direct, refl = bounce_mpc(l + 90.0, d, l)
            d_hat = reconstruct_width(refl, direct)
            assert reconstruct_longitudinal(refl, direct, d_hat) == pytest.approx(l, abs=1e-6)

    def test_batch_scatter_lies_on_wall_lines(self, rng):
        # mirror of the map-overlay check: reconstructed (l, d) points fall
        # on the configured wall lines
        for wall in (10.0, 30.0):
            for _ in range(50):
                l = float(rng.uniform(10, 180))
                direct, refl = bounce_mpc(l + 60.0, wall, l)
                d_hat = reconstruct_width(refl, direct)
                assert d_hat == pytest.approx(wall, abs=1e-6)


class TestAssignClusters:
    def make_obs(self, walls, L=140.0):
        mpcs = []
        direct = None
        for wall, l, side in walls:
            dmpc, refl = bounce_mpc(L, wall, l, side)
            direct = dmpc
            mpcs.append(refl)
        return SnapshotObservation(mpcs=[direct] + mpcs, direct=direct)

    def test_direct_never_assigned(self):
        obs = self.make_obs([(10.0, 50.0, "left")])
        out = assign_clusters(obs)
        assert all(a.mpc_index != 0 for a in out)

    def test_two_wall_groups_recovered_exactly(self, rng):
        for _ in range(50):
            walls = []
            for wall, side in ((10.0, "left"), (30.0, "right")):
                for _ in range(4):
                    walls.append((wall, float(rng.uniform(20, 120)), side))
            obs = self.make_obs(walls)
            out = assign_clusters(obs)
            assert len(out) == len(walls)
            for a, (wall, _, side) in zip(sorted(out, key=lambda x: x.mpc_index), walls):
                assert a.width_m == wall
                assert a.side.value == side

    def test_wider_width_deviates_further_from_direct(self):
        l = 60.0
        aoas = []
        for wall in (10.0, 20.0, 35.0, 50.0):
            _, refl = bounce_mpc(140.0, wall, l, "left")
            aoas.append(refl.aoa_deg)
        deviations = [abs(a - 90.0) for a in aoas]
        assert np.all(np.diff(deviations) > 0)

    def test_unassigned_when_off_grid(self):
        # residual beyond delta for every grid width stays unassigned
        direct, refl = bounce_mpc(140.0, 10.0, 50.0)
        far = Mpc(power_db=refl.power_db, delay_s=refl.delay_s + 5e-6,
                  aoa_deg=refl.aoa_deg, eoa_deg=90.0, phase_rad=0.0)
        obs = SnapshotObservation(mpcs=[direct, far], direct=direct)
        assert assign_clusters(obs) == []

    def test_shrinking_delta_never_adds_assignments(self, rng):
        walls = [(float(rng.choice([10, 25, 40])), float(rng.uniform(20, 120)),
                  "left" if rng.random() < 0.5 else "right") for _ in range(12)]
        obs = self.make_obs(walls)
        deltas = [3e-8, 1e-8, 3e-9, 1e-9, 1e-10, 1e-12]
        assigned = [
            {a.mpc_index for a in assign_clusters(obs, delta_s=d)} for d in deltas
        ]
        for bigger, smaller in zip(assigned, assigned[1:]):
            assert smaller <= bigger

    def test_side_labels_match_quadrants(self, rng):
        walls = [(20.0, float(rng.uniform(20, 120)), s) for s in ("left", "right") for _ in range(5)]
        obs = self.make_obs(walls)
        for a in assign_clusters(obs):
            mpc = obs.mpcs[a.mpc_index]
            if a.side is Side.LEFT:
                assert 0.0 <= mpc.aoa_deg < 90.0
            else:
                assert mpc.aoa_deg >= 90.0

    def test_grid_validation(self):
        obs = self.make_obs([(10.0, 50.0, "left")])
        with pytest.raises(ConfigError):
            assign_clusters(obs, width_grid=[5.0, 5.0])
        with pytest.raises(ConfigError):
            assign_clusters(obs, delta_s=0.0)

    def test_default_grid(self):
        g = default_width_grid()
        assert g[0] == 5.0 and g[-1] == 60.0 and np.all(np.diff(g) == 5.0)


class TestSnapshotObservation:
    def test_direct_must_be_minimum_delay(self):
        a = Mpc(power_db=0, delay_s=2e-7, aoa_deg=45, eoa_deg=90, phase_rad=0)
        b = Mpc(power_db=0, delay_s=1e-7, aoa_deg=90, eoa_deg=90, phase_rad=0)
        with pytest.raises(ConfigError):
            SnapshotObservation(mpcs=[a, b], direct=a)
        obs = SnapshotObservation.from_mpcs([a, b])
        assert obs.direct is b

    def test_empty_rejected(self):
        with pytest.raises(ConfigError):
            SnapshotObservation.from_mpcs([])
