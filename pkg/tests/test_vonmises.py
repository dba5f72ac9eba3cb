import numpy as np
import pytest

from prandtlsep import profiles as pr
from prandtlsep import vonmises as vm
from prandtlsep.errors import InvalidProfileError
from prandtlsep.gridfields import Field, Grid, interpolate


@pytest.fixture(scope="module")
def data05():
    return pr.build_initial_data(0.05)


@pytest.fixture(scope="module")
def short_traj(data05):
    cfg = vm.MarchConfig(lambda_stop=0.03)
    return vm.solve_until_separation(data05, cfg)


class TestTransforms:
    def test_linear_profile(self):
        # u = y: phi = y^2/2, w = y^2 = 2 phi
        g = Grid.uniform(1025, 2.0)
        state = vm.to_von_mises(Field(g, g.nodes), x0_pressure=2.0)
        phi = state.psi_grid.nodes
        assert np.max(np.abs(state.W.values - 2.0 * phi)) < 1e-7

    def test_quadratic_profile(self):
        # u = y^2/2: phi = y^3/6, w = (6 phi)^(4/3)/4 exactly
        g = Grid.power_clustered(2049, 2.0, 2.0)
        state = vm.to_von_mises(Field(g, g.nodes**2 / 2), x0_pressure=2.0)
        phi = state.psi_grid.nodes[1:]
        expected = (6.0 * phi) ** (4.0 / 3.0) / 4.0
        rel = np.abs(state.W.values[1:] - expected) / expected
        assert np.max(rel[phi > 1e-9]) < 1e-3    # 4/3-power cusp at the wall
        assert np.max(rel[phi > 1e-4]) < 1e-5

    def test_round_trip(self, data05):
        state = vm.to_von_mises(data05.u0, x0_pressure=1.0)
        u_back = vm.from_von_mises(state)
        ref = interpolate(data05.u0,
                          np.clip(u_back.grid.nodes, 0, data05.grid.span))
        assert np.max(np.abs(u_back.values - ref)) < 1e-5

    def test_monotonicity_required(self):
        g = Grid.uniform(256, 2.0)
        u = np.sin(3 * g.nodes)
        with pytest.raises(InvalidProfileError):
            vm.to_von_mises(Field(g, u))

    def test_wall_shear_estimate(self, data05):
        state = vm.to_von_mises(data05.u0, x0_pressure=1.0)
        assert abs(state.lam - 0.05) / 0.05 < 2e-3


class TestDiffusionBalance:
    def test_self_similar_region_balances(self):
        # u = y^2/2 has sqrt(w) w_phiphi = 2 exactly
        g = Grid.power_clustered(2049, 3.0, 2.0)
        state = vm.to_von_mises(Field(g, g.nodes**2 / 2), x0_pressure=4.0)
        F = vm.compute_F(state).values
        trusted = vm.trusted_F_mask(state)
        inner = trusted & (state.psi_grid.nodes < 2.0)
        assert np.max(np.abs(F[inner])) < 2e-3

    def test_wall_value_is_zero(self, data05):
        state = vm.to_von_mises(data05.u0, x0_pressure=1.0)
        assert vm.compute_F(state).values[0] == 0.0

    def test_far_field_approaches_minus_two(self, data05):
        state = vm.to_von_mises(data05.u0, x0_pressure=1.0)
        F = vm.compute_F(state).values
        assert abs(F[-2] + 2.0) < 1e-2


class TestMarch:
    def test_step_consistency_with_balance(self, data05):
        # one small step must move w by dx * (sqrt(w) w_phiphi - 2)
        state = vm.to_von_mises(data05.u0, x0_pressure=1.0)
        cfg = vm.MarchConfig(lambda_stop=1e-9)
        dx = 1e-8
        new = vm.march_step(state, dx, cfg)
        F = vm.compute_F(state).values
        trusted = vm.trusted_F_mask(state)
        dw_rate = (new.W.values - state.W.values) / dx
        sel = trusted & (state.psi_grid.nodes > 1e-3) \
            & (state.psi_grid.nodes < 0.9 * state.psi_grid.span)
        err = np.abs(dw_rate[sel] - F[sel])
        assert np.max(err) / np.max(np.abs(F[sel])) < 0.05

    def test_monotonicity_preserved(self, short_traj):
        assert short_traj.mono_min.min() >= -1e-9

    def test_balance_stays_nonpositive(self, short_traj):
        assert np.nanmax(short_traj.F_max) <= 1e-6

    def test_shear_decreases_under_adverse_gradient(self, short_traj):
        lam = short_traj.lam
        assert lam[-1] < lam[0]
        # monotone trend up to estimator noise
        assert np.sum(np.diff(lam) > 1e-6 * lam[0]) == 0

    def test_far_field_consistency(self, short_traj):
        snap = short_traj.snapshots[-1]
        far = snap.state.far_target()
        assert abs(snap.state.W.values[-1] - far) / far < 1e-3

    def test_two_shear_estimators_agree(self, short_traj):
        snap = short_traj.snapshots[-1]
        u = vm.from_von_mises(snap.state)
        y = u.grid.nodes
        hi = 0.6 * snap.lam
        idx = np.nonzero((y > 0) & (y <= hi))[0]
        cols = np.stack([y[idx] ** p for p in (1, 2, 3, 4)], axis=1)
        norms = np.linalg.norm(cols, axis=0)
        sol, *_ = np.linalg.lstsq(cols / norms, u.values[idx], rcond=None)
        lam_fit = sol[0] / norms[0]
        assert abs(snap.lam - lam_fit) / lam_fit < 0.02


class TestZeroSource:
    def test_flat_outer_flow_does_not_separate(self, data05):
        cfg = vm.MarchConfig(source_scale=0.0, lambda_stop=1e-6,
                             dx_init=5e-4, max_steps=300)
        traj = vm.solve_until_separation(data05, cfg)
        assert traj.lam.min() >= 0.5 * data05.lambda0
        assert traj.lam[-1] >= traj.lam[0]


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            vm.MarchConfig(dx_min=1.0, dx_init=1e-4)
        with pytest.raises(ValueError):
            vm.MarchConfig(cfl_safety=1.5)
        with pytest.raises(ValueError):
            vm.MarchConfig(scheme="explicit")


class TestRefinement:
    def test_shear_history_converges_under_refinement(self, data05):
        # coarse vs refined vs doubly-refined shear histories at fixed x:
        # overall order >= 1 in the (dx, h) pair
        histories = []
        for factor in (1.0, 2.0, 4.0):
            cfg = vm.MarchConfig(lambda_stop=0.05 / 8.0,
                                 ds_rel=0.016 / factor,
                                 n_psi=int(1152 * np.sqrt(factor)) + 1)
            traj = vm.solve_until_separation(data05, cfg)
            histories.append((traj.x, traj.lam))
        x_probe = np.linspace(0.2, 0.8, 7) * min(h[0][-1] for h in histories)
        vals = [np.interp(x_probe, x, lam) for x, lam in histories]
        err_coarse = np.max(np.abs(vals[0] - vals[2]))
        err_fine = np.max(np.abs(vals[1] - vals[2]))
        assert err_fine < err_coarse
        assert err_coarse / max(err_fine, 1e-15) >= 2.0 ** 0.9
