import numpy as np
import pytest

from lorenz96 import DivergenceError, InvalidArgumentError, SystemConfig, equilibrium, jacobian, trapping_radius
from lorenz96.integrator import (
    IntegrationSpec,
    advance,
    divergence_guard,
    integrate,
    integrate_with_tangent,
    rk4_step,
    write_trajectory_csv,
)
from lorenz96.spectral import eigenvalues


def endpoint(cfg, x0, t, dt):
    return advance(cfg, x0, t, dt)


class TestIntegrationSpec:
    @pytest.mark.parametrize("kw", [
        dict(t_end=10, dt=0.0),
        dict(t_end=10, dt=-1),
        dict(t_end=10, transient=10),
        dict(t_end=10, transient=-1),
        dict(t_end=10, transient=0, sample_every=0),
        dict(t_end=10, transient=0, sample_every=1.5),
    ])
    def test_rejects(self, kw):
        with pytest.raises(InvalidArgumentError):
            IntegrationSpec(**kw)

    def test_sample_count(self):
        spec = IntegrationSpec(t_end=10, dt=0.5, transient=2, sample_every=2)
        assert spec.n_samples == 9


class TestRK4:
    def test_fixed_point(self):
        cfg = SystemConfig(6, 3.7)
        xF = equilibrium(cfg)
        np.testing.assert_array_equal(rk4_step(cfg, xF, 0.1), xF)

    def test_rejects_bad_dt(self):
        with pytest.raises(InvalidArgumentError):
            rk4_step(SystemConfig(4, 1.0), np.ones(4), 0.0)

    def test_kernel_matches_reference_step(self, rng):
        cfg = SystemConfig(7, 8.0, 0.1)
        x = rng.uniform(-5, 5, 7)
        np.testing.assert_allclose(advance(cfg, x, 0.01, 0.01), rk4_step(cfg, x, 0.01), rtol=1e-14, atol=1e-14)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_nonfinite_raises(self):
        with pytest.raises(DivergenceError):
            rk4_step(SystemConfig(4, 1.0), np.array([1e200, -1e200, 1e200, -1e200]), 1.0)

    def test_fourth_order(self):
        cfg = SystemConfig(4, 1.2)
        x0 = np.array([1.5, 0.2, -0.7, 1.1])
        ref = endpoint(cfg, x0, 1.0, 1e-5)
        dts = [1 / 8, 1 / 16, 1 / 32, 1 / 64]
        errs = [np.linalg.norm(endpoint(cfg, x0, 1.0, dt) - ref) for dt in dts]
        orders = [np.log2(a / b) for a, b in zip(errs, errs[1:])]
        assert min(orders) >= 3.9
        assert errs[-2] / errs[-1] == pytest.approx(16, rel=0.1)

    def test_norm_bounded_by_trapping(self, rng):
        for n, F, G in [(4, 8, 0), (7, 3, 0.1), (6, 5, -0.2)]:
            cfg = SystemConfig(n, F, G)
            R = trapping_radius(cfg)
            x0 = rng.standard_normal(n)
            x0 *= 3 * R / np.linalg.norm(x0)
            traj = integrate(cfg, x0, IntegrationSpec(t_end=30, transient=0, dt=1 / 128))
            norms = np.linalg.norm(traj.states, axis=1)
            assert norms.max() <= max(np.linalg.norm(x0), R) * (1 + 1e-9)


class TestIntegrate:
    def test_stable_equilibrium(self):
        cfg = SystemConfig(4, 0.5)
        x0 = equilibrium(cfg) + 1e-3 * np.eye(4)[0]
        traj = integrate(cfg, x0, IntegrationSpec(t_end=60, transient=0))
        assert np.max(np.abs(traj.final - equilibrium(cfg))) <= 1e-6

    def test_sampling_grid(self):
        traj = integrate(SystemConfig(4, 1.2), np.ones(4) + 0.01, IntegrationSpec(t_end=5, dt=0.25, transient=1, sample_every=2))
        assert traj.times[0] == 1.0
        np.testing.assert_allclose(np.diff(traj.times), 0.5)
        assert len(traj) == 9 and traj.spacing == 0.5

    def test_derivs_are_vector_field(self):
        from lorenz96 import vector_field
        cfg = SystemConfig(5, 2.0)
        traj = integrate(cfg, np.arange(5.0), IntegrationSpec(t_end=2, transient=0))
        for x, d in zip(traj.states[::20], traj.derivs[::20]):
            np.testing.assert_allclose(d, vector_field(cfg, x), rtol=1e-14)

    def test_periodic_regime_bounded(self):
        cfg = SystemConfig(4, 1.2)
        traj = integrate(cfg, equilibrium(cfg) + 1e-3 * np.eye(4)[0], IntegrationSpec(t_end=400, transient=200))
        amp = traj.states.max(axis=0) - traj.states.min(axis=0)
        assert np.all(np.isfinite(traj.states)) and 0.1 < amp.max() < 10

    def test_chaotic_regime_bounded(self, rng):
        cfg = SystemConfig(36, 8.0)
        traj = integrate(cfg, equilibrium(cfg) + 0.01 * rng.standard_normal(36), IntegrationSpec(t_end=200, transient=50))
        assert np.linalg.norm(traj.states, axis=1).max() <= trapping_radius(cfg)

    def test_deterministic(self, rng):
        cfg = SystemConfig(8, 8.0)
        x0 = rng.uniform(-1, 1, 8)
        spec = IntegrationSpec(t_end=20, transient=5)
        a, b = integrate(cfg, x0, spec), integrate(cfg, x0, spec)
        assert np.array_equal(a.states, b.states)

    def test_shift_equivariance(self, rng):
        cfg = SystemConfig(8, 8.0)
        x0 = rng.uniform(-3, 3, 8)
        spec = IntegrationSpec(t_end=10, transient=0)
        a = integrate(cfg, x0, spec).states
        b = integrate(cfg, np.roll(x0, 3), spec).states
        assert np.max(np.abs(np.roll(a, 3, axis=1) - b)) <= 1e-8

    def test_subspace_invariance(self, rng):
        cfg = SystemConfig(10, 8.0)
        x0 = np.tile(rng.uniform(-3, 3, 5), 2)
        traj = integrate(cfg, x0, IntegrationSpec(t_end=100, transient=0))
        assert np.max(np.abs(traj.states[:, 5:] - traj.states[:, :5])) <= 1e-8

    def test_guard(self):
        assert divergence_guard(SystemConfig(4, 1.0, -0.3), np.zeros(4)) == 0.0
        assert divergence_guard(SystemConfig(4, 8.0), np.zeros(4)) == pytest.approx(160.0)

    def test_divergence_on_unstable_step(self):
        cfg = SystemConfig(8, 8.0)
        with pytest.raises(DivergenceError):
            integrate(cfg, np.linspace(-3, 3, 8), IntegrationSpec(t_end=100, transient=0, dt=0.5))

    def test_csv(self, tmp_path):
        traj = integrate(SystemConfig(4, 1.2), np.ones(4) * 0.3, IntegrationSpec(t_end=1, transient=0, dt=0.25))
        p = tmp_path / "t.csv"
        write_trajectory_csv(traj, p)
        lines = p.read_text().splitlines()
        assert lines[0] == "t,x1,x2,x3,x4" and len(lines) == 1 + len(traj)
        back = np.loadtxt(p, delimiter=",", skiprows=1)
        assert np.array_equal(back[:, 1:], traj.states)


class TestTangent:
    def test_matches_matrix_exponential(self, rng):
        cfg = SystemConfig(5, 0.7, 0.1)
        xF = equilibrium(cfg)
        A = jacobian(cfg, xF)
        w, V = np.linalg.eig(A)
        t = 3.0
        expA = (V * np.exp(w * t)) @ np.linalg.inv(V)
        Q0, _ = np.linalg.qr(rng.standard_normal((5, 2)))
        _, Q = integrate_with_tangent(cfg, xF, Q0, IntegrationSpec(t_end=t, transient=0, dt=1 / 256))
        np.testing.assert_allclose(Q, np.real(expA @ Q0), atol=1e-9)

    def test_dominant_growth_rate(self):
        cfg = SystemConfig(6, -0.3)
        lead = eigenvalues(cfg).real.max()
        assert lead == pytest.approx(-0.4)
        xF = equilibrium(cfg)
        q0 = np.ones(6) / np.sqrt(6) + np.array([1, -1, 1, -1, 1, -1]) / np.sqrt(6)
        q0 /= np.linalg.norm(q0)
        _, Q50 = integrate_with_tangent(cfg, xF, q0, IntegrationSpec(t_end=50, transient=0))
        _, Q100 = integrate_with_tangent(cfg, xF, q0, IntegrationSpec(t_end=100, transient=0))
        rate = np.log(np.linalg.norm(Q100) / np.linalg.norm(Q50)) / 50
        assert rate == pytest.approx(lead, abs=1e-4)

    def test_volume_growth(self, rng):
        cfg = SystemConfig(5, 8.0, 0.2)
        x0 = rng.uniform(-2, 2, 5)
        t = 2.0
        _, Q = integrate_with_tangent(cfg, x0, np.eye(5), IntegrationSpec(t_end=t, transient=0, dt=1 / 256))
        rate = np.log(abs(np.linalg.det(Q))) / t
        assert rate == pytest.approx(-5 * (1 + 2 * 0.2), rel=0.01)

    def test_zero_vector(self):
        cfg = SystemConfig(4, 8.0)
        _, Q = integrate_with_tangent(cfg, np.arange(4.0), np.zeros((4, 1)), IntegrationSpec(t_end=5, transient=0))
        assert not np.any(Q)

    def test_checkpoint_replaces_frame(self):
        cfg = SystemConfig(4, 8.0)
        seen = []

        def hook(t, x, Q):
            seen.append(t)
            q, _ = np.linalg.qr(Q)
            return q

        _, Q = integrate_with_tangent(cfg, np.arange(4.0), np.eye(4)[:, :2], IntegrationSpec(t_end=5, transient=1),
                                      checkpoint_every=64, on_checkpoint=hook)
        assert seen == pytest.approx([2.0, 3.0, 4.0, 5.0])
        np.testing.assert_allclose(Q.T @ Q, np.eye(2), atol=1e-12)

    def test_trajectory_matches_plain(self):
        cfg = SystemConfig(6, 5.0)
        x0 = np.linspace(-1, 1, 6)
        spec = IntegrationSpec(t_end=10, transient=2)
        a = integrate(cfg, x0, spec)
        b, _ = integrate_with_tangent(cfg, x0, np.eye(6)[:, :1], spec)
        np.testing.assert_allclose(a.states, b.states, rtol=1e-12, atol=1e-12)

    @pytest.mark.parametrize("Q0", [np.ones((4, 1)), np.ones((3, 1)) / np.sqrt(3), np.eye(5)[:4]])
    def test_rejects_bad_frame(self, Q0):
        with pytest.raises(InvalidArgumentError):
            integrate_with_tangent(SystemConfig(4, 1.0), np.zeros(4), Q0, IntegrationSpec(t_end=1, transient=0))
