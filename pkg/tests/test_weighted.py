import numpy as np
import pytest

from conftest import gaussian
from gpscatter import weighted as W
from gpscatter.dynamics import Trajectory
from gpscatter.operators import propagate
from gpscatter.spectral import PHYSICAL, Field, lp_norm


def geometric(T, T_end, n):
    return T * (T_end / T) ** (np.arange(n) / (n - 1))


class TestWeightedNorm:
    def test_power_cancellation(self, grid2):
        f = gaussian(grid2, 0.3)
        times = geometric(2.0, 64.0, 120)
        s = 0.7
        traj = Trajectory(grid2, list(times), [Field(grid2, t**-s * f.values, PHYSICAL) for t in times])
        val = W.wl_norm(traj, s, 0.0, 2.0)
        assert val == pytest.approx(lp_norm(f, 2), rel=0.05)

    def test_b_zero_is_window_sup(self):
        times = np.linspace(1.0, 16.0, 400)
        vals = 1 + np.sin(times) ** 2
        got = W.wl_norm_series(times, vals, 0.0, 0.0, 1.0)
        ref = max(vals[(times >= S) & (times <= 2 * S)].max() for S in (1.0, 2.0, 4.0, 8.0))
        assert got == ref

    def test_time_lebesgue(self):
        times = np.linspace(1.0, 4.0, 3001)
        vals = np.ones_like(times)
        # sup over S in {1, 2} of S^0 ||1||_{L^2(S, 2S)} = sqrt(2)
        assert W.wl_norm_series(times, vals, 0.0, 0.5, 1.0) == pytest.approx(np.sqrt(2), rel=1e-9)

    def test_holder(self):
        times = geometric(1.0, 64.0, 800)
        f = times**-0.4 * (1.2 + np.cos(times))
        g = times**-0.3 * (1.1 + np.sin(2 * times))
        for (s1, b1), (s2, b2) in [((0.4, 0.25), (0.3, 0.5)), ((0.2, 0.0), (0.5, 0.5)), ((0.4, 0.3), (0.3, 0.3))]:
            lhs = W.wl_norm_series(times, f * g, s1 + s2, b1 + b2, 1.0)
            rhs = W.wl_norm_series(times, f, s1, b1, 1.0) * W.wl_norm_series(times, g, s2, b2, 1.0)
            assert lhs <= 1.1 * rhs

    def test_t_power_membership(self):
        times = geometric(1.0, 1024.0, 400)
        assert np.isfinite(W.wl_norm_series(times, times**-0.5, 0.5, 0.0, 1.0))

    def test_insufficient_sampling(self):
        times = np.array([1.0, 1.5, 2.0, 3.0, 4.0])
        with pytest.raises(W.InsufficientSampling):
            W.wl_norm_series(times, np.ones(5), 0.0, 0.0, 1.0)
        with pytest.raises(W.InsufficientSampling):
            W.wl_norm_series(np.linspace(1, 1.5, 20), np.ones(20), 0.0, 0.0, 1.0)

    def test_b_range(self):
        with pytest.raises(ValueError):
            W.wl_norm_series(np.linspace(1, 4, 50), np.ones(50), 0.0, 1.5, 1.0)


class TestXEps:
    def test_exponent(self):
        assert W.x_eps_exponent_q(0.0) == pytest.approx(3.0)
        assert W.x_eps_exponent_q(3 / 68) == pytest.approx(1 / (1 / 3 - 3 / 68))

    def test_eps_range(self):
        with pytest.raises(ValueError):
            W.x_eps_series(np.linspace(1, 8, 50), np.ones(50), 0.2, 1.0)

    def test_critical_norm_stable(self, grid3):
        phi = gaussian(grid3, 0.1, 1.5)

        def norm(n):
            times = geometric(1.0, 6.0, n)
            traj = Trajectory(grid3, list(times), [propagate(phi, t) for t in times], "z")
            return W.x_eps_norm(traj, 0.0, 1.0)

        a, b = norm(40), norm(80)
        assert np.isfinite(a) and abs(a - b) <= 0.05 * b


class TestComposite:
    def test_data_norm_scaling(self, grid2):
        f = gaussian(grid2, 0.1, 2.0)
        assert W.data_norm_N(Field(grid2, 3 * f.values, PHYSICAL)) == pytest.approx(3 * W.data_norm_N(f), rel=1e-12)

    def test_script_z_zero_difference(self, grid2):
        phi = gaussian(grid2, 0.05, 2.0)
        times = geometric(1.0, 8.0, 40)
        traj = Trajectory(grid2, list(times), [propagate(phi, t) for t in times], "u")

        class Cfg:
            T, alpha, beta = 1.0, 0.9, 0.48

        rec = W.script_z_norms(traj, traj, Cfg)
        assert rec["Zprime"] == 0.0
        assert rec["Z"] > 0
