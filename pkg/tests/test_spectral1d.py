import math

import numpy as np
import pytest

from defectwave import spectral1d as sp


@pytest.fixture(scope="module")
def grid16():
    return sp.build_grid(16)


class TestBuildGrid:
    def test_endpoints_and_ordering(self, grid16):
        assert grid16.nodes[0] == pytest.approx(-1.0)
        assert grid16.nodes[-1] == pytest.approx(1.0)
        assert np.all(np.diff(grid16.nodes) > 0)

    def test_m4_node(self):
        grid = sp.build_grid(4)
        assert grid.nodes[1] == pytest.approx(-math.sqrt(2) / 2, abs=1e-15)

    def test_rejects_small_m(self):
        with pytest.raises(ValueError):
            sp.build_grid(3)

    def test_row_sums_vanish(self, grid16):
        assert np.max(np.abs(grid16.diff.sum(axis=1))) < 1e-10

    def test_derivative_exact_on_square(self):
        grid = sp.build_grid(8)
        v = grid.nodes**2
        assert np.allclose(grid.diff @ v, 2 * grid.nodes, atol=1e-10)

    @pytest.mark.parametrize("m", [24, 48])
    def test_derivative_exact_on_monomials(self, m):
        grid = sp.build_grid(m)
        for k in range(1, min(m, 20) + 1):
            dv = grid.diff @ grid.nodes**k
            assert np.max(np.abs(dv - k * grid.nodes ** (k - 1))) < 1e-8 * m**2

    def test_quadrature_exact_through_degree_m(self):
        grid = sp.build_grid(8)
        for k in range(9):
            exact = 2.0 / (k + 1) if k % 2 == 0 else 0.0
            assert float(grid.quad_weights @ grid.nodes**k) == pytest.approx(exact, abs=1e-13)

    def test_scaled_grid(self):
        grid = sp.build_grid(12, half_width=8.0)
        assert grid.nodes[0] == pytest.approx(-8.0)
        assert float(grid.quad_weights.sum()) == pytest.approx(16.0, rel=1e-13)
        v = grid.nodes**3
        assert np.allclose(grid.diff @ v, 3 * grid.nodes**2, atol=1e-9)

    def test_min_spacing_positive(self, grid16):
        assert 0 < grid16.min_spacing < 0.1


class TestConsistentDelta:
    def test_rejects_even_m(self):
        with pytest.raises(ValueError):
            sp.consistent_delta(sp.build_grid(8))

    def test_step_vector_layout(self):
        grid = sp.build_grid(15)
        delta = sp.consistent_delta(grid)
        assert delta.split_index == 7
        assert np.all(delta.heaviside[: delta.split_index + 1] == 0.0)
        assert np.all(delta.heaviside[delta.split_index + 1 :] == 1.0)
        assert np.allclose(delta.values, grid.diff @ delta.heaviside)

    @pytest.mark.parametrize("m", [31, 63, 127])
    def test_unit_mass(self, m):
        grid = sp.build_grid(m)
        delta = sp.consistent_delta(grid)
        assert float(grid.quad_weights @ delta.values) == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("m", [31, 63])
    def test_sifts_linear_function(self, m):
        grid = sp.build_grid(m)
        delta = sp.consistent_delta(grid)
        pairing = float(grid.quad_weights @ (delta.values * (1.0 + grid.nodes)))
        assert pairing == pytest.approx(1.0, abs=1e-6)

    def test_even_symmetry(self):
        grid = sp.build_grid(31)
        delta = sp.consistent_delta(grid)
        assert np.allclose(delta.values, delta.values[::-1], atol=1e-10)

    def test_unit_mass_on_scaled_grid(self):
        grid = sp.build_grid(127, half_width=8.0)
        delta = sp.consistent_delta(grid)
        assert float(grid.quad_weights @ delta.values) == pytest.approx(1.0, abs=1e-8)


class TestTransforms:
    def test_roundtrip(self):
        rng = np.random.default_rng(7)
        values = rng.standard_normal(21)
        coeffs = sp.nodal_to_cheb(values)
        assert np.allclose(sp.cheb_to_nodal(coeffs), values, atol=1e-12)

    def test_single_mode_recovered(self):
        grid = sp.build_grid(12)
        unit = np.zeros(13)
        unit[3] = 1.0
        values = sp.cheb_eval(unit, grid.nodes)
        assert np.allclose(sp.nodal_to_cheb(values), unit, atol=1e-13)

    def test_eval_matches_nodal(self):
        grid = sp.build_grid(10)
        coeffs = np.linspace(1.0, 0.1, 11)
        assert np.allclose(sp.cheb_eval(coeffs, grid.nodes), sp.cheb_to_nodal(coeffs), atol=1e-12)


class TestFilter:
    def test_spec_validation(self):
        with pytest.raises(ValueError):
            sp.FilterSpec(order=3)
        with pytest.raises(ValueError):
            sp.FilterSpec(strength=-1.0)

    def test_sigma_shape(self):
        sig = sp.filter_sigma(32, sp.FilterSpec())
        assert sig[0] == pytest.approx(1.0)
        assert np.all(np.diff(sig) <= 1e-15)
        assert sig[-1] == pytest.approx(np.finfo(float).eps, rel=1e-6)

    def test_zero_passthrough_and_mode0(self):
        assert np.allclose(sp.apply_filter(np.zeros(9)), np.zeros(9))
        coeffs = np.ones(17)
        assert sp.apply_filter(coeffs)[0] == pytest.approx(1.0)

    @staticmethod
    def _heaviside_samples(m):
        grid = sp.build_grid(m)
        values = np.where(grid.nodes > 0, 1.0, 0.0)
        if m % 2 == 0:
            values[m // 2] = 0.5
        return grid, values

    def test_filter_improves_step_reconstruction(self):
        grid, values = self._heaviside_samples(256)
        coeffs = sp.nodal_to_cheb(values)
        probe = np.concatenate([np.linspace(-0.9, -0.2, 30), np.linspace(0.2, 0.9, 30)])
        exact = np.where(probe > 0, 1.0, 0.0)
        raw_err = np.max(np.abs(sp.cheb_eval(coeffs, probe) - exact))
        filt_err = np.max(np.abs(sp.cheb_eval(sp.apply_filter(coeffs), probe) - exact))
        assert filt_err < raw_err

    def test_filtered_error_decays_with_m(self):
        errors = []
        probe = np.concatenate([np.linspace(-0.9, -0.25, 25), np.linspace(0.25, 0.9, 25)])
        exact = np.where(probe > 0, 1.0, 0.0)
        for m in (32, 64, 128, 256):
            _, values = self._heaviside_samples(m)
            coeffs = sp.apply_filter(sp.nodal_to_cheb(values))
            errors.append(np.max(np.abs(sp.cheb_eval(coeffs, probe) - exact)))
        assert all(b < a for a, b in zip(errors, errors[1:]))


class TestLeapfrog:
    def test_zero_case(self):
        zero = np.zeros(5)
        assert np.allclose(sp.leapfrog_step(zero, zero, zero, 0.1), zero)

    def test_standing_wave_accuracy(self):
        # pinned free wave: exact solution cos(omega t) sin(omega (x+1))
        grid = sp.build_grid(24)
        omega = 0.5 * np.pi
        d2 = grid.diff @ grid.diff
        u_exact = lambda t: np.cos(omega * t) * np.sin(omega * (grid.nodes + 1.0))
        dt = 1e-3
        u_prev = u_exact(0.0)
        u_now = u_exact(dt)
        for n in range(1, 1000):
            u_new = sp.leapfrog_step(u_now, u_prev, d2 @ u_now, dt)
            u_new[0] = 0.0
            u_new[-1] = u_exact((n + 1) * dt)[-1]
            u_prev, u_now = u_now, u_new
        assert np.max(np.abs(u_now - u_exact(1000 * dt))) < 1e-5

    def test_default_dt_scales_with_spacing(self):
        coarse = sp.default_dt(sp.build_grid(16))
        fine = sp.default_dt(sp.build_grid(64))
        assert fine < coarse
        assert sp.default_dt(sp.build_grid(16, half_width=8.0)) == pytest.approx(8 * coarse)
