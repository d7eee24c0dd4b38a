"""Tests for the Klein-Gordon chaos-Galerkin module.

The discrete eigenvalue route from kleingordon serves as the independent
oracle for the locus-intersection chain; estimator cross-checks run on a
small grid so the whole file stays fast.
"""

import numpy as np
import pytest

from defectwave.gpc_kg import (
    CriticalEstimate,
    GpcKgSystem,
    LocusSnapshot,
    assemble_and_evolve,
    critical_eta_from_loci,
    gpc_mean,
    locus_snapshot,
    mc_loci,
    mc_mean,
    quadrature_mean,
)
from defectwave.kleingordon import KgConfig, critical_eta_discrete, evolve_kg
from defectwave.orthopoly import legendre_series
from defectwave.spectral1d import build_grid


def make_snapshot(t, coeffs, a=0.9, b=1.1, n_xi=101):
    xi = np.linspace(-1.0, 1.0, n_xi)
    coeffs = np.asarray(coeffs, dtype=float)
    return LocusSnapshot(
        t_final=t,
        a=a,
        b=b,
        right_coeffs=coeffs,
        xi=xi,
        values=legendre_series(coeffs, xi),
    )


class TestGpcKgSystem:
    def test_coupling_formulas(self):
        system = GpcKgSystem(truncation=3, a=0.9, b=1.1, grid=build_grid(15))
        assert system.halfwidth == pytest.approx(0.1, abs=1e-15)
        assert system.midpoint == pytest.approx(1.0, abs=1e-15)
        down = system.down_coupling()
        up = system.up_coupling()
        assert down[0] == 0.0
        assert down[1] == pytest.approx(0.1, abs=1e-15)
        assert down[2] == pytest.approx(0.1 * 2.0 / 3.0, abs=1e-15)
        assert up[0] == pytest.approx(0.1 / 3.0, abs=1e-15)
        assert up[3] == pytest.approx(0.1 * 4.0 / 9.0, abs=1e-15)

    def test_degenerate_interval_has_zero_coupling(self):
        system = GpcKgSystem(truncation=5, a=1.004332, b=1.004332, grid=build_grid(15))
        assert np.all(system.down_coupling() == 0.0)
        assert np.all(system.up_coupling() == 0.0)
        assert system.midpoint == 1.004332

    def test_eta_map_endpoints(self):
        system = GpcKgSystem(truncation=2, a=0.95, b=1.05, grid=build_grid(15))
        assert system.eta_from_xi(-1.0) == pytest.approx(0.95, abs=1e-15)
        assert system.eta_from_xi(1.0) == pytest.approx(1.05, abs=1e-15)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(truncation=-1, a=0.9, b=1.1),
            dict(truncation=2, a=0.0, b=1.1),
            dict(truncation=2, a=1.2, b=1.1),
        ],
    )
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            GpcKgSystem(grid=build_grid(15), **kwargs)


class TestAssembleAndEvolve:
    def test_degenerate_interval_matches_deterministic(self):
        """With a = b every mode decouples: mode 0 is the plain run and the
        rest never leave zero."""
        _, snaps = assemble_and_evolve(3, 1.02, 1.02, 15, 10.0)
        det = evolve_kg(KgConfig(eta=1.02, m=15, t_final=10.0))
        final = snaps[-1]
        assert np.max(np.abs(final.modes[0] - det.final_state)) < 1e-10
        assert np.all(final.modes[1:] == 0.0)

    def test_default_snapshot_schedule(self):
        _, snaps = assemble_and_evolve(2, 0.95, 1.05, 15, 120.0)
        times = [s.t for s in snaps]
        assert len(times) == 3
        assert times[0] == pytest.approx(50.0, abs=0.01)
        assert times[1] == pytest.approx(100.0, abs=0.01)
        assert times[2] == pytest.approx(120.0, abs=1e-9)

    def test_explicit_snapshot_times(self):
        _, snaps = assemble_and_evolve(2, 0.95, 1.05, 15, 5.0, snapshot_times=[2.0, 5.0])
        assert len(snaps) == 2
        assert snaps[0].modes.shape == (3, 16)

    @pytest.mark.parametrize("bad_times", [[], [0.0, 2.0], [2.0, 9.0]])
    def test_rejects_bad_snapshot_times(self, bad_times):
        with pytest.raises(ValueError):
            assemble_and_evolve(2, 0.95, 1.05, 15, 5.0, snapshot_times=bad_times)

    def test_rejects_nonpositive_horizon(self):
        with pytest.raises(ValueError):
            assemble_and_evolve(2, 0.95, 1.05, 15, 0.0)


class TestMeanEstimators:
    def test_gpc_mean_is_zeroth_mode(self):
        _, snaps = assemble_and_evolve(4, 0.95, 1.05, 15, 5.0)
        state = snaps[-1]
        assert np.array_equal(gpc_mean(state), state.modes[0])

    def test_gpc_matches_quadrature(self):
        _, snaps = assemble_and_evolve(20, 0.95, 1.05, 15, 20.0)
        g = gpc_mean(snaps[-1])
        q = quadrature_mean(0.95, 1.05, 50, 20.0, m=15)
        assert np.max(np.abs(g - q)) < 1e-10

    def test_one_point_quadrature_is_midpoint_solve(self):
        q = quadrature_mean(0.95, 1.05, 1, 10.0, m=15)
        det = evolve_kg(KgConfig(eta=1.0, m=15, t_final=10.0))
        assert np.max(np.abs(q - det.final_state)) < 1e-10

    def test_mc_mean_converges_second_order(self):
        _, snaps = assemble_and_evolve(20, 0.95, 1.05, 15, 20.0)
        g = gpc_mean(snaps[-1])
        sizes = [50, 100, 200, 400]
        errs = [float(np.linalg.norm(mc_mean(0.95, 1.05, M, 20.0, m=15) - g)) for M in sizes]
        assert all(e2 < e1 for e1, e2 in zip(errs, errs[1:]))
        slope = np.polyfit(np.log(sizes), np.log(errs), 1)[0]
        assert slope < -1.8

    def test_mc_samples_shape(self):
        mean, fields = mc_mean(0.95, 1.05, 4, 1.0, m=15, return_samples=True)
        assert fields.shape == (5, 16)
        manual = (0.5 * fields[0] + fields[1:-1].sum(axis=0) + 0.5 * fields[-1]) / 4
        assert np.allclose(mean, manual, atol=1e-15)

    def test_degenerate_mc_mean_is_single_sample(self):
        mean, fields = mc_mean(1.0, 1.0, 4, 1.0, m=15, return_samples=True)
        assert np.allclose(mean, fields[0], atol=1e-14)

    def test_estimator_validation(self):
        with pytest.raises(ValueError):
            mc_mean(0.95, 1.05, 1, 1.0, m=15)
        with pytest.raises(ValueError):
            quadrature_mean(0.95, 1.05, 0, 1.0, m=15)
        with pytest.raises(ValueError):
            quadrature_mean(-0.1, 1.05, 5, 1.0, m=15)


class TestLocusSnapshot:
    def test_reconstruction_matches_series(self):
        system, snaps = assemble_and_evolve(6, 0.95, 1.05, 15, 5.0)
        snap = locus_snapshot(snaps[-1], system, n_xi=201)
        assert snap.right_coeffs.shape == (7,)
        assert snap.values.shape == (201,)
        expected = legendre_series(snaps[-1].modes[:, -1], snap.xi)
        assert np.allclose(snap.values, expected, atol=1e-13)
        assert float(snap.value(0.25)) == pytest.approx(
            float(legendre_series(snap.right_coeffs, 0.25)), abs=1e-14
        )

    def test_rejects_tiny_grid(self):
        system, snaps = assemble_and_evolve(2, 0.95, 1.05, 15, 5.0)
        with pytest.raises(ValueError):
            locus_snapshot(snaps[-1], system, n_xi=1)


class TestCriticalEtaFromLoci:
    def test_synthetic_pivot_recovered_exactly(self):
        """Loci 2 + t (xi - 0.3) all pass through (0.3, 2)."""
        snaps = [make_snapshot(t, [2.0 - 0.3 * t, t]) for t in (1.0, 2.0)]
        est = critical_eta_from_loci(snaps)
        assert est.value == pytest.approx(1.0 + 0.1 * 0.3, abs=1e-12)
        assert est.bracket[1] - est.bracket[0] < 1e-10
        assert est.t_finals == (1.0, 2.0)
        assert len(est.history) == 1

    def test_history_tracks_moving_crossings(self):
        snaps = [
            make_snapshot(1.0, [2.0 - 0.2, 1.0]),
            make_snapshot(2.0, [2.0 - 0.5 * 2, 2.0]),
            make_snapshot(3.0, [2.0 - 0.26 * 3, 3.0]),
        ]
        est = critical_eta_from_loci(snaps)
        assert len(est.history) == 2
        assert est.value == est.history[-1]

    def test_no_crossing_raises(self):
        snaps = [
            make_snapshot(1.0, [2.0, 1.0]),
            make_snapshot(2.0, [5.0, 1.0]),
        ]
        with pytest.raises(RuntimeError, match="no crossing"):
            critical_eta_from_loci(snaps)

    def test_validation(self):
        one = make_snapshot(1.0, [2.0, 1.0])
        with pytest.raises(ValueError):
            critical_eta_from_loci([one])
        with pytest.raises(ValueError):
            critical_eta_from_loci([one, make_snapshot(1.0, [2.0, 2.0])])
        with pytest.raises(ValueError):
            critical_eta_from_loci([one, make_snapshot(2.0, [2.0, 2.0], a=0.8)])

    def test_recovers_discrete_critical_coupling(self):
        """End-to-end cross-check against the eigenvalue route on a small
        grid: the locus intersections must land on the same coupling."""
        system, states = assemble_and_evolve(40, 0.95, 1.05, 15, 350.0)
        loci = [locus_snapshot(s, system, n_xi=20001) for s in states]
        est = critical_eta_from_loci(loci)
        ref = critical_eta_discrete(15)
        assert est.value == pytest.approx(ref, abs=5e-7)
        xi_c = (est.value - system.midpoint) / system.halfwidth
        level = float(loci[-1].value(xi_c))
        assert level == pytest.approx(2.0, abs=1e-3)

    def test_estimate_is_frozen_record(self):
        est = CriticalEstimate(
            method="locus-intersection",
            value=1.0,
            bracket=(0.99, 1.01),
            t_finals=(1.0, 2.0),
            history=(1.0,),
        )
        with pytest.raises(AttributeError):
            est.value = 2.0


class TestMcLoci:
    def test_sampled_snapshot_interpolates(self):
        xi = np.linspace(-1.0, 1.0, 11)
        snap = LocusSnapshot(
            t_final=1.0, a=0.9, b=1.1, right_coeffs=None, xi=xi, values=2 * xi + 1
        )
        assert snap.value(0.35) == pytest.approx(1.7, abs=1e-14)
        np.testing.assert_allclose(snap.value(xi), snap.values, atol=1e-14)

    def test_matches_eigenvalue_route(self):
        snaps = mc_loci(0.95, 1.05, 400, (300.0, 350.0), m=15, cfl=0.5)
        assert [s.t_final for s in snaps] == [300.0, 350.0]
        assert all(s.right_coeffs is None for s in snaps)
        est = critical_eta_from_loci(snaps)
        assert est.method == "locus-intersection"
        assert est.value == pytest.approx(critical_eta_discrete(15), abs=1e-5)

    def test_snapshot_grid_spans_the_interval(self):
        snaps = mc_loci(0.9, 1.0, 10, (1.0, 2.0), m=15)
        assert snaps[0].xi[0] == pytest.approx(-1.0, abs=1e-14)
        assert snaps[0].xi[-1] == pytest.approx(1.0, abs=1e-14)
        assert snaps[0].xi.size == 11

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"M": 1},
            {"a": 1.0, "b": 0.9},
            {"a": 1.0, "b": 1.0},
            {"t_finals": (5.0,)},
            {"t_finals": (5.0, 4.0)},
            {"t_finals": (0.0, 5.0)},
        ],
    )
    def test_validation(self, kwargs):
        base = {"a": 0.9, "b": 1.1, "M": 10, "t_finals": (1.0, 2.0), "m": 15}
        base.update(kwargs)
        with pytest.raises(ValueError):
            mc_loci(**base)

    def test_unresolvably_close_times_rejected(self):
        with pytest.raises(ValueError, match="too close"):
            mc_loci(0.9, 1.1, 10, (1.0, 1.0 + 1e-9), m=15)
