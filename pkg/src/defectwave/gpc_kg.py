"""Legendre-chaos propagation of coupling uncertainty for the Klein-Gordon
problem, mean estimators, and critical-coupling extraction.

A uniformly distributed coupling eta on [a, b] maps to xi in [-1, 1] through
eta = halfwidth * xi + midpoint.  Expanding the field in Legendre polynomials
of xi turns the single equation into a tridiagonally coupled system of modal
fields that one leapfrog evolution advances together.  The right-boundary
reconstruction u(1, t, xi) pivots around the critical coupling as t grows,
so intersections of consecutive snapshots locate it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kleingordon import BLOWUP_LIMIT, BlowUpError
from .orthopoly import gauss_nodes, legendre_series
from .spectral1d import SpectralGrid, build_grid, consistent_delta, default_dt

__all__ = [
    "DEFAULT_SNAPSHOT_TIMES",
    "GpcKgSystem",
    "ModalState",
    "LocusSnapshot",
    "CriticalEstimate",
    "assemble_and_evolve",
    "gpc_mean",
    "mc_mean",
    "mc_loci",
    "quadrature_mean",
    "locus_snapshot",
    "critical_eta_from_loci",
]

DEFAULT_SNAPSHOT_TIMES = (50.0, 100.0, 150.0, 200.0, 250.0, 300.0, 350.0)


@dataclass(frozen=True)
class GpcKgSystem:
    """Chaos-Galerkin coupling data over the coupling interval [a, b].

    Mode l of the expansion feeds only modes l-1, l, l+1; the strengths
    follow from the three-term recurrence of the Legendre basis, so the
    interaction is tridiagonal and collapses entirely when a = b.
    """

    truncation: int
    a: float
    b: float
    grid: SpectralGrid

    def __post_init__(self) -> None:
        if self.truncation < 0:
            raise ValueError("truncation must be nonnegative")
        if not 0.0 < self.a <= self.b:
            raise ValueError("need 0 < a <= b for the coupling interval")

    @property
    def halfwidth(self) -> float:
        return 0.5 * (self.b - self.a)

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.a + self.b)

    def eta_from_xi(self, xi):
        return self.halfwidth * np.asarray(xi, dtype=float) + self.midpoint

    def down_coupling(self) -> np.ndarray:
        """Weight of mode l-1 in the equation for mode l (zero at l = 0)."""
        l = np.arange(self.truncation + 1, dtype=float)
        return self.halfwidth * l / (2.0 * l - 1.0)

    def up_coupling(self) -> np.ndarray:
        """Weight of mode l+1 in the equation for mode l."""
        l = np.arange(self.truncation + 1, dtype=float)
        return self.halfwidth * (l + 1.0) / (2.0 * l + 3.0)


@dataclass(frozen=True)
class ModalState:
    """All modal fields at one instant, rows indexed by mode."""

    t: float
    modes: np.ndarray


@dataclass(frozen=True)
class LocusSnapshot:
    """Right-boundary locus xi -> u(1, t_final, xi) of one snapshot.

    Built either from modal coefficients (chaos reconstruction) or from
    direct samples at many couplings (right_coeffs is None in that case and
    evaluation interpolates the sampled table).
    """

    t_final: float
    a: float
    b: float
    right_coeffs: np.ndarray | None
    xi: np.ndarray
    values: np.ndarray

    def value(self, xi):
        """Evaluate the locus anywhere in [-1, 1]."""
        if self.right_coeffs is None:
            return np.interp(xi, self.xi, self.values)
        return legendre_series(self.right_coeffs, xi)


@dataclass(frozen=True)
class CriticalEstimate:
    method: str
    value: float
    bracket: tuple[float, float]
    t_finals: tuple[float, ...]
    history: tuple[float, ...]


def _resolve_steps(t_final: float, dt: float) -> tuple[int, float]:
    nsteps = max(1, int(math.ceil(t_final / dt - 1e-12)))
    return nsteps, t_final / nsteps


def assemble_and_evolve(
    truncation: int,
    a: float,
    b: float,
    m: int,
    t_final: float,
    snapshot_times=None,
    dt: float | None = None,
    cfl: float = 0.25,
) -> tuple[GpcKgSystem, list[ModalState]]:
    """Evolve the coupled modal fields and record the requested snapshots.

    Initial data puts the ramp profile in mode 0 and zero in every higher
    mode; boundaries are the pinned left end and first-order outflow on the
    right, applied row-wise to all modes.  Returns the system descriptor and
    the snapshot history (the default schedule stops every 50 time units).
    """
    system = GpcKgSystem(truncation=truncation, a=a, b=b, grid=build_grid(m))
    if t_final <= 0:
        raise ValueError("t_final must be positive")
    grid = system.grid
    x = grid.nodes
    delta = consistent_delta(grid).values
    d2t = np.ascontiguousarray((grid.diff @ grid.diff).T)

    dt_val = dt if dt is not None else default_dt(grid, cfl)
    if dt_val <= 0:
        raise ValueError("dt must be positive")
    nsteps, dt_val = _resolve_steps(t_final, dt_val)
    lam = dt_val / (x[-1] - x[-2])
    dt2 = dt_val * dt_val

    if snapshot_times is None:
        wanted = [t for t in DEFAULT_SNAPSHOT_TIMES if t < t_final - 1e-9]
        wanted.append(t_final)
    else:
        wanted = sorted(float(t) for t in snapshot_times)
        if not wanted:
            raise ValueError("snapshot_times must not be empty")
        if wanted[0] <= 0 or wanted[-1] > t_final + 1e-9:
            raise ValueError("snapshot times must lie in (0, t_final]")
    snap_steps = sorted({min(nsteps, max(1, int(round(t / dt_val)))) for t in wanted})

    down = system.down_coupling()[:, None]
    up = system.up_coupling()[:, None]
    mid = system.midpoint

    n_modes = truncation + 1
    u_prev = np.zeros((n_modes, grid.npoints))
    u_prev[0] = 1.0 + x
    u_now = u_prev.copy()

    shift_down = np.zeros_like(u_now)
    shift_up = np.zeros_like(u_now)
    snapshots: list[ModalState] = []
    if snap_steps and snap_steps[0] == 1:
        snapshots.append(ModalState(t=dt_val, modes=u_now.copy()))

    for n in range(1, nsteps):
        shift_down[1:] = u_now[:-1]
        shift_up[:-1] = u_now[1:]
        shift_up[-1] = 0.0
        coupling = down * shift_down + mid * u_now + up * shift_up
        u_new = 2.0 * u_now - u_prev + dt2 * (u_now @ d2t + delta * coupling)
        u_new[:, 0] = 0.0
        u_new[:, -1] = (1.0 - lam) * u_now[:, -1] + lam * u_now[:, -2]
        u_prev, u_now = u_now, u_new
        step = n + 1
        if step in snap_steps or step % 200 == 0:
            amp = float(np.max(np.abs(u_now)))
            if not np.isfinite(amp) or amp > BLOWUP_LIMIT:
                raise BlowUpError(step * dt_val, amp)
        if step in snap_steps:
            snapshots.append(ModalState(t=step * dt_val, modes=u_now.copy()))
    return system, snapshots


def gpc_mean(state: ModalState) -> np.ndarray:
    """Mean field of the expansion, which is the zeroth mode."""
    return state.modes[0].copy()


def _evolve_block(
    etas: np.ndarray,
    m: int,
    t_final: float,
    dt: float | None,
    cfl: float,
    right_trace_times=None,
) -> np.ndarray:
    """Deterministic solves at many couplings advanced together.

    Returns the fields at t_final, one row per coupling.  Identical scheme to
    evolve_kg; batching turns the inner update into one matrix product.  When
    right_trace_times is given, also returns the right-boundary column for
    each requested time as a second value.
    """
    grid = build_grid(m)
    x = grid.nodes
    delta = consistent_delta(grid).values
    d2t = np.ascontiguousarray((grid.diff @ grid.diff).T)
    coef = etas[:, None] * delta[None, :]

    dt_val = dt if dt is not None else default_dt(grid, cfl)
    nsteps, dt_val = _resolve_steps(t_final, dt_val)
    lam = dt_val / (x[-1] - x[-2])
    dt2 = dt_val * dt_val

    trace_steps: dict[int, float] = {}
    if right_trace_times is not None:
        for t in right_trace_times:
            trace_steps[min(nsteps, max(1, round(t / dt_val)))] = float(t)
    traces: list[tuple[float, np.ndarray]] = []

    u_prev = np.tile(1.0 + x, (etas.size, 1))
    u_prev[:, 0] = 0.0
    u_now = u_prev.copy()
    if 1 in trace_steps:
        traces.append((trace_steps[1], u_now[:, -1].copy()))
    for n in range(1, nsteps):
        u_new = 2.0 * u_now - u_prev + dt2 * (u_now @ d2t + coef * u_now)
        u_new[:, 0] = 0.0
        u_new[:, -1] = (1.0 - lam) * u_now[:, -1] + lam * u_now[:, -2]
        u_prev, u_now = u_now, u_new
        if (n + 1) % 200 == 0 or n == nsteps - 1:
            amp = float(np.max(np.abs(u_now)))
            if not np.isfinite(amp) or amp > BLOWUP_LIMIT:
                raise BlowUpError((n + 1) * dt_val, amp)
        if (n + 1) in trace_steps:
            traces.append((trace_steps[n + 1], u_now[:, -1].copy()))
    if right_trace_times is not None:
        return u_now, traces
    return u_now


def mc_mean(
    a: float,
    b: float,
    M: int,
    t_final: float,
    m: int = 63,
    dt: float | None = None,
    cfl: float = 0.25,
    return_samples: bool = False,
):
    """Trapezoid average of M+1 deterministic solves at evenly spaced couplings."""
    if M < 2:
        raise ValueError("M must be at least 2")
    if not 0.0 < a <= b:
        raise ValueError("need 0 < a <= b")
    etas = np.linspace(a, b, M + 1)
    fields = _evolve_block(etas, m, t_final, dt, cfl)
    mean = (0.5 * fields[0] + fields[1:-1].sum(axis=0) + 0.5 * fields[-1]) / M
    if return_samples:
        return mean, fields
    return mean


def quadrature_mean(
    a: float,
    b: float,
    n_quad: int,
    t_final: float,
    m: int = 63,
    dt: float | None = None,
    cfl: float = 0.25,
) -> np.ndarray:
    """Gauss-Legendre average of deterministic solves, normalized to a mean."""
    if n_quad < 1:
        raise ValueError("n_quad must be at least 1")
    if not 0.0 < a <= b:
        raise ValueError("need 0 < a <= b")
    nodes, weights = gauss_nodes("legendre", n_quad)
    etas = 0.5 * (b - a) * nodes + 0.5 * (a + b)
    fields = _evolve_block(etas, m, t_final, dt, cfl)
    return (weights @ fields) / float(weights.sum())


def mc_loci(
    a: float,
    b: float,
    M: int,
    t_finals,
    m: int = 63,
    dt: float | None = None,
    cfl: float = 0.25,
) -> list[LocusSnapshot]:
    """Sampled loci from M+1 direct solves, one snapshot per requested time.

    The chaos-free counterpart of locus_snapshot: the right-boundary value is
    recorded at evenly spaced couplings, giving an interpolation table over
    the mapped variable instead of a modal reconstruction.  Snapshots feed
    critical_eta_from_loci unchanged.
    """
    if M < 2:
        raise ValueError("M must be at least 2")
    if not 0.0 < a < b:
        raise ValueError("need 0 < a < b")
    times = [float(t) for t in t_finals]
    if len(times) < 2:
        raise ValueError("need at least two snapshot times")
    if any(t <= 0 for t in times) or any(
        t1 >= t2 for t1, t2 in zip(times, times[1:])
    ):
        raise ValueError("snapshot times must be positive and strictly increasing")

    etas = np.linspace(a, b, M + 1)
    xi = (2.0 * etas - (a + b)) / (b - a)
    _, traces = _evolve_block(etas, m, times[-1], dt, cfl, right_trace_times=times)
    if len(traces) != len(times):
        raise ValueError("snapshot times are too close for the time step to resolve")
    return [
        LocusSnapshot(
            t_final=t, a=a, b=b, right_coeffs=None, xi=xi, values=column
        )
        for t, column in traces
    ]


def locus_snapshot(state: ModalState, system: GpcKgSystem, n_xi: int = 1_000_000) -> LocusSnapshot:
    """Sample the right-boundary reconstruction of one snapshot on a xi grid."""
    if n_xi < 2:
        raise ValueError("n_xi must be at least 2")
    right_coeffs = np.ascontiguousarray(state.modes[:, -1])
    xi = np.linspace(-1.0, 1.0, n_xi)
    values = legendre_series(right_coeffs, xi)
    return LocusSnapshot(
        t_final=state.t,
        a=system.a,
        b=system.b,
        right_coeffs=right_coeffs,
        xi=xi,
        values=values,
    )


def _refine_crossing(f, lo: float, hi: float, tol: float) -> tuple[float, float, float]:
    """Polish a bracketed sign change with secant steps, keeping the bracket."""
    f_lo = float(f(lo))
    f_hi = float(f(hi))
    if f_lo == 0.0:
        return lo, lo, lo
    if f_hi == 0.0:
        return hi, hi, hi
    x0, f0, x1, f1 = lo, f_lo, hi, f_hi
    root = 0.5 * (lo + hi)
    for _ in range(200):
        x2 = x1 - f1 * (x1 - x0) / (f1 - f0) if f1 != f0 else 0.5 * (lo + hi)
        if not lo < x2 < hi:
            x2 = 0.5 * (lo + hi)
        f2 = float(f(x2))
        if f2 == 0.0:
            return x2, x2, x2
        if (f2 < 0.0) == (f_lo < 0.0):
            lo, f_lo = x2, f2
        else:
            hi, f_hi = x2, f2
        x0, f0, x1, f1 = x1, f1, x2, f2
        root = x2
        if abs(x1 - x0) <= tol or hi - lo <= tol:
            break
    return root, lo, hi


def critical_eta_from_loci(snapshots, xi_tol: float = 1e-14, method: str = "locus-intersection") -> CriticalEstimate:
    """Critical coupling from intersections of consecutive locus snapshots.

    Each consecutive pair contributes the root of the difference of their
    reconstructions at the right boundary; the roots converge as the snapshot
    times grow, and the last one is returned with its final bracket width.
    """
    snaps = list(snapshots)
    if len(snaps) < 2:
        raise ValueError("need at least two snapshots")
    times = [s.t_final for s in snaps]
    if any(t1 >= t2 for t1, t2 in zip(times, times[1:])):
        raise ValueError("snapshots must be ordered by strictly increasing time")
    if any(s.a != snaps[0].a or s.b != snaps[0].b for s in snaps):
        raise ValueError("snapshots mix different coupling intervals")

    roots_xi: list[float] = []
    bracket_xi = (-1.0, 1.0)
    for earlier, later in zip(snaps, snaps[1:]):
        xi = later.xi
        diff = later.values - (earlier.values if earlier.xi.shape == xi.shape and np.array_equal(earlier.xi, xi) else earlier.value(xi))
        signs = np.sign(diff)
        flips = np.nonzero(signs[:-1] * signs[1:] < 0)[0]
        exact = np.nonzero(signs == 0)[0]
        if flips.size == 0 and exact.size == 0:
            raise RuntimeError(
                f"no crossing between t = {earlier.t_final:g} and t = {later.t_final:g}; "
                f"the interval [{later.a}, {later.b}] likely misses the critical coupling"
            )
        if exact.size > 0 and flips.size == 0:
            root = float(xi[exact[0]])
            roots_xi.append(root)
            bracket_xi = (root, root)
            continue
        # Below the critical coupling the boundary value oscillates in time,
        # so the difference of two loci can wobble through zero many times
        # there; above it the later locus is strictly larger (growth), so the
        # rightmost sign change is the dichotomy boundary.
        lo, hi = float(xi[flips[-1]]), float(xi[flips[-1] + 1])

        def diff_fn(p, early=earlier, late=later):
            return float(late.value(p) - early.value(p))

        root, blo, bhi = _refine_crossing(diff_fn, lo, hi, xi_tol)
        roots_xi.append(root)
        bracket_xi = (blo, bhi)

    scale = 0.5 * (snaps[0].b - snaps[0].a)
    shift = 0.5 * (snaps[0].a + snaps[0].b)
    eta = scale * roots_xi[-1] + shift
    eta_bracket = (scale * bracket_xi[0] + shift, scale * bracket_xi[1] + shift)
    return CriticalEstimate(
        method=method,
        value=float(eta),
        bracket=(float(min(eta_bracket)), float(max(eta_bracket))),
        t_finals=tuple(times),
        history=tuple(scale * r + shift for r in roots_xi),
    )
