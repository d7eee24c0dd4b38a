"""Polynomial-chaos propagation of kink-impurity uncertainty.

Three stochastic-Galerkin variants of the impurity sine-Gordon problem:
Legendre chaos in the launch velocity V over an interval [Va, Vb], Hermite
chaos in V under a truncated normal law, and Legendre chaos in the impurity
amplitude over [eps_a, eps_b].  The coupled modal fields evolve with the same
leapfrog scheme as the deterministic solver; the nonlinear sin term is
re-projected onto the basis by Gauss quadrature at every step.

Because a kink either passes the impurity (u(L) -> 0) or is captured
(u(L) -> 2 pi), the chaos mean at the right boundary encodes the captured
probability mass, and inverting that relation through the parameter's
distribution yields the critical value in a single stochastic run.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .orthopoly import gauss_nodes, hermite_norm, hermite_table, legendre_table
from .sinegordon import BLOWUP_LIMIT, kink_profile
from .spectral1d import build_grid, consistent_delta, default_dt

__all__ = [
    "QuadratureRule",
    "legendre_rule",
    "hermite_rule",
    "NonlinearProjection",
    "project_sin_legendre",
    "project_sin_hermite",
    "LegendreVelocityChaos",
    "HermiteVelocityChaos",
    "ChaosCriticalEstimate",
    "SgChaosRun",
    "evolve_gpc_sg_legendre_V",
    "evolve_gpc_sg_hermite",
    "evolve_gpc_sg_legendre_eps",
    "critical_velocity_from_mean",
    "critical_epsilon_from_mean",
    "critical_velocity_hermite",
    "normal_cdf",
    "normal_cdf_inverse",
]

TWO_PI = 2.0 * math.pi

DEFAULT_QUADRATURE_SIZE = 30


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights for projecting onto an orthogonal basis."""

    family: str
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.nodes.size


def legendre_rule(n: int) -> QuadratureRule:
    """Gauss-Legendre rule on [-1, 1] with n points."""
    nodes, weights = gauss_nodes("legendre", n)
    return QuadratureRule(family="legendre", nodes=nodes, weights=weights)


def hermite_rule(n: int) -> QuadratureRule:
    """Gauss rule for the weight exp(-x^2/2) on the real line with n points."""
    nodes, weights = gauss_nodes("hermite", n)
    return QuadratureRule(family="hermite", nodes=nodes, weights=weights)


@dataclass(frozen=True)
class NonlinearProjection:
    """Basis coefficients of sin(u) at one instant.

    phi[l] projects sin of the reconstructed state onto basis element l;
    psi (present only when requested) carries the extra parameter factor
    needed when the random variable multiplies the impurity amplitude.
    """

    phi: np.ndarray
    psi: np.ndarray | None = None


def _projection_tables(
    rule: QuadratureRule, n_modes: int
) -> tuple[np.ndarray, np.ndarray]:
    if rule.family == "legendre":
        table = legendre_table(n_modes - 1, rule.nodes)
    elif rule.family == "hermite":
        table = hermite_table(n_modes - 1, rule.nodes)
    else:
        raise ValueError(f"unknown quadrature family {rule.family!r}")
    return table, table * rule.weights


def _project_sin(
    coeffs: np.ndarray,
    rule: QuadratureRule,
    with_xi_weight: bool,
) -> NonlinearProjection:
    coeffs = np.asarray(coeffs, dtype=float)
    squeeze = coeffs.ndim == 1
    if squeeze:
        coeffs = coeffs[:, None]
    if coeffs.ndim != 2 or coeffs.size == 0:
        raise ValueError("modal coefficients must be a 1-d or 2-d array")
    n_modes = coeffs.shape[0]
    if rule.size < n_modes:
        raise ValueError(
            f"quadrature rule has {rule.size} nodes; need at least {n_modes}"
        )
    table, wtable = _projection_tables(rule, n_modes)
    s = np.sin(coeffs.T @ table)
    phi = wtable @ s.T
    psi = None
    if with_xi_weight:
        psi = (wtable * rule.nodes) @ s.T
    if squeeze:
        phi = phi[:, 0]
        psi = None if psi is None else psi[:, 0]
    return NonlinearProjection(phi=phi, psi=psi)


def project_sin_legendre(
    coeffs: np.ndarray,
    rule: QuadratureRule | None = None,
    with_xi_weight: bool = False,
) -> NonlinearProjection:
    """Project sin of a Legendre-chaos state back onto the basis.

    coeffs has modes along the first axis; a trailing axis of grid points is
    allowed and preserved.  The default rule uses max(30, number of modes)
    Gauss-Legendre points; an explicit rule must have at least as many nodes
    as there are modes.
    """
    n_modes = np.atleast_1d(np.asarray(coeffs)).shape[0]
    if rule is None:
        rule = legendre_rule(max(DEFAULT_QUADRATURE_SIZE, n_modes))
    elif rule.family != "legendre":
        raise ValueError("rule must be a Gauss-Legendre rule")
    return _project_sin(coeffs, rule, with_xi_weight)


def project_sin_hermite(
    coeffs: np.ndarray,
    rule: QuadratureRule | None = None,
) -> NonlinearProjection:
    """Project sin of a Hermite-chaos state back onto the basis."""
    n_modes = np.atleast_1d(np.asarray(coeffs)).shape[0]
    if rule is None:
        rule = hermite_rule(max(DEFAULT_QUADRATURE_SIZE, n_modes))
    elif rule.family != "hermite":
        raise ValueError("rule must be a Gauss-Hermite rule")
    return _project_sin(coeffs, rule, with_xi_weight=False)


@dataclass(frozen=True)
class LegendreVelocityChaos:
    """Uniform launch-velocity uncertainty on [Va, Vb]."""

    Va: float
    Vb: float
    n_quad: int = DEFAULT_QUADRATURE_SIZE

    basis = "legendre"

    def __post_init__(self) -> None:
        if not 0.0 < self.Va <= self.Vb < 1.0:
            raise ValueError("need 0 < Va <= Vb < 1")
        if self.n_quad < 1:
            raise ValueError("n_quad must be positive")

    def velocities(self, xi: np.ndarray) -> np.ndarray:
        return 0.5 * (self.Vb - self.Va) * xi + 0.5 * (self.Va + self.Vb)


@dataclass(frozen=True)
class HermiteVelocityChaos:
    """Truncated-normal launch-velocity uncertainty on [alpha_t, beta_t]."""

    mu: float
    sigma: float
    alpha_t: float
    beta_t: float
    n_quad: int = DEFAULT_QUADRATURE_SIZE

    basis = "hermite"

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if not 0.0 < self.alpha_t < self.beta_t < 1.0:
            raise ValueError("need 0 < alpha_t < beta_t < 1")
        if self.n_quad < 1:
            raise ValueError("n_quad must be positive")

    def velocities(self, gamma: np.ndarray) -> np.ndarray:
        return self.mu + self.sigma * gamma

    @property
    def lower_std(self) -> float:
        return (self.alpha_t - self.mu) / self.sigma

    @property
    def upper_std(self) -> float:
        return (self.beta_t - self.mu) / self.sigma


@dataclass(frozen=True)
class ChaosCriticalEstimate:
    """Critical parameter recovered by inverting the chaos mean at x = L."""

    method: str
    chaos: str
    value: float
    inputs: dict

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "chaos": self.chaos,
            "value": self.value,
            "inputs": dict(self.inputs),
        }


@dataclass(frozen=True)
class SgChaosRun:
    """Outcome of one stochastic-Galerkin evolution."""

    chaos: str
    t_final: float
    x: np.ndarray = field(repr=False)
    modes: np.ndarray = field(repr=False)
    mean_profile: np.ndarray = field(repr=False)
    std_profile: np.ndarray = field(repr=False)
    mean_at_right: float
    std_at_right: float
    times: np.ndarray = field(repr=False)
    right_mean_trace: np.ndarray = field(repr=False)
    critical: ChaosCriticalEstimate


def normal_cdf(z: float) -> float:
    """Standard normal cumulative distribution function."""
    return 0.5 * (1.0 + math.erf(float(z) / math.sqrt(2.0)))


def normal_cdf_inverse(p: float, tol: float = 1e-12) -> float:
    """Invert the standard normal CDF by bisection to the given tolerance."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly inside (0, 1)")
    if tol <= 0:
        raise ValueError("tol must be positive")
    lo, hi = -40.0, 40.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if normal_cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _clamped_mean(u_mean_at_L: float) -> float:
    value = float(u_mean_at_L)
    if value < 0.0 or value > TWO_PI:
        warnings.warn(
            f"boundary mean {value:.6g} lies outside [0, 2 pi]; clamping",
            RuntimeWarning,
            stacklevel=3,
        )
        value = min(max(value, 0.0), TWO_PI)
    return value


def critical_velocity_from_mean(u_mean_at_L: float, Va: float, Vb: float) -> float:
    """Critical velocity from the chaos mean under a uniform law on [Va, Vb].

    Captured kinks contribute 2 pi to u(L) and passed kinks contribute 0, so
    the mean equals 2 pi times the captured (low-velocity) probability mass.
    """
    fraction = _clamped_mean(u_mean_at_L) / TWO_PI
    return Va + (Vb - Va) * fraction


def critical_epsilon_from_mean(u_mean_at_L: float, eps_a: float, eps_b: float) -> float:
    """Critical amplitude from the chaos mean; capture happens at HIGH eps."""
    fraction = _clamped_mean(u_mean_at_L) / TWO_PI
    return eps_b - (eps_b - eps_a) * fraction


def critical_velocity_hermite(
    u_mean_at_L: float,
    mu: float,
    sigma: float,
    alpha_t: float,
    beta_t: float,
) -> float:
    """Critical velocity from the chaos mean under a truncated normal law.

    The captured mass sits between alpha_t and V_c, so the normal CDF at the
    standardized critical velocity interpolates the CDF values at the
    truncation endpoints with weight u_mean / 2 pi.
    """
    fraction = _clamped_mean(u_mean_at_L) / TWO_PI
    lower = normal_cdf((alpha_t - mu) / sigma)
    upper = normal_cdf((beta_t - mu) / sigma)
    target = fraction * upper + (1.0 - fraction) * lower
    return mu + sigma * normal_cdf_inverse(target)


def _kink_family(
    x: np.ndarray, t: float, x0: float, velocities: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Kink value and rate at every (velocity, node) pair; shape (Q, nx)."""
    v = np.asarray(velocities, dtype=float)
    gamma = np.sqrt(1.0 - v * v)
    z = (np.asarray(x, dtype=float)[None, :] - x0 - (v * t)[:, None]) / gamma[:, None]
    u = np.where(
        z <= 0,
        4.0 * np.arctan(np.exp(np.minimum(z, 0.0))),
        TWO_PI - 4.0 * np.arctan(np.exp(-np.maximum(z, 0.0))),
    )
    e = np.exp(-np.abs(z))
    sech = 2.0 * e / (1.0 + e * e)
    ut = -(2.0 * v / gamma)[:, None] * sech
    return u, ut


def _leapfrog_modal(
    u_init: np.ndarray,
    v_init: np.ndarray,
    source,
    left_trace,
    lam: float,
    dt: float,
    nsteps: int,
    record_every: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """March the coupled modal fields; returns times, u0(L) trace, final state."""
    u_prev = u_init.copy()
    u_now = u_init + dt * v_init
    u_now[:, 0] = left_trace(dt)
    u_now[:, -1] = u_prev[:, -1] - lam * (u_prev[:, -1] - u_now[:, -2])

    rec_t: list[float] = []
    rec_mean: list[float] = []
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, nsteps):
            u_new = 2.0 * u_now - u_prev + dt * dt * source(u_now)
            t_new = (n + 1) * dt
            u_new[:, 0] = left_trace(t_new)
            u_new[:, -1] = u_now[:, -1] - lam * (u_now[:, -1] - u_new[:, -2])
            u_prev, u_now = u_now, u_new
            if n % 100 == 0 or n == nsteps - 1:
                amp = float(np.max(np.abs(u_now)))
                if not np.isfinite(amp) or amp > BLOWUP_LIMIT:
                    raise RuntimeError(
                        f"modal system blew up at t = {t_new:.6g} (max = {amp:.3e})"
                    )
            if n % record_every == 0 or n == nsteps - 1:
                rec_t.append(t_new)
                rec_mean.append(float(u_now[0, -1]))
    return np.array(rec_t), np.array(rec_mean), u_now


def _resolve_run(m: int, L: float, t_final: float, dt: float | None, cfl: float):
    if m % 2 == 0:
        raise ValueError("m must be odd so the impurity sits between nodes")
    if t_final <= 0:
        raise ValueError("t_final must be positive")
    grid = build_grid(m, half_width=L)
    step = dt if dt is not None else default_dt(grid, cfl)
    if step <= 0:
        raise ValueError("dt must be positive")
    nsteps = max(1, int(math.ceil(t_final / step - 1e-12)))
    step = t_final / nsteps
    lam = step / (grid.nodes[-1] - grid.nodes[-2])
    return grid, step, nsteps, lam


def _package_run(
    chaos: str,
    t_final: float,
    x: np.ndarray,
    modes: np.ndarray,
    var_weights: np.ndarray,
    times: np.ndarray,
    trace: np.ndarray,
    critical: ChaosCriticalEstimate,
) -> SgChaosRun:
    mean_profile = modes[0].copy()
    var_profile = var_weights[:, None] * modes[1:] ** 2 if modes.shape[0] > 1 else None
    std_profile = (
        np.sqrt(var_profile.sum(axis=0))
        if var_profile is not None
        else np.zeros_like(mean_profile)
    )
    return SgChaosRun(
        chaos=chaos,
        t_final=t_final,
        x=x,
        modes=modes,
        mean_profile=mean_profile,
        std_profile=std_profile,
        mean_at_right=float(mean_profile[-1]),
        std_at_right=float(std_profile[-1]),
        times=times,
        right_mean_trace=trace,
        critical=critical,
    )


def evolve_gpc_sg_legendre_V(
    Va: float,
    Vb: float,
    truncation: int = 14,
    m: int = 127,
    t_final: float = 600.0,
    epsilon: float = 0.5,
    L: float = 8.0,
    x0: float = -6.0,
    n_quad: int = DEFAULT_QUADRATURE_SIZE,
    dt: float | None = None,
    cfl: float = 0.25,
    record_every: int | None = None,
) -> SgChaosRun:
    """Evolve Legendre velocity chaos and invert the mean for V_c.

    Modal initial data and the left-boundary modal traces are Gauss-Legendre
    projections of the exact kink family over [Va, Vb]; the right boundary
    uses the outflow closure mode by mode.  The sin term is projected onto
    the basis at every step.
    """
    if truncation < 0:
        raise ValueError("truncation must be nonnegative")
    if n_quad < truncation + 1:
        raise ValueError("n_quad must be at least truncation + 1")
    chaos = LegendreVelocityChaos(Va=Va, Vb=Vb, n_quad=n_quad)
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")

    grid, step, nsteps, lam = _resolve_run(m, L, t_final, dt, cfl)
    x = grid.nodes
    d2t = np.ascontiguousarray((grid.diff @ grid.diff).T)
    delta = consistent_delta(grid).values
    imp = epsilon * delta - 1.0

    rule = legendre_rule(n_quad)
    vels = chaos.velocities(rule.nodes)
    table, wtable = _projection_tables(rule, truncation + 1)
    scale = (2.0 * np.arange(truncation + 1) + 1.0) / 2.0
    proj = scale[:, None] * wtable

    ku, kut = _kink_family(x, 0.0, x0, vels)
    u_init = proj @ ku
    v_init = proj @ kut
    x_left = np.array([x[0]])

    def left_trace(t: float) -> np.ndarray:
        return proj @ _kink_family(x_left, t, x0, vels)[0][:, 0]

    def source(u: np.ndarray) -> np.ndarray:
        phi = (scale[:, None] * wtable) @ np.sin(u.T @ table).T
        return u @ d2t + phi * imp[None, :]

    if record_every is None:
        record_every = max(1, nsteps // 2000)
    times, trace, modes = _leapfrog_modal(
        u_init, v_init, source, left_trace, lam, step, nsteps, record_every
    )

    mean_at_right = float(modes[0, -1])
    critical = ChaosCriticalEstimate(
        method="gpc-mean-inversion",
        chaos="legendre",
        value=critical_velocity_from_mean(mean_at_right, Va, Vb),
        inputs={
            "Va": Va,
            "Vb": Vb,
            "truncation": truncation,
            "m": m,
            "t_final": t_final,
            "epsilon": epsilon,
            "n_quad": n_quad,
        },
    )
    var_weights = 1.0 / (2.0 * np.arange(1, truncation + 1) + 1.0)
    return _package_run(
        "legendre", t_final, x, modes, var_weights, times, trace, critical
    )


def _check_truncation_approximation(chaos: HermiteVelocityChaos, truncation: int):
    """Warn when the truncated weight fails to act like the full normal one.

    The Galerkin assembly treats the basis as orthogonal under the full
    normal weight; that is only approximate once the law is truncated to
    [alpha_t, beta_t].  Compares the truncated norm integrals against
    sqrt(2 pi) l! and reports the worst relative defect.
    """
    n_check = max(200, 4 * truncation + 64)
    gl_nodes, gl_weights = gauss_nodes("legendre", n_check)
    # the weight is zero to machine precision beyond +-40 standard units,
    # so clip there to keep the check quadrature resolved on wide intervals
    a = max(chaos.lower_std, -40.0)
    b = min(chaos.upper_std, 40.0)
    gammas = 0.5 * (b - a) * gl_nodes + 0.5 * (a + b)
    w = 0.5 * (b - a) * gl_weights * np.exp(-0.5 * gammas**2)
    table = hermite_table(truncation, gammas)
    worst = 0.0
    for degree in range(truncation + 1):
        exact = hermite_norm(degree)
        got = float(np.sum(w * table[degree] ** 2))
        worst = max(worst, abs(got - exact) / exact)
    if worst > 1e-4:
        warnings.warn(
            "truncated-normal weight deviates from the full normal one "
            f"(worst relative norm defect {worst:.3e}); the Galerkin system "
            "treats the basis as exactly orthogonal, so chaos results carry "
            "a truncation bias",
            RuntimeWarning,
            stacklevel=3,
        )


def evolve_gpc_sg_hermite(
    mu: float,
    sigma: float,
    alpha_t: float,
    beta_t: float,
    truncation: int = 7,
    m: int = 127,
    t_final: float = 600.0,
    epsilon: float = 0.5,
    L: float = 8.0,
    x0: float = -6.0,
    n_quad: int = DEFAULT_QUADRATURE_SIZE,
    dt: float | None = None,
    cfl: float = 0.25,
    record_every: int | None = None,
) -> SgChaosRun:
    """Evolve Hermite velocity chaos for a truncated-normal launch velocity.

    The coupled system is assembled as if the law were the full normal one;
    the truncation interval enters only through the mean/std normalizer and
    the critical-velocity inversion.  A warning reports when the truncated
    weight is too narrow for that approximation to be accurate.
    """
    if truncation < 0:
        raise ValueError("truncation must be nonnegative")
    if n_quad < truncation + 1:
        raise ValueError("n_quad must be at least truncation + 1")
    chaos = HermiteVelocityChaos(
        mu=mu, sigma=sigma, alpha_t=alpha_t, beta_t=beta_t, n_quad=n_quad
    )
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")

    rule = hermite_rule(n_quad)
    vels = chaos.velocities(rule.nodes)
    if np.any(np.abs(vels) >= 1.0):
        raise ValueError(
            "sigma too large: quadrature velocities leave (-1, 1); "
            f"range [{vels.min():.4g}, {vels.max():.4g}]"
        )
    _check_truncation_approximation(chaos, truncation)

    grid, step, nsteps, lam = _resolve_run(m, L, t_final, dt, cfl)
    x = grid.nodes
    d2t = np.ascontiguousarray((grid.diff @ grid.diff).T)
    delta = consistent_delta(grid).values
    imp = epsilon * delta - 1.0

    table, wtable = _projection_tables(rule, truncation + 1)
    scale = np.array([1.0 / hermite_norm(k) for k in range(truncation + 1)])
    proj = scale[:, None] * wtable

    ku, kut = _kink_family(x, 0.0, x0, vels)
    u_init = proj @ ku
    v_init = proj @ kut
    x_left = np.array([x[0]])

    def left_trace(t: float) -> np.ndarray:
        return proj @ _kink_family(x_left, t, x0, vels)[0][:, 0]

    def source(u: np.ndarray) -> np.ndarray:
        phi = proj @ np.sin(u.T @ table).T
        return u @ d2t + phi * imp[None, :]

    if record_every is None:
        record_every = max(1, nsteps // 2000)
    times, trace, modes = _leapfrog_modal(
        u_init, v_init, source, left_trace, lam, step, nsteps, record_every
    )

    mean_at_right = float(modes[0, -1])
    critical = ChaosCriticalEstimate(
        method="gpc-mean-inversion",
        chaos="hermite",
        value=critical_velocity_hermite(mean_at_right, mu, sigma, alpha_t, beta_t),
        inputs={
            "mu": mu,
            "sigma": sigma,
            "alpha_t": alpha_t,
            "beta_t": beta_t,
            "truncation": truncation,
            "m": m,
            "t_final": t_final,
            "epsilon": epsilon,
            "n_quad": n_quad,
        },
    )
    mass = normal_cdf(chaos.upper_std) - normal_cdf(chaos.lower_std)
    var_weights = np.array(
        [math.factorial(k) / mass for k in range(1, truncation + 1)]
    )
    return _package_run(
        "hermite", t_final, x, modes, var_weights, times, trace, critical
    )


def evolve_gpc_sg_legendre_eps(
    eps_a: float,
    eps_b: float,
    V: float = 0.1215,
    truncation: int = 14,
    m: int = 127,
    t_final: float = 600.0,
    L: float = 8.0,
    x0: float = -6.0,
    n_quad: int = DEFAULT_QUADRATURE_SIZE,
    dt: float | None = None,
    cfl: float = 0.25,
    record_every: int | None = None,
) -> SgChaosRun:
    """Evolve Legendre chaos in the impurity amplitude at a fixed velocity.

    Only mode 0 carries the kink initially (the launch is deterministic);
    randomness enters through the amplitude factor at the impurity node,
    which splits into the plain projection phi and the parameter-weighted
    projection psi.  Capture happens at HIGH amplitude, so the mean-inversion
    formula runs downward from eps_b.
    """
    if truncation < 0:
        raise ValueError("truncation must be nonnegative")
    if n_quad < truncation + 1:
        raise ValueError("n_quad must be at least truncation + 1")
    if not 0.0 < eps_a <= eps_b:
        raise ValueError("need 0 < eps_a <= eps_b")
    if not abs(V) < 1.0:
        raise ValueError("|V| must be below 1")

    grid, step, nsteps, lam = _resolve_run(m, L, t_final, dt, cfl)
    x = grid.nodes
    d2t = np.ascontiguousarray((grid.diff @ grid.diff).T)
    delta = consistent_delta(grid).values

    rule = legendre_rule(n_quad)
    table, wtable = _projection_tables(rule, truncation + 1)
    scale = (2.0 * np.arange(truncation + 1) + 1.0) / 2.0
    wtable_xi = wtable * rule.nodes
    mid = 0.5 * (eps_a + eps_b)
    half = 0.5 * (eps_b - eps_a)

    n_modes = truncation + 1
    u_init = np.zeros((n_modes, x.size))
    v_init = np.zeros_like(u_init)
    u_init[0], v_init[0] = kink_profile(x, 0.0, x0, V)

    def left_trace(t: float) -> np.ndarray:
        column = np.zeros(n_modes)
        column[0] = kink_profile(x[0], t, x0, V)[0]
        return column

    def source(u: np.ndarray) -> np.ndarray:
        s = np.sin(u.T @ table).T
        phi = scale[:, None] * (wtable @ s)
        psi = scale[:, None] * (wtable_xi @ s)
        return u @ d2t + (mid * phi + half * psi) * delta[None, :] - phi

    if record_every is None:
        record_every = max(1, nsteps // 2000)
    times, trace, modes = _leapfrog_modal(
        u_init, v_init, source, left_trace, lam, step, nsteps, record_every
    )

    mean_at_right = float(modes[0, -1])
    critical = ChaosCriticalEstimate(
        method="gpc-mean-inversion",
        chaos="legendre",
        value=critical_epsilon_from_mean(mean_at_right, eps_a, eps_b),
        inputs={
            "eps_a": eps_a,
            "eps_b": eps_b,
            "V": V,
            "truncation": truncation,
            "m": m,
            "t_final": t_final,
            "n_quad": n_quad,
        },
    )
    var_weights = 1.0 / (2.0 * np.arange(1, truncation + 1) + 1.0)
    return _package_run(
        "legendre", t_final, x, modes, var_weights, times, trace, critical
    )
