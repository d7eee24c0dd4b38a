"""Chebyshev Gauss-Lobatto collocation on [-L, L] and a consistent point source.

The grid runs left to right, ``x_j = -L cos(j pi / m)`` for j = 0..m, so row 0
is the left boundary and row m the right one.  The differentiation matrix uses
the negative-sum trick on the diagonal.  A Dirac delta at x = 0 is represented
"consistently" as the discrete derivative of the sampled Heaviside step: with
m odd the origin falls between the two middle nodes and the step vector is
0 up to node (m-1)/2 and 1 afterwards.  Pairing the resulting vector with the
Clenshaw-Curtis weights integrates polynomials of the interpolation space
exactly, which is what keeps steady states of the delta-forced problems honest.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SpectralGrid",
    "build_grid",
    "DeltaApprox",
    "consistent_delta",
    "FilterSpec",
    "filter_sigma",
    "apply_filter",
    "nodal_to_cheb",
    "cheb_to_nodal",
    "cheb_eval",
    "leapfrog_step",
    "default_dt",
]


@dataclass(frozen=True)
class SpectralGrid:
    """Collocation grid with differentiation matrix and quadrature weights."""

    m: int
    half_width: float
    nodes: np.ndarray = field(repr=False)
    diff: np.ndarray = field(repr=False)
    quad_weights: np.ndarray = field(repr=False)

    @property
    def npoints(self) -> int:
        return self.m + 1

    @property
    def min_spacing(self) -> float:
        return float(np.min(np.diff(self.nodes)))


def _cheb_diff(m: int) -> tuple[np.ndarray, np.ndarray]:
    # classic construction on the decreasing nodes cos(j pi / m), then both
    # index axes are reversed so the grid runs left to right
    j = np.arange(m + 1)
    xi = np.cos(np.pi * j / m)
    c = np.ones(m + 1)
    c[0] = c[m] = 2.0
    c *= (-1.0) ** j
    dx = xi[:, None] - xi[None, :] + np.eye(m + 1)
    d = np.outer(c, 1.0 / c) / dx
    d -= np.diag(d.sum(axis=1))
    return xi[::-1].copy(), d[::-1, ::-1].copy()


def _cc_weights(m: int) -> np.ndarray:
    # Clenshaw-Curtis weights for the Gauss-Lobatto nodes; exact through
    # degree m.  Standard cosine-sum formula, symmetric under node reversal.
    jj = np.arange(m + 1)
    kmax = m // 2
    k = np.arange(1, kmax + 1)
    b = np.full(kmax, 2.0)
    if m % 2 == 0 and kmax >= 1:
        b[-1] = 1.0
    cosses = np.cos(2.0 * np.pi * np.outer(jj, k) / m)
    series = cosses @ (b / (4.0 * k * k - 1.0))
    cj = np.full(m + 1, 2.0)
    cj[0] = cj[m] = 1.0
    return (cj / m) * (1.0 - series)


def build_grid(m: int, half_width: float = 1.0) -> SpectralGrid:
    """Gauss-Lobatto grid of order m on [-half_width, half_width]."""
    if m < 4:
        raise ValueError("grid order m must be >= 4")
    if half_width <= 0:
        raise ValueError("half_width must be positive")
    xi, d = _cheb_diff(m)
    return SpectralGrid(
        m=m,
        half_width=half_width,
        nodes=half_width * xi,
        diff=d / half_width,
        quad_weights=half_width * _cc_weights(m),
    )


@dataclass(frozen=True)
class DeltaApprox:
    """Discrete delta at the origin with the step vector it derives from."""

    values: np.ndarray
    split_index: int
    heaviside: np.ndarray


def consistent_delta(grid: SpectralGrid) -> DeltaApprox:
    """Delta at x = 0 as the discrete derivative of the sampled step.

    Requires odd m so the origin lies strictly between two nodes.
    """
    if grid.m % 2 == 0:
        raise ValueError("consistent delta needs odd m (origin between nodes)")
    k = (grid.m - 1) // 2
    step = np.zeros(grid.npoints)
    step[k + 1 :] = 1.0
    return DeltaApprox(values=grid.diff @ step, split_index=k, heaviside=step)


@dataclass(frozen=True)
class FilterSpec:
    """Exponential modal filter sigma_k = exp(-strength * (k/m)^order)."""

    order: int = 8
    strength: float = float(-np.log(np.finfo(float).eps))

    def __post_init__(self) -> None:
        if self.order % 2 != 0 or self.order < 2:
            raise ValueError("filter order must be a positive even integer")
        if self.strength <= 0:
            raise ValueError("filter strength must be positive")


def filter_sigma(m: int, spec: FilterSpec) -> np.ndarray:
    k = np.arange(m + 1)
    return np.exp(-spec.strength * (k / m) ** spec.order)


def apply_filter(coeffs: np.ndarray, spec: FilterSpec | None = None) -> np.ndarray:
    """Damp high Chebyshev modes; mode 0 always passes unchanged."""
    coeffs = np.asarray(coeffs, dtype=float)
    if spec is None:
        spec = FilterSpec()
    return coeffs * filter_sigma(coeffs.size - 1, spec)


def nodal_to_cheb(values: np.ndarray) -> np.ndarray:
    """Chebyshev coefficients of the interpolant through Gauss-Lobatto data."""
    values = np.asarray(values, dtype=float)
    m = values.size - 1
    j = np.arange(m + 1)
    k = np.arange(m + 1)
    # T_k at the left-to-right nodes is (-1)^k cos(k j pi / m)
    cosmat = np.cos(np.pi * np.outer(k, j) / m)
    scaled = values.copy()
    scaled[0] *= 0.5
    scaled[m] *= 0.5
    coeffs = (2.0 / m) * ((-1.0) ** k) * (cosmat @ scaled)
    coeffs[0] *= 0.5
    coeffs[m] *= 0.5
    return coeffs


def cheb_to_nodal(coeffs: np.ndarray) -> np.ndarray:
    """Evaluate a Chebyshev series at the Gauss-Lobatto nodes."""
    coeffs = np.asarray(coeffs, dtype=float)
    m = coeffs.size - 1
    j = np.arange(m + 1)
    k = np.arange(m + 1)
    cosmat = np.cos(np.pi * np.outer(j, k) / m)
    return cosmat @ (coeffs * (-1.0) ** k)


def cheb_eval(coeffs: np.ndarray, x) -> np.ndarray:
    """Evaluate a Chebyshev series at arbitrary points of the standard interval."""
    return np.polynomial.chebyshev.chebval(np.asarray(x, dtype=float), coeffs)


def leapfrog_step(u_now: np.ndarray, u_prev: np.ndarray, rhs: np.ndarray, dt: float) -> np.ndarray:
    """One second-order step u_{n+1} = 2 u_n - u_{n-1} + dt^2 rhs."""
    return 2.0 * u_now - u_prev + (dt * dt) * rhs


def default_dt(grid: SpectralGrid, cfl: float = 0.25) -> float:
    """Time step proportional to the minimum node spacing.

    The Gauss-Lobatto spacing shrinks like 1/m^2 at the boundaries, which is
    what the explicit wave update needs; the default safety factor leaves
    headroom for the point-source terms.
    """
    return cfl * grid.min_spacing
