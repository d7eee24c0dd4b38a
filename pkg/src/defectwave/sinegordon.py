"""Sine-Gordon kink dynamics with a point impurity on [-L, L].

A kink launched from x0 < 0 at velocity V runs into the impurity
eps delta(x) sin(u) at the origin and is either transmitted or captured.
The terminal value of u at the right boundary separates the two outcomes:
a transmitted front leaves u(L) near 0, a captured kink leaves it near 2pi.
The critical velocity (or critical impurity amplitude) is located by
bisection on that classification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .spectral1d import build_grid, consistent_delta, default_dt

__all__ = [
    "SgConfig",
    "OutcomeKind",
    "Outcome",
    "SgRun",
    "kink_profile",
    "evolve_sg",
    "BisectResult",
    "bisect_critical",
]

BLOWUP_LIMIT = 1e12


@dataclass(frozen=True)
class SgConfig:
    """Run parameters for the impurity sine-Gordon solver."""

    V: float
    epsilon: float
    m: int
    L: float = 8.0
    x0: float = -6.0
    t_final: float = 600.0
    dt: float | None = None
    cfl: float = 0.25

    def __post_init__(self) -> None:
        if not abs(self.V) < 1.0:
            raise ValueError("|V| must be below 1 (kink contraction factor)")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if not self.x0 < 0.0 < self.L:
            raise ValueError("need x0 < 0 < L")
        if self.m % 2 == 0:
            raise ValueError("m must be odd so the impurity sits between nodes")
        if self.t_final <= 0:
            raise ValueError("t_final must be positive")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")


class OutcomeKind(Enum):
    PASS = "pass"
    TRAPPED = "trapped"


@dataclass(frozen=True)
class Outcome:
    """Classification of one run from the right-boundary terminal value."""

    kind: OutcomeKind
    terminal_value: float


@dataclass(frozen=True)
class SgRun:
    config: SgConfig
    times: np.ndarray
    right_values: np.ndarray
    front_positions: np.ndarray
    outcome: Outcome
    final_state: np.ndarray = field(repr=False)


def kink_profile(x, t: float, x0: float, V: float) -> tuple[np.ndarray, np.ndarray]:
    """Moving-kink value and time derivative at position x and time t.

    The profile rises from 0 far left to 2pi far right with its midpoint at
    x0 + V t.  Evaluated branch-wise so large arguments neither overflow nor
    lose the 2pi plateau to rounding.
    """
    if not abs(V) < 1.0:
        raise ValueError("|V| must be below 1")
    gamma = math.sqrt(1.0 - V * V)
    z = (np.asarray(x, dtype=float) - x0 - V * t) / gamma
    u = np.where(
        z <= 0,
        4.0 * np.arctan(np.exp(np.minimum(z, 0.0))),
        2.0 * np.pi - 4.0 * np.arctan(np.exp(-np.maximum(z, 0.0))),
    )
    # sech written via exp(-|z|) to stay finite for large |z|
    e = np.exp(-np.abs(z))
    sech = 2.0 * e / (1.0 + e * e)
    ut = -(2.0 * V / gamma) * sech
    return u, ut


def _front_position(x: np.ndarray, u: np.ndarray) -> float:
    """Leftmost node where u has reached pi (the kink midpoint level)."""
    above = u >= np.pi
    if not above.any():
        return float(x[-1])
    return float(x[int(np.argmax(above))])


def evolve_sg(config: SgConfig, record_every: int | None = None) -> SgRun:
    """Leapfrog evolution of the kink-impurity system with classification.

    Left boundary follows the exact free-kink trace, right boundary is the
    first-order outflow closure.  The outcome is decided by the mean of
    u(L, t) over the final tenth of the run measured against pi.
    """
    grid = build_grid(config.m, half_width=config.L)
    x = grid.nodes
    d2 = grid.diff @ grid.diff
    delta = consistent_delta(grid)
    coef = config.epsilon * delta.values - 1.0

    dt = config.dt if config.dt is not None else default_dt(grid, config.cfl)
    nsteps = max(1, int(math.ceil(config.t_final / dt - 1e-12)))
    dt = config.t_final / nsteps
    lam = dt / (x[-1] - x[-2])
    if record_every is None:
        record_every = max(1, nsteps // 2000)

    u0, v0 = kink_profile(x, 0.0, config.x0, config.V)
    u_prev = u0
    u_now = u0 + dt * v0
    u_now[0] = kink_profile(x[0], dt, config.x0, config.V)[0]
    u_now[-1] = u_prev[-1] - lam * (u_prev[-1] - u_now[-2])

    tail_start = 0.9 * nsteps
    tail_sum = 0.0
    tail_count = 0
    rec_t: list[float] = []
    rec_right: list[float] = []
    rec_front: list[float] = []

    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, nsteps):
            rhs = d2 @ u_now + coef * np.sin(u_now)
            u_new = 2.0 * u_now - u_prev + dt * dt * rhs
            t_new = (n + 1) * dt
            u_new[0] = kink_profile(x[0], t_new, config.x0, config.V)[0]
            u_new[-1] = u_now[-1] - lam * (u_now[-1] - u_new[-2])
            u_prev, u_now = u_now, u_new
            if n % 100 == 0 or n == nsteps - 1:
                amp = float(np.max(np.abs(u_now)))
                if not np.isfinite(amp) or amp > BLOWUP_LIMIT:
                    raise RuntimeError(
                        f"solution blew up at t = {t_new:.6g} (max |u| = {amp:.3e})"
                    )
            if n >= tail_start:
                tail_sum += float(u_now[-1])
                tail_count += 1
            if n % record_every == 0 or n == nsteps - 1:
                rec_t.append(t_new)
                rec_right.append(float(u_now[-1]))
                rec_front.append(_front_position(x, u_now))

    terminal = tail_sum / max(tail_count, 1)
    kind = OutcomeKind.PASS if terminal < np.pi else OutcomeKind.TRAPPED
    return SgRun(
        config=config,
        times=np.array(rec_t),
        right_values=np.array(rec_right),
        front_positions=np.array(rec_front),
        outcome=Outcome(kind=kind, terminal_value=terminal),
        final_state=u_now,
    )


@dataclass(frozen=True)
class BisectResult:
    lo: float
    hi: float
    history: list[tuple[int, float, OutcomeKind]]

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo


def _outcome_kind(result) -> OutcomeKind:
    if isinstance(result, OutcomeKind):
        return result
    if isinstance(result, Outcome):
        return result.kind
    raise TypeError("classifier must return Outcome or OutcomeKind")


def bisect_critical(
    lo: float,
    hi: float,
    classify: Callable[[float], Outcome | OutcomeKind],
    tol: float,
    direction: str = "trapped-below",
) -> BisectResult:
    """Bracket the parameter where the outcome flips, to width <= tol.

    direction "trapped-below" means small parameter values trap (the velocity
    search); "trapped-above" means large values trap (the amplitude search).
    Endpoints are classified first and must disagree.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if direction not in ("trapped-below", "trapped-above"):
        raise ValueError(f"unknown direction {direction!r}")
    if not lo < hi:
        raise ValueError("need lo < hi")

    lo_kind = _outcome_kind(classify(lo))
    hi_kind = _outcome_kind(classify(hi))
    if lo_kind == hi_kind:
        raise ValueError(
            f"no bracket: both endpoints classify as {lo_kind.value} on [{lo}, {hi}]"
        )
    lo_side_kind = OutcomeKind.TRAPPED if direction == "trapped-below" else OutcomeKind.PASS
    if lo_kind != lo_side_kind:
        raise ValueError(
            f"direction {direction!r} expects the low endpoint to be {lo_side_kind.value}, "
            f"got {lo_kind.value}"
        )

    history: list[tuple[int, float, OutcomeKind]] = []
    iteration = 0
    while hi - lo > tol:
        iteration += 1
        mid = 0.5 * (lo + hi)
        kind = _outcome_kind(classify(mid))
        history.append((iteration, mid, kind))
        if kind == lo_side_kind:
            lo = mid
        else:
            hi = mid
    return BisectResult(lo=lo, hi=hi, history=history)
