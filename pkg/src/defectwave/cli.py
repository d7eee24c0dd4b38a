"""Command-line driver for the defect-wave experiments.

Each invocation runs one experiment described by a TOML configuration file
and writes its artifacts to an output directory: CSV tables (RFC-4180 style,
header row, floats printed with 17 significant digits) and a ``manifest.json``
recording the configuration echo, the library version, the wall time, and the
scalar results.  Runs are deterministic for a given configuration and seed,
so repeated invocations produce byte-identical CSV files.

Exit status is 0 on success, 2 for a configuration problem (the message
names the offending key), and 3 for a numerical failure such as a blown-up
evolution or a bisection bracket whose endpoints classify identically.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import io
import json
import math
import os
import sys
import tempfile
import time
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import gpc_kg, gpc_sg, kleingordon, sinegordon

__all__ = [
    "ConfigError",
    "ExperimentResult",
    "EXPERIMENT_NAMES",
    "load_config",
    "main",
    "plan_experiment",
]


class ConfigError(ValueError):
    """Configuration problem; ``key`` names the offending key."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class ExperimentResult:
    """Artifacts produced by one experiment run."""

    results: dict[str, Any]
    tables: dict[str, tuple[list[str], list[list[Any]]]] = field(default_factory=dict)
    extra_artifacts: list[str] = field(default_factory=list)
    failure: str | None = None


# A plan is the validated, not-yet-executed form of an experiment: building
# it consumes and checks the configuration (errors exit 2), calling it runs
# the numerics (errors exit 3).
Plan = Callable[[str], ExperimentResult]


# ---------------------------------------------------------------------------
# configuration loading


def _flatten_sections(raw: dict) -> dict:
    """Merge one level of TOML sections into a flat key-value mapping."""
    flat: dict[str, Any] = {}
    for key, value in raw.items():
        if isinstance(value, dict):
            for inner_key, inner_value in value.items():
                if isinstance(inner_value, dict):
                    raise ConfigError(
                        f"{key}.{inner_key}", "sections may not nest further tables"
                    )
                if inner_key in flat:
                    raise ConfigError(inner_key, "key is set more than once")
                flat[inner_key] = inner_value
        else:
            if key in flat:
                raise ConfigError(key, "key is set more than once")
            flat[key] = value
    return flat


def load_config(path: str) -> dict:
    """Read a TOML config file and flatten its sections."""
    try:
        with open(path, "rb") as handle:
            raw = tomllib.load(handle)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"{path} is not valid TOML: {exc}") from exc
    return _flatten_sections(raw)


class Params:
    """Typed accessor over the flat key-value configuration."""

    def __init__(self, data: dict):
        self._data = dict(data)
        self._used: set[str] = set()

    def _fetch(self, key: str, kind: str, default: Any, required: bool) -> Any:
        if key not in self._data:
            if required:
                raise ConfigError(key, "required key is missing")
            return default
        self._used.add(key)
        value = self._data[key]
        return _coerce(key, value, kind)

    def require(self, key: str, kind: str) -> Any:
        return self._fetch(key, kind, None, required=True)

    def get(self, key: str, kind: str, default: Any) -> Any:
        return self._fetch(key, kind, default, required=False)

    def remaining(self) -> dict:
        """Unconsumed keys, handed to an inner experiment by the sweep driver."""
        out = {k: v for k, v in self._data.items() if k not in self._used}
        self._used.update(out)
        return out

    def reject_unknown(self) -> None:
        leftover = [k for k in self._data if k not in self._used]
        if leftover:
            raise ConfigError(leftover[0], "unknown key")


def _coerce(key: str, value: Any, kind: str) -> Any:
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, "must be a number")
        return float(value)
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, "must be an integer")
        return int(value)
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(key, "must be a string")
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(key, "must be a boolean")
        return value
    if kind == "float-list":
        items = value if isinstance(value, list) else [value]
        if not items:
            raise ConfigError(key, "must not be empty")
        out = []
        for item in items:
            if isinstance(item, bool) or not isinstance(item, (int, float)):
                raise ConfigError(key, "must be a list of numbers")
            out.append(float(item))
        return out
    if kind == "int-list":
        items = value if isinstance(value, list) else [value]
        if not items:
            raise ConfigError(key, "must not be empty")
        out = []
        for item in items:
            if isinstance(item, bool) or not isinstance(item, int):
                raise ConfigError(key, "must be a list of integers")
            out.append(int(item))
        return out
    if kind == "list":
        if not isinstance(value, list) or not value:
            raise ConfigError(key, "must be a non-empty list")
        return list(value)
    raise AssertionError(f"unhandled kind {kind!r}")


# ---------------------------------------------------------------------------
# shared validation helpers


def _check_odd_order(key: str, m: int) -> int:
    if m < 3 or m % 2 == 0:
        raise ConfigError(key, "grid order must be an odd integer of at least 3")
    return m


def _check_positive(key: str, value: float) -> float:
    if not value > 0:
        raise ConfigError(key, "must be positive")
    return value


def _get_step_controls(p: Params) -> tuple[float | None, float]:
    dt = p.get("dt", "float", None)
    if dt is not None:
        _check_positive("dt", dt)
    cfl = _check_positive("cfl", p.get("cfl", "float", 0.25))
    return dt, cfl


def _get_record_every(p: Params) -> int | None:
    value = p.get("record_every", "int", None)
    if value is not None and value < 1:
        raise ConfigError("record_every", "must be at least 1")
    return value


def _tail_rate(times: np.ndarray, energy: np.ndarray, rates: np.ndarray) -> float:
    """Secular energy slope over the last fifth of the recorded window.

    The instantaneous rate oscillates with the trapped breathing, so the
    terminal trend is read from the energy drift instead.
    """
    if len(times) < 2:
        return float(rates[-1])
    idx = int(np.searchsorted(times, times[-1] - 0.2 * (times[-1] - times[0])))
    idx = min(idx, len(times) - 2)
    span = times[-1] - times[idx]
    if span <= 0:
        return float(rates[-1])
    return float((energy[-1] - energy[idx]) / span)


# ---------------------------------------------------------------------------
# experiment planners


def _plan_kg_run(p: Params, threads: int) -> Plan:
    eta = p.require("eta", "float")
    if not math.isfinite(eta):
        raise ConfigError("eta", "must be finite")
    m = _check_odd_order("m", p.require("m", "int"))
    t_final = _check_positive("t_final", p.require("t_final", "float"))
    dt, cfl = _get_step_controls(p)
    linearized_sg = p.get("linearized_sg", "bool", False)
    record_every = _get_record_every(p)
    flat_tol = _check_positive("flat_tol", p.get("flat_tol", "float", 1e-5))

    def execute(out_dir: str) -> ExperimentResult:
        config = kleingordon.KgConfig(
            eta=eta, m=m, t_final=t_final, dt=dt, linearized_sg=linearized_sg, cfl=cfl
        )
        run = kleingordon.evolve_kg(config, record_every=record_every)
        series = run.energy
        rate = _tail_rate(series.times, series.energy, series.energy_rate)
        if rate < -flat_tol:
            trend = "decreasing"
        elif rate > flat_tol:
            trend = "increasing"
        else:
            trend = "steady"
        rows = [
            [t, r, e, de]
            for t, r, e, de in zip(
                run.times, run.right_values, series.energy, series.energy_rate
            )
        ]
        return ExperimentResult(
            results={
                "eta": eta,
                "m": m,
                "t_final": t_final,
                "final_energy": float(series.energy[-1]),
                "final_energy_rate": float(series.energy_rate[-1]),
                "tail_energy_rate": rate,
                "trend": trend,
                "final_right_value": float(run.right_values[-1]),
            },
            tables={
                "series.csv": (
                    ["time", "right_value", "energy", "energy_rate"],
                    rows,
                )
            },
        )

    return execute


def _plan_kg_critical(p: Params, threads: int) -> Plan:
    mode = p.get("mode", "str", "discrete")
    if mode not in ("discrete", "analytic"):
        raise ConfigError("mode", 'must be "discrete" or "analytic"')

    if mode == "discrete":
        m = _check_odd_order("m", p.require("m", "int"))
        method = p.get("method", "str", "eigen")
        if method not in ("eigen", "bisect"):
            raise ConfigError("method", 'must be "eigen" or "bisect"')
        bracket = p.get("bracket", "float-list", [1.0, 1.1])
        if len(bracket) != 2 or not bracket[0] < bracket[1]:
            raise ConfigError("bracket", "must be two increasing numbers")
        tol = _check_positive("tol", p.get("tol", "float", 1e-12))

        def execute(out_dir: str) -> ExperimentResult:
            eta_n = kleingordon.critical_eta_discrete(
                m, method=method, bracket=(bracket[0], bracket[1]), tol=tol
            )
            return ExperimentResult(
                results={"m": m, "npoints": m + 1, "method": method, "eta_n": eta_n},
                tables={
                    "results.csv": (["m", "npoints", "eta_n"], [[m, m + 1, eta_n]])
                },
            )

        return execute

    alphas = p.get("alpha", "float-list", [0.0, 0.5, -0.5])
    for a in alphas:
        if not -1.0 < a < 1.0:
            raise ConfigError("alpha", "each value must lie strictly inside (-1, 1)")
    amplitude = p.get("C", "float", 1.0)

    def execute_analytic(out_dir: str) -> ExperimentResult:
        rows = []
        for a in alphas:
            _, eta_c = kleingordon.steady_state_analytic(a, amplitude)
            rows.append([a, eta_c])
        sg_critical, _ = kleingordon.linearized_sg_critical(amplitude)
        return ExperimentResult(
            results={
                "steady_state": [[a, e] for a, e in rows],
                "linearized_sg_critical": sg_critical,
            },
            tables={"results.csv": (["alpha", "eta_c"], rows)},
        )

    return execute_analytic


def _plan_kg_gpc(p: Params, threads: int) -> Plan:
    a = p.require("eta_a", "float")
    b = p.require("eta_b", "float")
    if not 0.0 < a < b:
        raise ConfigError("eta_a/eta_b", "need 0 < eta_a < eta_b")
    method = p.get("method", "str", "gpc")
    if method not in ("gpc", "mc", "both"):
        raise ConfigError("method", 'must be "gpc", "mc", or "both"')
    times = p.get("snapshot_times", "float-list", [300.0, 350.0])
    if len(times) < 2 or times[0] <= 0 or any(
        t1 >= t2 for t1, t2 in zip(times, times[1:])
    ):
        raise ConfigError(
            "snapshot_times", "must be at least two positive, strictly increasing times"
        )
    truncation = p.get("truncation", "int", 80)
    if truncation < 0:
        raise ConfigError("truncation", "must be nonnegative")
    m = _check_odd_order("m", p.get("m", "int", 63))
    n_xi = p.get("n_xi", "int", 1_000_000)
    if n_xi < 2:
        raise ConfigError("n_xi", "must be at least 2")
    samples = p.get("samples", "int", 10_000)
    if samples < 2:
        raise ConfigError("samples", "must be at least 2")
    dt, cfl = _get_step_controls(p)
    mc_cfl = _check_positive("mc_cfl", p.get("mc_cfl", "float", cfl))

    def execute(out_dir: str) -> ExperimentResult:
        results: dict[str, Any] = {
            "eta_a": a,
            "eta_b": b,
            "snapshot_times": list(times),
        }
        rows = []
        if method in ("gpc", "both"):
            system, snaps = gpc_kg.assemble_and_evolve(
                truncation, a, b, m, times[-1], snapshot_times=times, dt=dt, cfl=cfl
            )
            loci = [gpc_kg.locus_snapshot(s, system, n_xi=n_xi) for s in snaps]
            est = gpc_kg.critical_eta_from_loci(loci)
            results["eta_c_gpc"] = est.value
            results["gpc_bracket"] = list(est.bracket)
            results["gpc_history"] = list(est.history)
            rows.append(["chaos-locus", est.value, est.bracket[0], est.bracket[1]])
        if method in ("mc", "both"):
            loci = gpc_kg.mc_loci(a, b, samples, times, m=m, dt=dt, cfl=mc_cfl)
            est = gpc_kg.critical_eta_from_loci(loci, method="direct-sampling")
            results["eta_c_mc"] = est.value
            results["mc_bracket"] = list(est.bracket)
            results["samples"] = samples
            rows.append(["direct-sampling", est.value, est.bracket[0], est.bracket[1]])
        if method == "both":
            results["gpc_mc_difference"] = abs(
                results["eta_c_gpc"] - results["eta_c_mc"]
            )
        return ExperimentResult(
            results=results,
            tables={
                "results.csv": (["method", "eta_c", "bracket_lo", "bracket_hi"], rows)
            },
        )

    return execute


def _plan_sg_run(p: Params, threads: int) -> Plan:
    V = p.require("V", "float")
    if not abs(V) < 1.0:
        raise ConfigError("V", "|V| must be below 1")
    epsilon = p.get("epsilon", "float", 0.5)
    if epsilon < 0:
        raise ConfigError("epsilon", "must be nonnegative")
    m = _check_odd_order("m", p.get("m", "int", 127))
    L = _check_positive("L", p.get("L", "float", 8.0))
    x0 = p.get("x0", "float", -6.0)
    if not x0 < 0:
        raise ConfigError("x0", "must be negative")
    t_final = _check_positive("t_final", p.get("t_final", "float", 600.0))
    dt, cfl = _get_step_controls(p)
    record_every = _get_record_every(p)

    def execute(out_dir: str) -> ExperimentResult:
        config = sinegordon.SgConfig(
            V=V, epsilon=epsilon, m=m, L=L, x0=x0, t_final=t_final, dt=dt, cfl=cfl
        )
        run = sinegordon.evolve_sg(config, record_every=record_every)
        rows = [
            [t, r, f]
            for t, r, f in zip(run.times, run.right_values, run.front_positions)
        ]
        return ExperimentResult(
            results={
                "V": V,
                "epsilon": epsilon,
                "outcome": run.outcome.kind.value,
                "terminal_value": run.outcome.terminal_value,
                "final_front_position": float(run.front_positions[-1]),
            },
            tables={
                "series.csv": (
                    ["time", "right_value", "front_position"],
                    rows,
                )
            },
        )

    return execute


def _plan_sg_bisect(p: Params, threads: int) -> Plan:
    vary = p.get("vary", "str", "V")
    if vary not in ("V", "epsilon"):
        raise ConfigError("vary", 'must be "V" or "epsilon"')
    lo = p.require("lo", "float")
    hi = p.require("hi", "float")
    if not lo < hi:
        raise ConfigError("lo/hi", "need lo < hi")
    tol = _check_positive("tol", p.get("tol", "float", 1e-6))
    m = _check_odd_order("m", p.get("m", "int", 127))
    L = _check_positive("L", p.get("L", "float", 8.0))
    x0 = p.get("x0", "float", -6.0)
    if not x0 < 0:
        raise ConfigError("x0", "must be negative")
    t_final = _check_positive("t_final", p.get("t_final", "float", 600.0))
    dt, cfl = _get_step_controls(p)

    if vary == "V":
        if not (-1.0 < lo and hi < 1.0):
            raise ConfigError("lo/hi", "velocities must lie inside (-1, 1)")
        epsilon = p.get("epsilon", "float", 0.5)
        if epsilon < 0:
            raise ConfigError("epsilon", "must be nonnegative")
        fixed = epsilon
        direction = "trapped-below"
        result_key = "V_c"
    else:
        if lo < 0:
            raise ConfigError("lo/hi", "amplitudes must be nonnegative")
        V = p.require("V", "float")
        if not abs(V) < 1.0:
            raise ConfigError("V", "|V| must be below 1")
        fixed = V
        direction = "trapped-above"
        result_key = "eps_c"

    def execute(out_dir: str) -> ExperimentResult:
        def classify(value: float):
            if vary == "V":
                config = sinegordon.SgConfig(
                    V=value, epsilon=fixed, m=m, L=L, x0=x0,
                    t_final=t_final, dt=dt, cfl=cfl,
                )
            else:
                config = sinegordon.SgConfig(
                    V=fixed, epsilon=value, m=m, L=L, x0=x0,
                    t_final=t_final, dt=dt, cfl=cfl,
                )
            return sinegordon.evolve_sg(config).outcome

        res = sinegordon.bisect_critical(lo, hi, classify, tol, direction=direction)
        rows = [[it, mid, kind.value] for it, mid, kind in res.history]
        return ExperimentResult(
            results={
                "vary": vary,
                result_key: res.midpoint,
                "bracket_lo": res.lo,
                "bracket_hi": res.hi,
                "width": res.width,
                "solver_runs": len(res.history) + 2,
            },
            tables={"history.csv": (["iteration", vary, "outcome"], rows)},
        )

    return execute


def _consume_sg_chaos_common(p: Params) -> dict:
    common: dict[str, Any] = {}
    common["m"] = _check_odd_order("m", p.get("m", "int", 127))
    common["L"] = _check_positive("L", p.get("L", "float", 8.0))
    common["x0"] = p.get("x0", "float", -6.0)
    if not common["x0"] < 0:
        raise ConfigError("x0", "must be negative")
    common["t_final"] = _check_positive("t_final", p.get("t_final", "float", 600.0))
    common["dt"], common["cfl"] = _get_step_controls(p)
    common["record_every"] = _get_record_every(p)
    return common


def _check_chaos_truncation(p: Params, default: int) -> tuple[int, int]:
    truncation = p.get("truncation", "int", default)
    if truncation < 0:
        raise ConfigError("truncation", "must be nonnegative")
    n_quad = p.get("n_quad", "int", max(30, truncation + 1))
    if n_quad < truncation + 1:
        raise ConfigError("n_quad", "must be at least truncation + 1")
    return truncation, n_quad


def _sg_chaos_result(run: gpc_sg.SgChaosRun, extra: dict[str, Any]) -> ExperimentResult:
    profile_rows = [
        [x, mu, sd] for x, mu, sd in zip(run.x, run.mean_profile, run.std_profile)
    ]
    trace_rows = [[t, v] for t, v in zip(run.times, run.right_mean_trace)]
    results = {
        "chaos": run.chaos,
        "u_bar": run.mean_at_right,
        "std_at_right": run.std_at_right,
        **extra,
        "critical": run.critical.as_dict(),
    }
    return ExperimentResult(
        results=results,
        tables={
            "profile.csv": (["x", "mean", "std"], profile_rows),
            "trace.csv": (["time", "right_mean"], trace_rows),
        },
    )


def _plan_sg_gpc_v(p: Params, threads: int) -> Plan:
    Va = p.require("Va", "float")
    Vb = p.require("Vb", "float")
    if not 0.0 < Va < Vb < 1.0:
        raise ConfigError("Va/Vb", "need 0 < Va < Vb < 1")
    truncation, n_quad = _check_chaos_truncation(p, 14)
    epsilon = p.get("epsilon", "float", 0.5)
    if epsilon < 0:
        raise ConfigError("epsilon", "must be nonnegative")
    common = _consume_sg_chaos_common(p)

    def execute(out_dir: str) -> ExperimentResult:
        run = gpc_sg.evolve_gpc_sg_legendre_V(
            Va, Vb, truncation=truncation, epsilon=epsilon, n_quad=n_quad, **common
        )
        return _sg_chaos_result(run, {"V_c": run.critical.value})

    return execute


def _plan_sg_gpc_hermite(p: Params, threads: int) -> Plan:
    mu = p.require("mu", "float")
    sigma = _check_positive("sigma", p.require("sigma", "float"))
    alpha = p.require("alpha", "float")
    beta = p.require("beta", "float")
    if not 0.0 < alpha < beta < 1.0:
        raise ConfigError("alpha/beta", "need 0 < alpha < beta < 1")
    truncation, n_quad = _check_chaos_truncation(p, 7)
    epsilon = p.get("epsilon", "float", 0.5)
    if epsilon < 0:
        raise ConfigError("epsilon", "must be nonnegative")
    common = _consume_sg_chaos_common(p)

    def execute(out_dir: str) -> ExperimentResult:
        run = gpc_sg.evolve_gpc_sg_hermite(
            mu, sigma, alpha, beta,
            truncation=truncation, epsilon=epsilon, n_quad=n_quad, **common,
        )
        return _sg_chaos_result(run, {"V_c": run.critical.value})

    return execute


def _plan_sg_gpc_eps(p: Params, threads: int) -> Plan:
    eps_a = p.require("eps_a", "float")
    eps_b = p.require("eps_b", "float")
    if not 0.0 < eps_a < eps_b:
        raise ConfigError("eps_a/eps_b", "need 0 < eps_a < eps_b")
    V = p.get("V", "float", 0.1215)
    if not abs(V) < 1.0:
        raise ConfigError("V", "|V| must be below 1")
    truncation, n_quad = _check_chaos_truncation(p, 14)
    common = _consume_sg_chaos_common(p)

    def execute(out_dir: str) -> ExperimentResult:
        run = gpc_sg.evolve_gpc_sg_legendre_eps(
            eps_a, eps_b, V=V, truncation=truncation, n_quad=n_quad, **common
        )
        return _sg_chaos_result(run, {"eps_c": run.critical.value})

    return execute


def _plan_mean_compare(p: Params, threads: int) -> Plan:
    a = p.require("eta_a", "float")
    b = p.require("eta_b", "float")
    if not 0.0 < a < b:
        raise ConfigError("eta_a/eta_b", "need 0 < eta_a < eta_b")
    truncation = p.get("truncation", "int", 80)
    if truncation < 0:
        raise ConfigError("truncation", "must be nonnegative")
    m = _check_odd_order("m", p.get("m", "int", 63))
    t_final = _check_positive("t_final", p.get("t_final", "float", 100.0))
    quad_points = p.get("quad_points", "int", 50)
    if quad_points < 1:
        raise ConfigError("quad_points", "must be at least 1")
    mc_sweep = p.get("mc_sweep", "int-list", [])
    if mc_sweep:
        if sorted(mc_sweep) != mc_sweep or len(set(mc_sweep)) != len(mc_sweep):
            raise ConfigError("mc_sweep", "sample counts must be strictly increasing")
        if mc_sweep[0] < 2:
            raise ConfigError("mc_sweep", "sample counts must be at least 2")
        if any(mc_sweep[-1] % count for count in mc_sweep):
            raise ConfigError(
                "mc_sweep",
                "every sample count must divide the largest one, so the "
                "sweep reuses nested subsets of a single sample set",
            )
    dt, cfl = _get_step_controls(p)

    def execute(out_dir: str) -> ExperimentResult:
        system, snaps = gpc_kg.assemble_and_evolve(
            truncation, a, b, m, t_final, snapshot_times=[t_final], dt=dt, cfl=cfl
        )
        chaos_mean = gpc_kg.gpc_mean(snaps[-1])
        quad_mean = gpc_kg.quadrature_mean(a, b, quad_points, t_final, m=m, dt=dt, cfl=cfl)
        diff = np.abs(chaos_mean - quad_mean)
        profile_rows = [
            [x, g, q, d]
            for x, g, q, d in zip(system.grid.nodes, chaos_mean, quad_mean, diff)
        ]
        results: dict[str, Any] = {
            "eta_a": a,
            "eta_b": b,
            "quad_points": quad_points,
            "max_abs_difference": float(diff.max()),
        }
        tables = {
            "profile.csv": (
                ["x", "chaos_mean", "quadrature_mean", "abs_difference"],
                profile_rows,
            )
        }
        if mc_sweep:
            m_max = mc_sweep[-1]
            _, fields = gpc_kg.mc_mean(
                a, b, m_max, t_final, m=m, dt=dt, cfl=cfl, return_samples=True
            )
            error_rows = []
            errors = []
            for count in mc_sweep:
                stride = m_max // count
                sub = fields[::stride]
                mean = (0.5 * sub[0] + sub[1:-1].sum(axis=0) + 0.5 * sub[-1]) / count
                err = float(np.max(np.abs(mean - chaos_mean)))
                errors.append(err)
                error_rows.append([count, err])
            results["mc_errors"] = [list(row) for row in error_rows]
            if len(errors) >= 2 and all(e > 0 for e in errors):
                slope = np.polyfit(np.log(mc_sweep), np.log(errors), 1)[0]
                results["mc_slope"] = float(slope)
            tables["mc_errors.csv"] = (["samples", "max_error"], error_rows)
        return ExperimentResult(results=results, tables=tables)

    return execute


# Inner experiments the sweep driver can run, and the scalar (plus optional
# annotation) each one contributes to a sweep row.
_SWEEP_SCALARS: dict[str, tuple[str, str | None]] = {
    "kg-run": ("tail_energy_rate", "trend"),
    "kg-critical": ("eta_n", None),
    "sg-run": ("terminal_value", "outcome"),
    "mean-compare": ("max_abs_difference", None),
}


def _plan_convergence(p: Params, threads: int) -> Plan:
    inner = p.require("inner", "str")
    if inner not in _SWEEP_SCALARS:
        raise ConfigError(
            "inner", f"must be one of {', '.join(sorted(_SWEEP_SCALARS))}"
        )
    sweep_key = p.require("sweep_key", "str")
    sweep = p.require("sweep", "list")
    fit_slope = p.get("fit_slope", "bool", False)
    base = p.remaining()

    plans = []
    for value in sweep:
        row_params = Params({**base, sweep_key: value})
        plans.append(EXPERIMENTS[inner](row_params, 1))
        row_params.reject_unknown()

    scalar_key, extra_key = _SWEEP_SCALARS[inner]

    def execute(out_dir: str) -> ExperimentResult:
        rows_dir = os.path.join(out_dir, "rows")
        os.makedirs(rows_dir, exist_ok=True)

        outcomes: list[tuple[Any, Any, str, dict | None] | None] = [None] * len(sweep)
        if threads > 1:
            with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
                futures = {
                    pool.submit(_run_sweep_row, plans[i], out_dir, scalar_key, extra_key): i
                    for i in range(len(sweep))
                }
                for future, index in futures.items():
                    outcomes[index] = future.result()
        else:
            for index in range(len(sweep)):
                outcomes[index] = _run_sweep_row(
                    plans[index], out_dir, scalar_key, extra_key
                )

        rows = []
        failed = []
        artifacts = []
        for index, (value, outcome) in enumerate(zip(sweep, outcomes)):
            scalar, extra, status, row_results = outcome
            rows.append([value, scalar, extra, status])
            if status != "ok":
                failed.append(value)
            row_path = os.path.join("rows", f"row_{index:03d}.json")
            _write_atomic(
                os.path.join(out_dir, row_path),
                json.dumps(
                    {
                        "index": index,
                        sweep_key: _jsonable(value),
                        "status": status,
                        "results": _jsonable(row_results),
                    },
                    indent=2,
                )
                + "\n",
            )
            artifacts.append(row_path)

        results: dict[str, Any] = {
            "inner": inner,
            "sweep_key": sweep_key,
            "rows": [[v, s, e, st] for v, s, e, st in rows],
        }
        if fit_slope:
            ok_pairs = [
                (v, s)
                for (v, s, _, st) in rows
                if st == "ok" and isinstance(v, (int, float)) and v > 0
                and isinstance(s, (int, float)) and s > 0
            ]
            if len(ok_pairs) >= 2:
                xs = np.log([v for v, _ in ok_pairs])
                ys = np.log([s for _, s in ok_pairs])
                results["slope"] = float(np.polyfit(xs, ys, 1)[0])
            else:
                warnings.warn(
                    "fewer than two positive rows; log-log slope not computed",
                    RuntimeWarning,
                    stacklevel=2,
                )
        failure = None
        if failed:
            failure = (
                f"{len(failed)} of {len(sweep)} sweep rows failed "
                f"({sweep_key} = {failed}); see results.csv"
            )
        return ExperimentResult(
            results=results,
            tables={
                "results.csv": (
                    [sweep_key, "value", "extra", "status"],
                    rows,
                )
            },
            extra_artifacts=artifacts,
            failure=failure,
        )

    return execute


def _run_sweep_row(
    plan: Plan, out_dir: str, scalar_key: str, extra_key: str | None
) -> tuple[Any, Any, str, dict | None]:
    try:
        res = plan(out_dir)
    except Exception as exc:  # noqa: BLE001 - row errors are recorded, sweep continues
        return None, None, f"error: {exc}", None
    scalar = res.results.get(scalar_key)
    extra = res.results.get(extra_key) if extra_key else None
    return scalar, extra, "ok", res.results


EXPERIMENTS: dict[str, Callable[[Params, int], Plan]] = {
    "kg-run": _plan_kg_run,
    "kg-critical": _plan_kg_critical,
    "kg-gpc": _plan_kg_gpc,
    "sg-run": _plan_sg_run,
    "sg-bisect": _plan_sg_bisect,
    "sg-gpc-v": _plan_sg_gpc_v,
    "sg-gpc-hermite": _plan_sg_gpc_hermite,
    "sg-gpc-eps": _plan_sg_gpc_eps,
    "convergence": _plan_convergence,
    "mean-compare": _plan_mean_compare,
}

EXPERIMENT_NAMES = tuple(EXPERIMENTS)


def plan_experiment(name: str, params: Params, threads: int = 1) -> Plan:
    """Validate a configuration and return the runnable plan."""
    return EXPERIMENTS[name](params, threads)


# ---------------------------------------------------------------------------
# artifact output


def _format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _render_csv(header: list[str], rows: list[list[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_format_cell(cell) for cell in row])
    return buffer.getvalue()


def _write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(path) or "."
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def _jsonable(value: Any):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (bool, int, float, str)) or value is None:
        return value
    return str(value)


def _library_version() -> str:
    try:
        from importlib.metadata import version

        return version("defectwave")
    except Exception:  # noqa: BLE001 - version lookup is best-effort
        from . import __version__

        return __version__


# ---------------------------------------------------------------------------
# entry point


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="defectwave",
        description="Run one defect-wave experiment from a TOML config file.",
    )
    parser.add_argument(
        "experiment",
        choices=EXPERIMENT_NAMES,
        help="experiment to run; must match the config file if named there",
    )
    parser.add_argument(
        "--config", required=True, help="path to the TOML configuration file"
    )
    parser.add_argument(
        "--out",
        default=None,
        help="output directory (overrides output_dir from the config)",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=1,
        help="worker threads for sweep rows (default 1)",
    )
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be at least 1")

    try:
        flat = load_config(args.config)
        config_echo = dict(flat)
        declared = flat.pop("experiment", None)
        if declared is not None and declared != args.experiment:
            raise ConfigError(
                "experiment",
                f"config names {declared!r} but {args.experiment!r} was requested",
            )
        out_dir = flat.pop("output_dir", ".")
        if not isinstance(out_dir, str):
            raise ConfigError("output_dir", "must be a string")
        if args.out is not None:
            out_dir = args.out
        seed = flat.pop("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise ConfigError("seed", "must be an integer")
        params = Params(flat)
        plan = plan_experiment(args.experiment, params, args.threads)
        params.reject_unknown()
    except ConfigError as exc:
        print(f"defectwave: config error: {exc}", file=sys.stderr)
        return 2

    os.makedirs(out_dir, exist_ok=True)
    start = time.perf_counter()
    captured: list[str] = []
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            result = plan(out_dir)
        captured = [f"{w.category.__name__}: {w.message}" for w in caught]
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"defectwave: numerical failure: {exc}", file=sys.stderr)
        return 3
    wall = time.perf_counter() - start

    artifacts = ["manifest.json"] + list(result.tables) + result.extra_artifacts
    for name, (header, rows) in result.tables.items():
        _write_atomic(os.path.join(out_dir, name), _render_csv(header, rows))
    manifest = {
        "experiment": args.experiment,
        "config_path": os.path.abspath(args.config),
        "config": _jsonable(config_echo),
        "seed": seed,
        "output_dir": out_dir,
        "library_version": _library_version(),
        "wall_time_seconds": wall,
        "warnings": captured,
        "results": _jsonable(result.results),
        "artifacts": artifacts,
    }
    _write_atomic(
        os.path.join(out_dir, "manifest.json"), json.dumps(manifest, indent=2) + "\n"
    )

    if result.failure:
        print(f"defectwave: numerical failure: {result.failure}", file=sys.stderr)
        return 3

    print(f"{args.experiment}: ok in {wall:.2f} s -> {out_dir}")
    for key, value in result.results.items():
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            continue
        shown = repr(value) if isinstance(value, float) else value
        print(f"  {key} = {shown}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
