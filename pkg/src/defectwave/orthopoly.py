"""Legendre and probabilists' Hermite polynomials, norms, and Gauss rules.

Conventions used throughout the package:

* Bases are unnormalized: ``P_n`` with ``P_n(1) = 1`` and squared norm
  ``2/(2n+1)`` on [-1, 1]; ``He_n`` monic with squared norm
  ``sqrt(2*pi) * n!`` against the weight ``exp(-x^2/2)`` on the real line.
* Gauss rules come from the symmetric Jacobi (Golub-Welsch) eigenproblem.
  Hermite rules integrate ``f`` against ``exp(-x^2/2)`` (weight included
  in the quadrature weights, ``sum(w) = sqrt(2*pi)``).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import eigh_tridiagonal

__all__ = [
    "legendre_eval",
    "legendre_table",
    "legendre_norm",
    "legendre_series",
    "hermite_eval",
    "hermite_table",
    "hermite_norm",
    "gauss_nodes",
    "xi_triple_product",
    "legendre_deriv_product_integral",
    "HERMITE_NORM_MAX_DEGREE",
]

# sqrt(2*pi)*150! is still comfortably inside float64 range; a few dozen
# degrees higher is not, so refuse early rather than return inf.
HERMITE_NORM_MAX_DEGREE = 150


def legendre_eval(n: int, x):
    """Evaluate P_n at x (scalar or ndarray) by the three-term recurrence."""
    if n < 0:
        raise ValueError("degree must be nonnegative")
    x = np.asarray(x, dtype=float)
    if n == 0:
        return np.ones_like(x)
    p_prev = np.ones_like(x)
    p = x.copy()
    for k in range(1, n):
        p_prev, p = p, ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
    return p


def legendre_table(n_max: int, x) -> np.ndarray:
    """All P_0..P_n_max at x, shape (n_max + 1, x.size)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    table = np.empty((n_max + 1, x.size))
    table[0] = 1.0
    if n_max >= 1:
        table[1] = x
    for k in range(1, n_max):
        table[k + 1] = ((2 * k + 1) * x * table[k] - k * table[k - 1]) / (k + 1)
    return table


def legendre_norm(n: int) -> float:
    """Squared L2 norm of P_n on [-1, 1]."""
    return 2.0 / (2 * n + 1)


def legendre_series(coeffs, x):
    """Evaluate sum_n coeffs[n] P_n(x) with a running recurrence.

    Unlike building the full table this keeps only two rows alive, so it is
    safe for long coefficient vectors on large sample grids.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.ndim != 1 or coeffs.size == 0:
        raise ValueError("coeffs must be a nonempty 1-d array")
    x = np.asarray(x, dtype=float)
    acc = coeffs[0] * np.ones_like(x)
    if coeffs.size == 1:
        return acc
    p_prev = np.ones_like(x)
    p = x.copy()
    acc = acc + coeffs[1] * p
    for k in range(1, coeffs.size - 1):
        p_prev, p = p, ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
        acc += coeffs[k + 1] * p
    return acc


def hermite_eval(n: int, x):
    """Evaluate probabilists' He_n at x via He_{k+1} = x He_k - k He_{k-1}."""
    if n < 0:
        raise ValueError("degree must be nonnegative")
    x = np.asarray(x, dtype=float)
    if n == 0:
        return np.ones_like(x)
    h_prev = np.ones_like(x)
    h = x.copy()
    for k in range(1, n):
        h_prev, h = h, x * h - k * h_prev
    return h


def hermite_table(n_max: int, x) -> np.ndarray:
    """All He_0..He_n_max at x, shape (n_max + 1, x.size)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    table = np.empty((n_max + 1, x.size))
    table[0] = 1.0
    if n_max >= 1:
        table[1] = x
    for k in range(1, n_max):
        table[k + 1] = x * table[k] - k * table[k - 1]
    return table


def hermite_norm(n: int) -> float:
    """Squared norm sqrt(2*pi)*n! of He_n, accumulated in log space."""
    if n < 0:
        raise ValueError("degree must be nonnegative")
    if n > HERMITE_NORM_MAX_DEGREE:
        raise ValueError(
            f"degree {n} exceeds {HERMITE_NORM_MAX_DEGREE}; the norm would "
            "overflow float64"
        )
    return math.exp(0.5 * math.log(2.0 * math.pi) + math.lgamma(n + 1))


def gauss_nodes(family: str, n: int) -> tuple[np.ndarray, np.ndarray]:
    """n-point Gauss rule via the Jacobi-matrix eigenproblem.

    family "legendre": exact for polynomials of degree <= 2n-1 on [-1, 1].
    family "hermite": exact against exp(-x^2/2) dx on the real line.
    """
    if n < 1:
        raise ValueError("quadrature order must be >= 1")
    k = np.arange(1.0, n)
    if family == "legendre":
        beta = k / np.sqrt(4.0 * k * k - 1.0)
        mu0 = 2.0
    elif family == "hermite":
        beta = np.sqrt(k)
        mu0 = math.sqrt(2.0 * math.pi)
    else:
        raise ValueError(f"unknown quadrature family {family!r}")
    if n == 1:
        return np.zeros(1), np.array([mu0])
    nodes, vecs = eigh_tridiagonal(np.zeros(n), beta)
    weights = mu0 * vecs[0] ** 2
    return nodes, weights


def xi_triple_product(l: int, lp: int) -> float:
    """The integral of xi * P_l(xi) * P_lp(xi) over [-1, 1], closed form.

    Nonzero only for |l - lp| = 1.
    """
    if l < 0 or lp < 0:
        raise ValueError("degrees must be nonnegative")
    if l == lp + 1:
        return 2.0 * (lp + 1) / ((2 * lp + 1) * (2 * lp + 3))
    if l == lp - 1:
        return 2.0 * lp / ((2 * lp + 1) * (2 * lp - 1))
    return 0.0


def legendre_deriv_product_integral(m: int, n: int) -> float:
    """The integral of P_m'(x) * P_n'(x) over [-1, 1], closed form.

    Vanishes for m, n of opposite parity; otherwise equals k(k+1) with
    k = min(m, n).
    """
    if m < 0 or n < 0:
        raise ValueError("degrees must be nonnegative")
    if (m - n) % 2 != 0:
        return 0.0
    k = min(m, n)
    return float(k * (k + 1))
