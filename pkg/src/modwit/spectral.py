"""Uncertainty constant for modular variances.

``C`` is the smallest eigenvalue of ``n^2 + ell^2 s^2``.  In the integer
basis ``sqrt(ell) * exp(2 pi i n ell s)`` on the base remainder cell,
``n^2`` is diagonal and ``ell^2 s^2`` is a real symmetric Toeplitz matrix
with elements ``1/12`` on the diagonal and ``(-1)^k / (2 pi^2 k^2)`` at
offset ``k``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh, toeplitz

DEFAULT_NMAX = 64
CONVERGENCE_STEP = 8
CONVERGENCE_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class EigenReport:
    n_max: int
    c_value: float
    convergence_delta: float
    ground_state: np.ndarray

    @property
    def converged(self) -> bool:
        return self.convergence_delta < CONVERGENCE_TOL

    def to_dict(self) -> dict:
        return {
            "n_max": self.n_max,
            "c_value": self.c_value,
            "convergence_delta": self.convergence_delta,
            "converged": self.converged,
        }


def s_squared_matrix_element(n: int, n_prime: int) -> float:
    """Element ``<n| ell^2 s^2 |n'>``; independent of ``ell``."""
    k = int(n) - int(n_prime)
    if k == 0:
        return 1.0 / 12.0
    return (-1.0) ** k / (2.0 * math.pi**2 * k * k)


def s_squared_matrix(n_max: int, ell: float = 1.0) -> np.ndarray:
    """Matrix of ``ell^2 s^2`` on indices ``-n_max..n_max``.

    The ``s^2`` elements scale as ``1/ell^2``, which the prefactor cancels.
    """
    k = np.arange(2 * n_max + 1)
    with np.errstate(divide="ignore"):
        col = np.where(k == 0, 1.0 / 12.0, (-1.0) ** k / (2.0 * np.pi**2 * k * k))
    s2 = toeplitz(col) / ell**2
    return ell**2 * s2


def operator_matrix(n_max: int, ell: float = 1.0) -> np.ndarray:
    n = np.arange(-n_max, n_max + 1, dtype=float)
    return np.diag(n * n) + s_squared_matrix(n_max, ell)


def _lowest(n_max: int, ell: float):
    w, v = eigh(operator_matrix(n_max, ell), subset_by_index=[0, 0])
    return float(w[0]), v[:, 0]


def constant_c(n_max: int = DEFAULT_NMAX, ell: float = 1.0) -> EigenReport:
    """Smallest eigenvalue of the truncated ``n^2 + ell^2 s^2``.

    ``convergence_delta`` compares against truncation ``n_max - 8`` (floored
    at zero).
    """
    if int(n_max) != n_max or n_max < 0:
        raise ValueError(f"n_max must be a non-negative integer, got {n_max}")
    n_max = int(n_max)
    c, vec = _lowest(n_max, ell)
    c_prev, _ = _lowest(max(0, n_max - CONVERGENCE_STEP), ell)
    vec = vec if vec[n_max] >= 0 else -vec
    return EigenReport(n_max, c, abs(c - c_prev), vec)


@functools.lru_cache(maxsize=None)
def default_c() -> float:
    return constant_c(DEFAULT_NMAX).c_value
