"""Resummation helpers for the geometric interaction series.

The single-photon series in the ratio ``r = -pi*gamma**2 * g`` sums to
``(1 + r)/(1 - r)`` inside the unit disk.  Outside it the same value is
recovered by Borel summation, ``1/(1 + i*x) = int_0^inf exp(-t)
exp(-i*x*t) dt``, evaluated here by Gauss-Laguerre quadrature.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal

__all__ = [
    "BorelConfig",
    "BorelConvergenceError",
    "OutsideRadiusWarning",
    "gauss_laguerre",
    "geometric_closed_sum",
    "geometric_partial_sums",
    "borel_sum_geometric",
    "transmission_from_borel",
    "g_regularized",
]


class BorelConvergenceError(RuntimeError):
    """Quadrature did not reach the requested tolerance."""


class OutsideRadiusWarning(UserWarning):
    """The geometric ratio lies outside the binomial radius |r| < 1."""


@dataclass(frozen=True)
class BorelConfig:
    """Gauss-Laguerre settings.

    Parameters
    ----------
    nodes : int
        Starting node count.
    max_nodes : int
        The node count doubles until the estimate meets ``tol`` or exceeds this.
    tol : float
        Target absolute error estimate (the integrand is bounded by one).
    scheme : str
        Only ``"gauss-laguerre"`` is supported.
    """

    nodes: int = 64
    max_nodes: int = 512
    tol: float = 1e-12
    scheme: str = "gauss-laguerre"

    def __post_init__(self):
        if self.nodes < 4:
            raise ValueError("BorelConfig.nodes must be >= 4")
        if self.max_nodes < self.nodes:
            raise ValueError("BorelConfig.max_nodes must be >= nodes")
        if self.scheme != "gauss-laguerre":
            raise ValueError(f"unknown quadrature scheme {self.scheme!r}")


@lru_cache(maxsize=None)
def gauss_laguerre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for weight exp(-t) on [0, inf).

    Uses the Golub-Welsch eigenproblem, which stays accurate for several
    hundred nodes where the recurrence-based routines lose precision.
    """
    k = np.arange(1, n, dtype=float)
    nodes, vecs = eigh_tridiagonal(2.0 * np.arange(n) + 1.0, k)
    weights = vecs[0, :] ** 2
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def geometric_closed_sum(r: complex) -> complex:
    """``1 + 2*sum_{m>=1} r**m = (1 + r)/(1 - r)``, continued analytically.

    Warns with :class:`OutsideRadiusWarning` when ``|r| >= 1``.
    """
    if r == 1:
        raise ZeroDivisionError("geometric_closed_sum has a pole at r = 1")
    if abs(r) >= 1:
        warnings.warn(f"|r| = {abs(r):.3g} is outside the binomial radius; "
                      "returning the analytic continuation", OutsideRadiusWarning, stacklevel=2)
    return (1 + r) / (1 - r)


def geometric_partial_sums(r: complex, terms: int) -> list[complex]:
    """Partial sums ``1 + 2*sum_{m=1}^{M} r**m`` for M = 0..terms."""
    sums = [1 + 0j]
    power = 1 + 0j
    for _ in range(terms):
        power *= r
        sums.append(sums[-1] + 2 * power)
    return sums


def _laguerre_value(x: float, n: int) -> complex:
    t, w = gauss_laguerre(n)
    return complex(np.sum(w * np.exp(-1j * x * t)))


def borel_sum_geometric(x: float, cfg: BorelConfig = BorelConfig()) -> tuple[complex, float]:
    """Borel sum of ``sum_k (-i*x)**k`` as a Laplace integral.

    Returns the quadrature value and an error estimate (difference from the
    rule with half as many nodes).  The exact value is ``1/(1 + i*x)``.
    """
    x = float(x)
    if not math.isfinite(x):
        raise ValueError("x must be finite")
    n = cfg.nodes
    prev = _laguerre_value(x, n // 2)
    while True:
        value = _laguerre_value(x, n)
        err = abs(value - prev)
        if err <= cfg.tol:
            return value, err
        if 2 * n > cfg.max_nodes:
            raise BorelConvergenceError(
                f"Borel quadrature at x={x:g} reached error {err:.2e} > {cfg.tol:.1e} with {n} nodes"
            )
        prev, n = value, 2 * n


def transmission_from_borel(x: float, cfg: BorelConfig = BorelConfig()) -> tuple[complex, float]:
    """Single-photon transmission ``2/(1 + i*x) - 1`` via the Borel route.

    ``x`` is ``pi*gamma**2/Delta``.
    """
    value, err = borel_sum_geometric(x, cfg)
    return 2 * value - 1, 2 * err


def g_regularized(delta: float, alpha: float) -> complex:
    """Lorentzian-regularized ``g``: ``alpha/(alpha**2+delta**2) + i*delta/(alpha**2+delta**2)``.

    Tends to ``pi*delta(Delta) + i/Delta`` as ``alpha -> 0``.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    den = alpha * alpha + delta * delta
    return complex(alpha / den, delta / den)
