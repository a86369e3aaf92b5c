"""Derivative-free search over a few real design parameters."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .analysis import spectral_abscissa

__all__ = ["OptimResult", "nelder_mead", "penalized", "grid_axes", "grid_search", "UNSTABLE_PENALTY"]

UNSTABLE_PENALTY = 1e6


@dataclass
class OptimResult:
    x: np.ndarray
    fun: float
    nfev: int
    converged: bool
    message: str = ""


def nelder_mead(f, x0, xatol: float = 1e-8, maxfev: int | None = None,
                initial_step: float | None = None) -> OptimResult:
    """Minimize ``f`` with the Nelder-Mead simplex method.

    Terminates when the simplex diameter falls below ``xatol`` or after
    ``maxfev`` evaluations (default ``500 * dim``). The returned point is never
    worse than ``x0``.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    dim = x0.size
    maxfev = 500 * dim if maxfev is None else maxfev
    f0 = float(f(x0))
    if not np.isfinite(f0):
        raise ValueError("objective is not finite at the starting point")
    opts = dict(xatol=xatol, fatol=np.inf, maxfev=maxfev)
    if initial_step is not None:
        opts["initial_simplex"] = np.vstack([x0, x0 + initial_step * np.eye(dim)])
    res = minimize(lambda x: float(f(x)), x0, method="Nelder-Mead", options=opts)
    x, fx = np.asarray(res.x, dtype=float), float(res.fun)
    if not fx <= f0:
        x, fx = x0, f0
    return OptimResult(x, fx, int(res.nfev) + 1, bool(res.success), str(res.message))


def penalized(cost, build_A):
    """Wrap ``cost(x)`` so that unstable designs score ``1e6 + spectral abscissa``.

    ``build_A(x)`` returns the closed-loop matrix checked for stability.
    """

    def wrapped(x):
        a = spectral_abscissa(build_A(x))
        if not a < 0:
            return UNSTABLE_PENALTY + a
        return float(cost(x))

    return wrapped


def grid_axes(box, steps) -> list:
    """Grid points per axis for ``box = [(lo, hi), ...]`` and step size(s) ``steps``.

    Points are ``lo + k * step`` for ``k = 0..floor((hi - lo) / step)``, so the
    grid is reproducible and includes both ends when the step divides the box.
    """
    box = [tuple(map(float, b)) for b in box]
    steps = np.broadcast_to(np.asarray(steps, dtype=float), (len(box),))
    axes = []
    for (lo, hi), h in zip(box, steps):
        if hi < lo:
            raise ValueError(f"empty grid axis [{lo}, {hi}]")
        if hi == lo:
            axes.append(np.array([lo]))
            continue
        if not h > 0:
            raise ValueError("grid step must be positive")
        k = int(np.floor((hi - lo) / h + 1e-9))
        axes.append(lo + h * np.arange(k + 1))
    return axes


def grid_search(f, box, steps, vectorized: bool = False) -> OptimResult:
    """Exhaustive search on a rectangular grid (see :func:`grid_axes`).

    With ``vectorized=True``, ``f`` receives an ``(npoints, dim)`` array and
    returns the objective for every row. NaN counts as ``+inf``. Ties go to the
    lexicographically smallest grid index.
    """
    axes = grid_axes(box, steps)
    shape = tuple(len(a) for a in axes)
    if vectorized:
        pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
        vals = np.asarray(f(pts), dtype=float).reshape(shape)
    else:
        vals = np.empty(shape)
        for idx in itertools.product(*(range(k) for k in shape)):
            vals[idx] = f(np.array([a[i] for a, i in zip(axes, idx)]))
    flat = np.where(np.isnan(vals), np.inf, vals).ravel()
    best = np.unravel_index(int(np.argmin(flat)), shape)
    x = np.array([a[i] for a, i in zip(axes, best)])
    return OptimResult(x, float(vals[best]), int(np.prod(shape)), True, "grid exhausted")
