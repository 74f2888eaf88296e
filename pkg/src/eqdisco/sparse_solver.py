"""Cyclic coordinate-descent LASSO.

Minimizes ``||y - X c||^2 / (2 m) + lam * ||c||_1`` in scaled coordinates, where
each column of ``X`` is divided by its root-mean-square. The target is left
as given; callers that want a dimensionless penalty scale it themselves.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = [
    "LassoResult",
    "IllConditionedError",
    "ZeroColumnWarning",
    "coordinate_descent",
    "lasso_fit",
    "lasso_objective",
    "soft_threshold",
]


class IllConditionedError(ValueError):
    pass


class ZeroColumnWarning(UserWarning):
    pass


@dataclass
class LassoResult:
    coef: np.ndarray
    n_iter: int
    converged: bool
    zero_columns: list[int]
    # objective value after each sweep, in scaled coordinates
    objective_trace: list[float] | None = None


@njit(cache=True)
def _sweeps(gram, corr, c, active, lam, tol, max_sweeps):
    """Run cyclic sweeps in place; return (sweeps done, converged)."""
    for sweep in range(1, max_sweeps + 1):
        max_change = 0.0
        for j in active:
            rho = corr[j]
            for i in active:
                if i != j:
                    rho -= gram[j, i] * c[i]
            if rho > lam:
                new = (rho - lam) / gram[j, j]
            elif rho < -lam:
                new = (rho + lam) / gram[j, j]
            else:
                new = 0.0
            change = abs(new - c[j])
            if change > max_change:
                max_change = change
            c[j] = new
        if max_change < tol:
            return sweep, True
    return max_sweeps, False


def soft_threshold(z: float, lam: float) -> float:
    if z > lam:
        return z - lam
    if z < -lam:
        return z + lam
    return 0.0


def lasso_objective(design, target, coef, lam) -> float:
    design = np.asarray(design, dtype=float)
    r = np.asarray(target, dtype=float) - design @ np.asarray(coef, dtype=float)
    return float(r @ r / (2 * len(r)) + lam * np.abs(coef).sum())


def coordinate_descent(
    design,
    target,
    lam: float,
    tol: float = 1e-8,
    max_iter: int = 10_000,
    debug: bool = False,
) -> LassoResult:
    X = np.asarray(design, dtype=float)
    y = np.asarray(target, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError(f"incompatible shapes: design {X.shape}, target {y.shape}")
    if X.shape[1] < 1:
        raise ValueError("design needs at least one column")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if tol <= 0 or max_iter < 1:
        raise ValueError("tol must be positive and max_iter at least 1")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise IllConditionedError("non-finite values in regression data")

    m, k = X.shape
    scale = np.sqrt(np.einsum("ij,ij->j", X, X) / m)
    zero = [j for j in range(k) if scale[j] == 0.0]
    safe = np.where(scale > 0, scale, 1.0)
    Xs = X / safe
    with np.errstate(all="ignore"):
        gram = Xs.T @ Xs / m
        corr = Xs.T @ y / m
    if not (np.all(np.isfinite(gram)) and np.all(np.isfinite(corr))):
        raise IllConditionedError("overflow while forming normal equations")

    yy = float(y @ y) / m
    active = np.array([j for j in range(k) if j not in zero], dtype=np.int64)
    c = np.zeros(k)
    trace = [] if debug else None

    def objective():
        return float(0.5 * c @ gram @ c - corr @ c + 0.5 * yy + lam * np.abs(c).sum())

    converged = False
    n_iter = 0
    # debug mode checks the objective after every sweep, so it steps one sweep at a time
    step = 1 if debug else max_iter
    while n_iter < max_iter and not converged:
        done, converged = _sweeps(gram, corr, c, active, lam, tol, min(step, max_iter - n_iter))
        n_iter += done
        if debug:
            obj = objective()
            if trace and obj > trace[-1] + 1e-12 * max(1.0, abs(trace[-1])):
                raise AssertionError(f"objective increased at sweep {n_iter}: {trace[-1]} -> {obj}")
            trace.append(obj)
    if not np.all(np.isfinite(c)):
        raise IllConditionedError("coordinate descent diverged")
    return LassoResult(c / safe, n_iter, converged, zero, trace)


def lasso_fit(design, target, lam: float = 1e-2, tol: float = 1e-8, max_iter: int = 10_000) -> np.ndarray:
    """Return LASSO coefficients for ``target ~ design``.

    Columns with zero second moment get a zero coefficient and a
    ``ZeroColumnWarning``.
    """
    res = coordinate_descent(design, target, lam, tol, max_iter)
    if res.zero_columns:
        warnings.warn(f"zero columns {res.zero_columns} forced to 0", ZeroColumnWarning, stacklevel=2)
    return res.coef
