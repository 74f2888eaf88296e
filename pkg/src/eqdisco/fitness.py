"""Fitness of an equation model: target choice, sparse balance, pruning, inverse residual."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .genotype import EquationModel, strip_common_factor
from .grid_data import FieldBundle
from .sparse_solver import IllConditionedError, coordinate_descent

__all__ = ["FitnessConfig", "FitnessResult", "evaluate", "term_matrix", "substream"]


@dataclass(frozen=True)
class FitnessConfig:
    lam: float = 1e-2
    tol: float = 1e-8
    max_iter: int = 10_000
    prune_threshold: float = 1e-4
    eps_floor: float = 1e-12
    # least-squares refit on the LASSO support, removes shrinkage bias
    refit: bool = True
    # divide the target by its RMS so lam is dimensionless
    scale_target: bool = True
    # divide out a token shared by every surviving term and re-evaluate
    reduce_common_factors: bool = True


@dataclass
class FitnessResult:
    fitness: float
    coefficients: list[tuple[str, float]] = field(default_factory=list)
    pruned: list[str] = field(default_factory=list)
    residual_norm: float = float("inf")
    target: str | None = None

    @property
    def degenerate(self) -> bool:
        return self.fitness == 0.0


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for (seed, *keys); same keys give the same stream."""
    return np.random.default_rng([int(seed) & (2**64 - 1), *map(int, keys)])


def term_matrix(model: EquationModel, bundle: FieldBundle) -> np.ndarray:
    cols = [bundle.product(t.names) for t in model.terms]
    return np.column_stack(cols)


def _fit(X, y, cfg: FitnessConfig) -> np.ndarray:
    scale = float(np.sqrt(y @ y / len(y))) if cfg.scale_target else 1.0
    res = coordinate_descent(X, y / scale, cfg.lam, cfg.tol, cfg.max_iter)
    return res.coef * scale


def evaluate(
    model: EquationModel,
    bundle: FieldBundle,
    rng: np.random.Generator,
    cfg: FitnessConfig | None = None,
    target_index: int | None = None,
    cache: dict | None = None,
) -> FitnessResult:
    """Evaluate ``model`` on ``bundle`` and prune it in place.

    One term is drawn uniformly as the target and fixed at coefficient -1; the
    others are balanced against it by LASSO. Terms whose coefficient falls below
    ``prune_threshold`` are removed from ``model``. Fitness is the inverse of
    the residual l2 norm, capped at ``1 / eps_floor``. Degenerate cases (a zero
    target, or nothing left besides the target) score 0 and leave ``model``
    untouched. When every surviving term shares a token factor, that factor is
    divided out and the reduced model is scored instead.

    ``cache``, when given, memoizes outcomes by (ordered signatures, target).
    The target is still drawn from ``rng``, so cached and uncached calls consume
    the stream identically.
    """
    cfg = cfg or FitnessConfig()
    n = len(model.terms)
    if n < 2:
        return FitnessResult(0.0)
    if target_index is None:
        target_index = int(rng.integers(n))
    if not 0 <= target_index < n:
        raise IndexError(f"target index {target_index} out of range for {n} terms")
    if cache is not None:
        key = (tuple(model.signatures), target_index)
        hit = cache.get(key)
        if hit is None:
            hit = cache[key] = _evaluate_at(model.copy(), bundle, cfg, target_index)
    else:
        hit = _evaluate_at(model, bundle, cfg, target_index)
    pruned_model, result = hit
    if pruned_model is not model:
        model.terms = list(pruned_model.terms)
        model.coefficients = None if pruned_model.coefficients is None else list(pruned_model.coefficients)
        model.target_index = pruned_model.target_index
    return result


def _evaluate_at(model, bundle, cfg, target_index):
    n = len(model.terms)
    X_all = term_matrix(model, bundle)
    if not np.all(np.isfinite(X_all)):
        raise IllConditionedError("non-finite term fields")
    sigs = model.signatures
    target_sig = sigs[target_index]
    y = X_all[:, target_index]
    if np.linalg.norm(y) <= cfg.eps_floor:
        return model, FitnessResult(0.0, target=target_sig)

    others = [j for j in range(n) if j != target_index]
    X = X_all[:, others]
    coef = _fit(X, y, cfg)

    keep = np.abs(coef) >= cfg.prune_threshold
    if cfg.refit:
        # prune, refit by least squares, repeat until the support is stable
        while keep.any():
            sol = np.linalg.lstsq(X[:, keep], y, rcond=None)[0]
            coef = np.zeros_like(coef)
            coef[keep] = sol
            new_keep = keep & (np.abs(coef) >= cfg.prune_threshold)
            if np.array_equal(new_keep, keep):
                break
            keep = new_keep
    if not keep.any():
        return model, FitnessResult(0.0, target=target_sig, pruned=[sigs[j] for j in others])

    residual = X[:, keep] @ coef[keep] - y
    norm = float(np.linalg.norm(residual))
    if not np.isfinite(norm):
        raise IllConditionedError("non-finite residual")
    fitness = 1.0 / max(norm, cfg.eps_floor)

    pruned = [sigs[j] for j, k in zip(others, keep) if not k]
    survivors = {sigs[j]: float(c) for j, c, k in zip(others, coef, keep) if k}
    new_terms, new_coefs = [], []
    for term in model.terms:
        s = term.signature
        if s == target_sig:
            model.target_index = len(new_terms)
            new_terms.append(term)
            new_coefs.append(-1.0)
        elif s in survivors:
            new_terms.append(term)
            new_coefs.append(survivors[s])
    model.terms = new_terms
    model.coefficients = new_coefs
    if cfg.reduce_common_factors:
        reduced = strip_common_factor(new_terms)
        if reduced is not None:
            candidate = EquationModel(reduced, None, model.target_index)
            candidate, result = _evaluate_at(candidate, bundle, cfg, model.target_index)
            if not result.degenerate:
                result.pruned = pruned + result.pruned
                return candidate, result
    return model, FitnessResult(
        fitness=fitness,
        coefficients=list(zip(model.signatures, new_coefs)),
        pruned=pruned,
        residual_norm=norm,
        target=target_sig,
    )
