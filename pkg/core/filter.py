"""Model-X knockoff filter with ridge coefficient-difference statistics."""

import logging

import numpy as np
from sklearn.linear_model import Ridge
from sklearn.model_selection import KFold

from .errors import InvalidArgumentError
from .models import SelectionConfig, SelectionResult

logger = logging.getLogger(__name__)


def _resolve_penalty(penalty: float, design: np.ndarray, grid: list[float]) -> float:
    """Swap an unpenalized fit on a rank-deficient design for the smallest positive penalty."""
    if penalty > 0:
        return penalty
    if np.linalg.matrix_rank(design) >= design.shape[1]:
        return penalty
    positive = [g for g in grid if g > 0]
    fallback = min(positive) if positive else 1e-3
    logger.warning(f"Design is singular at penalty 0; using penalty {fallback:g}")
    return fallback


def _ridge(design: np.ndarray, y: np.ndarray, penalty: float) -> np.ndarray:
    model = Ridge(alpha=penalty, fit_intercept=False, solver="cholesky" if penalty > 0 else "svd")
    model.fit(design, y)
    return np.asarray(model.coef_, dtype=float).reshape(-1)


def cross_validate_penalty(
    design: np.ndarray, y: np.ndarray, grid: list[float], folds: int, seed: int
) -> float:
    """Penalty minimizing k-fold mean squared prediction error (first wins ties)."""
    splitter = KFold(n_splits=folds, shuffle=True, random_state=seed % (2**32))
    splits = list(splitter.split(design))
    errors = []
    for penalty in grid:
        fold_errors = []
        for train_idx, test_idx in splits:
            effective = _resolve_penalty(penalty, design[train_idx], grid)
            coef = _ridge(design[train_idx], y[train_idx], effective)
            residual = y[test_idx] - design[test_idx] @ coef
            fold_errors.append(float(np.mean(residual**2)))
        errors.append(float(np.mean(fold_errors)))
    best = int(np.argmin(errors))
    logger.debug(f"Ridge CV errors {dict(zip(grid, errors))}; chose {grid[best]:g}")
    return grid[best]


def fit_ridge(
    design: np.ndarray,
    y: np.ndarray,
    penalty_grid: list[float],
    folds: int = 5,
    seed: int = 0,
) -> tuple[np.ndarray, float]:
    """Ridge coefficients on [X, X~] with the penalty picked by cross-validation.

    A single-value grid skips cross-validation.

    Args:
        design: n x 2p matrix [X, X~]
        y: Response of length n
        penalty_grid: Candidate penalties
        folds: Number of CV folds
        seed: Seed of the fold assignment

    Returns:
        (coefficients of length 2p, chosen penalty)
    """
    design = np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if not np.isfinite(design).all() or not np.isfinite(y).all():
        raise InvalidArgumentError("Ridge design and response must be finite")
    if design.shape[0] != y.shape[0]:
        raise InvalidArgumentError(f"Design has {design.shape[0]} rows but y has {y.shape[0]}")
    if not penalty_grid:
        raise InvalidArgumentError("penalty_grid is empty")
    if len(penalty_grid) == 1:
        penalty = penalty_grid[0]
    else:
        if design.shape[0] < folds:
            raise InvalidArgumentError(f"Need at least {folds} rows for {folds}-fold CV")
        penalty = cross_validate_penalty(design, y, list(penalty_grid), folds, seed)
    penalty = _resolve_penalty(penalty, design, list(penalty_grid))
    return _ridge(design, y, penalty), penalty


def knockoff_statistics(beta_hat: np.ndarray) -> np.ndarray:
    """w_j = |beta_j| - |beta_{j+p}|."""
    beta_hat = np.asarray(beta_hat, dtype=float).reshape(-1)
    if beta_hat.shape[0] % 2:
        raise InvalidArgumentError(
            f"Coefficient vector must have even length, got {len(beta_hat)}"
        )
    p = beta_hat.shape[0] // 2
    return np.abs(beta_hat[:p]) - np.abs(beta_hat[p:])


def selection_threshold(w: np.ndarray, q: float) -> float:
    """Smallest t in {|w_j| : w_j != 0} with (1 + #{w <= -t}) / max(1, #{w >= t}) <= q.

    Returns inf when no candidate qualifies.
    """
    if not 0.0 < q <= 1.0:
        raise InvalidArgumentError(f"q must lie in (0, 1], got {q}")
    w = np.asarray(w, dtype=float).reshape(-1)
    candidates = np.unique(np.abs(w[w != 0]))
    if candidates.size == 0:
        return float("inf")
    negatives = (w[None, :] <= -candidates[:, None]).sum(axis=1)
    positives = (w[None, :] >= candidates[:, None]).sum(axis=1)
    ratios = (1.0 + negatives) / np.maximum(1, positives)
    passing = np.flatnonzero(ratios <= q)
    if passing.size == 0:
        return float("inf")
    return float(candidates[passing[0]])


def select_features(w: np.ndarray, q: float) -> tuple[list[int], float]:
    """Indices with w_j >= tau_q (empty when tau is infinite)."""
    tau = selection_threshold(w, q)
    if not np.isfinite(tau):
        return [], tau
    return np.flatnonzero(np.asarray(w) >= tau).tolist(), tau


def evaluate_selection(selected, nonnull_mask) -> tuple[float, float]:
    """(false discovery proportion, power) of a selection against the truth."""
    mask = np.asarray(nonnull_mask, dtype=bool)
    chosen = np.zeros(mask.shape[0], dtype=bool)
    chosen[list(selected)] = True
    false = int((chosen & ~mask).sum())
    true = int((chosen & mask).sum())
    fdp = false / max(1, int(chosen.sum()))
    power = true / max(1, int(mask.sum()))
    return fdp, power


def run_filter(
    X: np.ndarray,
    X_tilde: np.ndarray,
    y: np.ndarray,
    nonnull_mask: np.ndarray | None,
    cfg: SelectionConfig,
    seed: int,
    metadata: dict | None = None,
    config_digest: str = "",
) -> SelectionResult:
    """Fit, score, threshold and evaluate one knockoff selection.

    A None mask means the truth is unknown; fdp and power are then left unset.
    """
    if X.shape != X_tilde.shape:
        raise InvalidArgumentError(f"Shape mismatch: X {X.shape} vs X~ {X_tilde.shape}")
    beta_hat, penalty = fit_ridge(
        np.concatenate([X, X_tilde], axis=1), y, cfg.penalty_grid, cfg.folds, seed
    )
    w = knockoff_statistics(beta_hat)
    selected, tau = select_features(w, cfg.q)
    fdp = power = None
    if nonnull_mask is not None:
        fdp, power = evaluate_selection(selected, nonnull_mask)
    result = SelectionResult(
        selected=selected,
        tau=tau,
        q=cfg.q,
        fdp=fdp,
        power=power,
        w=w.tolist(),
        penalty=penalty,
        config_digest=config_digest,
        metadata=metadata or {},
    )
    logger.info(f"Selected {len(selected)} features (tau={tau:.4g}, {result.score_text()})")
    return result
