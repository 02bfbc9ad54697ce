"""Swap-property metrics, knockoff-statistic summaries and loss-competition curves."""

import logging
from collections.abc import Sequence

import numpy as np
import pandas as pd

from .errors import InvalidArgumentError
from .knockoff_model import apply_swap
from .models import ProjectionConfig, StatisticSummary, SwapMetricReport, TrainingLog
from .seeding import derive_seed, numpy_rng
from .sw_metrics import mmd_linear, sliced_wasserstein_distance

logger = logging.getLogger(__name__)

SWAP_RATIOS = (0.1, 0.3, 0.5, 0.7, 0.9)
METRICS = ("mmd_linear", "swd1", "swd2")


def swap_set_size(ratio: float, p: int) -> int:
    """Nearest integer to ratio * p, at least 1 for a positive ratio."""
    if ratio <= 0:
        return 0
    return min(p, max(1, int(round(ratio * p))))


def mean_abs_correlation(X: np.ndarray, X_tilde: np.ndarray) -> float:
    """Mean over j of |corr(X_j, X~_j)|; a constant column contributes 0."""
    X = np.asarray(X, dtype=float)
    X_tilde = np.asarray(X_tilde, dtype=float)
    if X.shape != X_tilde.shape:
        raise InvalidArgumentError(f"Shape mismatch: X {X.shape} vs X~ {X_tilde.shape}")
    xc = X - X.mean(axis=0)
    tc = X_tilde - X_tilde.mean(axis=0)
    scale = np.sqrt((xc**2).sum(axis=0) * (tc**2).sum(axis=0))
    constant = (np.ptp(X, axis=0) == 0) | (np.ptp(X_tilde, axis=0) == 0)
    if constant.any():
        logger.debug(f"{int(constant.sum())} constant columns counted as uncorrelated")
    corr = np.divide((xc * tc).sum(axis=0), scale, out=np.zeros(X.shape[1]), where=~constant)
    return float(np.mean(np.abs(corr)))


def swap_property_suite(
    X: np.ndarray,
    X_tilde: np.ndarray,
    seed: int,
    ratios: Sequence[float] = SWAP_RATIOS,
    num_projections: int = 128,
) -> SwapMetricReport:
    """Distances between (X, X~) and its hard swap over random sets B.

    For each ratio r, B holds round(r * p) coordinates drawn uniformly without
    replacement; every metric compares the two 2p-dimensional samples.
    """
    X = np.asarray(X, dtype=float)
    X_tilde = np.asarray(X_tilde, dtype=float)
    if X.shape != X_tilde.shape:
        raise InvalidArgumentError(f"Shape mismatch: X {X.shape} vs X~ {X_tilde.shape}")
    p = X.shape[1]
    joint = np.concatenate([X, X_tilde], axis=1)

    per_ratio: dict[str, list[float]] = {metric: [] for metric in METRICS}
    for index, ratio in enumerate(ratios):
        size = swap_set_size(ratio, p)
        rng = numpy_rng(derive_seed(seed, "swap-set", index))
        chosen = rng.choice(p, size=size, replace=False)
        b = np.zeros(p)
        b[chosen] = 1.0
        swapped = np.concatenate(apply_swap(X, X_tilde, b), axis=1)

        projection_seed = derive_seed(seed, "projections", index)
        per_ratio["mmd_linear"].append(float(mmd_linear(joint, swapped)))
        for order, key in ((1, "swd1"), (2, "swd2")):
            cfg = ProjectionConfig(
                num_projections=num_projections, order=order, seed=projection_seed
            )
            per_ratio[key].append(float(sliced_wasserstein_distance(joint, swapped, cfg)))

    averages = {metric: float(np.mean(values)) for metric, values in per_ratio.items()}
    logger.debug(f"Swap metrics averaged over {len(ratios)} ratios: {averages}")
    return SwapMetricReport(
        ratios=list(ratios),
        per_ratio=per_ratio,
        averages=averages,
        mean_abs_correlation=mean_abs_correlation(X, X_tilde),
        seed=seed,
    )


def swap_metric_rows(report: SwapMetricReport, model_tag: str, dataset_tag: str) -> pd.DataFrame:
    """Long-format rows keyed by (model, dataset, metric, ratio)."""
    keys = {"model": model_tag, "dataset": dataset_tag}
    rows = [
        {**keys, "metric": metric, "ratio": ratio, "value": v}
        for metric, values in report.per_ratio.items()
        for ratio, v in zip(report.ratios, values)
    ]
    rows += [
        {**keys, "metric": metric, "ratio": "average", "value": v}
        for metric, v in report.averages.items()
    ]
    return pd.DataFrame(rows)


def statistic_distribution_summary(
    w_trials: Sequence[Sequence[float]],
    nonnull_mask,
) -> StatisticSummary:
    """Pool knockoff statistics over trials by null / nonnull class.

    Args:
        w_trials: One w vector per trial
        nonnull_mask: One mask shared by all trials, or one mask per trial

    Returns:
        Class means and population standard deviations; a class with no
        members reports None
    """
    if len(w_trials) == 0:
        raise InvalidArgumentError("statistic_distribution_summary needs at least one trial")
    masks = np.asarray(nonnull_mask, dtype=bool)
    if masks.ndim == 1:
        masks = np.broadcast_to(masks, (len(w_trials), masks.shape[0]))
    w = np.asarray(w_trials, dtype=float)
    if w.shape != masks.shape:
        raise InvalidArgumentError(f"w shape {w.shape} does not match mask shape {masks.shape}")

    nulls = w[~masks]
    nonnulls = w[masks]

    def _moments(values: np.ndarray) -> tuple[float | None, float | None]:
        if values.size == 0:
            return None, None
        return float(values.mean()), float(values.std())

    null_mean, null_std = _moments(nulls)
    nonnull_mean, nonnull_std = _moments(nonnulls)
    return StatisticSummary(
        null_mean=null_mean,
        null_std=null_std,
        nonnull_mean=nonnull_mean,
        nonnull_std=nonnull_std,
        null_count=int(nulls.size),
        nonnull_count=int(nonnulls.size),
    )


def loss_competition(log: TrainingLog, epochs: int = 20) -> pd.DataFrame:
    """Min-max normalized training swap loss and dependency loss over the first epochs.

    The frame carries a boolean `drl_min` column marking the epoch where the
    dependency loss is smallest over the whole run.
    """
    records = log.epochs[:epochs]
    if not records:
        raise InvalidArgumentError("Training log has no epochs")
    frame = pd.DataFrame(
        {
            "epoch": [r.epoch for r in records],
            "swap_loss": [r.train.swap_loss for r in records],
            "drl": [r.train.drl for r in records],
        }
    )
    for column in ("swap_loss", "drl"):
        values = frame[column]
        span = values.max() - values.min()
        frame[f"{column}_normalized"] = (values - values.min()) / span if span > 0 else 0.0
    frame["drl_min"] = frame["epoch"] == log.drl_min_epoch
    return frame
