"""Adversarial training of the knockoff generator against K swappers."""

import copy
import logging
import math
import time
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .datagen import split_train_val
from .errors import InvalidArgumentError, TrainingDivergedError
from .knockoff_model import KnockoffTransformer, make_swappers, sample_noise
from .losses import swapper_objective, total_objective
from .models import (
    EpochRecord,
    KnockoffNetConfig,
    LossBreakdown,
    StepRecord,
    TrainConfig,
    TrainingLog,
)
from .seeding import derive_seed, numpy_rng, torch_generator

logger = logging.getLogger(__name__)

_DTYPES = {"float32": torch.float32, "float64": torch.float64}


@dataclass
class TrainResult:
    """Best-validation generator and swappers with the training log."""

    net: KnockoffTransformer
    swappers: nn.ModuleList
    log: TrainingLog


# =============================================================================
# Bookkeeping helpers
# =============================================================================


class EarlyStopping:
    """Best-so-far tracker with patience.

    A loss counts as an improvement only when strictly below the best seen.
    Non-finite losses never improve.
    """

    def __init__(self, patience: int):
        self.patience = patience
        self.best_loss = math.inf
        self.best_epoch: int | None = None
        self.bad_epochs = 0

    def update(self, loss: float, epoch: int) -> bool:
        """Record an epoch's validation loss; returns True if it improved."""
        if math.isfinite(loss) and loss < self.best_loss:
            self.best_loss = loss
            self.best_epoch = epoch
            self.bad_epochs = 0
            return True
        self.bad_epochs += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.bad_epochs >= self.patience


def swapper_update_due(step: int, frequency: int) -> bool:
    """Swappers update on every `frequency`-th minibatch of an epoch (1-based step in epoch)."""
    return step % frequency == 0


def count_swapper_updates(num_steps: int, frequency: int) -> int:
    return sum(swapper_update_due(s, frequency) for s in range(1, num_steps + 1))


def mean_breakdown(rows: list[LossBreakdown]) -> LossBreakdown:
    """Field-wise mean of several breakdowns."""
    if not rows:
        raise InvalidArgumentError("Cannot average zero loss breakdowns")
    k = len(rows[0].swd_per_swapper)
    return LossBreakdown(
        swd_per_swapper=[float(np.mean([r.swd_per_swapper[i] for r in rows])) for i in range(k)],
        rex=float(np.mean([r.rex for r in rows])),
        swapper_decor=float(np.mean([r.swapper_decor for r in rows])),
        drl=float(np.mean([r.drl for r in rows])),
        total=float(np.mean([r.total for r in rows])),
        lambda_rex=rows[0].lambda_rex,
        lambda_swapper=rows[0].lambda_swapper,
        lambda_dependency=rows[0].lambda_dependency,
    )


def _even(n: int) -> int:
    return n - (n % 2)


def batch_slices(n: int, batch_size: int) -> list[slice]:
    """Full minibatches only; a sample smaller than one batch is one even batch."""
    if n < batch_size:
        size = _even(n)
        return [slice(0, size)] if size >= 2 else []
    return [slice(start, start + batch_size) for start in range(0, n - batch_size + 1, batch_size)]


def _check_loss(breakdown: LossBreakdown, cfg: TrainConfig, recent: list[dict]) -> None:
    values = [breakdown.total, breakdown.drl, breakdown.rex, *breakdown.swd_per_swapper]
    if any(not math.isfinite(v) for v in values) or abs(breakdown.total) > cfg.max_loss:
        raise TrainingDivergedError(
            f"Training diverged: total loss {breakdown.total}", recent[-5:]
        )


# =============================================================================
# Validation
# =============================================================================


@torch.no_grad()
def validate(
    X_val: np.ndarray | torch.Tensor,
    net: KnockoffTransformer,
    swappers: nn.ModuleList,
    cfg: TrainConfig,
    epoch_seed: int,
    knockoff_override: np.ndarray | torch.Tensor | None = None,
) -> LossBreakdown:
    """Full objective on the validation rows with Z, Gumbel noise and projections pinned.

    Args:
        X_val: Validation rows; truncated to an even count
        net: Generator (evaluated in eval mode)
        swappers: Current swappers
        cfg: Training configuration
        epoch_seed: Seed pinning every random draw of this evaluation
        knockoff_override: Use this X~ instead of running the generator

    Returns:
        LossBreakdown of the validation objective
    """
    dtype = _DTYPES[cfg.dtype]
    x = torch.as_tensor(np.asarray(X_val), dtype=dtype)
    rows = _even(x.shape[0])
    if rows < 2:
        raise InvalidArgumentError(f"Validation split needs at least 2 rows, got {x.shape[0]}")
    x = x[:rows]
    generator = torch_generator(derive_seed(epoch_seed, "validation"))
    if knockoff_override is not None:
        x_tilde = torch.as_tensor(np.asarray(knockoff_override), dtype=dtype)[:rows]
    else:
        was_training = net.training
        net.eval()
        x_tilde = net(x, sample_noise(tuple(x.shape), generator, dtype))
        net.train(was_training)
    _, breakdown = total_objective(x, x_tilde, swappers, cfg, generator)
    return breakdown


# =============================================================================
# Training loop
# =============================================================================


def train(
    X: np.ndarray,
    cfg: TrainConfig,
    net_cfg: KnockoffNetConfig,
    X_val: np.ndarray | None = None,
    on_epoch: Callable[[EpochRecord], None] | None = None,
) -> TrainResult:
    """Alternating optimization of the generator and the swappers.

    Every minibatch takes one AdamW step on the generator objective; on every
    `swapper_update_frequency`-th minibatch of an epoch each swapper then takes
    one AdamW step on the negated swap loss, evaluated on the same batch against
    the detached knockoff. The count restarts each epoch. After each epoch the
    validation objective drives early stopping, and the weights with the lowest
    validation loss are restored at the end. Validation rows never enter a
    gradient step.

    Args:
        X: Standardized design matrix; split 80/20 unless X_val is given
        cfg: Training hyperparameters
        net_cfg: Generator architecture
        X_val: Explicit validation rows (X is then used entirely for training)
        on_epoch: Callback invoked with every EpochRecord

    Returns:
        TrainResult with best-validation weights and the full log

    Raises:
        TrainingDivergedError: If a training loss is non-finite or exceeds max_loss
    """
    if X_val is None:
        X_train, X_val = split_train_val(X, cfg.train_ratio, derive_seed(cfg.seed, "split"))
    else:
        X_train = X
    n_train, p = X_train.shape
    if n_train < 2 * cfg.batch_size:
        logger.warning(f"Only {n_train} training rows for batch size {cfg.batch_size}")
    if cfg.batch_size % 2:
        raise InvalidArgumentError(f"batch_size must be even, got {cfg.batch_size}")

    dtype = _DTYPES[cfg.dtype]
    net = KnockoffTransformer(p, net_cfg, seed=derive_seed(cfg.seed, "generator")).to(dtype)
    swappers = make_swappers(
        p, cfg.num_swappers, cfg.swapper_temperature, derive_seed(cfg.seed, "swappers")
    ).to(dtype)
    opt_gen = torch.optim.AdamW(
        net.parameters(), lr=cfg.lr_generator, weight_decay=cfg.weight_decay
    )
    opt_swap = torch.optim.AdamW(
        swappers.parameters(), lr=cfg.lr_swapper, weight_decay=cfg.weight_decay
    )

    x_all = torch.as_tensor(np.asarray(X_train), dtype=dtype)
    log = TrainingLog(config={"train": cfg.model_dump(), "net": net_cfg.model_dump(), "p": p})
    stopper = EarlyStopping(cfg.early_stop_patience)
    best_state = None
    recent_rows: list[dict] = []
    global_step = 0
    started = time.perf_counter()

    logger.info(
        f"Training generator: n_train={n_train}, n_val={len(X_val)}, p={p}, "
        f"epochs={cfg.epochs}, K={cfg.num_swappers}"
    )

    for epoch in range(1, cfg.epochs + 1):
        epoch_started = time.perf_counter()
        net.train()
        order = numpy_rng(derive_seed(cfg.seed, epoch, "order")).permutation(n_train)
        step_rows: list[LossBreakdown] = []

        for step_in_epoch, rows in enumerate(batch_slices(n_train, cfg.batch_size), start=1):
            global_step += 1
            generator = torch_generator(derive_seed(cfg.seed, epoch, step_in_epoch, "step"))
            x = x_all[torch.from_numpy(order[rows])]
            z = sample_noise(tuple(x.shape), generator, dtype)

            x_tilde = net(x, z, generator=generator)
            loss, breakdown = total_objective(x, x_tilde, swappers, cfg, generator)
            row = {"epoch": epoch, "step": global_step, **breakdown.as_row()}
            recent_rows.append(row)
            _check_loss(breakdown, cfg, recent_rows)

            opt_gen.zero_grad()
            loss.backward()
            opt_gen.step()

            updated = swapper_update_due(step_in_epoch, cfg.swapper_update_frequency)
            if updated:
                opt_swap.zero_grad()
                swapper_objective(x, x_tilde.detach(), swappers, cfg, generator).backward()
                opt_swap.step()
                log.swapper_updates += 1

            step_rows.append(breakdown)
            log.steps.append(
                StepRecord(epoch=epoch, step=global_step, swapper_updated=updated, loss=breakdown)
            )
            logger.debug(f"epoch {epoch} step {global_step}: total={breakdown.total:.4f}")

        if not step_rows:
            raise InvalidArgumentError(f"No training minibatch fits in {n_train} rows")

        val = validate(X_val, net, swappers, cfg, derive_seed(cfg.seed, epoch))
        if not math.isfinite(val.total):
            logger.warning(f"Epoch {epoch}: non-finite validation loss, counted as no improvement")
        improved = stopper.update(val.total, epoch)
        if improved:
            best_state = (copy.deepcopy(net.state_dict()), copy.deepcopy(swappers.state_dict()))

        record = EpochRecord(
            epoch=epoch,
            train=mean_breakdown(step_rows),
            validation=val,
            wall_clock_seconds=time.perf_counter() - epoch_started,
            improved=improved,
        )
        log.epochs.append(record)
        if on_epoch is not None:
            on_epoch(record)
        logger.info(
            f"Epoch {epoch}: train={record.train.total:.4f} val={val.total:.4f} "
            f"drl={record.train.drl:.4f}{' *' if improved else ''}"
        )

        if stopper.should_stop:
            log.stopped_early = True
            logger.info(f"Early stop at epoch {epoch}; best epoch {stopper.best_epoch}")
            break

    if best_state is not None:
        net.load_state_dict(best_state[0])
        swappers.load_state_dict(best_state[1])
    net.eval()

    log.best_epoch = stopper.best_epoch
    log.stopping_epoch = log.epochs[-1].epoch
    log.total_seconds = time.perf_counter() - started
    return TrainResult(net=net, swappers=swappers, log=log)


# =============================================================================
# Gradient verification
# =============================================================================


def finite_difference_gradient_check(
    params: list[torch.Tensor],
    loss_fn: Callable[[], torch.Tensor],
    num_params: int = 64,
    step: float = 1e-5,
    seed: int = 0,
    floor: float = 1e-5,
) -> float:
    """Largest relative error between autograd and central differences.

    Args:
        params: Leaf tensors (ideally float64) that loss_fn depends on
        loss_fn: Deterministic closure returning a scalar loss
        num_params: Number of scalar entries to check
        step: Finite-difference step
        seed: Seed for choosing the checked entries
        floor: Lower bound on the relative-error denominator

    Returns:
        max |analytic - numeric| / max(|analytic|, |numeric|, floor)
    """
    for param in params:
        param.grad = None
    loss_fn().backward()
    analytic = [
        p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p) for p in params
    ]

    sizes = np.array([p.numel() for p in params])
    rng = numpy_rng(seed)
    flat_choices = rng.choice(int(sizes.sum()), size=min(num_params, int(sizes.sum())),
                              replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    worst = 0.0
    with torch.no_grad():
        for flat in flat_choices:
            which = int(np.searchsorted(offsets, flat, side="right") - 1)
            index = int(flat - offsets[which])
            view = params[which].view(-1)
            original = view[index].item()
            view[index] = original + step
            upper = loss_fn().item()
            view[index] = original - step
            lower = loss_fn().item()
            view[index] = original
            numeric = (upper - lower) / (2.0 * step)
            exact = analytic[which].view(-1)[index].item()
            error = abs(exact - numeric) / max(abs(exact), abs(numeric), floor)
            worst = max(worst, error)
    return worst
