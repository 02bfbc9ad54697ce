"""Terms of the knockoff training objective.

The generator minimizes

    mean_k SWD((X, X~), swap_k(X, X~)) + lambda_rex * REx + lambda_swapper * decor
        + lambda_dependency * SWC(X, X~)

while the swappers maximize the swap-loss part of it. All swappers share
one set of projection directions per evaluation; each swapper draws its own
Gumbel noise.
"""

import itertools
import logging
from dataclasses import dataclass

import torch
from torch import nn

from .errors import DegenerateWeightsError, InvalidArgumentError
from .knockoff_model import Swapper, apply_swap
from .models import LossBreakdown, ProjectionConfig, TrainConfig
from .seeding import derive_seed, torch_generator
from .sw_metrics import (
    random_projections,
    sliced_wasserstein_correlation,
    sliced_wasserstein_distance,
)

logger = logging.getLogger(__name__)


@dataclass
class SwapLossTerms:
    """Differentiable swap-loss terms of one evaluation."""

    swd: torch.Tensor
    rex: torch.Tensor
    decor: torch.Tensor
    lambda_rex: float
    lambda_swapper: float

    @property
    def swd_mean(self) -> torch.Tensor:
        return self.swd.mean()

    @property
    def value(self) -> torch.Tensor:
        return self.swd_mean + self.lambda_rex * self.rex + self.lambda_swapper * self.decor


def rex_penalty(swd_values) -> torch.Tensor:
    """Population variance of the per-swapper SWD values."""
    if isinstance(swd_values, torch.Tensor):
        values = swd_values.reshape(-1)
    else:
        values = torch.as_tensor(swd_values, dtype=torch.float64).reshape(-1)
    if values.numel() == 0:
        raise InvalidArgumentError("rex_penalty needs at least one value")
    return values.var(unbiased=False)


def swapper_decorrelation_loss(swappers) -> torch.Tensor:
    """Mean cosine similarity between flattened swapper logits over ordered pairs."""
    weights = [s.flat_weights() if isinstance(s, Swapper) else torch.as_tensor(s).reshape(-1)
               for s in swappers]
    if not weights:
        raise InvalidArgumentError("Need at least one swapper")
    for i, w in enumerate(weights):
        if float(w.detach().norm()) == 0.0:
            raise DegenerateWeightsError(f"Swapper {i} has zero-norm weights")
    if len(weights) == 1:
        return torch.zeros((), dtype=weights[0].dtype)
    sims = [
        nn.functional.cosine_similarity(weights[i], weights[j], dim=0)
        for i, j in itertools.permutations(range(len(weights)), 2)
    ]
    return torch.stack(sims).mean()


def swap_terms(
    X: torch.Tensor,
    X_tilde: torch.Tensor,
    swappers,
    cfg: TrainConfig,
    generator: torch.Generator,
    forced_b: torch.Tensor | None = None,
) -> SwapLossTerms:
    """Per-swapper SWD between (X, X~) and its relaxed swap, plus REx and decorrelation.

    Args:
        forced_b: Swap weights used for every swapper instead of sampling
    """
    if len(swappers) == 0:
        raise InvalidArgumentError("swap loss needs K >= 1 swappers")
    if X.shape != X_tilde.shape:
        raise InvalidArgumentError(
            f"Shape mismatch: X {tuple(X.shape)} vs X~ {tuple(X_tilde.shape)}"
        )
    base = int(torch.randint(0, 2**62, (1,), generator=generator).item())
    projections = random_projections(
        2 * X.shape[1],
        cfg.num_projections,
        torch_generator(derive_seed(base, "projections")),
        X.dtype,
    )
    projection_cfg = ProjectionConfig(num_projections=cfg.num_projections, order=cfg.swd_order)
    joint = torch.cat([X, X_tilde], dim=1)

    swd = []
    for k, swapper in enumerate(swappers):
        if forced_b is None:
            b = swapper.sample(torch_generator(derive_seed(base, "gumbel", k)), relaxed=True)
        else:
            b = forced_b
        X_sw, X_tilde_sw = apply_swap(X, X_tilde, b.to(X.dtype))
        swapped = torch.cat([X_sw, X_tilde_sw], dim=1)
        swd.append(
            sliced_wasserstein_distance(joint, swapped, projection_cfg, projections=projections)
        )
    swd_values = torch.stack(swd)
    return SwapLossTerms(
        swd=swd_values,
        rex=rex_penalty(swd_values),
        decor=swapper_decorrelation_loss(swappers).to(X.dtype),
        lambda_rex=cfg.lambda_rex,
        lambda_swapper=cfg.lambda_swapper,
    )


def dependency_loss(
    X: torch.Tensor,
    X_tilde: torch.Tensor,
    lambda_dependency: float,
    projection: ProjectionConfig | None = None,
    generator: torch.Generator | None = None,
) -> torch.Tensor:
    """lambda_dependency * SWC(X, X~)."""
    if lambda_dependency == 0.0:
        return torch.zeros((), dtype=X.dtype) if isinstance(X, torch.Tensor) else torch.zeros(())
    return lambda_dependency * sliced_wasserstein_correlation(X, X_tilde, projection, generator)


def _breakdown(terms: SwapLossTerms, drl: torch.Tensor, cfg: TrainConfig) -> LossBreakdown:
    swd = [float(v) for v in terms.swd.detach()]
    rex = float(terms.rex.detach())
    decor = float(terms.decor.detach())
    drl_value = float(drl.detach())
    total = sum(swd) / len(swd) + cfg.lambda_rex * rex + cfg.lambda_swapper * decor + drl_value
    return LossBreakdown(
        swd_per_swapper=swd,
        rex=rex,
        swapper_decor=decor,
        drl=drl_value,
        total=total,
        lambda_rex=cfg.lambda_rex,
        lambda_swapper=cfg.lambda_swapper,
        lambda_dependency=cfg.lambda_dependency,
    )


def swap_loss(
    X: torch.Tensor,
    X_tilde: torch.Tensor,
    swappers,
    cfg: TrainConfig,
    generator: torch.Generator,
    forced_b: torch.Tensor | None = None,
) -> tuple[torch.Tensor, LossBreakdown]:
    """L_SL and its breakdown (drl reported as 0)."""
    terms = swap_terms(X, X_tilde, swappers, cfg, generator, forced_b)
    return terms.value, _breakdown(terms, torch.zeros(()), cfg)


def total_objective(
    X: torch.Tensor,
    X_tilde: torch.Tensor,
    swappers,
    cfg: TrainConfig,
    generator: torch.Generator,
    forced_b: torch.Tensor | None = None,
) -> tuple[torch.Tensor, LossBreakdown]:
    """Generator objective L_SL + L_DRL with its breakdown."""
    terms = swap_terms(X, X_tilde, swappers, cfg, generator, forced_b)
    drl = dependency_loss(
        X,
        X_tilde,
        cfg.lambda_dependency,
        ProjectionConfig(num_projections=cfg.num_projections, order=cfg.swd_order),
        generator,
    )
    return terms.value + drl, _breakdown(terms, drl, cfg)


def swapper_objective(
    X: torch.Tensor,
    X_tilde: torch.Tensor,
    swappers,
    cfg: TrainConfig,
    generator: torch.Generator,
) -> torch.Tensor:
    """Loss minimized by the swapper optimizer, i.e. the negated swap loss.

    With `swapper_sees_regularizers` off only the mean SWD is negated.
    """
    terms = swap_terms(X, X_tilde, swappers, cfg, generator)
    if cfg.swapper_sees_regularizers:
        return -terms.value
    return -terms.swd_mean
