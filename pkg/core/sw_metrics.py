"""Empirical Wasserstein-type distances and dependency measures.

All estimators accept numpy arrays or torch tensors and return 0-dim torch
tensors, so the same code serves the differentiable training objective and
the float64 diagnostics. Computation happens in the dtype of the input
(numpy inputs are promoted to float64).
"""

import logging

import numpy as np
import torch

from .errors import DegenerateSampleError, InvalidArgumentError
from .models import ProjectionConfig
from .seeding import derive_seed, torch_generator

logger = logging.getLogger(__name__)

# Pre-clamp SWC values outside this band indicate estimator trouble.
SWC_WARN_LOW = -0.05
SWC_WARN_HIGH = 1.05


def as_tensor(values, dtype: torch.dtype | None = None) -> torch.Tensor:
    """Convert array-like input to a tensor, keeping tensors (and their graph) intact."""
    if isinstance(values, torch.Tensor):
        return values if dtype is None else values.to(dtype)
    array = np.asarray(values, dtype=np.float64)
    tensor = torch.from_numpy(np.ascontiguousarray(array))
    return tensor if dtype is None else tensor.to(dtype)


def _as_sample(values, name: str) -> torch.Tensor:
    tensor = as_tensor(values)
    if tensor.dim() == 1:
        tensor = tensor.unsqueeze(1)
    if tensor.dim() != 2:
        raise InvalidArgumentError(f"{name} must be a 2-D sample, got shape {tuple(tensor.shape)}")
    if tensor.shape[0] == 0:
        raise InvalidArgumentError(f"{name} is empty")
    return tensor


def _root(value: torch.Tensor, order: int) -> torch.Tensor:
    """value ** (1/order) with a zero gradient at 0 instead of NaN."""
    if order == 1:
        return value
    positive = value > 0
    safe = torch.where(positive, value, torch.ones_like(value))
    return torch.where(positive, safe ** (1.0 / order), torch.zeros_like(value))


def _quantile_grid(n: int, m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Merged breakpoints of two empirical quantile functions on an integer grid of n*m cells.

    Returns the order-statistic index into each sample on every piece plus the
    piece widths (which sum to 1).
    """
    breaks = np.union1d(np.arange(n + 1) * m, np.arange(m + 1) * n)
    upper = breaks[1:]
    index_a = (upper + m - 1) // m - 1
    index_b = (upper + n - 1) // n - 1
    widths = np.diff(breaks) / float(n * m)
    return index_a, index_b, widths


def _sorted_transport_cost(
    sorted_a: torch.Tensor, sorted_b: torch.Tensor, order: int
) -> torch.Tensor:
    """Mean p-th power transport cost between sorted columns (rows = order statistics)."""
    n, m = sorted_a.shape[0], sorted_b.shape[0]
    if n == m:
        return (sorted_a - sorted_b).abs().pow(order).mean(dim=0)
    index_a, index_b, widths = _quantile_grid(n, m)
    qa = sorted_a[torch.from_numpy(index_a)]
    qb = sorted_b[torch.from_numpy(index_b)]
    weights = torch.from_numpy(widths).to(sorted_a.dtype)
    if sorted_a.dim() > 1:
        weights = weights.unsqueeze(-1)
    return ((qa - qb).abs().pow(order) * weights).sum(dim=0)


def wasserstein_1d(a, b, order: int = 1) -> torch.Tensor:
    """Wasserstein-p distance between two 1-D empirical distributions.

    Equal lengths reduce to sorted matching. Unequal lengths integrate the
    difference of the piecewise-constant quantile functions exactly.

    Args:
        a: First sample
        b: Second sample
        order: Transport order p (1 or 2)

    Returns:
        Non-negative 0-dim tensor

    Raises:
        InvalidArgumentError: If either sample is empty or non-finite
    """
    if order not in (1, 2):
        raise InvalidArgumentError(f"order must be 1 or 2, got {order}")
    ta = as_tensor(a).reshape(-1)
    tb = as_tensor(b).reshape(-1)
    if ta.numel() == 0 or tb.numel() == 0:
        raise InvalidArgumentError("wasserstein_1d needs nonempty samples")
    if not (torch.isfinite(ta).all() and torch.isfinite(tb).all()):
        raise InvalidArgumentError("wasserstein_1d needs finite samples")
    tb = tb.to(ta.dtype)
    cost = _sorted_transport_cost(torch.sort(ta).values, torch.sort(tb).values, order)
    return _root(cost, order)


def random_projections(
    dim: int,
    num_projections: int,
    generator: torch.Generator,
    dtype: torch.dtype = torch.float64,
) -> torch.Tensor:
    """Directions uniform on the unit sphere, shape (num_projections, dim)."""
    directions = torch.randn(num_projections, dim, generator=generator, dtype=torch.float64)
    directions = directions / directions.norm(dim=1, keepdim=True)
    return directions.to(dtype)


def _resolve_generator(cfg: ProjectionConfig, generator: torch.Generator | None) -> torch.Generator:
    if generator is not None:
        return generator
    if cfg.seed is not None:
        return torch_generator(cfg.seed)
    fresh = torch.Generator()
    fresh.seed()
    return fresh


def sliced_wasserstein_distance(
    a,
    b,
    cfg: ProjectionConfig | None = None,
    generator: torch.Generator | None = None,
    projections: torch.Tensor | None = None,
) -> torch.Tensor:
    """Monte Carlo sliced Wasserstein distance between two samples of equal dimension.

    Directions come from `projections` if given, else from `generator`, else
    from `cfg.seed`, else fresh entropy.
    """
    cfg = cfg or ProjectionConfig()
    ta = _as_sample(a, "A")
    tb = _as_sample(b, "B").to(ta.dtype)
    if ta.shape[1] != tb.shape[1]:
        raise InvalidArgumentError(
            f"Dimension mismatch: A has {ta.shape[1]} columns, B has {tb.shape[1]}"
        )
    if projections is None:
        projections = random_projections(
            ta.shape[1], cfg.num_projections, _resolve_generator(cfg, generator), ta.dtype
        )
    projections = projections.to(ta.dtype)
    pa = torch.sort(ta @ projections.T, dim=0).values
    pb = torch.sort(tb @ projections.T, dim=0).values
    per_direction = _root(_sorted_transport_cost(pa, pb, cfg.order), cfg.order)
    return per_direction.mean()


def _swc_pairings(x: torch.Tensor, y: torch.Tensor):
    n = x.shape[0] // 2
    x1, x2 = x[:n], x[n:]
    y1, y2 = y[:n], y[n:]
    joint_xy = torch.cat([x1, y1], dim=1)
    split_xy = torch.cat([x2, y1], dim=1)
    joint_xx = torch.cat([x1, x1], dim=1)
    split_xx = torch.cat([x2, x1], dim=1)
    joint_yy = torch.cat([y1, y1], dim=1)
    split_yy = torch.cat([y2, y1], dim=1)
    return (joint_xy, split_xy), (joint_xx, split_xx), (joint_yy, split_yy)


def sliced_wasserstein_correlation(
    x,
    y,
    cfg: ProjectionConfig | None = None,
    generator: torch.Generator | None = None,
) -> torch.Tensor:
    """Sliced Wasserstein correlation between paired samples, in [0, 1].

    Rows are split into halves. The first half gives the joint law, and
    pairing second-half X rows with first-half Y rows gives the product of
    marginals. The cross distance is normalized by the geometric mean of the
    two self distances. All three distances reuse one direction seed, so
    SWC(X, X) is exactly 1.

    Raises:
        InvalidArgumentError: Odd or mismatched row counts
        DegenerateSampleError: A self distance is zero
    """
    cfg = cfg or ProjectionConfig()
    tx = _as_sample(x, "X")
    ty = _as_sample(y, "Y").to(tx.dtype)
    if tx.shape[0] != ty.shape[0]:
        raise InvalidArgumentError(
            f"Row mismatch: X has {tx.shape[0]} rows, Y has {ty.shape[0]}"
        )
    if tx.shape[0] % 2 != 0 or tx.shape[0] < 2:
        raise InvalidArgumentError(f"SWC needs an even row count >= 2, got {tx.shape[0]}")

    if generator is not None:
        base_seed = int(torch.randint(0, 2**62, (1,), generator=generator).item())
    elif cfg.seed is not None:
        base_seed = cfg.seed
    else:
        base_seed = int(np.random.SeedSequence().generate_state(1, dtype=np.uint64)[0] >> 1)

    distances = []
    for joint, split in _swc_pairings(tx, ty):
        stream = torch_generator(derive_seed(base_seed, "swc", joint.shape[1]))
        distances.append(sliced_wasserstein_distance(joint, split, cfg, generator=stream))
    cross, self_x, self_y = distances

    if self_x.item() <= 0.0 or self_y.item() <= 0.0:
        raise DegenerateSampleError(
            "SWC denominator is zero",
            [f"SWD(xx)={self_x.item():.3e}", f"SWD(yy)={self_y.item():.3e}"],
        )
    if cross.item() <= 0.0:
        return torch.zeros((), dtype=tx.dtype) + 0.0 * cross

    value = torch.exp(torch.log(cross) - 0.5 * (torch.log(self_x) + torch.log(self_y)))
    raw = value.item()
    if raw < SWC_WARN_LOW or raw > SWC_WARN_HIGH:
        logger.warning(f"SWC pre-clamp value {raw:.4f} outside [{SWC_WARN_LOW}, {SWC_WARN_HIGH}]")
    return value.clamp(min=0.0, max=1.0)


def mmd_linear(a, b) -> torch.Tensor:
    """Linear-kernel MMD^2: squared distance between column means."""
    ta = _as_sample(a, "A")
    tb = _as_sample(b, "B").to(ta.dtype)
    if ta.shape[1] != tb.shape[1]:
        raise InvalidArgumentError(
            f"Dimension mismatch: A has {ta.shape[1]} columns, B has {tb.shape[1]}"
        )
    return (ta.mean(dim=0) - tb.mean(dim=0)).pow(2).sum()
