"""Synthetic and semi-synthetic data generation."""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import special, stats

from .errors import DegenerateColumnError, InvalidArgumentError
from .models import (
    CoefficientSpec,
    CopulaSpec,
    DatasetSpec,
    GaussianMixtureSpec,
    ResponseSpec,
)
from .seeding import derive_seed, numpy_rng

logger = logging.getLogger(__name__)


@dataclass
class SyntheticDataset:
    """A design matrix with its response and ground truth."""

    X: np.ndarray
    Y: np.ndarray | None
    beta_star: np.ndarray
    nonnull_mask: np.ndarray
    seed: int
    tag: str = ""
    has_ground_truth: bool = True
    metadata: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def truth_mask(self) -> np.ndarray | None:
        """The nonnull mask, or None when the truth is unknown."""
        return self.nonnull_mask if self.has_ground_truth else None


def _check_shape(n: int, p: int) -> None:
    if n < 2 or p < 2:
        raise InvalidArgumentError(f"Need n >= 2 and p >= 2, got n={n}, p={p}")


# =============================================================================
# Design matrices
# =============================================================================


def ar_covariance(p: int, rho: float) -> np.ndarray:
    """Covariance with entries rho^|i-j|."""
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def sample_gaussian_mixture(spec: GaussianMixtureSpec, n: int, p: int, seed: int) -> np.ndarray:
    """Draw n rows from the three-component AR Gaussian mixture."""
    _check_shape(n, p)
    rng = numpy_rng(seed)
    components = rng.choice(3, size=n, p=np.asarray(spec.weights, dtype=float))
    X = np.empty((n, p))
    for k, rho in enumerate(spec.component_rhos()):
        rows = components == k
        count = int(rows.sum())
        if count == 0:
            continue
        chol = np.linalg.cholesky(ar_covariance(p, rho))
        X[rows] = spec.mean_step * k + rng.standard_normal((count, p)) @ chol.T
    return X


def sample_iid_gaussian(n: int, p: int, seed: int) -> np.ndarray:
    _check_shape(n, p)
    return numpy_rng(seed).standard_normal((n, p))


def sample_sibuya(alpha: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Sibuya(alpha) frailties for the Joe copula, alpha = 1/theta in (0, 1]."""
    u = rng.uniform(size=size)
    out = np.ones(size)
    if alpha >= 1.0:
        return out
    tail = u > alpha
    if not tail.any():
        return out
    ut = u[tail]
    with np.errstate(over="ignore"):
        ginv = ((1.0 - ut) * special.gamma(1.0 - alpha)) ** (-1.0 / alpha)
    ginv = np.minimum(ginv, 1e15)
    floor = np.floor(ginv)
    with np.errstate(divide="ignore", over="ignore"):
        bound = 1.0 / (floor * special.beta(floor, 1.0 - alpha))
    out[tail] = np.where(1.0 - ut < bound, np.ceil(ginv), floor)
    return out


def sample_archimedean_copula(spec: CopulaSpec, n: int, p: int, seed: int) -> np.ndarray:
    """Exchangeable Clayton or Joe copula via the frailty construction, then marginals."""
    _check_shape(n, p)
    rng = numpy_rng(seed)
    expo = rng.exponential(size=(n, p))
    if spec.family == "clayton":
        frailty = rng.gamma(shape=1.0 / spec.theta, size=n)[:, None]
        u = (1.0 + expo / frailty) ** (-1.0 / spec.theta)
    elif spec.family == "joe":
        frailty = sample_sibuya(1.0 / spec.theta, n, rng)[:, None]
        u = 1.0 - (-np.expm1(-expo / frailty)) ** (1.0 / spec.theta)
    else:
        raise InvalidArgumentError(f"Unsupported copula family '{spec.family}'")
    u = np.clip(u, 0.0, 1.0 - 1e-16)
    return apply_marginal(u, spec.marginal)


def apply_marginal(u: np.ndarray, marginal: str) -> np.ndarray:
    if marginal == "uniform":
        return u
    if marginal == "exponential":
        return -np.log1p(-u)
    if marginal == "gamma":
        return stats.gamma.ppf(u, a=2.0)
    raise InvalidArgumentError(f"Unsupported marginal '{marginal}'")


# =============================================================================
# Coefficients and responses
# =============================================================================


def coefficient_amplitude(spec: CoefficientSpec, n: int, p: int) -> float:
    return p / (spec.scale_divisor * math.sqrt(n))


def sample_coefficients(
    spec: CoefficientSpec, n: int, p: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Sparse Rademacher coefficients on m uniformly chosen features."""
    if spec.num_nonnull > p:
        raise InvalidArgumentError(
            f"num_nonnull ({spec.num_nonnull}) exceeds number of features ({p})"
        )
    rng = numpy_rng(seed)
    beta = np.zeros(p)
    mask = np.zeros(p, dtype=bool)
    if spec.num_nonnull == 0:
        return beta, mask
    chosen = rng.choice(p, size=spec.num_nonnull, replace=False)
    signs = rng.choice(np.array([-1.0, 1.0]), size=spec.num_nonnull)
    beta[chosen] = coefficient_amplitude(spec, n, p) * signs
    mask[chosen] = True
    return beta, mask


def synthesize_linear_response(
    X: np.ndarray, beta_star: np.ndarray, seed: int, noise_scale: float = 1.0
) -> np.ndarray:
    """Y = X beta + eps with eps ~ N(0, noise_scale^2)."""
    if X.shape[1] != beta_star.shape[0]:
        raise InvalidArgumentError(
            f"X has {X.shape[1]} columns but beta_star has length {beta_star.shape[0]}"
        )
    noise = numpy_rng(seed).standard_normal(X.shape[0])
    return X @ beta_star + noise_scale * noise


def synthesize_tanh_response(
    X: np.ndarray,
    m: int,
    seed: int,
    phi: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Grouped nonlinear response over m covariates in blocks of four.

    Args:
        X: Design matrix (n x p)
        m: Number of true covariates, a multiple of 4 and at most p
        seed: Seed for covariate choice, coefficients and noise
        phi: Optional (m/4, 5) coefficient table overriding the random draw

    Returns:
        (Y, nonnull_mask)
    """
    n, p = X.shape
    if m % 4 != 0:
        raise InvalidArgumentError(f"m must be divisible by 4, got {m}")
    if m > p:
        raise InvalidArgumentError(f"m ({m}) exceeds number of features ({p})")
    rng = numpy_rng(seed)
    chosen = rng.choice(p, size=m, replace=False)
    groups = m // 4
    drawn = np.empty((groups, 5))
    drawn[:, :2] = rng.normal(1.0, 1.0, size=(groups, 2))
    drawn[:, 2:] = rng.normal(2.0, 1.0, size=(groups, 3))
    noise = rng.standard_normal(n)
    if phi is None:
        phi = drawn
    elif phi.shape != (groups, 5):
        raise InvalidArgumentError(f"phi must have shape ({groups}, 5), got {phi.shape}")

    y = noise.copy()
    for k in range(groups):
        a, b, c, d = X[:, chosen[4 * k: 4 * k + 4]].T
        y += phi[k, 0] * a + phi[k, 2] * b + phi[k, 3] * np.tanh(phi[k, 1] * c + phi[k, 4] * d)

    mask = np.zeros(p, dtype=bool)
    mask[chosen] = True
    return y, mask


# =============================================================================
# Preprocessing and splits
# =============================================================================


def standardize_columns(X: np.ndarray) -> np.ndarray:
    """Zero mean, unit population standard deviation per column."""
    X = np.asarray(X, dtype=float)
    std = X.std(axis=0)
    for j, s in enumerate(std):
        if not s > 0:
            raise DegenerateColumnError(j)
    return (X - X.mean(axis=0)) / std


def minmax_normalize(X: np.ndarray) -> np.ndarray:
    """Scale every column to [0, 1]."""
    X = np.asarray(X, dtype=float)
    lo, hi = X.min(axis=0), X.max(axis=0)
    span = hi - lo
    for j, s in enumerate(span):
        if not s > 0:
            raise DegenerateColumnError(j)
    return (X - lo) / span


def split_indices(n: int, ratio: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if n < 5:
        raise InvalidArgumentError(f"Need at least 5 rows to split, got {n}")
    order = numpy_rng(seed).permutation(n)
    n_train = math.ceil(ratio * n)
    return np.sort(order[:n_train]), np.sort(order[n_train:])


def split_train_val(
    X: np.ndarray, ratio: float = 0.8, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint random row split of sizes ceil(ratio*n) and the remainder."""
    train_idx, val_idx = split_indices(X.shape[0], ratio, seed)
    return X[train_idx], X[val_idx]


def oracle_knockoff_independent(X: np.ndarray, seed: int) -> np.ndarray:
    """Independent per-column row permutations of X.

    A valid knockoff only when the columns of X are independent.
    """
    rng = numpy_rng(seed)
    X = np.asarray(X)
    out = np.empty_like(X)
    for j in range(X.shape[1]):
        out[:, j] = X[rng.permutation(X.shape[0]), j]
    return out


# =============================================================================
# Dataset assembly
# =============================================================================

DATASET_REGISTRY: dict[str, DatasetSpec] = {
    "MG": DatasetSpec(kind="mixture"),
    "C+U": DatasetSpec(kind="copula", copula=CopulaSpec(family="clayton", marginal="uniform")),
    "J+U": DatasetSpec(kind="copula", copula=CopulaSpec(family="joe", marginal="uniform")),
    "C+E": DatasetSpec(kind="copula", copula=CopulaSpec(family="clayton", marginal="exponential")),
    "J+E": DatasetSpec(kind="copula", copula=CopulaSpec(family="joe", marginal="exponential")),
    "C+G": DatasetSpec(kind="copula", copula=CopulaSpec(family="clayton", marginal="gamma")),
    "J+G": DatasetSpec(kind="copula", copula=CopulaSpec(family="joe", marginal="gamma")),
}


def dataset_from_tag(tag: str) -> DatasetSpec:
    if tag not in DATASET_REGISTRY:
        valid = ", ".join(DATASET_REGISTRY)
        raise InvalidArgumentError(f"Unknown dataset tag '{tag}'. Valid tags: {valid}")
    return DATASET_REGISTRY[tag].model_copy(deep=True)


def sample_design(spec: DatasetSpec, n: int, p: int, seed: int) -> np.ndarray:
    if spec.kind == "mixture":
        return sample_gaussian_mixture(spec.mixture, n, p, seed)
    if spec.kind == "copula":
        return sample_archimedean_copula(spec.copula, n, p, seed)
    if spec.kind == "gaussian":
        return sample_iid_gaussian(n, p, seed)
    raise InvalidArgumentError(f"Dataset kind '{spec.kind}' is not sampled")


def generate_dataset(
    dataset: DatasetSpec,
    n: int,
    p: int,
    coefficients: CoefficientSpec,
    response: ResponseSpec,
    seed: int,
) -> SyntheticDataset:
    """Draw (X, Y) with ground truth; X is returned standardized.

    External datasets load X (and Y, when given) from disk, are min-max
    normalized and standardized, and get a synthetic response when Y is absent.
    """
    if dataset.kind == "external":
        X_raw, Y = load_external(dataset.x_path, dataset.y_path)
        X = standardize_columns(minmax_normalize(X_raw))
    else:
        X = standardize_columns(sample_design(dataset, n, p, derive_seed(seed, "design")))
        Y = None
    n, p = X.shape

    has_truth = Y is None
    if Y is not None:
        logger.info("External response given: no ground truth, fdp and power are not reported")
        beta = np.zeros(p)
        mask = np.zeros(p, dtype=bool)
    elif response.kind == "linear":
        beta, mask = sample_coefficients(coefficients, n, p, derive_seed(seed, "coefficients"))
        Y = synthesize_linear_response(X, beta, derive_seed(seed, "noise"))
    else:
        Y, mask = synthesize_tanh_response(
            X, response.tanh_num_covariates, derive_seed(seed, "tanh")
        )
        beta = np.zeros(p)

    logger.debug(f"Generated dataset {dataset.tag}: n={n}, p={p}, nonnulls={int(mask.sum())}")
    return SyntheticDataset(
        X=X,
        Y=Y,
        beta_star=beta,
        nonnull_mask=mask,
        seed=seed,
        tag=dataset.tag,
        has_ground_truth=has_truth,
        metadata={"dataset": dataset.model_dump(), "response": response.kind},
    )


# =============================================================================
# Persistence
# =============================================================================


def save_matrix(matrix: np.ndarray, path: Path, prefix: str = "x") -> None:
    """Write a matrix as comma-separated text with a header line."""
    path.parent.mkdir(parents=True, exist_ok=True)
    matrix = np.asarray(matrix)
    if matrix.ndim == 1:
        matrix = matrix.reshape(-1, 1)
    columns = [f"{prefix}{j}" for j in range(matrix.shape[1])]
    pd.DataFrame(matrix, columns=columns).to_csv(path, index=False)


def load_matrix(path: Path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise InvalidArgumentError(f"Matrix file not found: {path}")
    return pd.read_csv(path).to_numpy(dtype=float)


def load_external(x_path: str, y_path: str | None) -> tuple[np.ndarray, np.ndarray | None]:
    X = load_matrix(Path(x_path))
    Y = load_matrix(Path(y_path)).reshape(-1) if y_path else None
    if Y is not None and Y.shape[0] != X.shape[0]:
        raise InvalidArgumentError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
    return X, Y


def save_dataset(dataset: SyntheticDataset, directory: Path) -> dict[str, Path]:
    """Write X.csv, Y.csv and a metadata.json sidecar."""
    directory.mkdir(parents=True, exist_ok=True)
    paths = {"X": directory / "X.csv", "metadata": directory / "metadata.json"}
    save_matrix(dataset.X, paths["X"])
    if dataset.Y is not None:
        paths["Y"] = directory / "Y.csv"
        save_matrix(dataset.Y, paths["Y"], prefix="y")
    sidecar = {
        "seed": dataset.seed,
        "tag": dataset.tag,
        "n": dataset.n,
        "p": dataset.p,
        "beta_star": dataset.beta_star.tolist(),
        "nonnull_mask": dataset.nonnull_mask.astype(bool).tolist(),
        "has_ground_truth": dataset.has_ground_truth,
        **dataset.metadata,
    }
    with open(paths["metadata"], "w") as f:
        json.dump(sidecar, f, indent=2)
    return paths


def load_dataset(directory: Path) -> SyntheticDataset | None:
    """Load a dataset written by save_dataset, or None if absent."""
    meta_path = directory / "metadata.json"
    if not meta_path.exists():
        return None
    with open(meta_path, "r") as f:
        meta = json.load(f)
    y_path = directory / "Y.csv"
    return SyntheticDataset(
        X=load_matrix(directory / "X.csv"),
        Y=load_matrix(y_path).reshape(-1) if y_path.exists() else None,
        beta_star=np.asarray(meta.pop("beta_star"), dtype=float),
        nonnull_mask=np.asarray(meta.pop("nonnull_mask"), dtype=bool),
        seed=meta.pop("seed"),
        tag=meta.pop("tag", ""),
        has_ground_truth=meta.pop("has_ground_truth", True),
        metadata={k: v for k, v in meta.items() if k not in ("n", "p")},
    )
