"""Dependency regularized perturbation of a generated knockoff."""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .models import DrpConfig
from .seeding import array_digest, numpy_rng

logger = logging.getLogger(__name__)


@dataclass
class DrpOutcome:
    knockoff: np.ndarray
    alpha: float
    seed: int | None
    permutation_digest: str

    def metadata(self) -> dict:
        return {
            "drp_alpha": self.alpha,
            "drp_seed": self.seed,
            "drp_permutation_digest": self.permutation_digest,
        }


def apply_drp(
    X_tilde: np.ndarray,
    X: np.ndarray,
    cfg: DrpConfig,
    seed: int | None = None,
    permutation: np.ndarray | None = None,
) -> DrpOutcome:
    """Mix the knockoff with a whole-row permutation of X: (1 - a) X~ + a X[sigma].

    Args:
        X_tilde: Generated knockoff (n x p)
        X: Design matrix (n x p)
        cfg: Perturbation weight (fixed or n-dependent) and default seed
        seed: Overrides cfg.seed for the permutation draw
        permutation: Explicit row permutation (e.g. the identity) instead of a draw
    """
    X_tilde = np.asarray(X_tilde, dtype=float)
    X = np.asarray(X, dtype=float)
    if X_tilde.shape != X.shape:
        raise InvalidArgumentError(f"Shape mismatch: X~ {X_tilde.shape} vs X {X.shape}")
    n = X.shape[0]
    seed = cfg.seed if seed is None else seed
    if permutation is None:
        permutation = numpy_rng(seed).permutation(n)
    elif sorted(permutation.tolist()) != list(range(n)):
        raise InvalidArgumentError("permutation must be a permutation of the row indices")

    alpha = cfg.alpha_for(n)
    mixed = (1.0 - alpha) * X_tilde + alpha * X[permutation]
    if alpha == 0.0:
        mixed = X_tilde.copy()
    elif alpha == 1.0:
        mixed = X[permutation].copy()
    logger.debug(f"DRP applied with alpha={alpha:.4f} over {n} rows")
    return DrpOutcome(
        knockoff=mixed,
        alpha=alpha,
        seed=seed,
        permutation_digest=array_digest(np.asarray(permutation, dtype=np.int64)),
    )
