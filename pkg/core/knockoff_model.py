"""Attention-based knockoff generator and Gumbel-softmax swappers."""

import logging
import math

import numpy as np
import torch
from torch import nn

from .errors import InvalidArgumentError
from .models import KnockoffNetConfig
from .seeding import derive_seed, torch_generator

logger = logging.getLogger(__name__)

# =============================================================================
# Building blocks
# =============================================================================


def seeded_dropout(
    x: torch.Tensor, rate: float, training: bool, generator: torch.Generator | None
) -> torch.Tensor:
    """Inverted dropout drawing its mask from an explicit generator."""
    if not training or rate == 0.0:
        return x
    if generator is None:
        return nn.functional.dropout(x, rate, training=True)
    keep = torch.rand(x.shape, generator=generator, dtype=x.dtype) >= rate
    return x * keep / (1.0 - rate)


class Attention(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.heads = heads
        self.scale = (dim // heads) ** -0.5
        self.to_qkv = nn.Linear(dim, dim * 3, bias=False)
        self.to_out = nn.Linear(dim, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, t, d = x.shape
        qkv = self.to_qkv(x).reshape(b, t, 3, self.heads, d // self.heads)
        q, k, v = qkv.permute(2, 0, 3, 1, 4)
        weights = torch.softmax(q @ k.transpose(-2, -1) * self.scale, dim=-1)
        out = (weights @ v).transpose(1, 2).reshape(b, t, d)
        return self.to_out(out)


class FeedForward(nn.Module):
    def __init__(self, dim: int, hidden: int):
        super().__init__()
        self.fc1 = nn.Linear(dim, hidden)
        self.fc2 = nn.Linear(hidden, dim)

    def forward(self, x, rate: float, generator: torch.Generator | None) -> torch.Tensor:
        h = nn.functional.gelu(self.fc1(x))
        h = seeded_dropout(h, rate, self.training, generator)
        return self.fc2(h)


class TransformerBlock(nn.Module):
    """Pre-norm attention plus feed-forward, both residual."""

    def __init__(self, config: KnockoffNetConfig):
        super().__init__()
        self.rate = config.dropout
        self.norm_attn = nn.LayerNorm(config.hidden_dim)
        self.attn = Attention(config.hidden_dim, config.num_heads)
        self.norm_ff = nn.LayerNorm(config.hidden_dim)
        self.ff = FeedForward(config.hidden_dim, config.hidden_dim * config.mlp_ratio)

    def forward(self, x: torch.Tensor, generator: torch.Generator | None) -> torch.Tensor:
        x = x + seeded_dropout(self.attn(self.norm_attn(x)), self.rate, self.training, generator)
        x = x + seeded_dropout(
            self.ff(self.norm_ff(x), self.rate, generator), self.rate, self.training, generator
        )
        return x


# =============================================================================
# Generator
# =============================================================================


class KnockoffTransformer(nn.Module):
    """Maps (X, Z) to a knockoff X~ of the same shape.

    Each coordinate j becomes one token embedding the pair (x_j, z_j). A
    learned positional embedding marks the coordinate, pre-norm attention
    blocks mix the tokens, and a linear head reads one value per token.
    """

    def __init__(self, p: int, config: KnockoffNetConfig, seed: int = 0):
        super().__init__()
        self.p = p
        self.config = config
        self.embed = nn.Linear(2, config.hidden_dim)
        self.pos_embedding = nn.Parameter(torch.zeros(1, p, config.hidden_dim))
        self.blocks = nn.ModuleList(TransformerBlock(config) for _ in range(config.num_layers))
        self.norm = nn.LayerNorm(config.hidden_dim)
        self.head = nn.Linear(config.hidden_dim, 1)
        self.reset_parameters(seed)

    @torch.no_grad()
    def reset_parameters(self, seed: int) -> None:
        """Deterministic initialization from `seed` without touching the global RNG."""
        generator = torch_generator(derive_seed(seed, "init"))
        for module in self.modules():
            if isinstance(module, nn.Linear):
                bound = 1.0 / math.sqrt(module.in_features)
                module.weight.uniform_(-bound, bound, generator=generator)
                if module.bias is not None:
                    module.bias.uniform_(-bound, bound, generator=generator)
            elif isinstance(module, nn.LayerNorm):
                module.weight.fill_(1.0)
                module.bias.zero_()
        self.pos_embedding.normal_(0.0, 0.02, generator=generator)

    def check_finite(self) -> None:
        for name, param in self.named_parameters():
            if not torch.isfinite(param).all():
                raise InvalidArgumentError(f"Non-finite weights in '{name}'")

    def forward(
        self, x: torch.Tensor, z: torch.Tensor, generator: torch.Generator | None = None
    ) -> torch.Tensor:
        if x.shape != z.shape or x.dim() != 2 or x.shape[1] != self.p:
            raise InvalidArgumentError(
                f"Expected X and Z of shape (b, {self.p}), "
                f"got {tuple(x.shape)} and {tuple(z.shape)}"
            )
        tokens = self.embed(torch.stack([x, z], dim=-1)) + self.pos_embedding
        tokens = seeded_dropout(tokens, self.config.dropout, self.training, generator)
        for block in self.blocks:
            tokens = block(tokens, generator)
        return self.head(self.norm(tokens)).squeeze(-1)


def sample_noise(shape: tuple[int, ...], generator: torch.Generator, dtype=torch.float32):
    """Uniform [0, 1) noise Z."""
    return torch.rand(shape, generator=generator, dtype=dtype)


@torch.no_grad()
def generate_knockoff(net: KnockoffTransformer, X: np.ndarray, seed: int) -> np.ndarray:
    """Eval-mode knockoff for every row of X with Z pinned by `seed`."""
    net.check_finite()
    was_training = net.training
    net.eval()
    dtype = next(net.parameters()).dtype
    x = torch.as_tensor(np.asarray(X), dtype=dtype)
    z = sample_noise(tuple(x.shape), torch_generator(derive_seed(seed, "z")), dtype)
    out = net(x, z).cpu().numpy().astype(np.float64)
    net.train(was_training)
    return out


# =============================================================================
# Swappers
# =============================================================================


class Swapper(nn.Module):
    """Per-coordinate binary Gumbel-softmax swap distribution."""

    def __init__(self, p: int, temperature: float = 0.2, seed: int = 0):
        super().__init__()
        if not temperature > 0:
            raise InvalidArgumentError(f"temperature must be positive, got {temperature}")
        self.temperature = temperature
        generator = torch_generator(derive_seed(seed, "swapper"))
        self.logits = nn.Parameter(0.01 * torch.randn(2, p, generator=generator))

    @property
    def p(self) -> int:
        return self.logits.shape[1]

    def sample(
        self, generator: torch.Generator | None = None, relaxed: bool = True
    ) -> torch.Tensor:
        """Swap indicator b of length p: soft in [0, 1] or hard in {0, 1}."""
        u = torch.rand(self.logits.shape, generator=generator, dtype=self.logits.dtype)
        gumbel = -torch.log(-torch.log(u.clamp(1e-20, 1.0 - 1e-7)))
        probs = torch.softmax((self.logits + gumbel) / self.temperature, dim=0)
        if relaxed:
            return probs[1]
        return (probs[1] > probs[0]).to(self.logits.dtype)

    def flat_weights(self) -> torch.Tensor:
        return self.logits.reshape(-1)


def make_swappers(p: int, k: int, temperature: float, seed: int) -> nn.ModuleList:
    return nn.ModuleList(Swapper(p, temperature, derive_seed(seed, "swapper", i)) for i in range(k))


def apply_swap(X, X_tilde, b):
    """Column-wise convex exchange of X and X~ with weights b.

    Works on numpy arrays and torch tensors alike; hard b is the exact swap.
    """
    b_min, b_max = float(b.min()), float(b.max())
    if b_min < 0.0 or b_max > 1.0:
        raise InvalidArgumentError(f"Swap weights must lie in [0, 1], got [{b_min}, {b_max}]")
    if X.shape != X_tilde.shape or X.shape[-1] != b.shape[-1]:
        raise InvalidArgumentError(
            f"Shape mismatch: X {tuple(X.shape)}, X~ {tuple(X_tilde.shape)}, b {tuple(b.shape)}"
        )
    return (1 - b) * X + b * X_tilde, b * X + (1 - b) * X_tilde
