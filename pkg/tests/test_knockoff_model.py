"""Tests for the knockoff generator and swappers."""

import numpy as np
import pytest
import torch

from core.errors import InvalidArgumentError
from core.knockoff_model import (
    KnockoffTransformer,
    Swapper,
    apply_swap,
    generate_knockoff,
    make_swappers,
    seeded_dropout,
)
from core.models import NET_PRESETS, KnockoffNetConfig
from core.seeding import torch_generator


@pytest.fixture
def tiny_net():
    return KnockoffTransformer(5, NET_PRESETS["tiny"], seed=0)


class TestKnockoffTransformer:
    """Tests for the attention generator."""

    def test_output_shape(self, tiny_net):
        """The knockoff has the shape of X."""
        x = torch.randn(7, 5)
        z = torch.rand(7, 5)
        assert tiny_net(x, z).shape == (7, 5)

    def test_seeded_init(self):
        """The same seed gives identical weights."""
        a = KnockoffTransformer(5, NET_PRESETS["tiny"], seed=3)
        b = KnockoffTransformer(5, NET_PRESETS["tiny"], seed=3)
        for pa, pb in zip(a.parameters(), b.parameters()):
            torch.testing.assert_close(pa, pb)

    def test_shape_mismatch(self, tiny_net):
        """X with the wrong width is rejected."""
        with pytest.raises(InvalidArgumentError, match="Expected X and Z"):
            tiny_net(torch.randn(3, 4), torch.rand(3, 4))

    def test_noise_changes_output(self, tiny_net):
        """Different Z gives a different knockoff."""
        tiny_net.eval()
        x = torch.randn(4, 5)
        a = tiny_net(x, torch.zeros(4, 5))
        b = tiny_net(x, torch.ones(4, 5))
        assert not torch.allclose(a, b)

    def test_generate_deterministic(self, tiny_net):
        """A pinned seed reproduces the knockoff and restores the mode."""
        X = np.random.default_rng(0).normal(size=(10, 5))
        tiny_net.train()
        a = generate_knockoff(tiny_net, X, seed=4)
        b = generate_knockoff(tiny_net, X, seed=4)
        np.testing.assert_array_equal(a, b)
        assert a.dtype == np.float64
        assert tiny_net.training

    def test_non_finite_weights_rejected(self, tiny_net):
        """Generation refuses a net with NaN weights."""
        with torch.no_grad():
            tiny_net.head.bias.fill_(float("nan"))
        with pytest.raises(InvalidArgumentError, match="Non-finite"):
            generate_knockoff(tiny_net, np.zeros((2, 5)), seed=0)

    def test_heads_must_divide_hidden(self):
        """hidden_dim must split evenly across heads."""
        with pytest.raises(ValueError, match="divisible"):
            KnockoffNetConfig(num_heads=3, hidden_dim=16)

    def test_seeded_dropout(self):
        """Dropout with a generator is reproducible and inactive in eval."""
        x = torch.ones(100)
        a = seeded_dropout(x, 0.5, True, torch_generator(1))
        b = seeded_dropout(x, 0.5, True, torch_generator(1))
        torch.testing.assert_close(a, b)
        assert set(a.unique().tolist()) <= {0.0, 2.0}
        assert seeded_dropout(x, 0.5, False, None) is x


class TestSwapper:
    """Tests for Gumbel-softmax swappers."""

    def test_relaxed_range(self):
        """Relaxed draws lie in [0, 1]."""
        b = Swapper(6, seed=0).sample(torch_generator(0))
        assert b.shape == (6,)
        assert float(b.min()) >= 0.0
        assert float(b.max()) <= 1.0

    def test_hard_is_binary(self):
        """Hard draws are exactly 0 or 1."""
        b = Swapper(6, seed=0).sample(torch_generator(0), relaxed=False)
        assert set(b.unique().tolist()) <= {0.0, 1.0}

    def test_low_temperature_concentrates(self):
        """At low temperature relaxed draws collapse onto the hard swap."""
        swapper = Swapper(8, temperature=0.001, seed=0)
        with torch.no_grad():
            swapper.logits[0].fill_(-10.0)
            swapper.logits[1].fill_(10.0)
        relaxed = swapper.sample(torch_generator(5))
        hard = swapper.sample(torch_generator(5), relaxed=False)
        torch.testing.assert_close(hard, torch.ones(8))
        torch.testing.assert_close(relaxed, hard, atol=1e-6, rtol=0.0)

    def test_invalid_temperature(self):
        """Temperature must be positive."""
        with pytest.raises(InvalidArgumentError, match="temperature"):
            Swapper(3, temperature=0.0)

    def test_make_swappers_distinct(self):
        """Swappers from one seed start from different logits."""
        swappers = make_swappers(4, 3, 0.2, seed=0)
        assert len(swappers) == 3
        assert not torch.equal(swappers[0].logits, swappers[1].logits)


class TestApplySwap:
    """Tests for apply_swap."""

    def test_hard_swap_exchanges_columns(self):
        """b=1 on a column exchanges exactly that column."""
        X = np.arange(6.0).reshape(2, 3)
        X_tilde = -X
        b = np.array([0.0, 1.0, 0.0])
        X_sw, X_tilde_sw = apply_swap(X, X_tilde, b)
        np.testing.assert_array_equal(X_sw[:, 1], X_tilde[:, 1])
        np.testing.assert_array_equal(X_tilde_sw[:, 1], X[:, 1])
        np.testing.assert_array_equal(X_sw[:, [0, 2]], X[:, [0, 2]])

    def test_half_swap_averages(self):
        """b=0.5 gives the midpoint in both outputs."""
        X = torch.ones(2, 2)
        X_tilde = torch.zeros(2, 2)
        X_sw, X_tilde_sw = apply_swap(X, X_tilde, torch.full((2,), 0.5))
        torch.testing.assert_close(X_sw, X_tilde_sw)

    def test_weights_out_of_range(self):
        """Weights outside [0, 1] are rejected."""
        with pytest.raises(InvalidArgumentError, match="Swap weights"):
            apply_swap(np.zeros((2, 2)), np.zeros((2, 2)), np.array([0.0, 1.5]))

    def test_shape_mismatch(self):
        """X and X~ must have the same shape."""
        with pytest.raises(InvalidArgumentError, match="Shape mismatch"):
            apply_swap(np.zeros((2, 2)), np.zeros((3, 2)), np.zeros(2))
