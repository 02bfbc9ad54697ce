"""Seed derivation and content digests.

Every stochastic stage draws from its own stream, derived by hashing the
parent seed together with a stage label. Streams never share state, so trials
and stages can run in any order (or concurrently) and still reproduce.
"""

import hashlib
import json
from typing import Any

import numpy as np
import torch
from pydantic import BaseModel

_SEED_MASK = (1 << 63) - 1


def derive_seed(*parts: Any) -> int:
    """Derive a 63-bit seed from an ordered tuple of labels and integers."""
    key = "|".join(str(part) for part in parts)
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & _SEED_MASK


def repeat_seed(base_seed: int, repeat_index: int) -> int:
    """Seed of the `repeat_index`-th trial of an experiment."""
    return derive_seed(base_seed, "repeat", repeat_index)


def numpy_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def torch_generator(seed: int) -> torch.Generator:
    generator = torch.Generator()
    generator.manual_seed(seed)
    return generator


def _canonical(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return _canonical(value.model_dump(mode="json"))
    if isinstance(value, dict):
        return {str(k): _canonical(v) for k, v in sorted(value.items(), key=lambda kv: str(kv[0]))}
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    if isinstance(value, float) and not np.isfinite(value):
        return repr(value)
    return value


def content_digest(value: Any, length: int = 16) -> str:
    """Content-addressed digest of a model or plain data structure."""
    payload = json.dumps(_canonical(value), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:length]


def array_digest(array: np.ndarray, length: int = 16) -> str:
    """Digest of an integer or float array (e.g. a row permutation)."""
    contiguous = np.ascontiguousarray(array)
    return hashlib.sha256(contiguous.tobytes()).hexdigest()[:length]
