"""Generator checkpoints and JSON persistence of result models."""

import json
import logging
from pathlib import Path
from typing import TypeVar

import torch
from pydantic import BaseModel

from .errors import InvalidArgumentError
from .knockoff_model import KnockoffTransformer, make_swappers
from .models import KnockoffNetConfig, TrainConfig

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1

ModelT = TypeVar("ModelT", bound=BaseModel)


def save_generator(
    net: KnockoffTransformer,
    path: Path,
    swappers: torch.nn.ModuleList | None = None,
    train_config: TrainConfig | None = None,
) -> None:
    """Write the generator (and optionally its swappers) as a torch archive.

    Args:
        net: Trained generator
        path: Destination file
        swappers: Swappers trained alongside the generator
        train_config: Training configuration stored for provenance
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    archive = {
        "format_version": FORMAT_VERSION,
        "net_config": net.config.model_dump(),
        "p": net.p,
        "state_dict": net.state_dict(),
        "swappers": None,
        "train_config": train_config.model_dump() if train_config else None,
    }
    if swappers is not None:
        archive["swappers"] = {
            "count": len(swappers),
            "temperature": swappers[0].temperature if len(swappers) else None,
            "state_dict": swappers.state_dict(),
        }
    torch.save(archive, path)
    logger.info(f"Saved generator (p={net.p}) to {path}")


def load_generator(
    path: Path,
) -> tuple[KnockoffTransformer, torch.nn.ModuleList | None, dict] | None:
    """Load a generator archive.

    Returns:
        (net in eval mode, swappers or None, raw archive metadata), or None if
        the file does not exist

    Raises:
        InvalidArgumentError: Unknown archive format
    """
    path = Path(path)
    if not path.exists():
        return None

    archive = torch.load(path, map_location="cpu", weights_only=False)
    version = archive.get("format_version")
    if version != FORMAT_VERSION:
        raise InvalidArgumentError(
            f"Unsupported generator archive version {version} in {path}",
            [f"Expected format_version {FORMAT_VERSION}"],
        )

    config = KnockoffNetConfig.model_validate(archive["net_config"])
    state = archive["state_dict"]
    dtype = next(iter(state.values())).dtype
    net = KnockoffTransformer(archive["p"], config).to(dtype)
    net.load_state_dict(state)
    net.eval()

    swappers = None
    if archive.get("swappers"):
        saved = archive["swappers"]
        swappers = make_swappers(archive["p"], saved["count"], saved["temperature"], seed=0)
        swappers = swappers.to(dtype)
        swappers.load_state_dict(saved["state_dict"])

    metadata = {k: v for k, v in archive.items() if k not in ("state_dict", "swappers")}
    return net, swappers, metadata


def save_model(model: BaseModel, path: Path) -> None:
    """Save a pydantic model as indented JSON.

    Args:
        model: The model to save
        path: Path to save to
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(model.model_dump(), f, indent=2, default=str)


def load_model(model_type: type[ModelT], path: Path) -> ModelT | None:
    """Load a pydantic model from JSON.

    Args:
        model_type: The model class to validate into
        path: Path to load from

    Returns:
        Validated model or None if file doesn't exist
    """
    path = Path(path)
    if not path.exists():
        return None

    with open(path, "r") as f:
        data = json.load(f)

    return model_type.model_validate(data)
