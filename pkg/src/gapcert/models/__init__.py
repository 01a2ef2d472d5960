"""Built-in chains and the adapters the certifier uses."""

from . import swap, teleport
from .registry import MODELS, ModelAdapter, SpecModel, SwapModel, TeleportModel, get_model

__all__ = ["MODELS", "ModelAdapter", "SpecModel", "SwapModel", "TeleportModel", "get_model", "swap", "teleport"]
