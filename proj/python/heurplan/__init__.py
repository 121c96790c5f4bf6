"""Grid path planning with learned heuristic maps."""

from ._core import (
    FormatError,
    InvalidEndpoint,
    Model,
    WeightFileError,
    cost_to_go,
    generate,
    kinds,
    load_pgm,
    plan,
    save_pgm,
    train,
)

__all__ = [
    "FormatError",
    "InvalidEndpoint",
    "Model",
    "WeightFileError",
    "cost_to_go",
    "generate",
    "kinds",
    "load_pgm",
    "plan",
    "save_pgm",
    "train",
]
