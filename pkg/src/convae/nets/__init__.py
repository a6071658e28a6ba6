"""Bundled network descriptions and solver configs."""

from importlib import resources
from pathlib import Path


def net_path(name: str) -> Path:
    """Filesystem path of a bundled .net file, e.g. net_path("model1")."""
    return Path(resources.files(__package__) / f"{name}.net")


def solver_path(name: str) -> Path:
    """Filesystem path of a bundled .solver file in the sibling configs dir."""
    return Path(resources.files(__package__.rsplit(".", 1)[0]) / "configs" / f"{name}.solver")
