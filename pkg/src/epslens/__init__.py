"""
epslens distribution import namespace.

Finite-scale tooling for epsilon-stability of metric-valued bipartite structures.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    from ._version import __version__  # canonical
except ImportError:  # pragma: no cover - fallback for editable/local non-built environments
    try:
        __version__ = version("epslens")
    except PackageNotFoundError:
        __version__ = "0+unknown"

__all__ = ["__version__"]
