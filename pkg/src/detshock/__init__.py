"""Detached bow shock past a symmetric blunt body in steady potential flow."""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
