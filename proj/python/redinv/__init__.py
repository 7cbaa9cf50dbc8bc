"""Variational state estimation from sensor data.

Reduced bases, greedy sensor placement, affine and piecewise-affine
recovery maps over a parametric elliptic testbed. The compiled core does
all the work; this package only re-exports it.
"""

from ._core import *  # noqa: F401,F403
from ._core import __doc__ as _core_doc  # noqa: F401

__all__ = [name for name in dir() if not name.startswith("_")]
