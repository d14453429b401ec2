"""Transfer-learning surrogate modeling of nonlinear seismic response.

The heavy lifting lives in the C++ core; this package re-exports the bound
operations: hazard catalog simulation, stochastic motion synthesis,
farthest-point sampling, Newmark response analysis, the masked-network
surrogates, and the evaluation metrics.
"""

from ._core import *  # noqa: F401,F403
from ._core import __doc__ as _core_doc

__all__ = [name for name in dir() if not name.startswith("_")]
