"""Tabu-guided pattern search on integer-stepped grids.

The `search` engine explores with cumulative coordinate sweeps and pattern
extrapolation under a short FIFO tabu memory, a best-solutions leaderboard
for intensification, and random diversification.  Two ready-made problems
plug into it: four-bar coupler-path synthesis (`tabukit.fourbar`) and
closed-loop hydrostatic transmission tuning (`tabukit.hydraulic`).  Hot
numeric kernels run compiled when the extension is built, with a
pure-Python fallback (`tabukit.kernels.COMPILED` says which).
"""

from . import fourbar, hydraulic, kernels
from .kernels import COMPILED
from .search import (
    BestList,
    EvaluationError,
    MoveRecord,
    SearchConfig,
    SearchResult,
    TabuList,
    diversify,
    explore,
    intensify,
    pattern_move,
    reduce_steps,
    search,
)
from .space import SearchSpace

__version__ = "0.1.0"

__all__ = [
    "BestList",
    "COMPILED",
    "EvaluationError",
    "MoveRecord",
    "SearchConfig",
    "SearchResult",
    "SearchSpace",
    "TabuList",
    "diversify",
    "explore",
    "fourbar",
    "hydraulic",
    "intensify",
    "kernels",
    "pattern_move",
    "reduce_steps",
    "search",
]
