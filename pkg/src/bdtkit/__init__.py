"""Block design test analysis from overhead video."""

from .core import BlockFace, CellPos, GridSpec, GridState, PlacementSequence, Timeline, rank_vector

__all__ = ["BlockFace", "CellPos", "GridSpec", "GridState", "PlacementSequence", "Timeline", "rank_vector"]
__version__ = "0.1.0"
