"""Square block geometry for the recursive refinement tree."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Block:
    """A square image block: top-left corner, side length and split depth."""

    row0: int
    col0: int
    side: int
    level: int = 1

    def __post_init__(self):
        if self.side < 1 or (self.side & (self.side - 1)) != 0:
            raise ValueError(f"block side must be a power of two >= 1, got {self.side}")
        if self.row0 < 0 or self.col0 < 0:
            raise ValueError("block corner must be non-negative")

    @property
    def rows(self) -> slice:
        return slice(self.row0, self.row0 + self.side)

    @property
    def cols(self) -> slice:
        return slice(self.col0, self.col0 + self.side)


def split_block(b: Block, k: int) -> list[Block]:
    """Tile `b` with child blocks of side `k`, in row-major order.

    `k` must divide the parent side; children carry ``level + 1``.
    """
    if k < 1:
        raise ValueError(f"child side must be >= 1, got {k}")
    if k > b.side or b.side % k != 0:
        raise ValueError(f"child side {k} does not divide block side {b.side}")
    per_axis = b.side // k
    return [
        Block(b.row0 + r * k, b.col0 + c * k, k, b.level + 1)
        for r in range(per_axis)
        for c in range(per_axis)
    ]


def block_locations(b: Block, mask: np.ndarray) -> np.ndarray:
    """Spatial locations of `b` whose mask bit is set.

    Returns an ``(n, 2)`` int array of (row, col) pairs in row-major order;
    possibly empty.  The block must lie inside the mask bounds.
    """
    mask = np.asarray(mask, dtype=bool)
    if b.row0 + b.side > mask.shape[0] or b.col0 + b.side > mask.shape[1]:
        raise ValueError(f"block {b} exceeds mask bounds {mask.shape}")
    local = np.argwhere(mask[b.rows, b.cols])
    local[:, 0] += b.row0
    local[:, 1] += b.col0
    return local
