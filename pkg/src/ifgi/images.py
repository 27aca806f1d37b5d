"""Count images for single channels and signed images for composed results."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ifgi.scene import SceneGrid


@dataclass(frozen=True, eq=False)
class CountImage:
    grid: SceneGrid
    counts: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.shape != self.grid.shape:
            raise ValueError(f"image shape {c.shape} does not match grid {self.grid.shape}")
        if c.size and np.issubdtype(c.dtype, np.signedinteger) and c.min() < 0:
            raise ValueError("count image holds negative values")
        c = c.astype(np.uint64)
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @classmethod
    def zeros(cls, grid: SceneGrid) -> CountImage:
        return cls(grid, np.zeros(grid.shape, dtype=np.uint64))

    def __eq__(self, other):
        if not isinstance(other, CountImage):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.counts, other.counts)

    __hash__ = None

    @property
    def values(self) -> np.ndarray:
        return self.counts.astype(np.int64)

    def as_signed(self) -> SignedImage:
        return SignedImage(self.grid, self.values)


@dataclass(frozen=True, eq=False)
class SignedImage:
    grid: SceneGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != self.grid.shape:
            raise ValueError(f"image shape {v.shape} does not match grid {self.grid.shape}")
        if not np.issubdtype(v.dtype, np.integer):
            raise TypeError("signed images hold integers")
        v = v.astype(np.int64)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __eq__(self, other):
        if not isinstance(other, SignedImage):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.values, other.values)

    __hash__ = None


def pixels(image) -> np.ndarray:
    """Pixel values of any image type (or raw array) as float64."""
    if isinstance(image, (CountImage, SignedImage)):
        return image.values.astype(float)
    return np.asarray(image, dtype=float)
