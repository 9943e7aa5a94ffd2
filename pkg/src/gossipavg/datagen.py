"""Initial value assignments: uniform random or four-quadrant blocks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DistributionSpec:
    """How to populate node values on an m x n lattice.

    kind 'uniform': independent draws from [lo, hi). lo >= 0 and hi > 0
    are required so the generated mean stays away from zero.

    kind 'quadrant': constant value per lattice quadrant (v1 top-left,
    v2 top-right, v3 bottom-left, v4 bottom-right, with ceiling splits
    on odd dimensions). The quadrant values must not average to zero.
    """

    kind: str = "uniform"
    lo: float = 0.0
    hi: float = 1.0
    quadrant_values: tuple[float, float, float, float] = (1.0, 2.0, 3.0, 4.0)

    def __post_init__(self):
        if self.kind not in ("uniform", "quadrant"):
            raise ValueError(f"kind must be 'uniform' or 'quadrant', got {self.kind!r}")
        if self.kind == "uniform":
            if not self.lo < self.hi:
                raise ValueError(f"uniform needs lo < hi, got [{self.lo}, {self.hi})")
            if self.lo < 0 or self.hi <= 0:
                raise ValueError(
                    f"uniform needs lo >= 0 and hi > 0 so the mean is nonzero, "
                    f"got [{self.lo}, {self.hi})"
                )
        else:
            vals = tuple(float(v) for v in self.quadrant_values)
            if len(vals) != 4:
                raise ValueError("quadrant needs exactly four values")
            if math.fsum(vals) == 0.0:
                raise ValueError(f"quadrant values must not average to zero: {vals}")
            object.__setattr__(self, "quadrant_values", vals)


def generate(spec: DistributionSpec, m: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Node values for an m x n lattice, node (r, c) at index r*n + c.

    Deterministic per generator state; the quadrant layout consumes no
    random draws.
    """
    if m < 1 or n < 1:
        raise ValueError(f"lattice dimensions must be positive, got {m}x{n}")
    if spec.kind == "uniform":
        return rng.uniform(spec.lo, spec.hi, size=m * n)
    v1, v2, v3, v4 = spec.quadrant_values
    grid = np.empty((m, n), dtype=np.float64)
    half_r = (m + 1) // 2
    half_c = (n + 1) // 2
    grid[:half_r, :half_c] = v1
    grid[:half_r, half_c:] = v2
    grid[half_r:, :half_c] = v3
    grid[half_r:, half_c:] = v4
    return grid.ravel()
