"""Integer-stepped box search spaces.

Every optimizable vector lives on a finite grid: dimension ``d`` takes the
values ``lower[d] + k * step[d]`` for ``k = 0 .. n_values[d] - 1``, and the
span ``upper - lower`` must be an integer multiple of the step.  Search
logic works in index space (tuples of ints), which keeps move arithmetic
and tabu membership exact; conversion to real values happens only at
objective evaluation time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Relative tolerance for deciding that a span or coordinate sits on the grid.
# Decimal steps such as 0.01 are not binary-exact; anything further off than
# this is treated as a user error rather than rounding noise.
ALIGN_RTOL = 1e-9


def _as_float_tuple(values) -> tuple[float, ...]:
    return tuple(float(v) for v in np.atleast_1d(np.asarray(values, dtype=float)))


@dataclass(frozen=True)
class SearchSpace:
    """A box of grid-aligned points with a fixed step per dimension."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    step: tuple[float, ...]
    n_values: tuple[int, ...] = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        lower = _as_float_tuple(self.lower)
        upper = _as_float_tuple(self.upper)
        step = _as_float_tuple(self.step)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "step", step)
        if not (len(lower) == len(upper) == len(step)):
            raise ValueError("lower, upper and step must have the same length")
        if len(lower) == 0:
            raise ValueError("search space needs at least one dimension")
        counts = []
        for d, (lo, hi, st) in enumerate(zip(lower, upper, step)):
            if not np.isfinite([lo, hi, st]).all():
                raise ValueError(f"dimension {d}: bounds and step must be finite")
            if st <= 0.0:
                raise ValueError(f"dimension {d}: step must be positive")
            if hi < lo:
                raise ValueError(f"dimension {d}: upper bound below lower bound")
            span = (hi - lo) / st
            if abs(span - round(span)) > ALIGN_RTOL * max(1.0, abs(span)):
                raise ValueError(
                    f"dimension {d}: span {hi - lo!r} is not an integer "
                    f"multiple of step {st!r}"
                )
            counts.append(int(round(span)) + 1)
        object.__setattr__(self, "n_values", tuple(counts))

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def size(self) -> int:
        """Total number of grid points."""
        n = 1
        for c in self.n_values:
            n *= c
        return n

    def from_index(self, index) -> np.ndarray:
        """Real-valued point for a grid index vector.

        The last index in each dimension maps to the exact upper bound
        (``lo + k*step`` can overshoot it by an ulp for decimal steps).
        """
        values = np.empty(self.dim)
        for d, k in enumerate(index):
            if not 0 <= k < self.n_values[d]:
                raise IndexError(f"dimension {d}: index {k} out of range")
            if k == self.n_values[d] - 1:
                values[d] = self.upper[d]
            else:
                values[d] = self.lower[d] + k * self.step[d]
        return values

    def to_index(self, values) -> tuple[int, ...]:
        """Grid index of a point; raises ValueError if off-grid or outside."""
        values = np.asarray(values, dtype=float)
        if values.shape != (self.dim,):
            raise ValueError(f"expected a vector of length {self.dim}")
        index = []
        for d, v in enumerate(values):
            k = (v - self.lower[d]) / self.step[d]
            kr = round(k)
            if abs(k - kr) > ALIGN_RTOL * max(1.0, abs(k)):
                raise ValueError(f"dimension {d}: value {v!r} is not grid-aligned")
            if not 0 <= kr <= self.n_values[d] - 1:
                raise ValueError(f"dimension {d}: value {v!r} is out of bounds")
            index.append(int(kr))
        return tuple(index)

    def is_aligned(self, values) -> bool:
        """True when the point is inside the box and on the grid."""
        try:
            self.to_index(values)
        except ValueError:
            return False
        return True

    def align(self, values) -> np.ndarray:
        """Snap a point to the nearest grid point inside the box."""
        values = np.asarray(values, dtype=float)
        if values.shape != (self.dim,):
            raise ValueError(f"expected a vector of length {self.dim}")
        index = []
        for d, v in enumerate(values):
            k = int(round((v - self.lower[d]) / self.step[d]))
            index.append(min(max(k, 0), self.n_values[d] - 1))
        return self.from_index(index)

    def clamp_index(self, index) -> tuple[int, ...]:
        return tuple(
            min(max(int(k), 0), self.n_values[d] - 1) for d, k in enumerate(index)
        )

    def random_index(self, rng: np.random.Generator) -> tuple[int, ...]:
        """Uniformly random grid point, one independent draw per dimension."""
        return tuple(int(rng.integers(0, n)) for n in self.n_values)

    def multiples_of_step(self, step_values) -> tuple[int, ...]:
        """Convert per-dimension step sizes to integer grid multiples."""
        step_values = _as_float_tuple(step_values)
        if len(step_values) == 1 and self.dim > 1:
            step_values = step_values * self.dim
        if len(step_values) != self.dim:
            raise ValueError(f"expected 1 or {self.dim} step values")
        mults = []
        for d, s in enumerate(step_values):
            m = s / self.step[d]
            mr = round(m)
            if abs(m - mr) > ALIGN_RTOL * max(1.0, abs(m)) or mr < 1:
                raise ValueError(
                    f"dimension {d}: step {s!r} is not a positive multiple "
                    f"of the minimum step {self.step[d]!r}"
                )
            mults.append(int(mr))
        return tuple(mults)

    def default_initial_multiples(self) -> tuple[int, ...]:
        """Default exploration step: 10% of the index span, at least one cell."""
        return tuple(max(1, round(0.1 * (n - 1))) for n in self.n_values)
