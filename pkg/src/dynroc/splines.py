"""Natural cubic spline bases for continuous regression terms.

The basis is evaluated on the unit-scaled coordinate u = (x - lo) / (hi - lo)
where (lo, hi) are the boundary knots. Scaling makes the basis values, and
hence fitted coefficients, invariant under a joint affine rescaling of the
covariate and its knots; it also keeps the cubic terms well conditioned.
The span of the basis (plus an intercept) is the usual natural cubic spline
space: cubic between knots, second derivative zero at the boundaries, linear
extrapolation beyond them. With no interior knots the single column is an
affine map of x, so any linear function of x is reproduced exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SplineBasis:
    """Knot layout for one covariate: interior knots strictly inside the boundary pair."""

    knots: tuple[float, ...]
    boundary: tuple[float, float]

    def __post_init__(self):
        lo, hi = self.boundary
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise ValueError(f"boundary knots must be finite and increasing, got {self.boundary}")
        ks = self.knots
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValueError("interior knots must be strictly increasing")
        if any(not (lo < k < hi) for k in ks):
            raise ValueError("interior knots must lie strictly inside the boundary knots")

    @property
    def df(self) -> int:
        """Number of basis columns (interior knots + 1)."""
        return len(self.knots) + 1

    def design(self, x) -> np.ndarray:
        """Evaluate the basis at x (scalar or 1-d array); returns shape (n, df).

        Raises on non-finite input.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if not np.all(np.isfinite(x)):
            raise ValueError("spline input must be finite")
        lo, hi = self.boundary
        scale = hi - lo
        u = (x - lo) / scale
        cols = [u]
        if self.knots:
            # full knot list in u coordinates: lower boundary, interior, upper boundary
            xi = np.array([0.0] + [(k - lo) / scale for k in self.knots] + [1.0])
            top = len(xi) - 1

            def d(r: int) -> np.ndarray:
                return (
                    np.clip(u - xi[r], 0.0, None) ** 3 - np.clip(u - xi[top], 0.0, None) ** 3
                ) / (xi[top] - xi[r])

            d_pen = d(top - 1)
            for r in range(top - 1):
                cols.append(d(r) - d_pen)
        return np.column_stack(cols)


def basis_from_quantiles(values, df: int) -> SplineBasis:
    """Knots from the training distribution: interior at the i/df quantiles
    (i = 1..df-1), boundary at the 2.5th/97.5th percentiles.

    df = 4 gives interior knots at the quartiles.
    """
    if df < 1:
        raise ValueError("df must be >= 1")
    values = np.asarray(values, dtype=float)
    if values.size < df + 1:
        raise ValueError(f"need at least {df + 1} values to place {df - 1} interior knots")
    lo, hi = np.quantile(values, [0.025, 0.975])
    if not lo < hi:
        raise ValueError("degenerate covariate distribution: boundary knots coincide")
    interior = []
    for i in range(1, df):
        k = float(np.quantile(values, i / df))
        interior.append(min(max(k, lo), hi))
    interior = [k for k in interior if lo < k < hi]
    dedup: list[float] = []
    for k in interior:
        if not dedup or k > dedup[-1]:
            dedup.append(k)
    if len(dedup) != df - 1:
        raise ValueError(
            f"could not place {df - 1} distinct interior knots; covariate distribution too discrete"
        )
    return SplineBasis(knots=tuple(dedup), boundary=(float(lo), float(hi)))


def natural_spline_basis(x: float, basis: SplineBasis) -> np.ndarray:
    """Basis values at a single point, as a vector of length basis.df."""
    return basis.design(x)[0]
