"""Convex parameter mixing, interpolation lines, and simplex sampling grids.

All mixing arithmetic runs in 64-bit and is rounded to float32 exactly once
on output.  Exact one-hot weights (and the endpoints of an interpolation
line) bypass arithmetic entirely and return a verbatim copy of the selected
ingredient, so those cases are bit-exact by construction.

Accumulation order is canonical: terms are sorted by (weight, ingredient
fingerprint) before summing.  Floating addition commutes but does not
associate, so a fixed content-derived order is what makes ``mix`` the same
bit pattern no matter how the caller happened to order the ingredients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadWeights, LengthMismatch, Unsupported
from .tensor_store import TensorSet, assert_compatible

SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class MixtureWeights:
    """A point on the probability simplex: nonnegative, sums to 1."""

    w: np.ndarray

    def __eq__(self, other) -> bool:
        if not isinstance(other, MixtureWeights):
            return NotImplemented
        return self.w.shape == other.w.shape and bool(np.all(self.w == other.w))

    def __hash__(self) -> int:
        return hash(self.w.tobytes())

    def __post_init__(self):
        arr = np.asarray(self.w, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise BadWeights(f"weights must be a 1-D vector, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise BadWeights("weights must be finite")
        if (arr < 0.0).any():
            raise BadWeights(f"weights must be nonnegative, got {arr}")
        if abs(float(arr.sum()) - 1.0) > SUM_TOL:
            raise BadWeights(f"weights must sum to 1 within {SUM_TOL}, got sum {arr.sum()!r}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "w", arr)

    @property
    def m(self) -> int:
        return self.w.size

    def one_hot_index(self) -> int | None:
        """Index of the single unit weight, or None if not exactly one-hot."""
        hot = np.flatnonzero(self.w == 1.0)
        if hot.size == 1 and np.all(self.w[self.w != 1.0] == 0.0):
            return int(hot[0])
        return None


@dataclass(frozen=True)
class SimplexGridSpec:
    """A triangular subdivision of the 3-ingredient simplex."""

    num_ingredients: int
    resolution: int

    def __post_init__(self):
        if self.num_ingredients < 2:
            raise Unsupported("a simplex grid needs at least 2 ingredients")
        if self.resolution < 1:
            raise Unsupported("resolution must be at least 1")


def mix(ingredients: list[TensorSet], weights: MixtureWeights) -> TensorSet:
    """Convex combination of compatible ingredient tensors.

    Each output scalar is the 64-bit weighted sum of the ingredient scalars,
    rounded once to float32.
    """
    if not isinstance(weights, MixtureWeights):
        weights = MixtureWeights(np.asarray(weights, dtype=np.float64))
    if len(ingredients) != weights.m:
        raise LengthMismatch(f"{len(ingredients)} ingredients but {weights.m} weights")
    assert_compatible(ingredients)

    hot = weights.one_hot_index()
    if hot is not None:
        return ingredients[hot].subset(ingredients[hot].names)

    order = sorted(
        range(weights.m),
        key=lambda i: (float(weights.w[i]), ingredients[i].fingerprint()),
    )
    out: dict[str, np.ndarray] = {}
    for name in ingredients[0].names:
        acc = np.zeros(ingredients[0][name].shape, dtype=np.float64)
        for i in order:
            wi = float(weights.w[i])
            if wi != 0.0:
                acc += wi * ingredients[i][name].astype(np.float64)
        out[name] = acc.astype(np.float32)
    return TensorSet(out)


def interpolation_path(
    a: TensorSet, b: TensorSet, lambdas: list[float]
) -> list[TensorSet]:
    """Tensors along the segment (1-lambda)*a + lambda*b.

    ``lambdas`` must be sorted ascending within [0, 1].  The endpoints 0.0
    and 1.0 return verbatim copies of ``a`` and ``b``.
    """
    lams = [float(x) for x in lambdas]
    if lams != sorted(lams):
        raise BadWeights("lambdas must be sorted ascending")
    if lams and (lams[0] < 0.0 or lams[-1] > 1.0):
        raise BadWeights(f"lambdas must lie in [0, 1], got {lams}")
    assert_compatible([a, b])
    out = []
    for lam in lams:
        if lam == 0.0:
            out.append(a.subset(a.names))
        elif lam == 1.0:
            out.append(b.subset(b.names))
        else:
            out.append(mix([a, b], MixtureWeights(np.array([1.0 - lam, lam]))))
    return out


def barycentric_centroid_grid(spec: SimplexGridSpec) -> list[MixtureWeights]:
    """Centroids of the n-fold triangular subdivision of the 2-simplex.

    Subdividing each edge n-fold cuts the triangle into n^2 congruent cells.
    The list walks rows bottom to top; within a row the upward-pointing
    cells come first, then the downward-pointing cells interleaved between
    them.  Every centroid is strictly interior, so the three pure corners
    are never part of the grid.
    """
    if spec.num_ingredients != 3:
        raise Unsupported(
            f"centroid grids are defined for 3 ingredients, got {spec.num_ingredients}"
        )
    n = spec.resolution
    denom = 3.0 * n
    out: list[MixtureWeights] = []
    for r in range(n):
        for j in range(n - r):
            a, b, c = n - r - j, j, r
            out.append(MixtureWeights(np.array([3 * a - 2, 3 * b + 1, 3 * c + 1]) / denom))
        for j in range(n - r - 1):
            a, b, c = n - r - j, j, r
            out.append(MixtureWeights(np.array([3 * a - 4, 3 * b + 2, 3 * c + 2]) / denom))
    return out


def sample_simplex_uniform_batch(
    m: int, size: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw ``size`` uniform simplex points as a (size, m) float64 array.

    Uses the exponential-spacing construction: normalize m unit-rate
    exponentials per row.
    """
    if m < 1:
        raise BadWeights("need at least one coordinate")
    e = rng.standard_exponential((size, m))
    return e / e.sum(axis=1, keepdims=True)


def sample_simplex_uniform(m: int, rng: np.random.Generator) -> MixtureWeights:
    """One draw from the uniform distribution on the (m-1)-simplex."""
    return MixtureWeights(sample_simplex_uniform_batch(m, 1, rng)[0])
