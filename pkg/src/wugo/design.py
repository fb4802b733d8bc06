"""Search-space geometry, Latin hypercube initialisation and candidate sets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DesignError(ValueError):
    pass


@dataclass(frozen=True)
class SearchSpace:
    """An axis-aligned box in R^m."""

    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.bounds) < 1:
            raise DesignError("search space needs at least one dimension")
        for lo, hi in self.bounds:
            if not lo < hi:
                raise DesignError(f"empty bound interval ({lo}, {hi})")

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def lower(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds])


@dataclass(frozen=True)
class CandidateSet:
    """A fixed, ordered pool of feasible points used for direct search.

    The ordering is part of the contract: argmin ties elsewhere break to the
    lowest index.
    """

    points: np.ndarray  # (size, m)
    kind: str

    @property
    def size(self) -> int:
        return self.points.shape[0]


def lhs_init(space: SearchSpace, n: int, rng: np.random.Generator) -> np.ndarray:
    """Latin hypercube sample of n points: one point per equal-width stratum
    on every axis, permuted independently across axes, uniform within strata.
    """
    if n < 1:
        raise DesignError("LHS needs n >= 1")
    m = space.dim
    unit = np.empty((n, m))
    for j in range(m):
        unit[:, j] = (rng.permutation(n) + rng.random(n)) / n
    return space.lower + unit * (space.upper - space.lower)


def build_candidates(
    space: SearchSpace,
    kind: str,
    size: int,
    rng: np.random.Generator,
) -> CandidateSet:
    """Construct the candidate pool.

    ``grid2d``: a regular size-per-axis lattice (bounds endpoints included),
    ordered with axis 0 varying fastest. ``lhs_fixed``: ``size`` LHS points
    drawn once from ``rng`` and held fixed for the whole run.
    """
    if kind == "grid2d":
        if space.dim != 2:
            raise DesignError("grid2d candidates require a 2-D search space")
        xs = np.linspace(space.bounds[0][0], space.bounds[0][1], size)
        ys = np.linspace(space.bounds[1][0], space.bounds[1][1], size)
        gx, gy = np.meshgrid(xs, ys, indexing="xy")  # axis 0 fastest
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        return CandidateSet(points=pts, kind=kind)
    if kind == "lhs_fixed":
        return CandidateSet(points=lhs_init(space, size, rng), kind=kind)
    raise DesignError(f"unknown candidate kind {kind!r}")


def default_candidates_kind(dim: int) -> str:
    return "grid2d" if dim == 2 else "lhs_fixed"


def default_candidates_size(dim: int) -> int:
    # 101 points per axis in 2-D; the same pool cardinality (101^2) otherwise.
    return 101 if dim == 2 else 101 * 101
