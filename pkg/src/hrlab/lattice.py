"""Finite lattice geometry: sites, metric, balls, fattenings and momentum grids.

Coordinates are integer tuples.  Each axis runs over ``origin, ..., origin+n-1``
with ``origin = -(n // 2)`` by default, so an odd chain is centred on 0.
Sites are linearized row-major (last axis fastest), and that linear index is
also the tensor-factor position used by :mod:`hrlab.operators`.

The metric is ℓ∞ by default (balls are hypercubes) with ℓ¹ available.
Periodic lattices use the wrapped (torus) distance along each axis.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError

METRICS = ("linf", "l1")
BOUNDARIES = ("open", "periodic")

#: largest number of spin-1/2 sites accepted downstream (2^24 basis states)
MAX_SITES = 24


def _as_coord(x, dim: int) -> tuple[int, ...]:
    if isinstance(x, (int, np.integer)):
        x = (int(x),)
    x = tuple(int(c) for c in x)
    if len(x) != dim:
        raise DomainError(f"coordinate {x} has dimension {len(x)}, lattice has {dim}")
    return x


@dataclass(frozen=True)
class Lattice:
    """Hypercubic block of ``n**dim`` sites.

    Parameters
    ----------
    n : int
        Sites per axis, at least 2.
    dim : int
        Spatial dimension (1 or 2 are exercised; larger is accepted).
    boundary : {'open', 'periodic'}
    metric : {'linf', 'l1'}
    origin : int, optional
        Lowest coordinate on every axis.  Defaults to ``-(n // 2)``.
    """

    n: int
    dim: int = 1
    boundary: str = "open"
    metric: str = "linf"
    origin: int | None = None

    def __post_init__(self):
        if not isinstance(self.boundary, str):
            kinds = set(self.boundary)
            if len(kinds) != 1:
                raise DomainError(f"mixed boundary conditions {tuple(self.boundary)} are not supported")
            object.__setattr__(self, "boundary", kinds.pop())
        if self.n < 2:
            raise DomainError("need at least 2 sites per axis")
        if self.dim < 1:
            raise DomainError("dimension must be positive")
        if self.boundary not in BOUNDARIES:
            raise DomainError(f"unknown boundary {self.boundary!r}")
        if self.metric not in METRICS:
            raise DomainError(f"unknown metric {self.metric!r}")
        if self.n ** self.dim > MAX_SITES:
            raise DomainError(f"{self.n ** self.dim} sites exceeds the cap of {MAX_SITES}")
        if self.origin is None:
            object.__setattr__(self, "origin", -(self.n // 2))

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    @property
    def size(self) -> int:
        return self.n ** self.dim

    @cached_property
    def coords(self) -> tuple[tuple[int, ...], ...]:
        axis = range(self.origin, self.origin + self.n)
        return tuple(itertools.product(axis, repeat=self.dim))

    # -- coordinates and indices -------------------------------------------
    def wrap(self, x) -> tuple[int, ...]:
        """Canonical coordinate of ``x``; wraps on periodic, checks on open."""
        x = _as_coord(x, self.dim)
        lo, n = self.origin, self.n
        if self.periodic:
            return tuple((c - lo) % n + lo for c in x)
        if any(c < lo or c >= lo + n for c in x):
            raise DomainError(f"site {x} outside open lattice [{lo}, {lo + n - 1}]^{self.dim}")
        return x

    def contains(self, x) -> bool:
        try:
            self.wrap(x)
        except DomainError:
            return False
        return True

    def index(self, x) -> int:
        x = self.wrap(x)
        i = 0
        for c in x:
            i = i * self.n + (c - self.origin)
        return i

    def coord(self, i: int) -> tuple[int, ...]:
        return self.coords[i]

    # -- metric ---------------------------------------------------------------
    def axis_distance(self, a, b) -> np.ndarray:
        """Per-axis distances between coordinate arrays (broadcasting)."""
        d = np.abs(np.asarray(a) - np.asarray(b))
        if self.periodic:
            d = d % self.n
            d = np.minimum(d, self.n - d)
        return d

    def site_distance(self, a, b) -> np.ndarray:
        d = self.axis_distance(a, b)
        return d.max(axis=-1) if self.metric == "linf" else d.sum(axis=-1)

    @cached_property
    def distance_matrix(self) -> np.ndarray:
        c = np.array(self.coords)
        return self.site_distance(c[:, None, :], c[None, :, :]).astype(int)

    def norm(self, x) -> int:
        """|x| for a displacement, measured with the lattice metric."""
        x = _as_coord(x, self.dim)
        return int(self.site_distance(np.array(x), np.zeros(self.dim, int)))

    # -- regions ---------------------------------------------------------------
    def region(self, sites: Iterable) -> "Region":
        idx = sorted({self.index(s) for s in sites})
        return Region(self, tuple(idx))

    def full(self) -> "Region":
        return Region(self, tuple(range(self.size)))

    def ball(self, center, r: int) -> "Region":
        return ball(self, center, r)

    def edges(self) -> list[tuple[int, int]]:
        """Undirected nearest-neighbour bonds as pairs of linear indices.

        Bonds are axis-aligned unit steps whatever the metric; periodic
        lattices add the wrap-around bond on each axis.
        """
        out = set()
        for i, x in enumerate(self.coords):
            for a in range(self.dim):
                y = list(x)
                y[a] += 1
                if not self.periodic and y[a] >= self.origin + self.n:
                    continue
                j = self.index(y)
                if i != j:
                    out.add((min(i, j), max(i, j)))
        return sorted(out)

    def translation_permutation(self, x) -> np.ndarray:
        """``perm[i]`` is the index of site ``i`` shifted by ``x``."""
        x = _as_coord(x, self.dim)
        return np.array([self.index(tuple(c + s for c, s in zip(y, x))) for y in self.coords])

    def translations(self) -> list[tuple[int, ...]]:
        """All displacements of the translation group (periodic only)."""
        if not self.periodic:
            raise DomainError("open lattices carry no translation group")
        return list(itertools.product(range(self.n), repeat=self.dim))

    def momentum_grid(self) -> "MomentumGrid":
        return MomentumGrid(self.n, self.dim)

    def describe(self) -> dict:
        return {"n": self.n, "dim": self.dim, "boundary": self.boundary,
                "metric": self.metric, "origin": self.origin}


@dataclass(frozen=True)
class Region:
    """Finite, deduplicated set of sites of a lattice, stored as sorted indices."""

    lattice: Lattice
    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(sorted(set(int(i) for i in self.indices)))
        if any(i < 0 or i >= self.lattice.size for i in idx):
            raise DomainError("region index outside lattice")
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.sites)

    def __contains__(self, x) -> bool:
        try:
            return self.lattice.index(x) in self.indices
        except DomainError:
            return False

    @property
    def sites(self) -> tuple[tuple[int, ...], ...]:
        return tuple(self.lattice.coords[i] for i in self.indices)

    @property
    def points(self) -> list:
        """Coordinates, as plain ints in one dimension."""
        if self.lattice.dim == 1:
            return [s[0] for s in self.sites]
        return list(self.sites)

    def issubset(self, other: "Region") -> bool:
        return set(self.indices) <= set(other.indices)

    def isdisjoint(self, other: "Region") -> bool:
        return not set(self.indices) & set(other.indices)

    def union(self, other: "Region") -> "Region":
        _same_lattice(self, other)
        return Region(self.lattice, self.indices + other.indices)

    def intersection(self, other: "Region") -> "Region":
        _same_lattice(self, other)
        return Region(self.lattice, tuple(set(self.indices) & set(other.indices)))

    def difference(self, other: "Region") -> "Region":
        _same_lattice(self, other)
        return Region(self.lattice, tuple(set(self.indices) - set(other.indices)))

    def complement(self) -> "Region":
        return self.lattice.full().difference(self)

    def shift(self, x) -> "Region":
        return self.lattice.region(tuple(c + s for c, s in zip(y, _as_coord(x, self.lattice.dim)))
                                   for y in self.sites)

    def diam(self) -> int:
        if not self.indices:
            raise DomainError("empty region has no diameter")
        sub = self.lattice.distance_matrix[np.ix_(self.indices, self.indices)]
        return int(sub.max())

    def __repr__(self):
        return f"Region({self.points})"


def _same_lattice(a: Region, b: Region):
    if a.lattice != b.lattice:
        raise DomainError("regions live on different lattices")


def ball(lattice: Lattice, center, r: int) -> Region:
    """Sites within distance ``r`` of ``center``."""
    if r < 0:
        raise DomainError("radius must be non-negative")
    if not lattice.contains(center):
        raise DomainError(f"center {center} outside lattice")
    row = lattice.distance_matrix[lattice.index(center)]
    return Region(lattice, tuple(np.flatnonzero(row <= r)))


def fatten(region: Region, r: int) -> Region:
    """``{x : dist(x, region) <= r}``."""
    if not len(region):
        raise DomainError("cannot fatten an empty region")
    if r < 0:
        raise DomainError("radius must be non-negative")
    d = region.lattice.distance_matrix[list(region.indices)].min(axis=0)
    return Region(region.lattice, tuple(np.flatnonzero(d <= r)))


def dist(a: Region, b: Region) -> int:
    """Smallest site-to-site distance between two regions."""
    if not len(a) or not len(b):
        raise DomainError("distance to an empty region is undefined")
    _same_lattice(a, b)
    return int(a.lattice.distance_matrix[np.ix_(a.indices, b.indices)].min())


@dataclass(frozen=True)
class MomentumGrid:
    """Discrete Brillouin zone ``p_k = 2πk/n`` per axis, reported in (-π, π]."""

    n: int
    dim: int = 1
    ks: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ks = np.array(list(itertools.product(range(self.n), repeat=self.dim)), dtype=int)
        object.__setattr__(self, "ks", ks)

    def __len__(self) -> int:
        return self.n ** self.dim

    @property
    def points(self) -> np.ndarray:
        """Momenta, shape ``(n**dim, dim)``."""
        return wrap_momentum(2 * np.pi * self.ks / self.n)

    def index(self, k: Sequence[int] | int) -> int:
        k = (k,) if np.isscalar(k) else tuple(k)
        i = 0
        for c in k:
            i = i * self.n + int(c) % self.n
        return i

    def negate(self, i: int) -> int:
        return self.index(tuple(-self.ks[i]))

    def add(self, i: int, j: int) -> int:
        return self.index(tuple(self.ks[i] + self.ks[j]))

    def nearest(self, p) -> int:
        p = np.atleast_1d(np.asarray(p, float))
        k = np.rint(p * self.n / (2 * np.pi)).astype(int)
        return self.index(tuple(k))


def wrap_momentum(p):
    """Map momenta into (-π, π]."""
    p = np.asarray(p, dtype=float)
    q = np.mod(p + np.pi, 2 * np.pi) - np.pi
    return np.where(np.isclose(q, -np.pi, atol=1e-14, rtol=0), np.pi, q)
