"""Boxes, axis-aligned hyperplanes and configurations of hyperplanes.

A box is ``S_1 x ... x S_n`` with ``S_k = {1, ..., size_k}``.  A hyperplane
fixes some coordinates to single values and leaves the others free.  All
values and coordinate indices exposed by this module are 1-based; a free
coordinate is stored as ``0`` internally.

The text form of a hyperplane is one character per coordinate: ``*`` for a
free coordinate, ``1``-``9`` for values below ten and ``a``, ``b``, ... for
values 10, 11, ....  A configuration is written as comma separated
hyperplanes, e.g. ``11**, 2*1*, *22*``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

FREE = 0
DEFAULT_POINT_CAP = 10**8

_DIGITS = "123456789abcdefghijklmnopqrstuvwxyz"


class NotCoveredError(Exception):
    """Raised by helpers that require a covering configuration."""


@dataclass(frozen=True)
class Box:
    """A finite product of coordinate sets ``[size_1] x ... x [size_n]``."""

    sizes: tuple[int, ...]
    labels: tuple[int, ...] | None = None

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if any(s < 2 for s in sizes):
            raise ValueError(f"every coordinate needs at least two values: {sizes}")
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != len(sizes):
                raise ValueError("one label per coordinate expected")
            object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return len(self.sizes)

    @property
    def npoints(self) -> int:
        return int(np.prod(self.sizes, dtype=object))

    def size(self, coord: int) -> int:
        """Size of the 1-based coordinate ``coord``."""
        return self.sizes[coord - 1]

    def prefix(self, k: int) -> "Box":
        """The box ``Q_k`` formed by the first ``k`` coordinates."""
        labels = None if self.labels is None else self.labels[:k]
        return Box(self.sizes[:k], labels)

    def points(self, k: int | None = None) -> Iterator[tuple[int, ...]]:
        """Points of ``Q_k`` (default: the whole box) in lexicographic order."""
        sizes = self.sizes if k is None else self.sizes[:k]
        return itertools.product(*(range(1, s + 1) for s in sizes))

    def point_array(self, k: int | None = None) -> np.ndarray:
        """All points of ``Q_k`` as an ``(N, k)`` integer array, lexicographic."""
        sizes = self.sizes if k is None else self.sizes[:k]
        if not sizes:
            return np.zeros((1, 0), dtype=np.int64)
        grids = np.meshgrid(*(np.arange(1, s + 1) for s in sizes), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)


@dataclass(frozen=True, order=True)
class Hyperplane:
    """Per-coordinate entries: ``0`` for free, ``v >= 1`` for fixed to ``v``."""

    values: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        if any(v < 0 for v in self.values):
            raise ValueError(f"negative hyperplane entry in {self.values}")

    @classmethod
    def from_fixed(cls, dim: int, fixed: Mapping[int, int]) -> "Hyperplane":
        """Build from a ``{coordinate: value}`` map (both 1-based)."""
        values = [FREE] * dim
        for coord, v in fixed.items():
            values[coord - 1] = v
        return cls(tuple(values))

    @property
    def dim(self) -> int:
        return len(self.values)

    @property
    def fixed(self) -> frozenset[int]:
        """The set ``F(A)`` of fixed coordinates (1-based)."""
        return frozenset(i + 1 for i, v in enumerate(self.values) if v != FREE)

    @property
    def codim(self) -> int:
        return sum(1 for v in self.values if v != FREE)

    def value(self, coord: int) -> int:
        return self.values[coord - 1]

    def contains_point(self, point: Sequence[int]) -> bool:
        """Membership for a point of the full box or of a prefix box.

        A point of ``Q_k`` belongs to the hyperplane if it agrees with every
        fixed coordinate among the first ``k``; deeper fixed coordinates are
        ignored, so this tests membership in the projection onto ``Q_k``.
        """
        return all(v == FREE or p == v for p, v in zip(point, self.values))

    def is_subset_of(self, other: "Hyperplane") -> bool:
        """Containment ``self <= other`` as point sets."""
        _check_dims(self, other)
        return all(w == FREE or v == w for v, w in zip(self.values, other.values))

    def intersect(self, other: "Hyperplane") -> "Hyperplane | None":
        """The intersection, or ``None`` when it is empty."""
        _check_dims(self, other)
        out = []
        for v, w in zip(self.values, other.values):
            if v != FREE and w != FREE and v != w:
                return None
            out.append(v if v != FREE else w)
        return Hyperplane(tuple(out))

    def restrict(self, coords: Iterable[int]) -> "Hyperplane":
        """``A^X``: keep fixed entries only on ``coords`` (1-based)."""
        keep = set(coords)
        return Hyperplane(tuple(v if i + 1 in keep else FREE for i, v in enumerate(self.values)))

    def count_in(self, box: Box) -> int:
        return int(np.prod([s for s, v in zip(box.sizes, self.values) if v == FREE], dtype=object))

    def mask(self, points: np.ndarray) -> np.ndarray:
        """Boolean membership mask over the rows of a point array."""
        m = np.ones(len(points), dtype=bool)
        for i, v in enumerate(self.values[: points.shape[1]]):
            if v != FREE:
                m &= points[:, i] == v
        return m

    def __str__(self) -> str:
        return format_hyperplane(self)


def _check_dims(a: Hyperplane, b: Hyperplane):
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


def colex_key(fixed: Iterable[int]) -> int:
    """Rank of a coordinate set in colexicographic order (sum of ``2**i``)."""
    return sum(1 << i for i in fixed)


def parse_hyperplane(text: str, box: Box) -> Hyperplane:
    text = text.strip()
    if len(text) != box.dim:
        raise ValueError(f"{text!r} has length {len(text)}, box has dimension {box.dim}")
    values = []
    for coord, ch in enumerate(text, start=1):
        if ch == "*":
            values.append(FREE)
            continue
        v = _DIGITS.find(ch.lower()) + 1
        if v == 0:
            raise ValueError(f"bad character {ch!r} in {text!r}")
        if v > box.size(coord):
            raise ValueError(f"value {v} out of range for coordinate {coord} of size {box.size(coord)}")
        values.append(v)
    return Hyperplane(tuple(values))


def format_hyperplane(plane: Hyperplane) -> str:
    out = []
    for v in plane.values:
        if v == FREE:
            out.append("*")
        elif v <= len(_DIGITS):
            out.append(_DIGITS[v - 1])
        else:
            raise ValueError(f"value {v} has no single-character code")
    return "".join(out)


def is_parallel(a: Hyperplane, b: Hyperplane) -> bool:
    _check_dims(a, b)
    return a.fixed == b.fixed


def intersect(a: Hyperplane, b: Hyperplane) -> Hyperplane | None:
    return a.intersect(b)


def restrict(a: Hyperplane, coords: Iterable[int]) -> Hyperplane:
    return a.restrict(coords)


@dataclass(frozen=True)
class Configuration:
    """A family of pairwise non-parallel hyperplanes, one per fixed set.

    Hyperplanes are kept sorted by the colex rank of their fixed sets, which
    is also the order used when the configuration is printed.
    """

    box: Box
    planes: tuple[Hyperplane, ...] = ()
    _by_fixed: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        planes = tuple(sorted(self.planes, key=lambda h: (colex_key(h.fixed), h.values)))
        by_fixed = {}
        for h in planes:
            if h.dim != self.box.dim:
                raise ValueError(f"hyperplane {h} does not live in a box of dimension {self.box.dim}")
            if not h.fixed:
                raise ValueError("a hyperplane with no fixed coordinate covers everything")
            for coord in h.fixed:
                if h.value(coord) > self.box.size(coord):
                    raise ValueError(f"value out of range in {h}")
            if h.fixed in by_fixed:
                raise ValueError(f"parallel hyperplanes {by_fixed[h.fixed]} and {h}")
            by_fixed[h.fixed] = h
        object.__setattr__(self, "planes", planes)
        object.__setattr__(self, "_by_fixed", by_fixed)

    def __iter__(self):
        return iter(self.planes)

    def __len__(self):
        return len(self.planes)

    def __contains__(self, fixed) -> bool:
        return frozenset(fixed) in self._by_fixed

    def __getitem__(self, fixed) -> Hyperplane:
        return self._by_fixed[frozenset(fixed)]

    @property
    def fixed_sets(self) -> list[frozenset[int]]:
        return [h.fixed for h in self.planes]

    def with_plane(self, plane: Hyperplane) -> "Configuration":
        return Configuration(self.box, self.planes + (plane,))

    def is_antichain(self) -> bool:
        """True when no hyperplane is contained in another."""
        for a, b in itertools.permutations(self.planes, 2):
            if a.is_subset_of(b):
                return False
        return True

    def exposed_at(self, k: int) -> list[Hyperplane]:
        """``N_k``: hyperplanes whose largest fixed coordinate is ``k``."""
        return [h for h in self.planes if max(h.fixed) == k]

    def covered_mask(self, points: np.ndarray) -> np.ndarray:
        m = np.zeros(len(points), dtype=bool)
        for h in self.planes:
            m |= h.mask(points)
        return m

    def __str__(self) -> str:
        return format_configuration(self)


def parse_configuration(text: str, box: Box) -> Configuration:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    return Configuration(box, tuple(parse_hyperplane(p, box) for p in parts))


def format_configuration(config: Configuration) -> str:
    return ", ".join(format_hyperplane(h) for h in config.planes)


def read_configurations(lines: Iterable[str], box: Box) -> list[Configuration]:
    """Parse a configuration file: one configuration per line, ``#`` comments."""
    out = []
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if line:
            out.append(parse_configuration(line, box))
    return out


def covers(config: Configuration, box: Box | None = None, cap: int = DEFAULT_POINT_CAP):
    """Exhaustively test whether ``config`` covers the box.

    Returns ``None`` when every point is covered, otherwise the
    lexicographically first uncovered point (1-based tuple).
    """
    box = config.box if box is None else box
    if box.npoints > cap:
        raise ValueError(f"box has {box.npoints} points, above the cap {cap}")
    chunk = 1 << 20
    # walk the box in lexicographic chunks to bound memory
    strides = np.cumprod((box.sizes[1:] + (1,))[::-1])[::-1]
    total = box.npoints
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        pts = (idx[:, None] // strides[None, :]) % np.array(box.sizes)[None, :] + 1
        hit = config.covered_mask(pts)
        if not hit.all():
            return tuple(int(v) for v in pts[np.argmin(hit)])
    return None
