"""Boxes, dyadic shells, the pixelization map and occupancy counting.

Boxes are half-open: ``x`` lies in ``B(0; r)`` iff ``-r <= x_j < r`` for every
coordinate.  Shell 0 is ``B(0; 1)`` and shell ``n >= 1`` is
``B(0; 2**n) \\ B(0; 2**(n-1))``, so the shells partition the lattice.
A continuous point ``y`` is pixelized to ``floor(y)``, the unique ``x`` with
``y`` in the unit cell ``Q(x) = prod [x_j, x_j + 1)``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "PixelSet",
    "ShellCounts",
    "box_radius",
    "shell_of",
    "shells_of",
    "shell_size",
    "pixelize",
    "shell_counts",
]

# consolidate pending inserts once they outgrow this many keys
_MIN_FLUSH = 1 << 21


def _bit_length(v):
    """Elementwise ``int.bit_length`` for non-negative int64 arrays."""
    v = np.asarray(v, dtype=np.int64)
    e = np.frexp(v.astype(np.float64))[1].astype(np.int64)
    # float rounding can be off by one above 2**53
    u = v.astype(np.uint64)
    one = np.uint64(1)
    hi = np.clip(e, 0, 63).astype(np.uint64)
    e = np.where((e < 64) & (u >= (one << hi)) & (e < 63), e + 1, e)
    lo = np.clip(e - 1, 0, 63).astype(np.uint64)
    e = np.where((e > 0) & (u < (one << lo)), e - 1, e)
    return e


def box_radius(coords):
    """Smallest ``r`` with ``x`` in ``B(0; r)``, i.e. ``max_j max(x_j + 1, -x_j)``."""
    coords = np.asarray(coords, dtype=np.int64)
    if coords.ndim == 1:
        coords = coords[:, None]
    return np.maximum(coords + 1, -coords).max(axis=1)


def shells_of(coords):
    """Vectorized shell index for an ``(N, d)`` array of lattice points."""
    return _bit_length(box_radius(coords) - 1)


def shell_of(x) -> int:
    """Shell index of a single lattice point given as an int or a tuple."""
    x = np.atleast_1d(np.asarray(x, dtype=np.int64))
    return int(shells_of(x[None, :])[0])


def shell_size(n: int, d: int) -> int:
    """Number of lattice points in shell ``n`` of ``Z^d``."""
    if n == 0:
        return 2**d
    return (2 ** (n + 1)) ** d - (2**n) ** d


@dataclass(frozen=True)
class ShellCounts:
    """Per-shell occupancy ``counts[n]`` and ball counts ``cumulative[n]``."""

    counts: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "counts", np.asarray(self.counts, dtype=np.int64))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ShellCounts):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)

    __hash__ = None

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.counts)

    @property
    def n_max(self) -> int:
        return len(self.counts) - 1

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["shell", "count", "cumulative"])
        for n, (c, s) in enumerate(zip(self.counts, self.cumulative)):
            w.writerow([n, int(c), int(s)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, text: str) -> "ShellCounts":
        rows = list(csv.DictReader(io.StringIO(text)))
        counts = np.zeros(len(rows), dtype=np.int64)
        for row in rows:
            counts[int(row["shell"])] = int(row["count"])
        return cls(counts)


class PixelSet:
    """Finite set of lattice points in ``B(0; 2**n_max)``.

    Points are stored as sorted, unique packed int64 keys.  Inserts are
    buffered and merged in batches, so streaming a long path costs
    ``O(N log N)`` overall.  Points outside the tracked ball are dropped and
    tallied in ``discarded``.
    """

    def __init__(self, dim: int, n_max: int):
        if dim < 1:
            raise ValueError("dimension must be >= 1")
        if n_max < 0:
            raise ValueError("n_max must be >= 0")
        if dim * (n_max + 1) > 63:
            raise ValueError(
                f"n_max={n_max} too large for packed keys in d={dim}; "
                f"max is {63 // dim - 1}"
            )
        self.dim = dim
        self.n_max = n_max
        self.discarded = 0
        self._bits = n_max + 1
        self._offset = 1 << n_max
        self._keys = np.empty(0, dtype=np.int64)
        self._pending: list[np.ndarray] = []
        self._pending_size = 0
        self._counts = np.zeros(n_max + 1, dtype=np.int64)

    @classmethod
    def max_shell(cls, dim: int) -> int:
        """Largest ``n_max`` representable for dimension ``dim``."""
        return 63 // dim - 1

    def _pack(self, coords):
        key = np.zeros(coords.shape[0], dtype=np.int64)
        for j in range(self.dim):
            key |= (coords[:, j] + self._offset) << (j * self._bits)
        return key

    def _unpack(self, keys):
        mask = (1 << self._bits) - 1
        out = np.empty((keys.shape[0], self.dim), dtype=np.int64)
        for j in range(self.dim):
            out[:, j] = ((keys >> (j * self._bits)) & mask) - self._offset
        return out

    def _as_2d(self, points):
        a = np.asarray(points)
        if a.ndim == 1:
            if self.dim != 1:
                if a.shape[0] == self.dim:
                    return a[None, :]
                raise ValueError(f"expected {self.dim}-dimensional points")
            a = a[:, None]
        if a.ndim != 2 or a.shape[1] != self.dim:
            raise ValueError(
                f"dimension mismatch: expected d={self.dim}, got shape {a.shape}"
            )
        return a

    def add(self, points) -> None:
        """Pixelize and insert real or integer points of shape ``(N, d)``."""
        a = self._as_2d(points)
        if a.shape[0] == 0:
            return
        r = float(self._offset)
        if np.issubdtype(a.dtype, np.integer):
            a = a.astype(np.int64)
            inside = ((a >= -self._offset) & (a < self._offset)).all(axis=1)
            cells = a[inside]
        else:
            a = a.astype(np.float64)
            # NaN fails both comparisons and is discarded
            inside = ((a >= -r) & (a < r)).all(axis=1)
            cells = np.floor(a[inside]).astype(np.int64)
        self.discarded += int(a.shape[0] - cells.shape[0])
        if cells.shape[0] == 0:
            return
        keys = np.unique(self._pack(cells))
        self._pending.append(keys)
        self._pending_size += keys.shape[0]
        if self._pending_size > max(_MIN_FLUSH, self._keys.shape[0]):
            self._flush()

    def _flush(self) -> None:
        if not self._pending:
            return
        fresh = np.unique(np.concatenate(self._pending))
        self._pending = []
        self._pending_size = 0
        new = fresh[~np.isin(fresh, self._keys, assume_unique=True)]
        if new.shape[0]:
            shells = shells_of(self._unpack(new))
            self._counts += np.bincount(shells, minlength=self.n_max + 1)
            self._keys = np.union1d(self._keys, new)

    def update(self, other: "PixelSet") -> None:
        """In-place set union with another PixelSet of the same geometry."""
        if (other.dim, other.n_max) != (self.dim, self.n_max):
            raise ValueError("cannot merge PixelSets with different geometry")
        self._pending.append(other.keys)
        self._pending_size += other.keys.shape[0]
        self.discarded += other.discarded
        self._flush()

    @property
    def keys(self) -> np.ndarray:
        self._flush()
        return self._keys

    @property
    def points(self) -> np.ndarray:
        """Stored lattice points as an ``(N, d)`` int64 array, in key order."""
        return self._unpack(self.keys)

    def __len__(self) -> int:
        return int(self.keys.shape[0])

    def __contains__(self, x) -> bool:
        c = np.atleast_1d(np.asarray(x, dtype=np.int64))[None, :]
        if c.shape[1] != self.dim:
            return False
        if not ((c >= -self._offset) & (c < self._offset)).all():
            return False
        k = self._pack(c)[0]
        keys = self.keys
        i = np.searchsorted(keys, k)
        return bool(i < keys.shape[0] and keys[i] == k)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PixelSet):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.n_max == other.n_max
            and np.array_equal(self.keys, other.keys)
        )

    def issubset(self, other: "PixelSet") -> bool:
        return bool(np.isin(self.keys, other.keys, assume_unique=True).all())

    def to_set(self) -> set:
        return {tuple(int(v) for v in row) for row in self.points}

    def shell_counts(self) -> ShellCounts:
        self._flush()
        return ShellCounts(self._counts.copy())

    def to_text(self, path=None) -> str:
        """One point per line, space-separated integers, LF endings."""
        lines = [" ".join(str(int(v)) for v in row) for row in self.points]
        text = "".join(line + "\n" for line in lines)
        if path is not None:
            with open(path, "w", newline="\n") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_text(cls, text: str, n_max: int, dim: int | None = None) -> "PixelSet":
        rows = [line.split() for line in text.splitlines() if line.strip()]
        if dim is None:
            if not rows:
                raise ValueError("cannot infer dimension of an empty point file")
            dim = len(rows[0])
        if any(len(r) != dim for r in rows):
            raise ValueError("dimension mismatch in point file")
        ps = cls(dim, n_max)
        if rows:
            ps.add(np.array(rows, dtype=np.int64).reshape(-1, dim))
        return ps

    def __repr__(self) -> str:
        return f"PixelSet(dim={self.dim}, n_max={self.n_max}, size={len(self)})"


def pixelize(stream, n_max: int, dim: int | None = None) -> PixelSet:
    """Pixelize a point stream into a PixelSet.

    ``stream`` is either a single array-like of shape ``(N, d)`` (or ``(N,)``
    for d = 1) or an iterable of such chunks.  The dimension is taken from
    the first non-empty chunk unless given.
    """
    if isinstance(stream, np.ndarray):
        chunks = [stream]
    elif isinstance(stream, (list, tuple)):
        try:
            arr = np.asarray(stream, dtype=np.float64) if stream else np.empty(0)
        except ValueError as exc:
            raise ValueError(f"dimension mismatch within stream: {exc}") from None
        if arr.ndim > 2:
            raise ValueError("points must be scalars (d = 1) or d-tuples")
        chunks = [arr]
    else:
        chunks = (np.asarray(c) for c in stream)

    ps = None
    for chunk in chunks:
        if chunk.size == 0:
            continue
        if ps is None:
            d = dim if dim is not None else (1 if chunk.ndim == 1 else chunk.shape[1])
            ps = PixelSet(d, n_max)
        ps.add(chunk)
    if ps is None:
        ps = PixelSet(dim or 1, n_max)
    return ps


def shell_counts(ps: PixelSet) -> ShellCounts:
    return ps.shell_counts()
