"""Finite unions of closed real intervals with exact measure queries.

Used for spectra (band unions), the Diophantine sets P_q and their energy
pullbacks, and Hausdorff-distance checks between spectra. Intervals are kept
sorted and disjoint; touching intervals are merged, zero-length (point)
intervals are allowed.
"""

from __future__ import annotations

from typing import Iterable, Iterator, Tuple

import numpy as np

__all__ = ["IntervalSet", "hausdorff_distance"]


class IntervalSet:
    """Sorted disjoint union of closed intervals [lo_i, hi_i]."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo: np.ndarray, hi: np.ndarray, _trusted: bool = False):
        lo = np.asarray(lo, dtype=float).ravel()
        hi = np.asarray(hi, dtype=float).ravel()
        if lo.shape != hi.shape:
            raise ValueError("lo and hi must have the same length")
        if lo.size and np.any(hi < lo):
            raise ValueError("interval with hi < lo")
        if not _trusted and lo.size:
            order = np.argsort(lo, kind="stable")
            lo, hi = lo[order], hi[order]
            lo, hi = _merge_sorted(lo, hi)
        self.lo = lo
        self.hi = hi
        self.lo.setflags(write=False)
        self.hi.setflags(write=False)

    @classmethod
    def empty(cls) -> "IntervalSet":
        return cls(np.empty(0), np.empty(0), _trusted=True)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[float, float]]) -> "IntervalSet":
        arr = np.asarray(list(pairs), dtype=float)
        if arr.size == 0:
            return cls.empty()
        return cls(arr[:, 0], arr[:, 1])

    def __len__(self) -> int:
        return int(self.lo.size)

    def __iter__(self) -> Iterator[Tuple[float, float]]:
        return iter(zip(self.lo.tolist(), self.hi.tolist()))

    def __bool__(self) -> bool:
        return self.lo.size > 0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, IntervalSet):
            return NotImplemented
        return np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __repr__(self) -> str:
        if len(self) > 6:
            return f"IntervalSet(<{len(self)} components, measure={self.measure:.6g}>)"
        body = ", ".join(f"[{a:g}, {b:g}]" for a, b in self)
        return f"IntervalSet({body})"

    @property
    def measure(self) -> float:
        return float(np.sum(self.hi - self.lo))

    @property
    def hull(self) -> Tuple[float, float]:
        if not self:
            raise ValueError("empty set has no hull")
        return float(self.lo[0]), float(self.hi[-1])

    def contains(self, x) -> np.ndarray:
        """Vectorized closed-set membership."""
        x = np.asarray(x, dtype=float)
        # position among flattened edges: odd index <=> inside an interval
        edges = np.empty(2 * len(self))
        edges[0::2] = self.lo
        edges[1::2] = self.hi
        idx = np.searchsorted(edges, x, side="left")
        inside = (idx % 2 == 1)
        on_edge = np.isin(x, edges)
        return inside | on_edge

    def distance(self, x) -> np.ndarray:
        """Vectorized distance to the set (0 inside)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if not self:
            return np.full(x.shape, np.inf)
        i = np.searchsorted(self.lo, x, side="right")
        d_left = np.where(i > 0, x - self.hi[np.maximum(i - 1, 0)], np.inf)
        d_right = np.where(i < len(self), self.lo[np.minimum(i, len(self) - 1)] - x, np.inf)
        return np.maximum(np.minimum(np.maximum(d_left, 0.0), np.maximum(d_right, 0.0)), 0.0)

    def clip(self, lo: float, hi: float) -> "IntervalSet":
        """Intersection with the single interval [lo, hi]."""
        if hi < lo or not self:
            return IntervalSet.empty()
        keep = (self.hi >= lo) & (self.lo <= hi)
        return IntervalSet(np.clip(self.lo[keep], lo, hi), np.clip(self.hi[keep], lo, hi), _trusted=True)

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return IntervalSet(np.concatenate([self.lo, other.lo]), np.concatenate([self.hi, other.hi]))

    def intersect(self, other: "IntervalSet") -> "IntervalSet":
        if not self or not other:
            return IntervalSet.empty()
        # for every interval of self, the range of other-intervals it overlaps
        first = np.searchsorted(other.hi, self.lo, side="left")
        last = np.searchsorted(other.lo, self.hi, side="right")
        counts = np.maximum(last - first, 0)
        total = int(counts.sum())
        if total == 0:
            return IntervalSet.empty()
        rows = np.repeat(np.arange(len(self)), counts)
        offs = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
        cols = np.repeat(first, counts) + offs
        lo = np.maximum(self.lo[rows], other.lo[cols])
        hi = np.minimum(self.hi[rows], other.hi[cols])
        keep = hi >= lo
        return IntervalSet(lo[keep], hi[keep], _trusted=True)

    def complement(self, lo: float, hi: float) -> "IntervalSet":
        """Closure of [lo, hi] minus this set."""
        inner = self.clip(lo, hi)
        pts = np.concatenate([[lo], np.column_stack([inner.lo, inner.hi]).ravel(), [hi]])
        c_lo, c_hi = pts[0::2], pts[1::2]
        keep = c_hi > c_lo
        return IntervalSet(c_lo[keep], c_hi[keep], _trusted=True)

    def difference(self, other: "IntervalSet") -> "IntervalSet":
        if not self:
            return IntervalSet.empty()
        if not other:
            return self
        lo, hi = self.hull
        return self.intersect(other.complement(min(lo, other.lo[0]) - 1.0, max(hi, other.hi[-1]) + 1.0))


def _merge_sorted(lo: np.ndarray, hi: np.ndarray):
    """Merge sorted, possibly overlapping or touching intervals."""
    run_hi = np.maximum.accumulate(hi)
    # a new component starts where lo exceeds every previous hi
    new = np.empty(lo.size, dtype=bool)
    new[0] = True
    new[1:] = lo[1:] > run_hi[:-1]
    out_lo = lo[new]
    out_hi = np.maximum.reduceat(run_hi, np.flatnonzero(new))
    return out_lo, out_hi


def hausdorff_distance(a: IntervalSet, b: IntervalSet) -> float:
    """Hausdorff distance between two nonempty closed interval unions."""
    if not a or not b:
        raise ValueError("Hausdorff distance needs nonempty sets")
    return max(_sup_dist(a, b), _sup_dist(b, a))


def _sup_dist(a: IntervalSet, b: IntervalSet) -> float:
    # sup over x in a of dist(x, b): attained at component endpoints of a or
    # at gap midpoints of b lying inside a (dist(.,b) is piecewise linear)
    cand = [a.lo, a.hi]
    if len(b) > 1:
        mids = 0.5 * (b.hi[:-1] + b.lo[1:])
        cand.append(mids[a.contains(mids)])
    pts = np.concatenate(cand)
    return float(np.max(b.distance(pts))) if pts.size else 0.0
