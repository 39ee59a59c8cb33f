"""Finite unions of closed rational intervals inside [0, 1].

Measure-theoretic bookkeeping for the construction: all sets that carry
mass are finite unions of closed intervals with Fraction endpoints.
Zero-length intervals are dropped during normalization; two sets are
treated as equal when they differ by finitely many points, which is
invisible to every measure computed here.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .exact import DomainError, Rat, format_rat, parse_rat


@dataclass(frozen=True, order=True)
class QInterval:
    """Closed interval [lo, hi] with exact rational endpoints."""

    lo: Rat
    hi: Rat

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise DomainError(f"inverted interval [{self.lo}, {self.hi}]")

    @property
    def length(self) -> Rat:
        return self.hi - self.lo

    def contains_point(self, x: Rat) -> bool:
        return self.lo <= x <= self.hi

    def contains_interval(self, other: "QInterval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def intersect(self, other: "QInterval") -> "QInterval | None":
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        return QInterval(lo, hi) if lo <= hi else None

    def affine_from_unit(self, x: Rat) -> Rat:
        """Image of x under the increasing affine map [0,1] -> self."""
        return self.lo + self.length * Fraction(x)

    def unit_coordinate(self, x: Rat) -> Rat:
        """Preimage of x under the map [0,1] -> self; requires length > 0."""
        if self.length == 0:
            raise DomainError("degenerate interval has no unit chart")
        return (Fraction(x) - self.lo) / self.length

    def to_json(self) -> list[str]:
        return [format_rat(self.lo), format_rat(self.hi)]

    @staticmethod
    def from_json(data: Sequence[str]) -> "QInterval":
        return QInterval(parse_rat(data[0]), parse_rat(data[1]))


UNIT = QInterval(Fraction(0), Fraction(1))


class QIntervalSet:
    """Normalized finite union of closed intervals.

    Normal form: positive-length intervals, sorted, pairwise disjoint
    with positive gaps (touching intervals are merged).
    """

    __slots__ = ("intervals",)

    def __init__(self, intervals: Iterable[QInterval] = ()) -> None:
        items = sorted(
            (iv for iv in intervals if iv.length > 0), key=lambda iv: (iv.lo, iv.hi)
        )
        merged: list[QInterval] = []
        for iv in items:
            if merged and iv.lo <= merged[-1].hi:
                if iv.hi > merged[-1].hi:
                    merged[-1] = QInterval(merged[-1].lo, iv.hi)
            else:
                merged.append(iv)
        object.__setattr__(self, "intervals", tuple(merged))

    @staticmethod
    def single(lo: Rat, hi: Rat) -> "QIntervalSet":
        return QIntervalSet([QInterval(Fraction(lo), Fraction(hi))])

    def __len__(self) -> int:
        return len(self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    def __eq__(self, other) -> bool:
        return isinstance(other, QIntervalSet) and self.intervals == other.intervals

    def __hash__(self) -> int:
        return hash(self.intervals)

    def __repr__(self) -> str:  # pragma: no cover - debug aid
        parts = ", ".join(f"[{iv.lo},{iv.hi}]" for iv in self.intervals)
        return f"QIntervalSet({parts})"

    @property
    def measure(self) -> Rat:
        return sum((iv.length for iv in self.intervals), Fraction(0))

    @property
    def is_empty(self) -> bool:
        return not self.intervals

    def hull(self) -> QInterval | None:
        if not self.intervals:
            return None
        return QInterval(self.intervals[0].lo, self.intervals[-1].hi)

    def contains_point(self, x: Rat) -> bool:
        x = Fraction(x)
        lo, hi = 0, len(self.intervals)
        while lo < hi:
            mid = (lo + hi) // 2
            if self.intervals[mid].hi < x:
                lo = mid + 1
            else:
                hi = mid
        return lo < len(self.intervals) and self.intervals[lo].lo <= x

    def union(self, other: "QIntervalSet") -> "QIntervalSet":
        return QIntervalSet(list(self.intervals) + list(other.intervals))

    def intersect(self, other: "QIntervalSet") -> "QIntervalSet":
        out: list[QInterval] = []
        i = j = 0
        a, b = self.intervals, other.intervals
        while i < len(a) and j < len(b):
            cut = a[i].intersect(b[j])
            if cut is not None:
                out.append(cut)
            if a[i].hi < b[j].hi:
                i += 1
            else:
                j += 1
        return QIntervalSet(out)

    def intersect_interval(self, window: QInterval) -> "QIntervalSet":
        return self.intersect(QIntervalSet([window]))

    def complement_in(self, frame: QInterval) -> "QIntervalSet":
        out: list[QInterval] = []
        cursor = frame.lo
        for iv in self.intervals:
            if iv.hi <= frame.lo or iv.lo >= frame.hi:
                continue
            lo = max(iv.lo, frame.lo)
            if lo > cursor:
                out.append(QInterval(cursor, lo))
            cursor = max(cursor, min(iv.hi, frame.hi))
        if cursor < frame.hi:
            out.append(QInterval(cursor, frame.hi))
        return QIntervalSet(out)

    def affine_image(self, target: QInterval) -> "QIntervalSet":
        """Image under the increasing affine bijection [0,1] -> target."""
        return QIntervalSet(
            QInterval(target.affine_from_unit(iv.lo), target.affine_from_unit(iv.hi))
            for iv in self.intervals
        )

    def almost_disjoint_from(self, other: "QIntervalSet") -> bool:
        """True when the intersection has measure zero."""
        return self.intersect(other).is_empty

    def to_json(self) -> list[list[str]]:
        return [iv.to_json() for iv in self.intervals]

    @staticmethod
    def from_json(data: Iterable[Sequence[str]]) -> "QIntervalSet":
        return QIntervalSet(QInterval.from_json(row) for row in data)
