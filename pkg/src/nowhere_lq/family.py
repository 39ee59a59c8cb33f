"""Disjoint strictly increasing integer sequences covering the positive integers.

Row k lists the integers whose largest power-of-two factor is exactly
2^(k-1): value(k, j) = 2^(k-1) * (2j - 1).  Rows are strictly increasing,
pairwise disjoint, and their union is all of N; locate() inverts value()
by stripping trailing binary zeros.
"""

from __future__ import annotations

from dataclasses import dataclass

from .exact import DomainError


def seq_value(k: int, j: int) -> int:
    """The j-th entry of row k."""
    if k < 1 or j < 1:
        raise DomainError(f"row and position must be >= 1, got k={k}, j={j}")
    return (1 << (k - 1)) * (2 * j - 1)


def seq_locate(n: int) -> tuple[int, int]:
    """The unique (k, j) with seq_value(k, j) == n."""
    if n < 1:
        raise DomainError(f"positive integer required, got {n}")
    k = (n & -n).bit_length()  # 1 + number of trailing zeros
    odd = n >> (k - 1)
    return k, (odd + 1) // 2


@dataclass(frozen=True)
class SequenceFamily:
    """The dyadic-odd family; kept as an object so reports can name it."""

    name: str = "dyadic-odd"

    def value(self, k: int, j: int) -> int:
        return seq_value(k, j)

    def locate(self, n: int) -> tuple[int, int]:
        return seq_locate(n)

    def row(self, k: int, count: int) -> list[int]:
        return [seq_value(k, j) for j in range(1, count + 1)]


DEFAULT_FAMILY = SequenceFamily()
