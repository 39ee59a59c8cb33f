"""Dyadic-odd sequence family: values, inversion, disjoint coverage."""

import random

import pytest

from nowhere_lq.exact import DomainError
from nowhere_lq.family import DEFAULT_FAMILY, seq_locate, seq_value


def test_rows_frozen():
    assert DEFAULT_FAMILY.row(1, 5) == [1, 3, 5, 7, 9]
    assert DEFAULT_FAMILY.row(2, 5) == [2, 6, 10, 14, 18]
    assert DEFAULT_FAMILY.row(3, 4) == [4, 12, 20, 28]
    assert seq_value(4, 1) == 8


def test_rows_strictly_increasing():
    for k in range(1, 8):
        row = DEFAULT_FAMILY.row(k, 50)
        assert all(a < b for a, b in zip(row, row[1:]))


def test_locate_roundtrip_small():
    seen = {}
    for n in range(1, 4097):
        k, j = seq_locate(n)
        assert seq_value(k, j) == n
        assert (k, j) not in seen
        seen[(k, j)] = n


def test_locate_roundtrip_random_large():
    rng = random.Random(1234)
    for _ in range(500):
        n = rng.randrange(1, 10**12)
        k, j = seq_locate(n)
        assert seq_value(k, j) == n


def test_value_injective_across_rows():
    values = {seq_value(k, j) for k in range(1, 9) for j in range(1, 65)}
    assert len(values) == 8 * 64


def test_domain_errors():
    with pytest.raises(DomainError):
        seq_value(0, 1)
    with pytest.raises(DomainError):
        seq_locate(0)
