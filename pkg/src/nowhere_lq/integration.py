"""Certified integration for sums of masked power terms.

Three layers:

* ``integral_power_term`` -- exact closed forms for a single term over an
  interval set, with ``INFINITE`` as a first-class result when the integral
  genuinely diverges (never as a stand-in for "budget exhausted").
* ``enclose_sum_q`` -- two-sided enclosures of ``integral of (sum of terms)^q``
  by deterministic adaptive bisection; singular cells are bounded above by
  Minkowski (q >= 1) or subadditivity (q <= 1) and below by term dropping.
* ``stage_power_integral`` / ``norm_of_masked_series`` -- the integral of
  ``x^(-e)`` over a stage-m outer approximation of the fat Cantor set via an
  adaptive stage-tree (no materialization of the 2^(m-1) stage intervals),
  and the resulting norm enclosure for the masked singular series, together
  with certified bounds for the untruncated ideal norm.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .cantor import hole_length, stage, stage_length
from .exact import (
    DEFAULT_PRECISION,
    DomainError,
    Enclosure,
    Rat,
    dec_str_upper,
    format_rat,
    ln_rat,
    pow2,
    rat_pow,
)
from .intervals import QInterval, QIntervalSet
from .singular import (
    ExponentSchedule,
    FunctionTerm,
    SingularFunction,
    build_masked_series,
    build_series,
)


class _Infinite:
    """Singleton marker for a certified-divergent integral."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INFINITE"

    def __bool__(self) -> bool:
        return True


INFINITE = _Infinite()

# Width goal for the stage-tree integral; its nodes are cheap and graded.
DEFAULT_TARGET_WIDTH = Fraction(1, 10**9)

# The general sum-quadrature converges like cells^(-2); this pairing keeps
# default runs comfortably inside the budget.
DEFAULT_SUM_TARGET = Fraction(1, 10**5)
DEFAULT_MAX_CELLS = 8192
DEFAULT_MAX_NODES = 8000


def is_infinite(value) -> bool:
    return value is INFINITE


@dataclass(frozen=True)
class Quadrature:
    """Result of an adaptive enclosure run."""

    value: Enclosure
    cells: int
    budget_exhausted: bool

    @property
    def width(self) -> Rat:
        return self.value.width

    def to_json(self) -> dict:
        return {
            "value": self.value.to_json(),
            "cells": self.cells,
            "achieved_width_le": dec_str_upper(self.width),
            "budget_exhausted": self.budget_exhausted,
        }


def _piece_in_domain(term: FunctionTerm, piece: QInterval) -> bool:
    if not term.support.contains_interval(piece):
        return False
    if term.mask is None:
        return True
    # Stage sets are finite unions of closed intervals, so full measure
    # within the piece is the same as containment up to endpoints.
    return term.mask.measure_within(piece) == piece.length


def _antiderivative_gap(alpha: Rat, beta: Rat, qe: Rat, precision: int):
    """Integral of t^(-qe) over [alpha, beta] in [0,1], or INFINITE."""
    if qe == 1:
        if alpha == 0:
            return INFINITE
        return ln_rat(beta / alpha, precision)
    one = 1 - qe
    if qe > 1:
        if alpha == 0:
            return INFINITE
        return (rat_pow(alpha, one, precision) - rat_pow(beta, one, precision)) / (qe - 1)
    return (rat_pow(beta, one, precision) - rat_pow(alpha, one, precision)) / one


def integral_power_term(
    term: FunctionTerm,
    pieces: QIntervalSet,
    q: Rat,
    precision: int = DEFAULT_PRECISION,
    norm_value: Enclosure | None = None,
):
    """Enclosure (or INFINITE) of the integral of term(x)^q over the pieces.

    Every piece must sit inside the term's support and, for masked terms,
    inside the masked set: the closed form integrates the bare power law.
    """
    q = Fraction(q)
    if q <= 0:
        raise DomainError(f"integration power must be positive, got {q}")
    if pieces.is_empty:
        return Enclosure.exact(0)
    a = term.support.lo
    span = term.support.length
    qe = q * term.exponent
    gaps = Enclosure.exact(0)
    for piece in pieces:
        if not _piece_in_domain(term, piece):
            raise DomainError(f"piece {piece.to_json()} not inside the term domain")
        gap = _antiderivative_gap(
            (piece.lo - a) / span, (piece.hi - a) / span, qe, precision
        )
        if gap is INFINITE:
            return INFINITE
        gaps = gaps + gap
    factor = term.coeff.pow(q).resolve(norm_value, precision)
    return factor * (span * gaps)


def _select_term(f: SingularFunction, pick) -> int:
    if callable(pick):
        pick = pick(f.terms)
    index = int(pick)
    if not 0 <= index < len(f.terms):
        raise DomainError(f"term selector {index} out of range 0..{len(f.terms) - 1}")
    return index


def lower_bound_sum_q(
    f: SingularFunction,
    pieces: QIntervalSet,
    q: Rat,
    pick,
    precision: int = DEFAULT_PRECISION,
    norm_value: Enclosure | None = None,
):
    """Certified lower bound for the integral of f^q via a single kept term.

    All term coefficients are positive, so dropping every term but one can
    only decrease the integrand; the returned enclosure's lower endpoint is
    the certified bound (the enclosure itself brackets the kept term's
    integral exactly).
    """
    term = f.terms[_select_term(f, pick)]
    return integral_power_term(term, pieces, q, precision, norm_value)


@dataclass(frozen=True)
class _Cell:
    lo: Rat
    hi: Rat
    actives: tuple[int, ...]
    singular: bool
    bound: Enclosure


class _TermView:
    """Resolved per-term data reused across cells."""

    __slots__ = ("term", "coeff", "domain")

    def __init__(self, term: FunctionTerm, precision: int, norm_value: Enclosure | None):
        self.term = term
        self.coeff = term.coeff.resolve(norm_value, precision)
        self.domain = term.domain()

    def value_bounds(self, x: Rat, precision: int) -> Enclosure:
        u = self.term.support.unit_coordinate(x)
        return self.coeff * rat_pow(u, -self.term.exponent, precision)


def _cell_bound(
    views: Sequence[_TermView],
    lo: Rat,
    hi: Rat,
    actives: tuple[int, ...],
    singular: bool,
    q: Rat,
    precision: int,
    norm_value: Enclosure | None,
):
    """Bracket the cell integral of (sum of active terms)^q.

    Per-term closed forms give a lower bound by superadditivity (q >= 1;
    max single term for q < 1) and an upper bound by Minkowski (q >= 1;
    subadditivity for q < 1). Away from singular endpoints the monotone
    endpoint-value sandwich is intersected in, which is what makes cells
    far from the singularity converge quadratically.
    """
    if not actives:
        return Enclosure.exact(0)
    window = QIntervalSet.single(lo, hi)
    parts: list[Enclosure] = []
    for idx in actives:
        part = integral_power_term(views[idx].term, window, q, precision, norm_value)
        if part is INFINITE:
            return INFINITE
        parts.append(part)
    if len(parts) == 1:
        lower, upper = parts[0].lo, parts[0].hi
    elif q >= 1:
        lower = sum((part.lo for part in parts), Fraction(0))
        inv = 1 / q
        mink = Enclosure.exact(0)
        for part in parts:
            mink = mink + part.pow_rat(inv, precision)
        upper = mink.pow_rat(q, precision).hi
    else:
        lower = max(part.lo for part in parts)
        upper = sum((part.hi for part in parts), Fraction(0))
    if not singular:
        at_hi = Enclosure.exact(0)
        at_lo = Enclosure.exact(0)
        for idx in actives:
            at_hi = at_hi + views[idx].value_bounds(hi, precision)
            at_lo = at_lo + views[idx].value_bounds(lo, precision)
        spread = Enclosure(at_hi.lo, max(at_hi.lo, at_lo.hi))
        sandwich = (hi - lo) * spread.pow_rat(q, precision)
        lower = max(lower, sandwich.lo)
        upper = min(upper, sandwich.hi)
        if q >= 1 and upper > lower:
            # Each term is positive, decreasing and convex on the cell, so
            # the sum is convex and so is its q-th power (q >= 1): the
            # midpoint rule bounds the integral below, the trapezoid above.
            at_mid = Enclosure.exact(0)
            for idx in actives:
                at_mid = at_mid + views[idx].value_bounds((lo + hi) / 2, precision)
            length = hi - lo
            lower = max(lower, (length * at_mid.pow_rat(q, precision)).lo)
            trapezoid = (
                at_lo.pow_rat(q, precision) + at_hi.pow_rat(q, precision)
            ) * (length / 2)
            upper = min(upper, trapezoid.hi)
    # See stage_power_integral: dyadic endpoints keep cell sums cheap.
    return Enclosure(lower, max(lower, upper)).round_out(precision + 16)


def enclose_sum_q(
    f: SingularFunction,
    region: QIntervalSet,
    q: Rat,
    target_width: Rat = DEFAULT_SUM_TARGET,
    precision: int = DEFAULT_PRECISION,
    max_cells: int = DEFAULT_MAX_CELLS,
    norm_value: Enclosure | None = None,
):
    """Two-sided enclosure of the integral of (sum of terms)^q over region.

    Deterministic: cells are refined worst-width-first with a tie-breaking
    counter, and all arithmetic is rational, so identical inputs reproduce
    identical enclosures. Returns a Quadrature, or INFINITE when a kept term
    alone already diverges on the region.
    """
    q = Fraction(q)
    if q <= 0:
        raise DomainError(f"integration power must be positive, got {q}")
    target_width = Fraction(target_width)
    if region.is_empty or not f.terms:
        return Quadrature(Enclosure.exact(0), 0, False)

    views = [_TermView(t, precision, norm_value) for t in f.terms]

    if q == 1:
        # Linearity: integrate each term over its own clipped domain, exactly.
        total = Enclosure.exact(0)
        cells = 0
        for view in views:
            clipped = view.domain.intersect(region)
            part = integral_power_term(view.term, clipped, 1, precision, norm_value)
            if part is INFINITE:
                return INFINITE
            total = total + part
            cells += len(clipped)
        return Quadrature(total, cells, False)

    def make_cell(lo: Rat, hi: Rat, actives: tuple[int, ...]):
        singular = any(views[i].term.support.lo == lo for i in actives)
        bound = _cell_bound(views, lo, hi, actives, singular, q, precision, norm_value)
        if bound is INFINITE:
            return INFINITE
        return _Cell(lo, hi, actives, singular, bound)

    cells: list[_Cell] = []
    for piece in region:
        cuts = {piece.lo, piece.hi}
        for view in views:
            for dom in view.domain.intersect_interval(piece):
                cuts.add(dom.lo)
                cuts.add(dom.hi)
        points = sorted(cuts)
        for lo, hi in zip(points, points[1:]):
            mid = (lo + hi) / 2
            actives = tuple(
                i for i, view in enumerate(views) if view.domain.contains_point(mid)
            )
            cell = make_cell(lo, hi, actives)
            if cell is INFINITE:
                return INFINITE
            cells.append(cell)

    total_lo = sum((c.bound.lo for c in cells), Fraction(0))
    total_hi = sum((c.bound.hi for c in cells), Fraction(0))
    heap: list[tuple[Rat, int, _Cell]] = []
    counter = 0
    for cell in cells:
        heapq.heappush(heap, (-cell.bound.width, counter, cell))
        counter += 1
    made = len(cells)

    budget = False
    while total_hi - total_lo > target_width:
        if made >= max_cells or not heap:
            budget = True
            break
        _, _, cell = heapq.heappop(heap)
        if cell.bound.width == 0 or cell.hi == cell.lo:
            continue
        mid = (cell.lo + cell.hi) / 2
        halves = []
        for lo, hi in ((cell.lo, mid), (mid, cell.hi)):
            half = make_cell(lo, hi, cell.actives)
            if half is INFINITE:  # pragma: no cover - caught at cell creation
                return INFINITE
            halves.append(half)
        total_lo += halves[0].bound.lo + halves[1].bound.lo - cell.bound.lo
        total_hi += halves[0].bound.hi + halves[1].bound.hi - cell.bound.hi
        for half in halves:
            heapq.heappush(heap, (-half.bound.width, counter, half))
            counter += 1
        made += 2
    return Quadrature(Enclosure(total_lo, total_hi), made, budget)


@dataclass(frozen=True)
class _StageNode:
    depth: int
    lo: Rat
    bound: Enclosure


def stage_power_integral(
    exponent: Rat,
    m: int,
    precision: int = DEFAULT_PRECISION,
    target_width: Rat = DEFAULT_TARGET_WIDTH,
    max_nodes: int = DEFAULT_MAX_NODES,
) -> Quadrature:
    """Enclosure of the integral of x^(-exponent) over the stage-m set.

    Works on the stage tree directly: a depth-n node covers one of the
    2^(n-1) stage-n intervals and carries exactly 2^(m-n) of the stage-m
    subintervals, so pushing that mass to the node's left (right) end bounds
    the integral above (below) without materializing the stage. Nodes are
    split worst-first; only the spine at 0 ever needs full depth.
    """
    exponent = Fraction(exponent)
    if not 0 < exponent < 1:
        raise DomainError(f"stage integral needs exponent in (0,1), got {exponent}")
    if m < 1:
        raise DomainError(f"stage index must be >= 1, got {m}")
    target_width = Fraction(target_width)
    one = 1 - exponent

    def gap(alpha: Rat, beta: Rat) -> Enclosure:
        return (rat_pow(beta, one, precision) - rat_pow(alpha, one, precision)) / one

    leaf_len = stage_length(m)

    # Exact second moment of the stage-m mass about a depth-n node's center:
    # the mass splits into two child copies at distance (span+hole)/4 each,
    # so V(n) = 2 V(n+1) + mass(n) * h(n)^2, down to the leaf's l^3/12.
    second_moment = [Fraction(0)] * (m + 1)
    second_moment[m] = leaf_len**3 / 12
    for n in range(m - 1, 0, -1):
        h = (stage_length(n) + hole_length(n)) / 4
        mass_n = (1 << (m - n)) * leaf_len
        second_moment[n] = 2 * second_moment[n + 1] + mass_n * h * h

    def node_bound(depth: int, lo: Rat) -> Enclosure:
        if depth == m:
            return gap(lo, lo + leaf_len)
        mass = (1 << (m - depth)) * leaf_len
        span = stage_length(depth)
        hi = lo + span
        # Order-1: pack the mass against either end of the node.
        lower = gap(hi - mass, hi).lo
        upper = gap(lo, lo + mass).hi
        if lo > 0:
            # The mass is symmetric about the node center c, so the first
            # moment vanishes and Taylor at c needs only the exact second
            # moment V: integral = mass*c^-e + (e(e+1)/2) * x^-(e+2) * V
            # with x in [lo, hi], plus a cubic remainder bounded through
            # max |f'''| = e(e+1)(e+2) lo^-(e+3) and |x-c|^3 <= (span/2) V.
            c = lo + span / 2
            v = second_moment[depth]
            head = mass * rat_pow(c, -exponent, precision)
            curve = (
                Enclosure(
                    rat_pow(hi, -(exponent + 2), precision).lo,
                    rat_pow(lo, -(exponent + 2), precision).hi,
                )
                * (exponent * (exponent + 1) / 2)
                * v
            )
            rem = (
                exponent
                * (exponent + 1)
                * (exponent + 2)
                * rat_pow(lo, -(exponent + 3), precision).hi
                * (span / 2)
                * v
                / 6
            )
            taylor = head + curve
            lower = max(lower, taylor.lo - rem)
            upper = min(upper, taylor.hi + rem)
        # Outward dyadic rounding keeps the running totals' denominators
        # bounded; otherwise node sums collect huge odd factors and the
        # rational arithmetic degrades superlinearly with node count.
        return Enclosure(lower, max(lower, upper)).round_out(precision + 16)

    root = _StageNode(1, Fraction(0), node_bound(1, Fraction(0)))
    total_lo, total_hi = root.bound.lo, root.bound.hi
    heap: list[tuple[Rat, int, _StageNode]] = [(-root.bound.width, 0, root)]
    counter = 1
    made = 1
    budget = False
    while total_hi - total_lo > target_width:
        if made >= max_nodes or not heap:
            budget = True
            break
        _, _, node = heapq.heappop(heap)
        if node.depth == m:
            continue
        offset = (stage_length(node.depth) + hole_length(node.depth)) / 2
        children = []
        for lo in (node.lo, node.lo + offset):
            child = _StageNode(node.depth + 1, lo, node_bound(node.depth + 1, lo))
            children.append(child)
        total_lo += children[0].bound.lo + children[1].bound.lo - node.bound.lo
        total_hi += children[0].bound.hi + children[1].bound.hi - node.bound.hi
        for child in children:
            if child.depth < m or child.bound.width > 0:
                heapq.heappush(heap, (-child.bound.width, counter, child))
                counter += 1
        made += 2
    return Quadrature(Enclosure(total_lo, total_hi), made, budget)


@dataclass(frozen=True)
class MaskedSeriesNorm:
    """Norm data for the stage-masked truncated singular series.

    ``truncated`` brackets the p-norm of the finite object actually built
    (first J blocks, mask = stage-m set). ``ideal`` brackets the p-norm of
    the untruncated series on the limit set: the upper side adds the exact
    series tail 2^(-J); the lower side subtracts ``residual_bound``, a
    per-term Hoelder bound for the mass the mask's extra measure-2^(-m)
    residual can carry.
    """

    p: Rat
    blocks: int
    stage: int
    truncated: Enclosure
    ideal: Enclosure
    residual_bound: Enclosure
    tail_allowance: Rat
    cells: int
    budget_exhausted: bool

    def to_json(self) -> dict:
        return {
            "p": format_rat(self.p),
            "blocks": self.blocks,
            "stage": self.stage,
            "truncated": self.truncated.to_json(),
            "ideal": self.ideal.to_json(),
            "residual_bound_le": dec_str_upper(self.residual_bound.hi),
            "tail_allowance": format_rat(self.tail_allowance),
            "cells": self.cells,
            "achieved_width_le": dec_str_upper(self.truncated.width),
            "budget_exhausted": self.budget_exhausted,
        }


def _residual_holder_bound(
    f: SingularFunction, m: int, p: Rat, precision: int
) -> Enclosure:
    """Bound the p-norm of the truncated series on a set of measure 2^(-m).

    Minkowski over terms, then per-term Hoelder with conjugate exponent
    a = (1 + 1/(p*e))/2, chosen so p*e*a stays strictly below 1 while the
    residual measure enters at the positive power 1 - 1/a.
    """
    total = Enclosure.exact(0)
    for term in f.terms:
        e = term.exponent
        a = (1 + 1 / (p * e)) / 2
        base = 1 / (1 - p * e * a)
        inner = rat_pow(base, 1 / a, precision) * pow2(-m * (1 - 1 / a), precision)
        total = total + term.coeff.resolve(None, precision) * inner.pow_rat(
            1 / p, precision
        )
    return total


def _residual_rearrangement_bound(
    series: SingularFunction, m: int, p: Rat, precision: int
) -> Enclosure:
    """Sharper residual bound: the series decreases, so its p-th power
    integrates over any measure-2^(-m) set at most as much as over
    [0, 2^(-m)] itself (decreasing rearrangement)."""
    sliver = QIntervalSet.single(Fraction(0), Fraction(1, 2**m))
    quad = enclose_sum_q(
        series, sliver, p, target_width=Fraction(1, 10**6), precision=precision
    )
    if quad is INFINITE:  # pragma: no cover - p*e < 1 for every block
        raise DomainError("series unexpectedly non-integrable near 0")
    return quad.value.pow_rat(1 / Fraction(p), precision)


def norm_of_masked_series(
    J: int,
    m: int,
    sched: ExponentSchedule,
    precision: int = DEFAULT_PRECISION,
    target_width: Rat = Fraction(1, 10**8),
    max_cells: int = DEFAULT_MAX_CELLS,
    max_nodes: int = DEFAULT_MAX_NODES,
) -> MaskedSeriesNorm:
    """Certified p-norm of the stage-m-masked, J-block singular series.

    p = 1 integrates term-by-term on the stage tree (any depth m); other p
    run the general quadrature on the materialized stage, so m is limited
    by the materialization cap there.
    """
    f = build_masked_series(J, m, sched)
    p = sched.p
    cells = 0
    budget = False
    if p == 1:
        value = Enclosure.exact(0)
        share = Fraction(target_width) / (2 * len(f.terms))
        for term in f.terms:
            coeff = term.coeff.rational_value()
            # The term enters the total with weight coeff, so its integral
            # may be coeff times looser; late blocks become nearly free.
            quad = stage_power_integral(
                term.exponent, m, precision, min(share / coeff, Fraction(1, 4)), max_nodes
            )
            value = value + coeff * quad.value
            cells += quad.cells
            budget = budget or quad.budget_exhausted
        truncated = value
    else:
        quad = enclose_sum_q(
            f, stage(m).intervals, p, target_width, precision, max_cells
        )
        if quad is INFINITE:  # pragma: no cover - p*e < 1 for every block
            raise DomainError("masked series unexpectedly non-integrable")
        truncated = quad.value.pow_rat(1 / Fraction(p), precision)
        cells = quad.cells
        budget = quad.budget_exhausted
    holder = _residual_holder_bound(f, m, p, precision)
    rearranged = _residual_rearrangement_bound(build_series(J, sched), m, p, precision)
    residual = rearranged if rearranged.hi <= holder.hi else holder
    tail = Fraction(1, 2**J)
    ideal = Enclosure(max(Fraction(0), truncated.lo - residual.hi), truncated.hi + tail)
    return MaskedSeriesNorm(
        p=Fraction(p),
        blocks=J,
        stage=m,
        truncated=truncated,
        ideal=ideal,
        residual_bound=residual,
        tail_allowance=tail,
        cells=cells,
        budget_exhausted=budget,
    )
