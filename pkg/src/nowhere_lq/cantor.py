"""Fat Cantor construction, hole addressing, and nested copy trees.

Stage 1 is [0,1]; forming stage k+1 removes from each stage-k interval
the centered open hole of length 4^(-k).  All 2^(k-1) stage-k intervals
share one length ell_k with ell_{k+1} = (ell_k - 4^(-k))/2, and the
limit set keeps measure 1/2.  Deep stages are never materialized:
intervals and holes are addressed as (generation, index) pairs and
resolved by an O(generation) bit walk.

On top of the single construction sit the recursively hole-filling
families: the level-n family places a fresh affine copy of the
construction into every hole of every copy at level n-1, so a level-n
member is addressed by a chain of n-1 hole addresses.  Chains get a
canonical enumeration (by total generation, then lexicographic), exact
hulls, exact truncation slack, and an exact pairwise overlap test.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb
from typing import Iterator

from .exact import DomainError, Rat, format_rat
from .intervals import UNIT, QInterval, QIntervalSet

#: largest interval count materialized eagerly (stages, realizations, masks)
MATERIALIZE_LIMIT = 1 << 17

#: default cap on hole generations explored per copy during searches
DEFAULT_GEN_BUDGET = 48

#: default cap on search-queue expansions
DEFAULT_EXPANSIONS = 20000


class WitnessNotFound(RuntimeError):
    """Search budget exhausted before a fitting component was found."""


def _check_level(n: int) -> None:
    if n < 1:
        raise DomainError(f"stage/level must be >= 1, got {n}")


@lru_cache(maxsize=None)
def stage_length(n: int) -> Rat:
    """Common length of the 2^(n-1) stage-n intervals: 2^-n + 2^(1-2n)."""
    _check_level(n)
    return Fraction(1, 2**n) + Fraction(2, 4**n)


def hole_length(k: int) -> Rat:
    """Length 4^(-k) of each hole removed when forming stage k+1."""
    _check_level(k)
    return Fraction(1, 4**k)


def _right_child_offset(k: int) -> Rat:
    # left endpoint shift from a stage-k interval to its right child
    return (stage_length(k) + hole_length(k)) / 2


def stage_interval(n: int, i: int) -> QInterval:
    """The i-th (0-based, left to right) interval of stage n."""
    _check_level(n)
    if not 0 <= i < 1 << (n - 1):
        raise DomainError(f"stage {n} has {1 << (n - 1)} intervals, got index {i}")
    lo = Fraction(0)
    for k in range(1, n):
        if (i >> (n - 1 - k)) & 1:
            lo += _right_child_offset(k)
    return QInterval(lo, lo + stage_length(n))


def hole_interval(k: int, i: int) -> QInterval:
    """The centered hole of stage-k interval i (removed forming stage k+1)."""
    parent = stage_interval(k, i)
    half_gap = (stage_length(k) - hole_length(k)) / 2
    return QInterval(parent.lo + half_gap, parent.hi - half_gap)


def t_right(n: int) -> Rat:
    """Right endpoint of the leftmost stage-n interval (equals its length)."""
    _check_level(n)
    return stage_length(n)


def tn_bounds(n: int) -> dict:
    """Exact decay-bound checks for t_n.

    The aggressive bound 2^(3-2n) holds at n = 1, 2 only and fails from
    n = 3 onward (t_3 = 5/32 > 4/32); every downstream estimate in this
    package therefore uses the provable halving bound t_n <= 2^(1-n),
    with equality only at n = 1.
    """
    tn = t_right(n)
    fast = Fraction(8, 4**n)
    safe = Fraction(2, 2**n)
    return {
        "n": n,
        "t_n": tn,
        "fast_bound": fast,
        "fast_bound_holds": tn < fast,
        "safe_bound": safe,
        "safe_bound_holds": tn <= safe,
    }


@dataclass(frozen=True)
class CantorStage:
    """One stage of the fat Cantor construction, materialization-lazy."""

    n: int

    @property
    def interval_count(self) -> int:
        return 1 << (self.n - 1)

    @property
    def measure(self) -> Rat:
        return self.interval_count * stage_length(self.n)

    @property
    def intervals(self) -> QIntervalSet:
        if self.interval_count > MATERIALIZE_LIMIT:
            raise DomainError(
                f"stage {self.n} has {self.interval_count} intervals; "
                f"materialization is capped at {MATERIALIZE_LIMIT}"
            )
        return QIntervalSet(stage_interval(self.n, i) for i in range(self.interval_count))

    @property
    def new_holes(self) -> list[QInterval]:
        if self.interval_count > MATERIALIZE_LIMIT:
            raise DomainError(
                f"stage {self.n} has {self.interval_count} holes; "
                f"materialization is capped at {MATERIALIZE_LIMIT}"
            )
        return [hole_interval(self.n, i) for i in range(self.interval_count)]

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "interval_count": self.interval_count,
            "measure": format_rat(self.measure),
            "interval_length": format_rat(stage_length(self.n)),
        }


def stage(n: int) -> CantorStage:
    _check_level(n)
    return CantorStage(n)


def left_tail_measure(n: int, m: int) -> Rat:
    """Exact measure of stage-m set inside [0, t_n]; m >= n required.

    Computed by descending the stage tree, not by formula; equals
    2^(-n) + 2^(1-n-m) and decreases to the limit-set value 2^(-n).
    (The limit value is 2^(-n): each halving of the leftmost interval
    halves the mass to its left.)
    """
    if m < n:
        raise DomainError(f"left_tail_measure needs m >= n, got n={n}, m={m}")
    _check_level(n)
    return _stage_window_measure(m, Fraction(0), t_right(n))


def left_tail_limit(n: int) -> Rat:
    """Limit-set mass of [0, t_n]: exactly 2^(-n)."""
    _check_level(n)
    return Fraction(1, 2**n)


def _stage_window_measure(m: int, w_lo: Rat, w_hi: Rat) -> Rat:
    """measure(stage-m set intersected with [w_lo, w_hi]), by tree descent."""

    def node(k: int, lo: Rat) -> Rat:
        hi = lo + stage_length(k)
        if w_hi <= lo or w_lo >= hi:
            return Fraction(0)
        if w_lo <= lo and hi <= w_hi:
            return (1 << (m - k)) * stage_length(m)
        if k == m:
            return min(hi, w_hi) - max(lo, w_lo)
        return node(k + 1, lo) + node(k + 1, lo + _right_child_offset(k))

    return node(1, Fraction(0))


def _stage_window_intervals(m: int, w_lo: Rat, w_hi: Rat, out: list[QInterval]) -> None:
    def node(k: int, lo: Rat) -> None:
        hi = lo + stage_length(k)
        if w_hi <= lo or w_lo >= hi or w_lo == w_hi:
            return
        if k == m:
            a, b = max(lo, w_lo), min(hi, w_hi)
            if a < b:
                out.append(QInterval(a, b))
            return
        if w_lo <= lo and hi <= w_hi and (1 << (m - k)) + len(out) > MATERIALIZE_LIMIT:
            raise DomainError("stage-window materialization exceeds the cap")
        node(k + 1, lo)
        node(k + 1, lo + _right_child_offset(k))

    node(1, Fraction(0))


@dataclass(frozen=True)
class StageImage:
    """Affine image of the stage-m set inside a hull interval.

    The whole construction rescales affinely, so the image of stage m
    under the increasing bijection [0,1] -> hull is again a stage tree;
    membership and windowed measure are O(m) descents.
    """

    m: int
    hull: QInterval

    @property
    def measure(self) -> Rat:
        return self.hull.length * stage(self.m).measure

    def contains(self, x: Rat) -> bool:
        x = Fraction(x)
        if not self.hull.contains_point(x):
            return False
        if self.hull.length == 0:
            return True
        u = self.hull.unit_coordinate(x)
        for k in range(1, self.m):
            hole_lo = (stage_length(k) - hole_length(k)) / 2
            if u > hole_lo + hole_length(k):
                u -= _right_child_offset(k)  # right child; left keeps its origin
            elif u >= hole_lo:
                return u == hole_lo or u == hole_lo + hole_length(k)
        return True

    def measure_within(self, window: QInterval) -> Rat:
        """Exact mass of the image inside `window`."""
        cut = self.hull.intersect(window)
        if cut is None or self.hull.length == 0:
            return Fraction(0)
        return self.hull.length * _stage_window_measure(
            self.m, self.hull.unit_coordinate(cut.lo), self.hull.unit_coordinate(cut.hi)
        )

    def intersect_window(self, window: QInterval) -> QIntervalSet:
        """Materialized image-set intersection with `window` (capped)."""
        cut = self.hull.intersect(window)
        if cut is None or self.hull.length == 0:
            return QIntervalSet()
        unit: list[QInterval] = []
        _stage_window_intervals(
            self.m, self.hull.unit_coordinate(cut.lo), self.hull.unit_coordinate(cut.hi), unit
        )
        return QIntervalSet(unit).affine_image(self.hull)

    def interval_set(self) -> QIntervalSet:
        return self.intersect_window(self.hull)

    def to_json(self) -> dict:
        return {"stage": self.m, "hull": self.hull.to_json()}


# ---------------------------------------------------------------------------
# chains of hole addresses: the level-n copies
# ---------------------------------------------------------------------------

HoleAddress = tuple[int, int]


@dataclass(frozen=True)
class ComponentChain:
    """A level-n copy addressed by n-1 nested hole choices."""

    holes: tuple[HoleAddress, ...]

    def __post_init__(self) -> None:
        for k, i in self.holes:
            if k < 1 or not 0 <= i < 1 << (k - 1):
                raise DomainError(f"invalid hole address ({k}, {i})")

    @property
    def level(self) -> int:
        return len(self.holes) + 1

    @property
    def total_generation(self) -> int:
        return sum(k for k, _ in self.holes)

    def hull(self) -> QInterval:
        box = UNIT
        for k, i in self.holes:
            inner = hole_interval(k, i)
            box = QInterval(box.affine_from_unit(inner.lo), box.affine_from_unit(inner.hi))
        return box

    def extended(self, levels: int = 1) -> "ComponentChain":
        """Descend `levels` further via central holes (generation 1)."""
        return ComponentChain(self.holes + ((1, 0),) * levels)

    def to_json(self) -> list[list[int]]:
        return [[k, i] for k, i in self.holes]

    @staticmethod
    def from_json(data) -> "ComponentChain":
        return ComponentChain(tuple((int(k), int(i)) for k, i in data))


def chains_count(length: int, total: int) -> int:
    """Number of chains with `length` holes of generations summing to `total`."""
    if length == 0:
        return 1 if total == 0 else 0
    if total < length:
        return 0
    return comb(total - 1, length - 1) << (total - length)


def enumerate_chains(level: int, max_gen: int | None = None) -> Iterator[ComponentChain]:
    """All level-`level` chains in canonical order.

    Canonical order: ascending total generation, then lexicographic on
    the flattened address sequence (k_1, i_1, k_2, i_2, ...).  Stable
    and independent of any truncation parameter.
    """
    _check_level(level)
    length = level - 1
    if length == 0:
        yield ComponentChain(())
        return
    total = length
    limit = None if max_gen is None else max_gen * length
    while limit is None or total <= limit:
        for holes in _chains_of_total_lex(length, total, max_gen):
            yield ComponentChain(holes)
        total += 1


def _chains_of_total_lex(length: int, total: int, max_gen: int | None) -> Iterator[tuple[HoleAddress, ...]]:
    if length == 0:
        if total == 0:
            yield ()
        return
    kmax = total - (length - 1)
    if max_gen is not None:
        kmax = min(kmax, max_gen)
    for k in range(1, kmax + 1):
        for i in range(1 << (k - 1)):
            head = ((k, i),)
            for rest in _chains_of_total_lex(length - 1, total - k, max_gen):
                yield head + rest


def first_chains(level: int, count: int) -> list[ComponentChain]:
    """The first `count` chains of the canonical enumeration."""
    out: list[ComponentChain] = []
    for chain in enumerate_chains(level):
        out.append(chain)
        if len(out) == count:
            break
    return out


def chain_index(chain: ComponentChain) -> int:
    """1-based rank of a chain in the canonical enumeration of its level."""
    length = len(chain.holes)
    if length == 0:
        return 1
    total = chain.total_generation
    rank = sum(chains_count(length, t) for t in range(length, total))
    rem_total, rem_len = total, length
    for k, i in chain.holes:
        for kk in range(1, k):
            rank += (1 << (kk - 1)) * chains_count(rem_len - 1, rem_total - kk)
        rank += i * chains_count(rem_len - 1, rem_total - k)
        rem_total -= k
        rem_len -= 1
    return rank + 1


def chains_almost_disjoint(
    chain_a: ComponentChain, stage_a: int, chain_b: ComponentChain, stage_b: int
) -> bool:
    """Exact overlap decision for two stage-image realizations.

    Distinct holes of one copy have disjoint closures, so chains that
    part ways at a common position realize disjoint sets.  When one
    chain extends the other, the deeper realization sits inside a hole
    of the shallower copy; that hole's interior has been removed from
    the shallower stage-m image iff its generation is at most m-1.
    Equal chains always overlap.
    """
    ha, hb = chain_a.holes, chain_b.holes
    for step_a, step_b in zip(ha, hb):
        if step_a != step_b:
            return True
    if len(ha) == len(hb):
        return False  # identical chains: same set
    longer, shorter_stage = (ha, stage_b) if len(ha) > len(hb) else (hb, stage_a)
    branch_gen = longer[min(len(ha), len(hb))][0]
    return branch_gen <= shorter_stage - 1


# ---------------------------------------------------------------------------
# truncated hole-filling families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CBuiltApprox:
    """Depth-(D, m) truncation of the level-n hole-filling family."""

    level: int
    component_depth: int
    cantor_stage: int
    components: tuple[tuple[ComponentChain, QInterval], ...]

    @property
    def covered_hull_length(self) -> Rat:
        return sum((hull.length for _, hull in self.components), Fraction(0))

    @property
    def ideal_measure(self) -> Rat:
        """Limit-set mass of the untruncated level: 2^(-n)."""
        return Fraction(1, 2**self.level)

    @property
    def omitted_tail(self) -> Rat:
        """Exact limit-set mass of the components left out by the depth cap."""
        return self.ideal_measure - self.covered_hull_length / 2

    @property
    def measure(self) -> Rat:
        """Exact realization measure: covered hull times stage-m density."""
        return self.covered_hull_length * stage(self.cantor_stage).measure

    @property
    def measure_bounds(self) -> tuple[Rat, Rat]:
        lo = self.ideal_measure - self.omitted_tail
        hi = self.ideal_measure + self.covered_hull_length / 2**self.cantor_stage
        return lo, hi

    @property
    def realization(self) -> QIntervalSet:
        per = 1 << (self.cantor_stage - 1)
        if per * max(1, len(self.components)) > MATERIALIZE_LIMIT:
            raise DomainError(
                f"realization would hold {per * len(self.components)} intervals; "
                f"capped at {MATERIALIZE_LIMIT}"
            )
        pieces: list[QInterval] = []
        for _, hull in self.components:
            pieces.extend(StageImage(self.cantor_stage, hull).interval_set())
        return QIntervalSet(pieces)

    def to_json(self) -> dict:
        lo, hi = self.measure_bounds
        return {
            "level": self.level,
            "component_depth": self.component_depth,
            "cantor_stage": self.cantor_stage,
            "component_count": len(self.components),
            "covered_hull_length": format_rat(self.covered_hull_length),
            "measure": format_rat(self.measure),
            "measure_bounds": [format_rat(lo), format_rat(hi)],
            "omitted_tail": format_rat(self.omitted_tail),
            "components": [
                {"chain": chain.to_json(), "hull": hull.to_json()}
                for chain, hull in self.components
            ],
        }


def a_set(n: int, D: int, m: int, component_limit: int = MATERIALIZE_LIMIT) -> CBuiltApprox:
    """All level-n components reachable with hole generations <= D.

    Count is (2^D - 1)^(n-1); a limit guard refuses infeasible
    materializations rather than silently truncating.
    """
    _check_level(n)
    if D < 1 or m < 1:
        raise DomainError(f"depths must be >= 1, got D={D}, m={m}")
    count = ((1 << D) - 1) ** (n - 1)
    if count > component_limit:
        raise DomainError(
            f"a_set({n}, {D}, {m}) would enumerate {count} components; "
            f"capped at {component_limit} (use the chainwise overlap test instead)"
        )
    comps = []
    for chain in enumerate_chains(n, max_gen=D):
        comps.append((chain, chain.hull()))
    comps.sort(key=lambda pair: chain_index(pair[0]))
    return CBuiltApprox(n, D, m, tuple(comps))


def levels_almost_disjoint(n_a: int, n_b: int, D: int, m: int) -> bool:
    """Whether depth-(D, m) truncations of two distinct levels overlap.

    Chains that part ways are always disjoint; the binding pairs are
    prefix extensions, whose first extra hole has generation between 1
    and D.  All of them clear the stage-m image iff D <= m - 1.
    """
    if n_a == n_b:
        raise DomainError("levels_almost_disjoint compares distinct levels")
    return D <= m - 1


# ---------------------------------------------------------------------------
# locating components inside a target interval
# ---------------------------------------------------------------------------


def _fits(hull: QInterval, target: QInterval) -> bool:
    # closed hull inside the target window; endpoint contact allowed
    return target.lo <= hull.lo and hull.hi <= target.hi


def _min_inner_hole(alpha: Rat, beta: Rat, gen_budget: int) -> HoleAddress | None:
    """Smallest-generation hole with closure inside [alpha, beta] (unit copy)."""
    for k in range(1, gen_budget + 1):
        count = 1 << (k - 1)
        # left hole endpoints increase with the interval index: binary search
        lo_idx, hi_idx = 0, count
        while lo_idx < hi_idx:
            mid = (lo_idx + hi_idx) // 2
            if hole_interval(k, mid).lo < alpha:
                lo_idx = mid + 1
            else:
                hi_idx = mid
        if lo_idx < count:
            hole = hole_interval(k, lo_idx)
            if hole.hi <= beta:
                return (k, lo_idx)
    return None


def _hole_containing(x: Rat, gen_budget: int) -> HoleAddress | None:
    """The unique hole whose closure contains x, if of generation <= budget."""
    if not 0 <= x <= 1:
        return None
    idx = 0
    lo = Fraction(0)
    for k in range(1, gen_budget + 1):
        hole = hole_interval(k, idx)
        # walk endpoints are limit-set points, so closure containment is safe
        if hole.lo <= x <= hole.hi:
            return (k, idx)
        if x < hole.lo:
            idx = 2 * idx
        else:
            idx = 2 * idx + 1
            lo += _right_child_offset(k)
    return None


@dataclass(frozen=True)
class _SearchState:
    chain: tuple[HoleAddress, ...]
    hull: QInterval


def _component_search(
    target: QInterval,
    accept_length,
    priority,
    gen_budget: int,
    max_expansions: int,
):
    """Best-first search over copies reachable through straddling holes.

    `accept_length(d)` says whether a completed chain of d holes is a
    valid answer; `priority(total, length, done)` orders the frontier
    (admissible for the chosen objective).  Every popped completed entry
    is optimal for that objective.
    """
    if target.length <= 0:
        raise DomainError("target interval must have nonempty interior")
    heap: list = []
    counter = 0

    def push(total: int, state: _SearchState, done: bool):
        nonlocal counter
        heapq.heappush(heap, (priority(total, len(state.chain), done), counter, done, state, total))
        counter += 1

    push(0, _SearchState((), UNIT), False)
    expansions = 0
    deepest = 0
    while heap:
        _, _, done, state, total = heapq.heappop(heap)
        if done:
            return ComponentChain(state.chain), state.hull
        expansions += 1
        if expansions > max_expansions:
            break
        deepest = max(deepest, len(state.chain))
        box = state.hull
        cut = box.intersect(target)
        if cut is None or cut.length == 0:
            continue
        alpha, beta = box.unit_coordinate(cut.lo), box.unit_coordinate(cut.hi)
        if accept_length(len(state.chain)) and _fits(box, target):
            push(total, state, True)
            continue
        if not accept_length(len(state.chain) + 1):
            continue  # no completion is reachable any deeper
        inner = _min_inner_hole(alpha, beta, gen_budget)
        if inner is not None:
            k, i = inner
            hole = hole_interval(k, i)
            hull = QInterval(box.affine_from_unit(hole.lo), box.affine_from_unit(hole.hi))
            push(total + k, _SearchState(state.chain + ((k, i),), hull), True)
        for endpoint in (alpha, beta):
            if endpoint in (Fraction(0), Fraction(1)):
                continue
            straddle = _hole_containing(endpoint, gen_budget)
            if straddle is None:
                continue
            k, i = straddle
            hole = hole_interval(k, i)
            hull = QInterval(box.affine_from_unit(hole.lo), box.affine_from_unit(hole.hi))
            if hull.intersect(target) is None:
                continue
            push(total + k, _SearchState(state.chain + ((k, i),), hull), False)
    raise WitnessNotFound(
        f"witness not found at depth: generations <= {gen_budget}, "
        f"{expansions} expansions, deepest chain length {deepest}, target "
        f"[{target.lo}, {target.hi}]"
    )


def find_component_in(
    U: QInterval,
    level: int,
    gen_budget: int = DEFAULT_GEN_BUDGET,
    max_expansions: int = DEFAULT_EXPANSIONS,
) -> tuple[ComponentChain, QInterval]:
    """A level-`level` component whose closed hull lies inside U.

    Among reachable candidates the search minimizes the total generation
    of the final length-(level-1) chain; short chains are completed by
    central holes, each costing one generation.
    """
    _check_level(level)
    want = level - 1

    def accept(d: int) -> bool:
        return d <= want

    def prio(total: int, length: int, done: bool):
        # admissible: each of the remaining holes costs at least 1
        return total + (want - length)

    chain, hull = _component_search(U, accept, prio, gen_budget, max_expansions)
    if chain.level > level:
        raise WitnessNotFound(f"no level-{level} component fits inside [{U.lo}, {U.hi}]")
    if chain.level < level:
        chain = chain.extended(level - chain.level)
        hull = chain.hull()
    if not _fits(hull, U):
        raise WitnessNotFound("search returned a non-fitting hull")  # pragma: no cover
    return chain, hull


def witness_chain(
    U: QInterval,
    K: int = 5,
    gen_budget: int = DEFAULT_GEN_BUDGET,
    max_expansions: int = DEFAULT_EXPANSIONS,
) -> tuple[int, dict[int, tuple[ComponentChain, QInterval]]]:
    """Minimal level n0 with a fitting component, plus a verified run.

    Returns (n0, components for n0..n0+K); every hull is re-checked to
    sit inside U.  Minimality is within the stated search budget.
    """

    def accept(d: int) -> bool:
        return True

    def prio(total: int, length: int, done: bool):
        # minimize chain length first, then total generation; a state is
        # itself a completion candidate, so its key must not exceed it
        return (length, total)

    chain, hull = _component_search(U, accept, prio, gen_budget, max_expansions)
    n0 = chain.level
    out: dict[int, tuple[ComponentChain, QInterval]] = {}
    for n in range(n0, n0 + K + 1):
        ext = chain.extended(n - n0)
        ext_hull = ext.hull()
        if not _fits(ext_hull, U):
            raise WitnessNotFound("extension left the target window")  # pragma: no cover
        out[n] = (ext, ext_hull)
    return n0, out
