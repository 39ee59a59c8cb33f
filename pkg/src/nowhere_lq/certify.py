"""End-to-end verification: divergence-chain reports, nowhere-L^q divergence
certificates, L^p membership certificates, l_p-isometry checks, and the
norm-one projection check.

Every certificate is built from exact rationals and enclosures only.  A
comparison is reported "holds" only when provable from the enclosures and
"fails" only when refutable; everything else is "undecided".  Certificates
carry all inputs needed to replay them deterministically.

Two truncation semantics coexist: the *truncated* objects actually built
(finite block/level/component depths, stage-m masks) and the *ideal* limits
they approximate.  Lower bounds below are arranged to hold for both: tail
masses use the limit-set share (which every stage mask dominates), and the
symbolic normalizer is resolved with an enclosure covering the truncated and
ideal norms at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .cantor import (
    DEFAULT_EXPANSIONS,
    DEFAULT_GEN_BUDGET,
    ComponentChain,
    StageImage,
    WitnessNotFound,
    chain_index,
    chains_almost_disjoint,
    find_component_in,
    t_right,
    tn_bounds,
)
from .exact import (
    DEFAULT_PRECISION,
    DomainError,
    Enclosure,
    Rat,
    format_rat,
    pow2,
    rat_pow,
)
from .family import DEFAULT_FAMILY, SequenceFamily
from .integration import MaskedSeriesNorm, enclose_sum_q, norm_of_masked_series
from .intervals import UNIT, QInterval, QIntervalSet
from .singular import (
    ComponentRef,
    ExponentSchedule,
    SingularFunction,
    build_row_sum,
    default_schedule,
)

SCHEMA_VERSION = "nowhere-lq/1"

HOLDS = "holds"
FAILS = "fails"
UNDECIDED = "undecided"

DEFAULT_N_BUDGET = 2048
DEFAULT_NORM_TARGET = Fraction(1, 10**6)
# Components are addressed by canonical rank; a witness deeper than this
# would force a row build with more copies than is sane to materialize.
DEFAULT_COMPONENT_BUDGET = 4096


class BudgetExceeded(RuntimeError):
    """A certificate search ran out of budget; carries the best bound seen."""

    def __init__(self, message: str, best_bound: Enclosure | None = None, n_reached: int = 0):
        super().__init__(message)
        self.best_bound = best_bound
        self.n_reached = n_reached


def compare_gt(left: Enclosure, right: Enclosure) -> str:
    """Conservative decision of `left > right` from enclosures."""
    if left.lo > right.hi:
        return HOLDS
    if left.hi <= right.lo:
        return FAILS
    return UNDECIDED


def compare_ge(left: Enclosure, right: Enclosure) -> str:
    if left.lo >= right.hi:
        return HOLDS
    if left.hi < right.lo:
        return FAILS
    return UNDECIDED


def compare_le(left: Enclosure, right: Enclosure) -> str:
    return compare_ge(right, left)


@dataclass(frozen=True)
class Depths:
    """Truncation depths shared by the assembled functions.

    J: blocks per series; L: copies per level; D: hole-filling recursion
    depth for materialized diagnostics; m: mask stage; Jg: levels per row.
    D never enters the structural certificates (masses and supports are
    resolved by stage descent, not by materialization).
    """

    J: int = 16
    L: int = 16
    D: int = 16
    m: int = 16
    Jg: int = 16

    def __post_init__(self) -> None:
        for name in ("J", "L", "D", "m", "Jg"):
            if getattr(self, name) < 1:
                raise DomainError(f"depth {name} must be >= 1, got {getattr(self, name)}")

    def to_json(self) -> dict:
        return {"J": self.J, "L": self.L, "D": self.D, "m": self.m, "Jg": self.Jg}

    @staticmethod
    def from_json(data: dict) -> "Depths":
        return Depths(int(data["J"]), int(data["L"]), int(data["D"]), int(data["m"]), int(data["Jg"]))


DEFAULT_DEPTHS = Depths()


# ---------------------------------------------------------------------------
# divergence chain report
# ---------------------------------------------------------------------------


def smallest_valid_j0(sched: ExponentSchedule, q: Rat, probe_limit: int = 10_000) -> int:
    """Least block index whose power falls below q (r_j < q)."""
    q = Fraction(q)
    if q <= sched.p:
        raise DomainError(f"q must exceed p = {sched.p}, got q = {q}")
    for j in range(1, probe_limit + 1):
        if sched.r(j) < q:
            return j
    raise DomainError(f"no block with r_j < {q} among the first {probe_limit}")


@dataclass(frozen=True)
class LemmaChainRow:
    """One tail index n of the divergence chain, both variants.

    The "fast" variant uses the aggressive decay claim t_n < 2^(3-2n)
    (true only for n <= 2); the "safe" variant uses the provable
    t_n <= 2^(1-n).  lb = 2^(-n) * t_n^(-s) is the actual lower bound for
    the masked tail integral; safe_bound = 2^((s-1)n - s) is what the safe
    decay guarantees for it.
    """

    n: int
    t_n: Rat
    m_tail: Rat
    lb: Enclosure
    fast_step_holds: bool
    fast_mid: Enclosure
    fast_final_holds: bool
    safe_bound: Enclosure
    safe_step: str
    safe_consistent: bool

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "t_n": format_rat(self.t_n),
            "m_tail": format_rat(self.m_tail),
            "lb": self.lb.to_json(),
            "fast_step_holds": self.fast_step_holds,
            "fast_mid": self.fast_mid.to_json(),
            "fast_final_holds": self.fast_final_holds,
            "safe_bound": self.safe_bound.to_json(),
            "safe_step": self.safe_step,
            "safe_consistent": self.safe_consistent,
        }


@dataclass(frozen=True)
class LemmaChainReport:
    p: Rat
    q: Rat
    j0: int
    s: Rat
    schedule: str
    rows: tuple[LemmaChainRow, ...]

    def row(self, n: int) -> LemmaChainRow:
        for r in self.rows:
            if r.n == n:
                return r
        raise KeyError(n)

    def all_safe_consistent(self) -> bool:
        return all(r.safe_consistent for r in self.rows)

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "lemma_chain",
            "p": format_rat(self.p),
            "q": format_rat(self.q),
            "j0": self.j0,
            "s": format_rat(self.s),
            "schedule": self.schedule,
            "rows": [r.to_json() for r in self.rows],
        }


def lemma_chain(
    p: Rat,
    q: Rat,
    j0: int | None = None,
    n_max: int = 40,
    precision: int = DEFAULT_PRECISION,
    sched: ExponentSchedule | None = None,
) -> LemmaChainReport:
    """Per-n lower bounds 2^(-n) * t_n^(-s) with both decay-claim variants.

    s = q / r_j0 > 1, so the bound grows by a factor > 2^(s-1) per step
    and certifies divergence of the tail integrals.
    """
    sched = default_schedule(p) if sched is None else sched
    q = Fraction(q)
    j0_min = smallest_valid_j0(sched, q)
    if j0 is None:
        j0 = j0_min
    elif sched.r(j0) >= q:
        raise DomainError(
            f"r_{j0} = {sched.r(j0)} is not below q = {q}; smallest valid j0 is {j0_min}"
        )
    s = q / sched.r(j0)
    rows = []
    for n in range(1, n_max + 1):
        bounds = tn_bounds(n)
        tn = bounds["t_n"]
        m_tail = Fraction(1, 2**n)
        lb = (m_tail * rat_pow(tn, -s, precision)).round_out(precision)
        # x -> x^(-s) is strictly decreasing (s > 0), so the chain's first
        # inequality m_tail * t_n^(-s) > 2^(-n) * 2^(s(2n-3)) is exactly the
        # fast decay bound t_n < 2^(3-2n).
        fast_mid = pow2(s * (2 * n - 3) - n, precision)
        fast_final = s * (2 * n - 3) - n > (2 * s - 1) * n
        safe = pow2((s - 1) * n - s, precision)
        rows.append(
            LemmaChainRow(
                n=n,
                t_n=tn,
                m_tail=m_tail,
                lb=lb,
                fast_step_holds=bounds["fast_bound_holds"],
                fast_mid=fast_mid,
                fast_final_holds=fast_final,
                safe_bound=safe,
                safe_step=compare_gt(lb, safe),
                safe_consistent=lb.lo >= safe.lo,
            )
        )
    return LemmaChainReport(sched.p, q, j0, s, sched.name, tuple(rows))


# ---------------------------------------------------------------------------
# divergence certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DivergenceWitness:
    """The copy and block the lower bound is pushed through."""

    outer_index: int
    level: int
    chain: ComponentChain
    hull: QInterval
    component_index: int
    term_block: int

    def to_json(self) -> dict:
        return {
            "outer_index": self.outer_index,
            "level": self.level,
            "chain": self.chain.to_json(),
            "hull": self.hull.to_json(),
            "component_index": self.component_index,
            "term_block": self.term_block,
        }


@dataclass(frozen=True)
class DivergenceCertificate:
    """Replayable lower-bound record for a tail integral or essential sup.

    kind "integral": bound encloses a certified lower bound for the masked
    integral of |row function|^q over `window`, with bound.lo > target.
    kind "ess_sup": bound is a certified value lower bound attained on
    `region` (measure >= region_mass) inside `window`, with bound.lo >= target.
    """

    kind: str
    k: int
    p: Rat
    q: Rat | None
    target: Rat
    window: QInterval
    depths: Depths
    depths_used: dict
    precision: int
    n_budget: int
    gen_budget: int
    max_expansions: int
    norm_target: Rat
    schedule: str
    witness: DivergenceWitness
    s: Rat | None
    n_tail: int
    tail_mass: Rat
    normalizer: Enclosure
    bound: Enclosure
    point: Rat | None = None
    region: QInterval | None = None
    region_mass: Rat | None = None

    def to_json(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "kind": f"divergence_{self.kind}",
            "k": self.k,
            "p": format_rat(self.p),
            "q": "inf" if self.q is None else format_rat(self.q),
            "target": format_rat(self.target),
            "window": self.window.to_json(),
            "depths": self.depths.to_json(),
            "depths_used": dict(self.depths_used),
            "precision": self.precision,
            "n_budget": self.n_budget,
            "gen_budget": self.gen_budget,
            "max_expansions": self.max_expansions,
            "norm_target": format_rat(self.norm_target),
            "schedule": self.schedule,
            "witness": self.witness.to_json(),
            "s": None if self.s is None else format_rat(self.s),
            "n_tail": self.n_tail,
            "tail_mass": format_rat(self.tail_mass),
            "normalizer": self.normalizer.to_json(),
            "bound": self.bound.to_json(),
            "point": None if self.point is None else format_rat(self.point),
            "region": None if self.region is None else self.region.to_json(),
            "region_mass": None if self.region_mass is None else format_rat(self.region_mass),
        }
        return out


def _parse_q(q, p: Rat) -> Fraction | None:
    """None encodes q = infinity."""
    if q is None or (isinstance(q, str) and q.strip().lower() in {"inf", "infinity", "oo"}):
        return None
    q = Fraction(q)
    if q <= p:
        raise DomainError(f"q must exceed p = {p}, got q = {q}")
    return q


def _find_witness(
    U: QInterval,
    k: int,
    depths: Depths,
    family: SequenceFamily,
    gen_budget: int,
    max_expansions: int,
) -> tuple[int, int, ComponentChain, QInterval]:
    """First row level with a copy whose hull fits inside U."""
    if not (0 <= U.lo < U.hi <= 1):
        raise DomainError(f"window must be a nondegenerate subinterval of [0,1], got {U}")
    tried = []
    for j in range(1, depths.Jg + 1):
        level = family.value(k, j)
        tried.append(level)
        if level == 1:
            if U.contains_interval(UNIT):
                return j, level, ComponentChain(()), UNIT
            continue
        try:
            chain, hull = find_component_in(U, level, gen_budget, max_expansions)
        except WitnessNotFound:
            continue
        return j, level, chain, hull
    raise WitnessNotFound(
        f"no copy of row {k} levels {tried} fits inside {U}; "
        "raise Jg or the generation budget"
    )


def _witness_term(g: SingularFunction, outer_index: int, chain: ComponentChain, block: int):
    """The block-`block` term of the referenced copy, with its ref."""
    for ref in g.component_refs:
        if ref.outer_index == outer_index and ref.chain == chain:
            term = g.terms[ref.term_start + block - 1]
            return ref, term
    raise DomainError(f"no component ref at outer index {outer_index} for the witness chain")


def certify_divergence(
    k: int,
    U: QInterval,
    q,
    target: Rat,
    depths: Depths = DEFAULT_DEPTHS,
    precision: int = DEFAULT_PRECISION,
    sched: ExponentSchedule | None = None,
    n_budget: int = DEFAULT_N_BUDGET,
    gen_budget: int = DEFAULT_GEN_BUDGET,
    max_expansions: int = DEFAULT_EXPANSIONS,
    norm_target: Rat = DEFAULT_NORM_TARGET,
    component_budget: int = DEFAULT_COMPONENT_BUDGET,
    family: SequenceFamily = DEFAULT_FAMILY,
) -> DivergenceCertificate:
    """Certified lower bound > target for the row-k function on window U.

    Finds a copy inside U, then pushes the tail bound through the single
    block-j0 term of that copy: the masked tail [0, t_n] of the copy carries
    mass at least |hull| * 2^(-n) (the limit-set share, which every stage
    mask dominates), where the term is at least coeff * t_n^(-e).  The
    resulting bound coeff^q * |hull| * 2^(-n) * t_n^(-s) (s = q e > 1)
    grows without bound in n; the search stops at the first n whose
    enclosure provably exceeds `target`.

    For q = "inf" the certificate is an essential-sup witness instead: a
    point and a positive-mass region on which the function provably
    exceeds `target`.
    """
    sched = default_schedule(1) if sched is None else sched
    p = sched.p
    qq = _parse_q(q, p)
    target = Fraction(target)
    if target <= 0:
        raise DomainError(f"target must be positive, got {target}")

    j, level, chain, hull = _find_witness(U, k, depths, family, gen_budget, max_expansions)
    l = chain_index(chain)
    if l > component_budget:
        raise BudgetExceeded(
            f"witness copy has canonical rank {l} > component budget {component_budget}"
        )
    block = 1 if qq is None else smallest_valid_j0(sched, qq)
    j_used = max(depths.J, block)
    l_used = max(depths.L, l)
    depths_used = {"J": j_used, "L": l_used, "m": depths.m, "Jg": depths.Jg}

    norm = norm_of_masked_series(
        j_used, depths.m, sched, precision, target_width=Fraction(norm_target)
    )
    g = build_row_sum(k, depths.Jg, l_used, depths.m, j_used, sched, family)
    ref, term = _witness_term(g, j, chain, block)
    if term.exponent != sched.exponent(block):
        raise DomainError("witness term exponent does not match the schedule")

    witness = DivergenceWitness(j, level, chain, hull, l, block)
    common = dict(
        k=k,
        p=p,
        q=qq,
        target=target,
        window=U,
        depths=depths,
        depths_used=depths_used,
        precision=precision,
        n_budget=n_budget,
        gen_budget=gen_budget,
        max_expansions=max_expansions,
        norm_target=Fraction(norm_target),
        schedule=sched.name,
        witness=witness,
        normalizer=norm.ideal,
    )

    if qq is None:
        coeff = term.coeff.resolve(norm.ideal, precision)
        e = term.exponent
        best = None
        for n in range(1, n_budget + 1):
            value = (coeff * rat_pow(t_right(n), -e, precision)).round_out(precision)
            best = value
            if value.lo >= target:
                point = hull.affine_from_unit(t_right(n))
                return DivergenceCertificate(
                    kind="ess_sup",
                    s=None,
                    n_tail=n,
                    tail_mass=hull.length * Fraction(1, 2**n),
                    bound=value,
                    point=point,
                    region=QInterval(hull.lo, point),
                    region_mass=hull.length * Fraction(1, 2**n),
                    **common,
                )
        raise BudgetExceeded(
            f"value bound did not reach {target} within n <= {n_budget}",
            best_bound=best,
            n_reached=n_budget,
        )

    s = qq * term.exponent
    base = term.coeff.pow(qq).resolve(norm.ideal, precision) * Enclosure.exact(hull.length)
    best = None
    for n in range(1, n_budget + 1):
        lb = (base * Fraction(1, 2**n) * rat_pow(t_right(n), -s, precision)).round_out(precision)
        best = lb
        if lb.lo > target:
            return DivergenceCertificate(
                kind="integral",
                s=s,
                n_tail=n,
                tail_mass=hull.length * Fraction(1, 2**n),
                bound=lb,
                **common,
            )
    raise BudgetExceeded(
        f"integral bound did not reach {target} within n <= {n_budget}",
        best_bound=best,
        n_reached=n_budget,
    )


def replay_divergence(
    cert: DivergenceCertificate, sched: ExponentSchedule | None = None
) -> DivergenceCertificate:
    """Re-run the certificate search from its stored inputs.

    Certificates store the schedule only by name; replaying a custom
    schedule requires passing it back in.
    """
    return certify_divergence(
        cert.k,
        cert.window,
        "inf" if cert.q is None else cert.q,
        cert.target,
        depths=cert.depths,
        precision=cert.precision,
        sched=default_schedule(cert.p) if sched is None else sched,
        n_budget=cert.n_budget,
        gen_budget=cert.gen_budget,
        max_expansions=cert.max_expansions,
        norm_target=cert.norm_target,
    )


# ---------------------------------------------------------------------------
# membership certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MembershipCertificate:
    """Exact p-th mass bookkeeping for one row function.

    The symbolic normalizer cancels exactly: each planted copy has p-th
    mass equal to its weight's p-th power, so the truncated norm is
    mass^(1/p) exactly and the ideal norm is 1; `norm` encloses both.
    """

    k: int
    p: Rat
    depths: Depths
    precision: int
    mass: Rat
    tail_outer: Rat
    tail_components: Rat
    identity_exact: bool
    norm: Enclosure
    corrected_weight_mass: Rat
    plain_weight_mass: Enclosure
    normalizer: MaskedSeriesNorm | None = None

    def to_json(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "kind": "membership",
            "k": self.k,
            "p": format_rat(self.p),
            "depths": self.depths.to_json(),
            "precision": self.precision,
            "mass": format_rat(self.mass),
            "tail_outer": format_rat(self.tail_outer),
            "tail_components": format_rat(self.tail_components),
            "identity_exact": self.identity_exact,
            "norm": self.norm.to_json(),
            "corrected_weight_mass": format_rat(self.corrected_weight_mass),
            "plain_weight_mass": self.plain_weight_mass.to_json(),
            "normalizer": None if self.normalizer is None else self.normalizer.to_json(),
        }
        return out


def certify_membership(
    k: int,
    depths: Depths = DEFAULT_DEPTHS,
    precision: int = DEFAULT_PRECISION,
    sched: ExponentSchedule | None = None,
    include_normalizer: bool = False,
    family: SequenceFamily = DEFAULT_FAMILY,
) -> MembershipCertificate:
    """Norm enclosure [mass^(1/p), 1] from exact disjoint-support additivity.

    mass + 2^(-Jg) + sum_j 2^(-j) 2^(-L) [level_j >= 2] = 1 exactly: the
    outer tail restores the missing levels, the component tails restore the
    copies past rank L on each multi-copy level.  The enclosure contains 1
    (the ideal norm) with width 1 - mass^(1/p).
    """
    sched = default_schedule(1) if sched is None else sched
    p = sched.p
    g = build_row_sum(k, depths.Jg, depths.L, depths.m, depths.J, sched, family)
    mass = g.pth_mass
    tail_outer = Fraction(1, 2**depths.Jg)
    tail_components = Fraction(0)
    plain = Enclosure.exact(0)
    for j in range(1, depths.Jg + 1):
        level = family.value(k, j)
        outer_p = pow2(-j * p, precision)
        if level >= 2:
            tail_components += Fraction(1, 2**j) * Fraction(1, 2**depths.L)
            inner = sum(
                (pow2(-l * p, precision) for l in range(1, depths.L + 1)),
                Enclosure.exact(0),
            )
            plain = plain + outer_p * inner
        else:
            plain = plain + outer_p
    identity = mass + tail_outer + tail_components == 1
    norm = Enclosure(rat_pow(mass, Fraction(1, 1) / p, precision).lo, Fraction(1))
    normalizer = None
    if include_normalizer:
        normalizer = norm_of_masked_series(depths.J, depths.m, sched, precision)
    return MembershipCertificate(
        k=k,
        p=p,
        depths=depths,
        precision=precision,
        mass=mass,
        tail_outer=tail_outer,
        tail_components=tail_components,
        identity_exact=identity,
        norm=norm,
        corrected_weight_mass=mass,
        plain_weight_mass=plain,
        normalizer=normalizer,
    )


# ---------------------------------------------------------------------------
# isometry
# ---------------------------------------------------------------------------


def _verify_rows_disjoint(rows: dict[int, SingularFunction]) -> int:
    """Exact pairwise almost-disjointness across rows; returns pairs checked."""
    keys = sorted(rows)
    checked = 0
    for a_pos, ka in enumerate(keys):
        for kb in keys[a_pos + 1 :]:
            for ra in rows[ka].component_refs:
                for rb in rows[kb].component_refs:
                    checked += 1
                    if not chains_almost_disjoint(ra.chain, ra.stage, rb.chain, rb.stage):
                        raise DomainError(
                            f"rows {ka} and {kb} share mass at chains "
                            f"{ra.chain.holes} / {rb.chain.holes}"
                        )
    return checked


@dataclass(frozen=True)
class IsometryReport:
    """‖sum a_k g_k‖_p against the l_p norm of the coefficients.

    With pairwise almost-disjoint supports, |sum a_k g_k|^p splits as
    sum |a_k|^p g_k^p almost everywhere, so the p-th power of the left
    side is exactly sum |a_k|^p mass_k at truncation and sum |a_k|^p in
    the ideal limit; `ratio` encloses both quotients.
    """

    coeffs: tuple[Rat, ...]
    p: Rat
    depths: Depths
    precision: int
    masses: tuple[Rat, ...]
    lhs: Enclosure
    rhs: Enclosure
    ratio: Enclosure
    ratio_truncated: Enclosure
    truncated_power_sum: Enclosure
    ideal_power_sum: Enclosure
    disjoint_pairs: int
    symbolic_identity: bool

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "isometry",
            "coeffs": [format_rat(a) for a in self.coeffs],
            "p": format_rat(self.p),
            "depths": self.depths.to_json(),
            "precision": self.precision,
            "masses": [format_rat(x) for x in self.masses],
            "lhs": self.lhs.to_json(),
            "rhs": self.rhs.to_json(),
            "ratio": self.ratio.to_json(),
            "ratio_truncated": self.ratio_truncated.to_json(),
            "truncated_power_sum": self.truncated_power_sum.to_json(),
            "ideal_power_sum": self.ideal_power_sum.to_json(),
            "disjoint_pairs": self.disjoint_pairs,
            "symbolic_identity": self.symbolic_identity,
        }


def isometry_check(
    coeffs,
    depths: Depths = DEFAULT_DEPTHS,
    precision: int = DEFAULT_PRECISION,
    sched: ExponentSchedule | None = None,
    family: SequenceFamily = DEFAULT_FAMILY,
) -> IsometryReport:
    """Ratio enclosure of ‖sum a_k g_k‖_p over (sum |a_k|^p)^(1/p).

    Rows with zero coefficient drop out exactly and are not built.  The
    disjointness hypothesis behind the splitting identity is verified
    pair-by-pair on the built component refs, not assumed.
    """
    coeffs = tuple(Fraction(a) for a in coeffs)
    if not coeffs or all(a == 0 for a in coeffs):
        raise DomainError("coefficient vector must be nonzero")
    sched = default_schedule(1) if sched is None else sched
    p = sched.p
    rows = {
        k: build_row_sum(k, depths.Jg, depths.L, depths.m, depths.J, sched, family)
        for k, a in enumerate(coeffs, start=1)
        if a != 0
    }
    checked = _verify_rows_disjoint(rows)
    masses = tuple(rows[k].pth_mass for k in sorted(rows))
    weights = [rat_pow(abs(a), p, precision) for a in coeffs if a != 0]
    weight_sum = sum(weights, Enclosure.exact(0))
    lhs_p_trunc = sum(
        (w * Enclosure.exact(mass) for w, mass in zip(weights, masses)),
        Enclosure.exact(0),
    )
    inv_p = Fraction(1, 1) / p
    ratio_trunc = (lhs_p_trunc / weight_sum).pow_rat(inv_p, precision)
    ratio = ratio_trunc.hull(Enclosure.exact(1))
    lhs = lhs_p_trunc.hull(weight_sum).pow_rat(inv_p, precision)
    rhs = weight_sum.pow_rat(inv_p, precision)
    return IsometryReport(
        coeffs=coeffs,
        p=p,
        depths=depths,
        precision=precision,
        masses=masses,
        lhs=lhs,
        rhs=rhs,
        ratio=ratio,
        ratio_truncated=ratio_trunc,
        truncated_power_sum=lhs_p_trunc,
        ideal_power_sum=weight_sum,
        disjoint_pairs=checked,
        symbolic_identity=True,
    )


# ---------------------------------------------------------------------------
# norm-one projection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StepFunction:
    """Finitely many constant pieces on pairwise interior-disjoint intervals."""

    pieces: tuple[tuple[QInterval, Rat], ...]

    def __post_init__(self) -> None:
        last = None
        for box, _ in self.pieces:
            if box.length <= 0:
                raise DomainError(f"step piece must have positive length: {box}")
            if last is not None and box.lo < last:
                raise DomainError("step pieces must be sorted and interior-disjoint")
            last = box.hi

    @staticmethod
    def build(pieces) -> "StepFunction":
        normalized = tuple(
            (box, Fraction(value)) for box, value in sorted(pieces, key=lambda kv: kv[0].lo)
        )
        return StepFunction(normalized)

    def norm_p(self, p: Rat, precision: int = DEFAULT_PRECISION) -> Enclosure:
        total = sum(
            (rat_pow(abs(v), p, precision) * Enclosure.exact(box.length) for box, v in self.pieces),
            Enclosure.exact(0),
        )
        return total.pow_rat(Fraction(1, 1) / Fraction(p), precision)

    def to_json(self) -> dict:
        return {"pieces": [[box.to_json(), format_rat(v)] for box, v in self.pieces]}


def _mask_integral(f: StepFunction, refs) -> Rat:
    """Exact integral of the step function over the union of ref masks."""
    total = Fraction(0)
    for ref in refs:
        image = StageImage(ref.stage, ref.hull)
        for box, value in f.pieces:
            if value != 0:
                total += value * image.measure_within(box)
    return total


def _abs_enclosure(x: Enclosure) -> Enclosure:
    if x.lo >= 0:
        return x
    if x.hi <= 0:
        return -x
    return Enclosure(Fraction(0), max(-x.lo, x.hi))


def projection_coeff(
    f,
    k: int,
    depths: Depths = DEFAULT_DEPTHS,
    precision: int = DEFAULT_PRECISION,
    sched: ExponentSchedule | None = None,
    family: SequenceFamily = DEFAULT_FAMILY,
    _row: SingularFunction | None = None,
) -> Enclosure:
    """Dual functional phi_k(f) with phi_k(g_k') = delta_kk' exactly.

    p = 1: phi_k(f) = (integral of f over the support of g_k) / mass_k;
    exact rationals for step inputs and for same-depth row inputs.
    p > 1: phi_k(f) = (integral of f * g_k^(p-1)) / mass_k; symbolic for
    row inputs (the normalizer cancels), quadrature for step inputs.
    """
    sched = default_schedule(1) if sched is None else sched
    p = sched.p
    g = (
        build_row_sum(k, depths.Jg, depths.L, depths.m, depths.J, sched, family)
        if _row is None
        else _row
    )
    mass = g.pth_mass

    if isinstance(f, SingularFunction):
        if f.kind != "row_sum":
            raise DomainError(f"unsupported singular input of kind {f.kind!r}")
        if f.params[1:] != g.params[1:]:
            raise DomainError("row input must be built at the same depths")
        k_other = f.param("k")
        if k_other == k:
            # integral of g_k * g_k^(p-1) = p-th mass: the normalizer and the
            # copy weights cancel exactly, for every p.
            return Enclosure.exact(1)
        _verify_rows_disjoint({k: g, k_other: f})
        return Enclosure.exact(0)

    if isinstance(f, StepFunction):
        if p == 1:
            return Enclosure.exact(_mask_integral(f, g.component_refs) / mass)
        norm = norm_of_masked_series(depths.J, depths.m, sched, precision)
        total = Enclosure.exact(0)
        for box, value in f.pieces:
            if value == 0:
                continue
            part = enclose_sum_q(
                g, QIntervalSet([box]), p - 1, precision=precision, norm_value=norm.ideal
            )
            total = total + Enclosure.exact(value) * part.value
        return total / Enclosure.exact(mass)

    raise DomainError(f"unsupported input type {type(f).__name__}")


@dataclass(frozen=True)
class ProjectionReport:
    """P f = sum_k phi_k(f) g_k on the first K rows, with norm comparison."""

    K: int
    p: Rat
    depths: Depths
    precision: int
    delta: tuple[tuple[Enclosure, ...], ...]
    delta_exact: bool
    coeffs: tuple[Enclosure, ...]
    masses: tuple[Rat, ...]
    pf_norm: Enclosure
    f_norm: Enclosure
    contraction: str
    idempotent_on_span: bool

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "projection",
            "K": self.K,
            "p": format_rat(self.p),
            "depths": self.depths.to_json(),
            "precision": self.precision,
            "delta": [[cell.to_json() for cell in row] for row in self.delta],
            "delta_exact": self.delta_exact,
            "coeffs": [c.to_json() for c in self.coeffs],
            "masses": [format_rat(x) for x in self.masses],
            "pf_norm": self.pf_norm.to_json(),
            "f_norm": self.f_norm.to_json(),
            "contraction": self.contraction,
            "idempotent_on_span": self.idempotent_on_span,
        }


def projection_apply(
    f: StepFunction,
    K: int,
    depths: Depths = DEFAULT_DEPTHS,
    precision: int = DEFAULT_PRECISION,
    sched: ExponentSchedule | None = None,
    family: SequenceFamily = DEFAULT_FAMILY,
) -> ProjectionReport:
    """Project a step function onto the span of the first K rows.

    With disjoint supports, ‖P f‖_p^p = sum |phi_k(f)|^p mass_k exactly, and
    |phi_k(f)| <= (integral of |f| over the k-th support) / mass_k makes the
    projection norm-one; the report compares the two norms conservatively.
    """
    if K < 1:
        raise DomainError(f"need at least one row, got K = {K}")
    sched = default_schedule(1) if sched is None else sched
    p = sched.p
    rows = {
        k: build_row_sum(k, depths.Jg, depths.L, depths.m, depths.J, sched, family)
        for k in range(1, K + 1)
    }
    _verify_rows_disjoint(rows)
    delta = tuple(
        tuple(
            projection_coeff(
                rows[k2], k1, depths, precision, sched, family, _row=rows[k1]
            )
            for k2 in range(1, K + 1)
        )
        for k1 in range(1, K + 1)
    )
    delta_exact = all(
        cell.is_point and cell.lo == (1 if i == j else 0)
        for i, row in enumerate(delta)
        for j, cell in enumerate(row)
    )
    coeffs = tuple(
        projection_coeff(f, k, depths, precision, sched, family, _row=rows[k])
        for k in range(1, K + 1)
    )
    masses = tuple(rows[k].pth_mass for k in range(1, K + 1))
    pf_p = sum(
        (
            _abs_enclosure(c).pow_rat(p, precision) * Enclosure.exact(mass)
            for c, mass in zip(coeffs, masses)
        ),
        Enclosure.exact(0),
    )
    pf_norm = pf_p.pow_rat(Fraction(1, 1) / Fraction(p), precision)
    f_norm = f.norm_p(p, precision)
    return ProjectionReport(
        K=K,
        p=p,
        depths=depths,
        precision=precision,
        delta=delta,
        delta_exact=delta_exact,
        coeffs=coeffs,
        masses=masses,
        pf_norm=pf_norm,
        f_norm=f_norm,
        contraction=compare_le(pf_norm, f_norm),
        idempotent_on_span=delta_exact,
    )
