"""Power-law singular functions with exact symbolic coefficients.

Every function here is a finite sum of terms

    coeff * ((x - a) / (b - a)) ** (-e)   restricted to a mask,

where [a, b] is the term's support, 0 < e < 1, and coeff is an exact
product of a rational, rational powers of rationals, and an integer
power of one symbolic normalizer N (the p-norm of the masked series).
Keeping N symbolic is what makes p-th-power masses of the assembled
functions exact rationals: the normalizer cancels before any numerics.

The assembly mirrors a three-stage recipe: weighted series of unit
blocks, masked by a Cantor stage; affine copies of the masked series
planted on canonical family components, weighted 2^(-l/p); rows of
those, weighted 2^(-j/p), placed on pairwise almost disjoint levels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .cantor import ComponentChain, StageImage, chain_index, first_chains
from .exact import DomainError, Enclosure, Rat, format_rat, rat_pow
from .family import DEFAULT_FAMILY, SequenceFamily
from .intervals import UNIT, QInterval, QIntervalSet


class SingularPoint(DomainError):
    """Evaluation was requested exactly at an active singular endpoint."""


class UnresolvedNormalizer(DomainError):
    """A numeric value was requested while N is still symbolic."""


def _norm_powers(
    rational: Rat, powers, norm_power: Rat
) -> tuple[Rat, tuple[tuple[Rat, Rat], ...], Rat]:
    if rational <= 0:
        raise DomainError(f"coefficients must stay positive, got {rational}")
    merged: dict[Rat, Rat] = {}
    for base, expo in powers:
        base, expo = Fraction(base), Fraction(expo)
        if base <= 0:
            raise DomainError(f"power base must be positive, got {base}")
        if base != 1 and expo != 0:
            merged[base] = merged.get(base, Fraction(0)) + expo
    kept = []
    for base in sorted(merged):
        expo = merged[base]
        if expo == 0:
            continue
        if expo.denominator == 1:
            rational *= base ** expo.numerator
        else:
            kept.append((base, expo))
    return rational, tuple(kept), Fraction(norm_power)


@dataclass(frozen=True)
class CoeffExpr:
    """rational * prod(base_i ** expo_i) * N ** norm_power, all exact."""

    rational: Rat = Fraction(1)
    powers: tuple[tuple[Rat, Rat], ...] = ()
    norm_power: Rat = Fraction(0)

    def __post_init__(self) -> None:
        rational, powers, norm_power = _norm_powers(
            Fraction(self.rational), self.powers, self.norm_power
        )
        object.__setattr__(self, "rational", rational)
        object.__setattr__(self, "powers", powers)
        object.__setattr__(self, "norm_power", norm_power)

    def times_rat(self, q: Rat) -> "CoeffExpr":
        return CoeffExpr(self.rational * Fraction(q), self.powers, self.norm_power)

    def times_power(self, base: Rat, expo: Rat) -> "CoeffExpr":
        return CoeffExpr(
            self.rational, self.powers + ((Fraction(base), Fraction(expo)),), self.norm_power
        )

    def times_norm(self, delta: Rat) -> "CoeffExpr":
        return CoeffExpr(self.rational, self.powers, self.norm_power + Fraction(delta))

    def times(self, other: "CoeffExpr") -> "CoeffExpr":
        return CoeffExpr(
            self.rational * other.rational,
            self.powers + other.powers,
            self.norm_power + other.norm_power,
        )

    def pow(self, q: Rat) -> "CoeffExpr":
        """The coefficient raised to a rational power q."""
        q = Fraction(q)
        powers = tuple((base, expo * q) for base, expo in self.powers)
        if q.denominator == 1 and q >= 0:
            return CoeffExpr(self.rational**q.numerator, powers, self.norm_power * q)
        return CoeffExpr(Fraction(1), powers + ((self.rational, q),), self.norm_power * q)

    @property
    def is_rational(self) -> bool:
        return not self.powers and self.norm_power == 0

    def rational_value(self) -> Rat:
        if not self.is_rational:
            raise DomainError(f"coefficient is not rational: {self}")
        return self.rational

    def resolve(self, norm_value: Enclosure | None, precision: int) -> Enclosure:
        """Numeric enclosure, substituting `norm_value` for N if present."""
        out = Enclosure.exact(self.rational)
        for base, expo in self.powers:
            out = out * rat_pow(base, expo, precision)
        if self.norm_power != 0:
            if norm_value is None:
                raise UnresolvedNormalizer(
                    "coefficient carries the symbolic normalizer; supply its enclosure"
                )
            out = out * norm_value.pow_rat(self.norm_power, precision)
        return out

    def to_json(self) -> dict:
        return {
            "rational": format_rat(self.rational),
            "powers": [[format_rat(b), format_rat(e)] for b, e in self.powers],
            "norm_power": format_rat(self.norm_power),
        }

    def __repr__(self) -> str:  # pragma: no cover - debug aid
        parts = [format_rat(self.rational)]
        parts += [f"({format_rat(b)})^({format_rat(e)})" for b, e in self.powers]
        if self.norm_power != 0:
            parts.append(f"N^({format_rat(self.norm_power)})")
        return " * ".join(parts)


ONE = CoeffExpr()


@dataclass(frozen=True)
class FunctionTerm:
    """One masked power-law piece: coeff * unit_coord(x)^(-exponent)."""

    coeff: CoeffExpr
    exponent: Rat
    support: QInterval
    mask: StageImage | None = None

    def __post_init__(self) -> None:
        if not 0 < self.exponent < 1:
            raise DomainError(f"term exponent must lie in (0,1), got {self.exponent}")
        if self.support.length <= 0:
            raise DomainError("term support must have positive length")
        if self.mask is not None and not self.support.contains_interval(self.mask.hull):
            raise DomainError("mask hull must sit inside the term support")

    def is_active(self, x: Rat) -> bool:
        x = Fraction(x)
        if not self.support.contains_point(x):
            return False
        return self.mask.contains(x) if self.mask is not None else True

    def value_at(
        self, x: Rat, norm_value: Enclosure | None = None, precision: int = 96
    ) -> Enclosure:
        """Enclosure of the term value at an active point x."""
        x = Fraction(x)
        if not self.is_active(x):
            return Enclosure.exact(0)
        if x == self.support.lo:
            raise SingularPoint(f"term is singular at {x}")
        u = self.support.unit_coordinate(x)
        return self.coeff.resolve(norm_value, precision) * rat_pow(u, -self.exponent, precision)

    def rescaled(self, target: QInterval) -> "FunctionTerm":
        """Image of the term under the affine chart [0,1] -> target."""
        support = QInterval(
            target.affine_from_unit(self.support.lo), target.affine_from_unit(self.support.hi)
        )
        mask = self.mask
        if mask is not None:
            mask = StageImage(
                mask.m,
                QInterval(
                    target.affine_from_unit(mask.hull.lo), target.affine_from_unit(mask.hull.hi)
                ),
            )
        return FunctionTerm(self.coeff, self.exponent, support, mask)

    def scaled(self, factor: CoeffExpr) -> "FunctionTerm":
        return FunctionTerm(self.coeff.times(factor), self.exponent, self.support, self.mask)

    def domain(self) -> QIntervalSet:
        """Materialized support-with-mask (capped for deep masks)."""
        if self.mask is None:
            return QIntervalSet([self.support])
        return self.mask.intersect_window(self.support)

    def to_json(self) -> dict:
        return {
            "coeff": self.coeff.to_json(),
            "exponent": format_rat(self.exponent),
            "support": self.support.to_json(),
            "mask": self.mask.to_json() if self.mask is not None else None,
        }


@dataclass(frozen=True)
class ComponentRef:
    """Bookkeeping for one planted copy inside an assembled function."""

    outer_index: int | None
    level: int
    component_index: int
    chain: ComponentChain
    hull: QInterval
    stage: int
    weight_pth: Rat
    term_start: int
    term_stop: int

    def to_json(self) -> dict:
        return {
            "outer_index": self.outer_index,
            "level": self.level,
            "component_index": self.component_index,
            "chain": self.chain.to_json(),
            "hull": self.hull.to_json(),
            "stage": self.stage,
            "weight_pth": format_rat(self.weight_pth),
            "terms": [self.term_start, self.term_stop],
        }


@dataclass(frozen=True)
class SingularFunction:
    """A finite sum of masked power-law terms plus exact bookkeeping."""

    terms: tuple[FunctionTerm, ...]
    p: Rat
    kind: str
    params: tuple[tuple[str, int], ...] = ()
    pth_mass: Rat | None = None
    pth_tail: Rat | None = None
    component_refs: tuple[ComponentRef, ...] = ()

    def param(self, name: str) -> int:
        for key, value in self.params:
            if key == name:
                return value
        raise KeyError(name)

    def evaluate(
        self, x: Rat, norm_value: Enclosure | None = None, precision: int = 96
    ) -> Enclosure:
        """Enclosure of the pointwise value (0 where no term is active)."""
        x = Fraction(x)
        total = Enclosure.exact(0)
        for term in self.terms:
            if term.is_active(x):
                total = total + term.value_at(x, norm_value, precision)
        return total

    def support_hulls(self) -> QIntervalSet:
        return QIntervalSet(term.support for term in self.terms)

    def scaled(self, factor: CoeffExpr) -> "SingularFunction":
        return SingularFunction(
            tuple(t.scaled(factor) for t in self.terms),
            self.p,
            self.kind,
            self.params,
            self.pth_mass,
            self.pth_tail,
            self.component_refs,
        )

    def to_json(self) -> dict:
        out = {
            "kind": self.kind,
            "p": format_rat(self.p),
            "params": dict(self.params),
            "terms": [t.to_json() for t in self.terms],
            "component_refs": [ref.to_json() for ref in self.component_refs],
        }
        if self.pth_mass is not None:
            out["pth_mass"] = format_rat(self.pth_mass)
        if self.pth_tail is not None:
            out["pth_tail"] = format_rat(self.pth_tail)
        return out


@dataclass(frozen=True)
class ExponentSchedule:
    """Assigns each block index j its power r_j > p; exponent is 1/r_j.

    The default rule r_j = p(j+1)/j makes the unit-block p-th mass equal
    j+1 exactly and decreases strictly to p, so every block is p-summable
    on [0,1] while no block is r-summable past its own r_j.
    """

    p: Rat
    rule: Callable[[int], Rat] | None = None
    name: str = "harmonic-step"

    def __post_init__(self) -> None:
        if self.p < 1:
            raise DomainError(f"index p must be >= 1, got {self.p}")

    def r(self, j: int) -> Rat:
        if j < 1:
            raise DomainError(f"block index must be >= 1, got {j}")
        r = Fraction(self.p) * (j + 1) / j if self.rule is None else Fraction(self.rule(j))
        if r <= self.p:
            raise DomainError(f"schedule must satisfy r_j > p, got r_{j} = {r} <= {self.p}")
        return r

    def exponent(self, j: int) -> Rat:
        return 1 / self.r(j)


def default_schedule(p: Rat) -> ExponentSchedule:
    return ExponentSchedule(Fraction(p))


def block_pth_mass(j: int, sched: ExponentSchedule) -> Rat:
    """Exact integral of x^(-p/r_j) over [0,1]: r_j / (r_j - p)."""
    r = sched.r(j)
    return r / (r - sched.p)


def build_block(j: int, sched: ExponentSchedule) -> SingularFunction:
    """The unit singular block x ** (-1/r_j) on [0,1]."""
    term = FunctionTerm(ONE, sched.exponent(j), UNIT, None)
    return SingularFunction((term,), sched.p, "power_block", (("j", j),))


def build_series(J: int, sched: ExponentSchedule) -> SingularFunction:
    """Normalized weighted series of the first J blocks.

    Block j enters with coefficient 2^(-j) divided by its p-norm
    (block_pth_mass ** (1/p)); omitted blocks carry p-norm tail 2^(-J).
    """
    if J < 1:
        raise DomainError(f"series length must be >= 1, got {J}")
    terms = []
    for j in range(1, J + 1):
        coeff = CoeffExpr(Fraction(1, 2**j)).times_power(block_pth_mass(j, sched), -1 / sched.p)
        terms.append(FunctionTerm(coeff, sched.exponent(j), UNIT, None))
    return SingularFunction(tuple(terms), sched.p, "weighted_series", (("J", J),))


def build_masked_series(J: int, m: int, sched: ExponentSchedule) -> SingularFunction:
    """The weighted series restricted to the stage-m set.

    Its p-norm is the symbolic normalizer N that all planted copies
    divide by.
    """
    if m < 1:
        raise DomainError(f"stage must be >= 1, got {m}")
    mask = StageImage(m, UNIT)
    base = build_series(J, sched)
    terms = tuple(
        FunctionTerm(t.coeff, t.exponent, t.support, mask) for t in base.terms
    )
    return SingularFunction(terms, sched.p, "masked_series", (("J", J), ("m", m)))


def rescale_into(f: SingularFunction, target: QInterval) -> SingularFunction:
    """Plant f's graph on `target` via the increasing affine chart."""
    if target.length <= 0:
        raise DomainError("rescale target must have positive length")
    return SingularFunction(
        tuple(t.rescaled(target) for t in f.terms),
        f.p,
        "rescaled",
        f.params,
        None,
        None,
        (),
    )


def build_level_sum(
    level: int, L: int, m: int, J: int, sched: ExponentSchedule
) -> SingularFunction:
    """Normalized sum over the first L canonical level-`level` components.

    Component l carries weight 2^(-l/p) and the copy is divided by its
    own p-norm |I_l|^(1/p) * N, so its exact p-th mass is 2^(-l); the
    total is 1 - 2^(-L) with the omitted tail exactly 2^(-L).  Level 1
    is the masked series over [0,1] divided by N (mass exactly 1).
    """
    if level == 1:
        base = build_masked_series(J, m, sched).scaled(CoeffExpr(norm_power=Fraction(-1)))
        ref = ComponentRef(None, 1, 1, ComponentChain(()), UNIT, m, Fraction(1), 0, len(base.terms))
        return SingularFunction(
            base.terms,
            sched.p,
            "level_sum",
            (("level", 1), ("L", 1), ("m", m), ("J", J)),
            Fraction(1),
            Fraction(0),
            (ref,),
        )
    if L < 1:
        raise DomainError(f"component count must be >= 1, got {L}")
    source = build_masked_series(J, m, sched)
    terms: list[FunctionTerm] = []
    refs: list[ComponentRef] = []
    for l, chain in enumerate(first_chains(level, L), start=1):
        hull = chain.hull()
        factor = (
            CoeffExpr(norm_power=Fraction(-1))
            .times_power(Fraction(1, 2**l), 1 / sched.p)
            .times_power(hull.length, -1 / sched.p)
        )
        start = len(terms)
        for term in source.terms:
            terms.append(term.rescaled(hull).scaled(factor))
        refs.append(
            ComponentRef(None, level, l, chain, hull, m, Fraction(1, 2**l), start, len(terms))
        )
    return SingularFunction(
        tuple(terms),
        sched.p,
        "level_sum",
        (("level", level), ("L", L), ("m", m), ("J", J)),
        1 - Fraction(1, 2**L),
        Fraction(1, 2**L),
        tuple(refs),
    )


def build_row_sum(
    k: int,
    Jg: int,
    L: int,
    m: int,
    J: int,
    sched: ExponentSchedule,
    family: SequenceFamily = DEFAULT_FAMILY,
) -> SingularFunction:
    """Row-k member: sum of 2^(-j/p)-weighted level sums on the row's levels.

    Row levels come from the disjoint family, so distinct rows use
    disjoint level sets; the exact p-th mass is
    sum_j 2^(-j) * mass(level sum) with outer tail 2^(-Jg).
    """
    if k < 1 or Jg < 1:
        raise DomainError(f"row and length must be >= 1, got k={k}, Jg={Jg}")
    terms: list[FunctionTerm] = []
    refs: list[ComponentRef] = []
    mass = Fraction(0)
    for j in range(1, Jg + 1):
        level = family.value(k, j)
        piece = build_level_sum(level, L, m, J, sched)
        outer = CoeffExpr().times_power(Fraction(1, 2**j), 1 / sched.p)
        offset = len(terms)
        for term in piece.terms:
            terms.append(term.scaled(outer))
        for ref in piece.component_refs:
            refs.append(
                ComponentRef(
                    j,
                    ref.level,
                    ref.component_index,
                    ref.chain,
                    ref.hull,
                    ref.stage,
                    Fraction(1, 2**j) * ref.weight_pth,
                    ref.term_start + offset,
                    ref.term_stop + offset,
                )
            )
        mass += Fraction(1, 2**j) * piece.pth_mass
    return SingularFunction(
        tuple(terms),
        sched.p,
        "row_sum",
        (("k", k), ("Jg", Jg), ("L", L), ("m", m), ("J", J)),
        mass,
        1 - mass,
        tuple(refs),
    )


def canonical_weight_index(ref: ComponentRef) -> int:
    """Check value: the canonical index the weight 2^(-l/p) refers to."""
    return chain_index(ref.chain)
