"""Exact rational scalars and outward-rounded enclosures.

Every quantity downstream of this module is either an exact
`fractions.Fraction` or a two-sided `Enclosure` whose endpoints are exact
Fractions.  Inexact operations (rational powers, logarithms) widen the
enclosure outward by a proven remainder bound; containment of the true
value is an arithmetic fact, never a rounding-mode promise.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


Rat = Fraction

#: default working precision in bits (width target 2^(4-precision) for pow)
DEFAULT_PRECISION = 96

#: minimum accepted working precision
MIN_PRECISION = 32

#: decimal digits emitted for enclosure endpoints in reports
REPORT_DIGITS = 24


class DomainError(ValueError):
    """Raised when an operation leaves its mathematical domain."""


def parse_rat(text: str) -> Rat:
    """Parse 'num/den' or integer or decimal text into an exact Fraction."""
    return Fraction(text.strip())


def format_rat(q: Rat) -> str:
    """Render a Fraction as 'num/den' (or 'num' when the denominator is 1)."""
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def dec_str_lower(q: Rat, digits: int = REPORT_DIGITS) -> str:
    """Decimal string with `digits` places, rounded toward minus infinity."""
    scaled = q * 10**digits
    n = scaled.numerator // scaled.denominator
    return _render_scaled(n, digits)


def dec_str_upper(q: Rat, digits: int = REPORT_DIGITS) -> str:
    """Decimal string with `digits` places, rounded toward plus infinity."""
    scaled = -q * 10**digits
    n = -(scaled.numerator // scaled.denominator)
    return _render_scaled(n, digits)


def _render_scaled(n: int, digits: int) -> str:
    sign = "-" if n < 0 else ""
    a = abs(n)
    if digits == 0:
        return f"{sign}{a}"
    return f"{sign}{a // 10**digits}.{a % 10**digits:0{digits}d}"


def iroot(n: int, k: int) -> int:
    """floor(n ** (1/k)) for integers n >= 0, k >= 1, by integer Newton."""
    if n < 0 or k < 1:
        raise DomainError(f"iroot needs n >= 0, k >= 1, got n={n}, k={k}")
    if n == 0 or k == 1:
        return n
    # start above the true root: n < 2^bits implies root < 2^ceil(bits/k)
    x = 1 << -(-n.bit_length() // k)
    while True:
        y = ((k - 1) * x + n // x ** (k - 1)) // k
        if y >= x:
            return x
        x = y


@dataclass(frozen=True)
class Enclosure:
    """Closed interval [lo, hi] with exact rational endpoints."""

    lo: Rat
    hi: Rat

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise DomainError(f"inverted enclosure [{self.lo}, {self.hi}]")

    @staticmethod
    def exact(x) -> "Enclosure":
        q = Fraction(x)
        return Enclosure(q, q)

    @property
    def width(self) -> Rat:
        return self.hi - self.lo

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi

    def contains(self, x) -> bool:
        q = Fraction(x)
        return self.lo <= q <= self.hi

    def contains_enclosure(self, other: "Enclosure") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def hull(self, other: "Enclosure") -> "Enclosure":
        return Enclosure(min(self.lo, other.lo), max(self.hi, other.hi))

    def __add__(self, other) -> "Enclosure":
        o = _as_enclosure(other)
        return Enclosure(self.lo + o.lo, self.hi + o.hi)

    __radd__ = __add__

    def __neg__(self) -> "Enclosure":
        return Enclosure(-self.hi, -self.lo)

    def __sub__(self, other) -> "Enclosure":
        return self + (-_as_enclosure(other))

    def __rsub__(self, other) -> "Enclosure":
        return _as_enclosure(other) + (-self)

    def __mul__(self, other) -> "Enclosure":
        o = _as_enclosure(other)
        products = (self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi)
        return Enclosure(min(products), max(products))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Enclosure":
        o = _as_enclosure(other)
        if o.lo <= 0 <= o.hi:
            raise DomainError(f"division by enclosure containing zero: [{o.lo}, {o.hi}]")
        inv = Enclosure(Fraction(1, 1) / o.hi, Fraction(1, 1) / o.lo)
        return self * inv

    def __rtruediv__(self, other) -> "Enclosure":
        return _as_enclosure(other) / self

    def pow_rat(self, expo: Rat, precision: int = DEFAULT_PRECISION) -> "Enclosure":
        """Interval power with a rational exponent; base must be >= 0."""
        expo = Fraction(expo)
        if self.lo < 0:
            raise DomainError(f"pow_rat base may not be negative: [{self.lo}, {self.hi}]")
        if expo >= 0:
            return Enclosure(
                rat_pow(self.lo, expo, precision).lo,
                rat_pow(self.hi, expo, precision).hi,
            )
        return Enclosure(
            rat_pow(self.hi, expo, precision).lo,
            rat_pow(self.lo, expo, precision).hi,
        )

    def round_out(self, precision: int = DEFAULT_PRECISION) -> "Enclosure":
        """Quantize endpoints outward onto the dyadic grid 2^(-precision).

        Absolute widening of at most 2^(1-precision); used to keep
        denominators bounded inside long accumulation loops.
        """
        scale = 1 << precision
        lo = Fraction((self.lo * scale).__floor__(), scale)
        hi = Fraction(-((-self.hi * scale).__floor__()), scale)
        return Enclosure(lo, hi)

    def to_json(self, digits: int = REPORT_DIGITS) -> dict:
        return {
            "lo": format_rat(self.lo),
            "hi": format_rat(self.hi),
            "dec_lo": dec_str_lower(self.lo, digits),
            "dec_hi": dec_str_upper(self.hi, digits),
        }

    def __repr__(self) -> str:  # pragma: no cover - debug aid
        return f"Enclosure({dec_str_lower(self.lo, 12)}, {dec_str_upper(self.hi, 12)})"


def _as_enclosure(x) -> Enclosure:
    if isinstance(x, Enclosure):
        return x
    return Enclosure.exact(x)


def _check_precision(precision: int) -> int:
    if precision < MIN_PRECISION:
        raise DomainError(f"precision {precision} below minimum {MIN_PRECISION}")
    return precision


def rat_pow(base: Rat, expo: Rat, precision: int = DEFAULT_PRECISION) -> Enclosure:
    """Enclosure of base ** expo for rational base and exponent.

    Exact cases (integer exponent, perfect roots, base in {0, 1}) return
    point enclosures.  Otherwise the relative width is below
    2^(7-precision), so absolute width is below 2^(4-precision) whenever
    the value itself is at most 8.
    """
    _check_precision(precision)
    base = Fraction(base)
    expo = Fraction(expo)
    if base < 0:
        raise DomainError(f"rat_pow base must be >= 0, got {base}")
    if base == 0:
        if expo > 0:
            return Enclosure.exact(0)
        raise DomainError(f"rat_pow(0, {expo}) is undefined")
    if expo.denominator == 1:
        return Enclosure.exact(base ** expo.numerator)
    if base == 1:
        return Enclosure.exact(1)
    if expo < 0:
        return rat_pow(1 / base, -expo, precision)

    whole, frac = divmod(expo, 1)
    exact_part = base ** int(whole)
    root_num, root_den = frac.numerator, frac.denominator
    p = base.numerator**root_num
    q = base.denominator**root_num

    # perfect v-th root -> exact point value
    rp, rq = iroot(p, root_den), iroot(q, root_den)
    if rp**root_den == p and rq**root_den == q:
        return Enclosure.exact(exact_part * Fraction(rp, rq))

    # scale so the floor root keeps >= precision + 7 significant bits
    shift = precision + 8 + max(0, -(-(q.bit_length() - p.bit_length()) // root_den))
    big = (p << (root_den * shift)) // q
    x = iroot(big, root_den)
    # x = floor(root * 2^shift), hence root is inside [x, x + 2] / 2^shift
    return Enclosure(exact_part * Fraction(x, 1 << shift),
                     exact_part * Fraction(x + 2, 1 << shift))


def pow2(expo: Rat, precision: int = DEFAULT_PRECISION) -> Enclosure:
    """Enclosure of 2 ** expo."""
    return rat_pow(Fraction(2), expo, precision)


_LN2_CACHE: dict[int, Enclosure] = {}


def _atanh_series(z: Rat, precision: int) -> Enclosure:
    """Enclosure of 2*atanh(z) = ln((1+z)/(1-z)) for |z| <= 1/3."""
    az = abs(z)
    if 2 * az >= 1:
        raise DomainError(f"series argument too large: {z}")
    z2 = z * z
    tol = Fraction(1, 1 << (precision + 4))
    total = Fraction(0)
    power = z
    k = 0
    while True:
        total += power / (2 * k + 1)
        power *= z2
        k += 1
        # remaining terms are one-signed; geometric tail bound
        tail = abs(power) / ((2 * k + 1) * (1 - z2))
        if tail <= tol:
            break
        if k > 4 * precision:
            raise DomainError("atanh series failed to converge")
    return Enclosure(2 * (total - tail), 2 * (total + tail))


def _ln2(precision: int) -> Enclosure:
    enc = _LN2_CACHE.get(precision)
    if enc is None:
        enc = _atanh_series(Fraction(1, 3), precision)
        _LN2_CACHE[precision] = enc
    return enc


def ln_rat(x: Rat, precision: int = DEFAULT_PRECISION) -> Enclosure:
    """Enclosure of the natural logarithm of a positive rational."""
    _check_precision(precision)
    x = Fraction(x)
    if x <= 0:
        raise DomainError(f"ln_rat needs a positive argument, got {x}")
    if x == 1:
        return Enclosure.exact(0)
    # reduce to y in [3/4, 3/2) with x = y * 2^t
    t = x.numerator.bit_length() - x.denominator.bit_length()
    y = x / Fraction(1 << t) if t >= 0 else x * Fraction(1 << -t)
    if y >= Fraction(3, 2):
        y /= 2
        t += 1
    elif y < Fraction(3, 4):
        y *= 2
        t -= 1
    body = _atanh_series((y - 1) / (y + 1), precision)
    result = body + t * _ln2(precision)
    return result.round_out(precision + 4)
