"""Acceptance suite: one test per shipped guarantee.

Each criterion is a single test function, so ``pytest -v`` emits exactly
one pass/fail line per guarantee; the decorator additionally prints a
``criterion NN: PASS/FAIL`` line (visible with ``-s`` and in failure
output).  Tolerances and runtime caps are asserted, never logged.
"""

from __future__ import annotations

import functools
import random
import time
from fractions import Fraction as F

from nowhere_lq import (
    HOLDS,
    CoeffExpr,
    Depths,
    Enclosure,
    FunctionTerm,
    QInterval,
    QIntervalSet,
    StepFunction,
    UNIT,
    a_set,
    build_row_sum,
    canonical_json,
    certify_divergence,
    certify_membership,
    default_schedule,
    integral_power_term,
    isometry_check,
    left_tail_limit,
    left_tail_measure,
    lemma_chain,
    levels_almost_disjoint,
    pow2,
    projection_apply,
    projection_coeff,
    rat_pow,
    replay_divergence,
    seq_locate,
    seq_value,
    stage,
    t_right,
    tn_bounds,
)

PROJ = Depths(J=10, L=10, D=8, m=12, Jg=10)
MID = Depths(J=8, L=8, D=6, m=10, Jg=8)


def criterion(num: int, label: str):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper():
            try:
                fn()
            except BaseException:
                print(f"criterion {num:02d}: FAIL — {label}")
                raise
            print(f"criterion {num:02d}: PASS — {label}")

        return wrapper

    return deco


@criterion(1, "stage measures equal 1/2 + 2^-n for n <= 30 in under 1 s")
def test_criterion_01_stage_measures():
    t0 = time.perf_counter()
    measure = F(1)
    for n in range(1, 31):
        st = stage(n)
        assert st.measure == F(1, 2) + F(1, 2**n)
        # independent recurrence: stage n+1 removes 2^(n-1) holes of 4^-n
        assert st.measure == measure
        assert st.interval_count == 2 ** (n - 1)
        measure -= F(2 ** (n - 1), 4**n)
    assert time.perf_counter() - t0 < 1.0


@criterion(2, "t_n recurrence/closed form agree to n = 60; fast bound dies at n = 3")
def test_criterion_02_tn_closed_form_and_bounds():
    ell = F(1)  # leftmost interval length via the halving recurrence
    for n in range(1, 61):
        tn = t_right(n)
        assert tn == ell == F(1, 2**n) + F(2, 4**n)
        assert tn <= F(1, 2 ** (n - 1))
        tb = tn_bounds(n)
        assert tb["safe_bound_holds"] is True
        assert tb["fast_bound_holds"] is (n <= 2)
        ell = (ell - F(1, 4**n)) / 2
    # exact witness for the failure of the aggressive bound
    assert t_right(3) == F(5, 32) > F(4, 32) == tn_bounds(3)["fast_bound"]


@criterion(3, "left tail is 2^-n + 2^(1-n-m), decreasing in m with limit 2^-n")
def test_criterion_03_left_tail():
    for n in range(1, 11):
        prev = None
        for m in range(n, 31):
            v = left_tail_measure(n, m)
            assert v == F(1, 2**n) + F(2, 2**n * 2**m)
            if prev is not None:
                assert v < prev
            prev = v
        assert left_tail_limit(n) == F(1, 2**n)


@criterion(4, "level-2 mass within 2^-D + 2^-m of 1/4; levels a.d. for D < m <= 8")
def test_criterion_04_cbuilt_measures():
    for D, m in ((4, 4), (6, 6), (8, 8), (10, 12)):
        ab = a_set(2, D, m)
        assert ab.ideal_measure == F(1, 4)
        assert abs(ab.measure - F(1, 4)) <= F(1, 2**D) + F(1, 2**m)
        lo, hi = ab.measure_bounds
        assert lo <= F(1, 4) <= hi
    for a in range(1, 7):
        for b in range(a + 1, 7):
            for m in range(2, 9):
                for D in range(1, m):
                    assert levels_almost_disjoint(a, b, D, m)
    # at D >= m the raw truncations genuinely overlap (depth boundary)
    assert not levels_almost_disjoint(1, 2, 8, 8)


@criterion(5, "block integral encloses j+1 with width <= 1e-10 for p in {1,2,3/2}")
def test_criterion_05_block_integral():
    for p in (F(1), F(2), F(3, 2)):
        sched = default_schedule(p)
        for j in range(1, 11):
            term = FunctionTerm(CoeffExpr(), sched.exponent(j), UNIT)
            enc = integral_power_term(term, QIntervalSet([UNIT]), p)
            assert enc.lo <= j + 1 <= enc.hi
            assert enc.hi - enc.lo <= F(1, 10**10)


@criterion(6, "lower-bound chain grows, clears 1e3 by n = 40, safe bound stays below")
def test_criterion_06_lower_bound_chain():
    t0 = time.perf_counter()
    rep = lemma_chain(F(1), F(2), n_max=40)
    assert rep.j0 == 2 and rep.s == F(4, 3)
    for n in range(5, 38):
        assert rep.row(n + 3).lb.lo > rep.row(n).lb.hi
    assert rep.row(40).lb.lo > 1000
    for n in range(3, 41):
        assert rep.row(n).safe_bound.hi < rep.row(n).lb.lo
    assert rep.all_safe_consistent()
    assert time.perf_counter() - t0 < 10.0


@criterion(7, "norm enclosure of the first row contains 1 with width <= 1e-4")
def test_criterion_07_membership():
    cert = certify_membership(1, Depths(J=20, L=20, D=8, m=20, Jg=20))
    assert cert.identity_exact
    assert cert.norm.lo <= 1 <= cert.norm.hi
    assert cert.norm.hi - cert.norm.lo <= F(1, 10**4)


@criterion(8, "coefficient ratio within 1e-4 of 1; symbolic sums exact at p = 2")
def test_criterion_08_isometry():
    coeffs = (F(1), F(-1, 2), F(1, 3))
    rep = isometry_check(coeffs, Depths())
    assert F(1) - F(1, 10**4) <= rep.ratio.lo
    assert rep.ratio.hi <= F(1) + F(1, 10**4)
    for depths in (Depths(), Depths(6, 6, 6, 8, 6), Depths(4, 4, 4, 6, 4)):
        assert isometry_check(coeffs, depths).symbolic_identity
    rep2 = isometry_check(coeffs, Depths(6, 6, 6, 8, 6), sched=default_schedule(F(2)))
    assert rep2.symbolic_identity
    assert rep2.truncated_power_sum.is_point
    assert rep2.ideal_power_sum.is_point
    assert rep2.ideal_power_sum.lo == F(1) + F(1, 4) + F(1, 9)


@criterion(9, "divergence bound reaches 1e4 on (1/3, 1/2) and replays byte-identically")
def test_criterion_09_divergence_certificate():
    t0 = time.perf_counter()
    window = QInterval(F(1, 3), F(1, 2))
    cert = certify_divergence(1, window, F(2), 10**4)
    assert cert.bound.lo >= 10**4
    assert cert.n_tail <= cert.n_budget
    replayed = replay_divergence(cert)
    assert canonical_json(replayed.to_json()) == canonical_json(cert.to_json())
    assert time.perf_counter() - t0 < 60.0


def _random_step(rnd: random.Random) -> StepFunction:
    cuts = sorted({F(rnd.randint(0, 64), 64) for _ in range(rnd.randint(2, 5))} | {F(0), F(1)})
    pieces = []
    for lo, hi in zip(cuts, cuts[1:]):
        v = F(rnd.randint(-12, 12), rnd.randint(1, 4))
        if v:
            pieces.append((QInterval(lo, hi), v))
    if not pieces:
        pieces = [(QInterval(F(0), F(1)), F(1))]
    return StepFunction.build(pieces)


@criterion(10, "dual coefficients exact (0 off-row, 1 on-row); 20-step contraction")
def test_criterion_10_projection():
    sched = default_schedule(F(1))
    rows = {k: build_row_sum(k, PROJ.Jg, PROJ.L, PROJ.m, PROJ.J, sched) for k in range(1, 5)}
    for k1 in range(1, 5):
        for k2 in range(1, 5):
            got = projection_coeff(rows[k2], k1, PROJ, _row=rows[k1])
            assert got.is_point and got.lo == (F(1) if k1 == k2 else F(0))
            assert got.hi - got.lo <= F(1, 10**3)
    rnd = random.Random(20260814)
    for _ in range(20):
        rep = projection_apply(_random_step(rnd), 4, MID)
        assert rep.contraction == HOLDS


@criterion(11, "index family round-trips exhaustively for n <= 1e6 in under 5 s")
def test_criterion_11_sequence_family():
    t0 = time.perf_counter()
    for n in range(1, 10**6 + 1):
        k, j = seq_locate(n)
        assert seq_value(k, j) == n
    for k in range(1, 301):
        for j in range(1, 301):
            n = seq_value(k, j)
            if n <= 10**6:
                assert seq_locate(n) == (k, j)
    assert time.perf_counter() - t0 < 5.0


@criterion(12, "10^4 randomized exact-value containment checks, zero violations")
def test_criterion_12_enclosure_soundness():
    rnd = random.Random(987654321)
    checks = violations = 0

    def hit(enc, exact):
        nonlocal checks, violations
        checks += 1
        if not (enc.lo <= exact <= enc.hi):
            violations += 1

    for _ in range(1500):  # integer powers
        x = F(rnd.randint(1, 400), rnd.randint(1, 400))
        k = rnd.randint(-6, 6)
        hit(rat_pow(x, k, 64), x**k)
    for _ in range(1500):  # rational roots of perfect powers
        y = F(rnd.randint(1, 40), rnd.randint(1, 40))
        b = rnd.randint(2, 4)
        a = rnd.randint(1, 5)
        hit(rat_pow(y**b, F(a, b), 64), y**a)
    for _ in range(1000):  # dyadic powers
        k = rnd.randint(-60, 60)
        hit(pow2(k, 64), F(2) ** k)
    for _ in range(1500):  # x^q * x^-q must cover 1
        x = F(rnd.randint(1, 100), rnd.randint(1, 100))
        q = F(rnd.randint(1, 9), rnd.randint(1, 9))
        hit(rat_pow(x, q, 64) * rat_pow(x, -q, 64), F(1))
    for _ in range(1000):  # enclosure ring operations on exact inputs
        a = F(rnd.randint(-300, 300), rnd.randint(1, 50))
        b = F(rnd.randint(-300, 300), rnd.randint(1, 50))
        A, B = Enclosure.exact(a), Enclosure.exact(b)
        hit(A + B, a + b)
        hit(A - B, a - b)
        hit(A * B, a * b)
        if b != 0:
            hit(A / B, a / b)
    for _ in range(600):  # closed-form singular integrals with rational value
        j = rnd.randint(1, 10)
        c = F(rnd.randint(1, 20), rnd.randint(1, 20))
        term = FunctionTerm(CoeffExpr(c), F(j, j + 1), UNIT)
        hit(integral_power_term(term, QIntervalSet([UNIT]), 1, 64), c * (j + 1))
    for _ in range(600):  # sqrt integrals over perfect-square windows
        s = F(rnd.randint(0, 8), 16)
        t = s + F(rnd.randint(1, 8), 16)
        term = FunctionTerm(CoeffExpr(), F(1, 2), UNIT)
        enc = integral_power_term(term, QIntervalSet([QInterval(s**2, t**2)]), 1, 64)
        hit(enc, 2 * (t - s))

    assert checks >= 10_000
    assert violations == 0
