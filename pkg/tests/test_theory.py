import math
from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from dissnls import theory
from dissnls.theory import Theorem
from dissnls.types import DomainError, thresholds

from conftest import rational_in, subcritical_pair


def r_q_second_form(d, p):
    """The alternative closed forms of r and q, transcribed independently."""
    d = F(d)
    p = F(p)
    r = 1 - 2 * (4 - 3 * d * (p - 1)) / ((d + 2) * (4 - d * (p - 1)))
    q = -((4 - 3 * d * (p - 1)) * (4 - (d - 2) * (p - 1))) / (2 * (d + 2) * (p - 1) * (4 - d * (p - 1)))
    return r, q


CASES = {
    (1, F(2)): (F(7, 9), F(-5, 18), F(-5, 4), 3),
    (1, F(3, 2)): (F(11, 21), F(-15, 14), F(-9, 4), 2),
    (2, F(3, 2)): (F(5, 6), F(-1, 3), F(-2), 3),
    (3, F(4, 3)): (F(13, 15), F(-11, 30), F(-11, 4), 3),
}


@pytest.mark.parametrize("dp", list(CASES))
def test_recurrence_reference_values(dp):
    d, p = dp
    r, q, a_inf, n0 = CASES[dp]
    res = theory.recurrence(d, p)
    assert (res.r, res.q_rec, res.a_inf, res.n0) == (r, q, a_inf, n0)
    assert (res.r, res.q_rec) == r_q_second_form(d, p)


def test_recurrence_d1_p2_sequence():
    res = theory.recurrence(1, F(2))
    assert res.a_seq == [F(1, 2), F(1, 9), F(-31, 162)]


def test_recurrence_boundary_probe():
    p = F(7, 3) - F(1, 10 ** 6)
    res = theory.recurrence(1, p)
    assert abs(1 - res.r) < 1e-5 and abs(res.q_rec) < 1e-5
    assert res.n0 > len(res.a_seq)  # located from the closed form
    assert res.term(res.n0) < 0 <= res.term(res.n0 - 1)


@pytest.mark.parametrize("p", [F(1), F(7, 3), F(3)])
def test_recurrence_domain(p):
    with pytest.raises(DomainError, match=r"1\+4/\(3d\)|p > 1"):
        theory.recurrence(1, p)


@given(subcritical_pair())
def test_recurrence_invariants(dp):
    d, p = dp
    res = theory.recurrence(d, p, max_terms=200)
    assert 0 < res.r < 1 and res.q_rec < 0 and res.a_inf < 0
    assert (res.r, res.q_rec) == r_q_second_form(d, p)
    assert res.a_inf == res.q_rec / (1 - res.r)
    for a, b in zip(res.a_seq, res.a_seq[1:]):
        assert b == res.r * a + res.q_rec
    for n, a in enumerate(res.a_seq, start=1):
        assert a == res.term(n)
    if res.n0 <= len(res.a_seq):
        assert res.a_seq[res.n0 - 1] < 0 and all(a >= 0 for a in res.a_seq[: res.n0 - 1])
    else:
        assert res.term(res.n0) < 0 <= res.term(res.n0 - 1)


def test_closed_form_past_n0():
    res = theory.recurrence(2, F(3, 2))
    for n in range(1, res.n0 + 6):
        a = res.a1
        for _ in range(n - 1):
            a = res.r * a + res.q_rec
        assert res.term(n) == a


@pytest.mark.parametrize("d,p,th,kind,exp", [
    (1, F(3, 2), "Main", "power", F(1)),
    (1, F(7, 3), "Main", "log", F(1, 2)),
    (2, F(2), "HLN", "log", F(1, 2)),
    (1, F(3, 2), "Prop31", "power", F(5, 6)),
    (1, F(3, 2), "HLN", "power", F(1)),
    (1, F(3, 2), "GKS_prev", "power", F(7, 9)),
    (1, F(2), "GKS_prev", "log", F(1, 3)),
    (1, F(7, 3), "Prop31", "log", F(1, 2)),
])
def test_decay_exponent_examples(d, p, th, kind, exp):
    rate = theory.decay_exponent(d, p, th)
    assert (rate.kind, rate.exponent) == (kind, exp)


@pytest.mark.parametrize("th,p", [("HLN", F(4)), ("GKS_prev", F(5, 2)), ("Main", F(5, 2)), ("Prop31", F(3))])
def test_decay_exponent_out_of_range(th, p):
    with pytest.raises(DomainError):
        theory.decay_exponent(1, p, th)


def test_rate_evaluation():
    r = theory.decay_exponent(1, F(3, 2), "Main")
    assert r(3.0) == pytest.approx(0.25)
    lg = theory.decay_exponent(2, F(2), "HLN")
    assert lg(99.0) == pytest.approx(1 / math.sqrt(math.log(100.0)))
    assert "log" in lg.describe()


def test_theorem_parse():
    assert Theorem.parse("main") is Theorem.MAIN
    assert Theorem.parse("gks-prev") is Theorem.GKS_PREV
    with pytest.raises(ValueError):
        Theorem.parse("nope")


@given(subcritical_pair())
def test_weight_growth_reproduces_rates(dp):
    d, p = dp
    assert theory.decay_from_weight_growth(d, p, F(1, 2)) == theory.decay_exponent(d, p, "Prop31").exponent
    assert theory.decay_from_weight_growth(d, p, 0) == theory.decay_exponent(d, p, "Main").exponent


def test_weight_growth_vanishing_bracket():
    # 2/(d(p-1)) = a + 1 with d=1, p=2, a=1
    assert theory.decay_from_weight_growth(1, 2, 1) == 0


@given(subcritical_pair())
def test_main_improves_on_prop31_and_gks(dp):
    d, p = dp
    main = theory.decay_exponent(d, p, "Main").exponent
    prop = theory.decay_exponent(d, p, "Prop31").exponent
    assert main - prop == F(d, d + 2) / 2
    if p < thresholds(d)["1+1/d"]:
        gks = theory.decay_exponent(d, p, "GKS_prev").exponent
        assert gks <= prop <= main and gks < main


@pytest.mark.parametrize("d", [1, 2, 3])
def test_continuity_at_critical_threshold(d):
    limit = thresholds(d)["1+4/(3d)"]
    target = F(d, 2 * (d + 2))
    gaps = [abs(theory.decay_exponent(d, limit - F(1, 10 ** k), "Main").exponent - target) for k in (3, 6)]
    assert gaps[1] < gaps[0] and gaps[1] < 1e-5


def test_holder_examples():
    h = theory.holder_exponents(1, 2)
    assert (h.q_leb, h.alpha, h.beta) == (F(1), F(1, 2), F(4))
    h2 = theory.holder_exponents(2, F(7, 5))
    assert (h2.q_leb, h2.alpha) == (F(3, 2), F(1, 6))


@given(st.integers(1, 4), rational_in(F(1), F(9)))
def test_holder_identity(d, p):
    h = theory.holder_exponents(d, p)
    assert h.beta * h.alpha == (p + 1) / h.q_leb - 1
    assert 1 <= h.q_leb < 2 and 0 < h.alpha <= F(1, 2)
    assert h.beta > p + 1


def test_energy_example():
    e = theory.energy_exponents(1, 2)
    assert (e.theta, e.kappa, e.rhs_exponent) == (F(3, 10), F(5, 3), F(14, 3))
    assert 2 * 2 * e.kappa * (1 - e.theta) == F(14, 3)


def test_energy_pole():
    with pytest.raises(DomainError):
        theory.energy_exponents(1, 5)
    near = theory.energy_exponents(1, 5 - F(1, 1000))
    assert near.kappa > 1000


@given(subcritical_pair("1+4/d"))
def test_energy_invariants(dp):
    d, p = dp
    e = theory.energy_exponents(d, p)
    assert 0 < e.theta < 1 and e.kappa > 1
    assert e.rhs_exponent == 2 * p * e.kappa * (1 - e.theta)


def test_iteration_stages_d1_p2():
    res, stages, final = theory.iteration_stages(1, 2)
    assert [s.decay for s in stages] == [F(1, 6), F(8, 27), F(1, 3)]
    assert final.exponent == F(1, 3) == stages[-1].decay
    assert [s.a_n for s in stages] == [F(1, 2), F(1, 9), F(-31, 162)]
    assert res.n0 == 3
