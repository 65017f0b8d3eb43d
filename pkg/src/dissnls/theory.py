"""Exact decay exponents, bootstrap recurrence and auxiliary exponents.

All arithmetic is on :class:`fractions.Fraction`; floats appear only when a
rate is evaluated at a time ``t``. Thresholds are compared exactly, so the
critical (logarithmic) and subcritical (power) branches never blur.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np

from .types import DomainError, Rational, as_fraction, thresholds


class Theorem(enum.Enum):
    HLN = "HLN"            # strong-dissipative rate, p <= 1 + 2/d
    GKS_PREV = "GKS_prev"  # earlier attractive-dissipative rate, p <= 1 + 1/d
    PROP31 = "Prop31"      # first-stage refined rate, p <= 1 + 4/(3d)
    MAIN = "Main"          # final rate after iteration, p <= 1 + 4/(3d)

    @classmethod
    def parse(cls, name) -> "Theorem":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "_")
        for member in cls:
            if member.value.lower() == key or member.name.lower() == key:
                return member
        raise ValueError(f"unknown theorem {name!r}; choose from {[m.value for m in cls]}")


#: which threshold bounds each theorem's admissible range of p
THEOREM_LIMIT = {
    Theorem.HLN: "1+2/d",
    Theorem.GKS_PREV: "1+1/d",
    Theorem.PROP31: "1+4/(3d)",
    Theorem.MAIN: "1+4/(3d)",
}


@dataclass(frozen=True)
class Rate:
    """Decay law ``(1+t)^(-exponent)`` (kind ``"power"``) or ``log(1+t)^(-exponent)`` (``"log"``)."""

    kind: str
    exponent: Fraction
    theorem: str = ""

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "power":
            return (1.0 + t) ** (-float(self.exponent))
        return np.log1p(t) ** (-float(self.exponent))

    def describe(self) -> str:
        base = "(1+t)" if self.kind == "power" else "log(1+t)"
        return f"{base}^-({self.exponent})"


def _check_range(d: int, p: Fraction, theorem: Theorem) -> Fraction:
    if d < 1:
        raise DomainError(f"d must be >= 1, got {d}")
    if p <= 1:
        raise DomainError(f"p must exceed 1, got p = {p}")
    name = THEOREM_LIMIT[theorem]
    limit = thresholds(d)[name]
    if p > limit:
        raise DomainError(f"{theorem.value} needs p <= {name} = {limit}; got p = {p}")
    return limit


def decay_exponent(d: int, p: Rational, theorem) -> Rate:
    """The L2 decay law guaranteed by ``theorem`` for power ``p`` in dimension ``d``."""
    theorem = Theorem.parse(theorem)
    p = as_fraction(p)
    limit = _check_range(d, p, theorem)
    pre = Fraction(d, d + 2)
    dp = d * (p - 1)
    if p == limit:
        log_exp = {
            Theorem.HLN: pre,
            Theorem.GKS_PREV: Fraction(d) / ((d + 2) * (p - 1)),
            Theorem.PROP31: Fraction(3 * d, 2 * (d + 2)),
            Theorem.MAIN: Fraction(3 * d, 2 * (d + 2)),
        }[theorem]
        return Rate("log", log_exp, theorem.value)
    if theorem in (Theorem.HLN, Theorem.MAIN):
        gamma = pre * (2 / dp - 1)
    elif theorem is Theorem.PROP31:
        gamma = pre * (2 / dp - Fraction(3, 2))
    else:
        gamma = pre * (2 / dp - (3 - dp) / (2 - dp))
    return Rate("power", gamma, theorem.value)


def decay_from_weight_growth(d: int, p: Rational, a: Rational) -> Fraction:
    """Decay exponent obtained when ``||grad u|| <~ (1+t)^a``, hence ``||xu|| <~ (1+t)^(a+1)``."""
    p = as_fraction(p)
    a = as_fraction(a)
    if p <= 1:
        raise DomainError(f"p must exceed 1, got p = {p}")
    return Fraction(d, d + 2) * (Fraction(2) / (d * (p - 1)) - (a + 1))


@dataclass(frozen=True)
class HolderExponents:
    q_leb: Fraction
    alpha: Fraction
    beta: Fraction


def holder_exponents(d: int, p: Rational) -> HolderExponents:
    p = as_fraction(p)
    if p <= 1:
        raise DomainError(f"p must exceed 1, got p = {p}")
    q = Fraction(1) if d == 1 else Fraction(2 * (d + 1), d + 2)
    alpha = 1 / q - Fraction(1, 2)
    beta = ((p + 1) / q - 1) / alpha
    return HolderExponents(q, alpha, beta)


@dataclass(frozen=True)
class EnergyExponents:
    theta: Fraction
    kappa: Fraction
    rhs_exponent: Fraction


def energy_exponents(d: int, p: Rational) -> EnergyExponents:
    p = as_fraction(p)
    if p <= 1:
        raise DomainError(f"p must exceed 1, got p = {p}")
    limit = thresholds(d)["1+4/d"]
    if p >= limit:
        raise DomainError(f"energy exponents need p < 1+4/d = {limit}; got p = {p}")
    dp = d * (p - 1)
    theta = dp * (p + 1) / (p * (4 + dp))
    kappa = (4 + dp) / (4 - dp)
    rhs = 2 * (4 * p - dp) / (4 - dp)
    if rhs != 2 * p * kappa * (1 - theta):
        raise AssertionError("energy exponent identity violated")  # algebraic, cannot happen
    return EnergyExponents(theta, kappa, rhs)


def recurrence_coefficients(d: int, p: Rational) -> tuple:
    """``(r, q)`` of the bootstrap map ``a -> r a + q``."""
    p = as_fraction(p)
    dp = d * (p - 1)
    r = d * (4 * p - dp) / ((d + 2) * (4 - dp))
    q = Fraction(1, 2) - r * (2 / dp - 1)
    return r, q


@dataclass(frozen=True)
class RecurrenceResult:
    d: int
    p: Fraction
    r: Fraction
    q_rec: Fraction
    a_seq: list = field(default_factory=list)  # a_1, a_2, ... (at most max_terms entries)
    a_inf: Fraction = Fraction(0)
    n0: int = 0

    @property
    def a1(self) -> Fraction:
        return Fraction(1, 2)

    def term(self, n: int) -> Fraction:
        """Closed form ``a_n = a_inf + r^(n-1) (a_1 - a_inf)``."""
        if n < 1:
            raise ValueError("terms are indexed from 1")
        return self.a_inf + self.r ** (n - 1) * (self.a1 - self.a_inf)


def _first_negative_index(r: Fraction, a1: Fraction, a_inf: Fraction) -> int:
    # smallest n with r^(n-1) < c, c = -a_inf / (a1 - a_inf) in (0, 1)
    c = -a_inf / (a1 - a_inf)
    with mpmath.workdps(60):
        ratio = mpmath.log(mpmath.mpf(c.numerator) / c.denominator) / \
            mpmath.log(mpmath.mpf(r.numerator) / r.denominator)
        k = int(mpmath.floor(ratio))
        if abs(ratio - mpmath.nint(ratio)) < mpmath.mpf(10) ** -40:
            k = int(mpmath.nint(ratio))
            # settle the tie exactly: need r^(m) < c with m = n - 1
            return k + 1 + (0 if r ** k < c else 1)
    return k + 2


def recurrence(d: int, p: Rational, max_terms: int = 1_000) -> RecurrenceResult:
    """Iterate ``a_{n+1} = r a_n + q`` from ``a_1 = 1/2`` until the first negative term.

    The sequence is stored exactly up to ``n0`` (or ``max_terms`` entries when
    ``n0`` is larger, as happens next to the threshold; ``n0`` itself is then
    located from the closed form).
    """
    p = as_fraction(p)
    if p <= 1:
        raise DomainError(f"recurrence needs p > 1; got p = {p}")
    limit = thresholds(d)["1+4/(3d)"]
    if p >= limit:
        raise DomainError(f"recurrence needs p < 1+4/(3d) = {limit}; got p = {p}")
    r, q = recurrence_coefficients(d, p)
    a_inf = q / (1 - r)
    seq = [Fraction(1, 2)]
    n0 = None
    while len(seq) < max_terms:
        if seq[-1] < 0:
            n0 = len(seq)
            break
        seq.append(r * seq[-1] + q)
    if n0 is None and seq[-1] < 0:
        n0 = len(seq)
    if n0 is None:
        n0 = _first_negative_index(r, seq[0], a_inf)
    return RecurrenceResult(d=d, p=p, r=r, q_rec=q, a_seq=seq, a_inf=a_inf, n0=n0)


@dataclass(frozen=True)
class Stage:
    n: int
    a_n: Fraction
    decay: Fraction


def iteration_stages(d: int, p: Rational) -> tuple:
    """``(result, stages, final)`` with one ``Stage`` per ``n <= n0`` and the Main rate.

    At ``n0`` the gradient bound has become uniform, so that stage uses
    ``a = 0`` and its exponent is Main's. Only the first ``max_terms`` stages
    are listed when ``n0`` is huge.
    """
    res = recurrence(d, p)
    stages = [Stage(n, a, decay_from_weight_growth(d, res.p, max(a, Fraction(0))))
              for n, a in enumerate(res.a_seq[: res.n0], start=1)]
    final = decay_exponent(d, res.p, Theorem.MAIN)
    return res, stages, final
