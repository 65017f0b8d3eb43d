"""Numerical checks of the functional inequalities behind the decay argument.

* the scale-invariant bound ``||f||_q <~ ||f||_2^(1 - d a/m) || |x|^m f ||_2^(d a/m)``,
  ``a = 1/q - 1/2``;
* the Holder interpolation ``||f||_{p+1}^{p+1} >= ||f||_2^beta ||f||_q^(p+1-beta)``
  (constant one);
* the Gagliardo-Nirenberg step of the energy estimate with ``g = |f|^((p+1)/2)``.

Sample families are built from resolution-independent random parameters, so
the same draw can be rendered on a grid and on its refinement.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Callable

import numpy as np
from numpy.polynomial import hermite as _herm

from . import theory
from .types import CONTAMINATION_LEVEL, DomainError, Field, Grid, ModelParams, as_fraction, shell_fraction

#: worst ratio may move by at most this fraction under grid doubling
REFINEMENT_TOLERANCE = 0.05
#: Holder interpolation holds with constant 1; allow rounding only
INTERPOLATION_TOLERANCE = 1e-9
#: R for every centered Gaussian with q = 1, m = 1 in d = 1: 2^(3/4) pi^(1/4)
CENTERED_GAUSSIAN_RATIO = 2 ** 0.75 * math.pi ** 0.25


def lq_norm(field: Field, q) -> float:
    q = float(q)
    v = np.abs(field.values)
    return float((field.grid.cell_volume * np.sum(v ** q)) ** (1.0 / q))


def weighted_l2(field: Field, m: int) -> float:
    """``|| |x|^m f ||_2`` with the box coordinate."""
    v = np.abs(field.values)
    return float(math.sqrt(field.grid.cell_volume * np.sum(field.grid.r2 ** m * v * v)))


def _check_q(d: int, q: Fraction) -> None:
    if d == 1:
        ok = 1 <= q < 2
        rng = "[1, 2)"
    else:
        lo = Fraction(2 * d, d + 2)
        ok = lo < q < 2
        rng = f"({lo}, 2)"
    if not ok:
        raise DomainError(f"q = {q} outside the admissible range {rng} for d = {d}")


def scale_ratio(f: Field, q_leb, m: int) -> float:
    """``R(f) = ||f||_q / (||f||_2^(1 - d a/m) || |x|^m f ||_2^(d a/m))``."""
    q = as_fraction(q_leb)
    d = f.grid.d
    _check_q(d, q)
    if m < 1 or int(m) != m:
        raise DomainError(f"m must be a positive integer, got {m}")
    l2 = lq_norm(f, 2)
    if l2 == 0:
        raise ValueError("scale ratio undefined for the zero field")
    alpha = 1 / q - Fraction(1, 2)
    e = float(d * alpha / m)
    wl2 = weighted_l2(f, m)
    return lq_norm(f, q) / (l2 ** (1 - e) * wl2 ** e)


# --- sample families ---------------------------------------------------------

Sample = Callable[[Grid], Field]


def _gaussian_sample(rng, d, centered):
    width = rng.uniform(0.6, 2.5)
    amp = rng.uniform(0.2, 3.0) * np.exp(2j * np.pi * rng.uniform())
    center = np.zeros(d) if centered else rng.uniform(-4.0, 4.0, size=d)

    def build(grid: Grid) -> Field:
        r2 = sum((x - c) ** 2 for x, c in zip(grid.coords, center))
        return Field(grid, amp * np.exp(-r2 / (2 * width ** 2)))

    return build


def centered_gaussians(rng, d):
    return _gaussian_sample(rng, d, centered=True)


def gaussians(rng, d):
    return _gaussian_sample(rng, d, centered=False)


def hermite_combinations(rng, d, degree=5):
    scale = rng.uniform(0.7, 2.0)
    shift = rng.uniform(-2.0, 2.0, size=d)
    coefs = [(rng.normal(size=degree + 1) + 1j * rng.normal(size=degree + 1))
             / np.sqrt([2.0 ** n * math.factorial(n) for n in range(degree + 1)])
             for _ in range(d)]

    def build(grid: Grid) -> Field:
        out = np.ones(grid.shape, dtype=complex)
        for x, c, s, cf in zip(grid.coords, shift, [scale] * d, coefs):
            y = (x - c) / s
            out = out * _herm.hermval(y, cf) * np.exp(-y * y / 2)
        return Field(grid, out)

    return build


def windowed_bandlimited(rng, d, modes=6, kmax=2.0, window=3.0):
    ks = rng.uniform(-kmax, kmax, size=(modes, d))
    cs = rng.normal(size=modes) + 1j * rng.normal(size=modes)
    shift = rng.uniform(-2.0, 2.0, size=d)

    def build(grid: Grid) -> Field:
        out = np.zeros(grid.shape, dtype=complex)
        for k, c in zip(ks, cs):
            out += c * np.exp(1j * sum(kk * x for kk, x in zip(k, grid.coords)))
        r2 = sum((x - s) ** 2 for x, s in zip(grid.coords, shift))
        return Field(grid, out * np.exp(-r2 / (2 * window ** 2)))

    return build


def gaussian_mixtures(rng, d, components=3):
    parts = [_gaussian_sample(rng, d, centered=False) for _ in range(rng.integers(1, components + 1))]

    def build(grid: Grid) -> Field:
        vals = sum(pt(grid).values for pt in parts)
        return Field(grid, vals)

    return build


FAMILIES = {
    "centered_gaussian": centered_gaussians,
    "gaussian": gaussians,
    "hermite": hermite_combinations,
    "windowed": windowed_bandlimited,
    "mixture": gaussian_mixtures,
}


def family_samples(family, d: int, trials: int, seed: int = 0) -> list:
    """``trials`` independent samples, each from its own spawned generator."""
    make = FAMILIES[family] if isinstance(family, str) else family
    children = np.random.SeedSequence(seed).spawn(trials)
    return [make(np.random.default_rng(c), d) for c in children]


# --- verdicts ----------------------------------------------------------------------


@dataclass
class SweepReport:
    name: str
    trials: int
    used: int
    skipped: int
    worst: float
    worst_refined: float
    refinement_change: float
    passed: bool
    extra: dict

    def as_dict(self) -> dict:
        return asdict(self)


def _confined(f: Field) -> bool:
    return shell_fraction(f) <= CONTAMINATION_LEVEL and np.any(f.values != 0)


def verify_dual_gn(family, q_leb, m: int, trials: int = 200, d: int = 1, L: float = 60.0,
                   N: int = 1024, seed: int = 0) -> SweepReport:
    """Worst ``R`` over a sample family on an ``N`` grid and on its ``2N`` refinement.

    Zero or boundary-touching samples are skipped. Passes when the worst
    ratio is finite and moves by at most 5% under refinement.
    """
    coarse, fine = Grid.cube(d, L, N), Grid.cube(d, L, 2 * N)
    ratios, ratios_fine, skipped = [], [], 0
    for build in family_samples(family, d, trials, seed):
        f = build(coarse)
        if not _confined(f):
            skipped += 1
            continue
        ratios.append(scale_ratio(f, q_leb, m))
        ratios_fine.append(scale_ratio(build(fine), q_leb, m))
    if not ratios:
        return SweepReport("dual_gn", trials, 0, skipped, float("nan"), float("nan"),
                           float("nan"), False, {"q": str(q_leb), "m": m})
    worst, worst_fine = max(ratios), max(ratios_fine)
    change = abs(worst - worst_fine) / worst_fine
    passed = math.isfinite(worst) and change <= REFINEMENT_TOLERANCE
    return SweepReport("dual_gn", trials, len(ratios), skipped, worst, worst_fine, change, passed,
                       {"q": str(as_fraction(q_leb)), "m": m, "d": d,
                        "spread": max(ratios) - min(ratios), "ratios": ratios})


def verify_interpolation(f: Field, params: ModelParams, exps=None) -> float:
    """``||f||_{p+1}^{p+1} / (||f||_2^beta ||f||_q^(p+1-beta))``; at least 1 by Holder."""
    if exps is None:
        exps = theory.holder_exponents(params.d, params.p)
    p1 = params.p_float + 1.0
    beta = float(exps.beta)
    lp = lq_norm(f, p1)
    l2 = lq_norm(f, 2)
    lq = lq_norm(f, exps.q_leb)
    if min(lp, l2, lq) == 0:
        raise ValueError("interpolation margin undefined for vanishing norms")
    log_m = p1 * math.log(lp) - beta * math.log(l2) - (p1 - beta) * math.log(lq)
    return math.exp(log_m)


def interpolation_sweep(params: ModelParams, trials: int = 500, family="mixture", L: float = 60.0,
                        N: int = 1024, seed: int = 0) -> SweepReport:
    exps = theory.holder_exponents(params.d, params.p)
    grid = Grid.cube(params.d, L, N)
    margins = [verify_interpolation(b(grid), params, exps) for b in family_samples(family, params.d, trials, seed)]
    worst = min(margins)
    return SweepReport("interpolation", trials, len(margins), 0, worst, float("nan"), float("nan"),
                       worst >= 1 - INTERPOLATION_TOLERANCE,
                       {"beta": str(exps.beta), "q": str(exps.q_leb), "p": str(params.p)})


def _spectral_grad_sq(values: np.ndarray, grid: Grid) -> float:
    uh = np.fft.fftn(values)
    return grid.cell_volume / grid.size * float(np.sum(grid.k2_deriv * np.abs(uh) ** 2))


def verify_gn_energy_step(f: Field, params: ModelParams) -> float:
    """``||g||_r^r / (||f||_2^(2p(1-theta)) ||grad g||_2^(r theta))`` with ``g = |f|^((p+1)/2)``, ``r = 4p/(p+1)``."""
    exps = theory.energy_exponents(params.d, params.p)
    p = params.p_float
    theta = float(exps.theta)
    r = 4 * p / (p + 1)
    g = np.abs(f.values) ** ((p + 1) / 2)
    grid = f.grid
    gr = grid.cell_volume * float(np.sum(g ** r))
    l2 = lq_norm(f, 2)
    dg = math.sqrt(_spectral_grad_sq(g, grid))
    if l2 == 0 or dg == 0:
        raise ValueError("Gagliardo-Nirenberg ratio undefined for the zero field")
    return gr / (l2 ** (2 * p * (1 - theta)) * dg ** (r * theta))


def gn_energy_sweep(params: ModelParams, trials: int = 100, family="gaussian", L: float = 60.0,
                    N: int = 1024, seed: int = 0) -> SweepReport:
    coarse, fine = Grid.cube(params.d, L, N), Grid.cube(params.d, L, 2 * N)
    a, b = [], []
    for build in family_samples(family, params.d, trials, seed):
        a.append(verify_gn_energy_step(build(coarse), params))
        b.append(verify_gn_energy_step(build(fine), params))
    worst, worst_fine = max(a), max(b)
    change = abs(worst - worst_fine) / worst_fine
    return SweepReport("gn_energy", trials, len(a), 0, worst, worst_fine, change,
                       math.isfinite(worst) and change <= REFINEMENT_TOLERANCE,
                       {"theta": str(theory.energy_exponents(params.d, params.p).theta)})
