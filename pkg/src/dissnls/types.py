"""Shared value types: model parameters, periodic grid, field, diagnostics.

Everything here is immutable after construction. The power ``p`` is held as
an exact :class:`fractions.Fraction` so that regime thresholds are decided
without rounding; floats appear only where the solver needs coefficients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from functools import cached_property
from typing import Union

import numpy as np

from . import _kernels

Rational = Union[int, str, Fraction, float]

#: fraction of each half-axis treated as the boundary shell
SHELL_FRACTION = 0.9
#: shell mass / total mass above which a run counts as boundary-contaminated
CONTAMINATION_LEVEL = 1e-6


class DomainError(ValueError):
    """A parameter lies outside the range where a formula or theorem applies."""


class RegimeError(ValueError):
    """Model parameters the simulator refuses (e.g. Im(lambda) > 0)."""


class NonFiniteError(FloatingPointError):
    """A field carries NaN/Inf samples."""

    def __init__(self, message: str, index=None, step=None):
        super().__init__(message)
        self.index = index
        self.step = step


def as_fraction(value: Rational) -> Fraction:
    """Exact rational from ``"a/b"``, a terminating decimal, an int or a Fraction.

    Floats are promoted through their shortest decimal repr, so ``1.5`` becomes
    ``3/2`` rather than a binary expansion.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("boolean is not a rational")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite value {value!r}")
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot interpret {value!r} as a rational")


@dataclass(frozen=True)
class ModelParams:
    d: int
    p: Fraction
    lambda_re: float
    lambda_im: float

    def __post_init__(self):
        object.__setattr__(self, "p", as_fraction(self.p))
        if int(self.d) != self.d or self.d < 1:
            raise DomainError(f"dimension must be a positive integer, got {self.d!r}")
        object.__setattr__(self, "d", int(self.d))
        if self.p <= 1:
            raise DomainError(f"power must satisfy p > 1, got p = {self.p}")
        object.__setattr__(self, "lambda_re", float(self.lambda_re))
        object.__setattr__(self, "lambda_im", float(self.lambda_im))

    @classmethod
    def from_complex(cls, d: int, p: Rational, lam: complex) -> "ModelParams":
        lam = complex(lam)
        return cls(d, as_fraction(p), lam.real, lam.imag)

    @property
    def lam(self) -> complex:
        return complex(self.lambda_re, self.lambda_im)

    @property
    def p_float(self) -> float:
        return float(self.p)

    def check_solver(self) -> None:
        """Raise unless the simulator can run these parameters."""
        if self.d not in (1, 2, 3):
            raise DomainError(f"solver supports d in {{1, 2, 3}}, got d = {self.d}")
        if self.lambda_im > 0:
            raise RegimeError(
                "Im(lambda) > 0 is the finite-time blow-up regime; the simulator "
                "requires the dissipative condition Im(lambda) < 0 (or 0 for the "
                "conservative control)"
            )


def thresholds(d: int) -> dict[str, Fraction]:
    """The four critical powers in increasing order."""
    return {
        "1+1/d": 1 + Fraction(1, d),
        "1+4/(3d)": 1 + Fraction(4, 3 * d),
        "1+2/d": 1 + Fraction(2, d),
        "1+4/d": 1 + Fraction(4, d),
    }


@dataclass(frozen=True)
class RegimeReport:
    dissipative: bool
    attractive: bool
    repulsive: bool
    strong_dissipative: bool
    positions: dict = dc_field(default_factory=dict)  # threshold name -> "below" | "equal" | "above"

    def as_dict(self) -> dict:
        return {
            "dissipative": self.dissipative,
            "attractive": self.attractive,
            "repulsive": self.repulsive,
            "strong_dissipative": self.strong_dissipative,
            "p_position": dict(self.positions),
        }


def classify_regime(params: ModelParams) -> RegimeReport:
    lam1, lam2 = params.lambda_re, params.lambda_im
    dissipative = lam2 < 0
    p = params.p
    # (p-1)|lam| <= (p+1)|lam2|, squared to stay away from sqrt
    lhs = (p - 1) ** 2 * (Fraction(lam1) ** 2 + Fraction(lam2) ** 2)
    rhs = (p + 1) ** 2 * Fraction(lam2) ** 2
    positions = {}
    for name, value in thresholds(params.d).items():
        positions[name] = "below" if p < value else ("equal" if p == value else "above")
    return RegimeReport(
        dissipative=dissipative,
        attractive=lam1 < 0,
        repulsive=lam1 > 0,
        strong_dissipative=dissipative and lhs <= rhs,
        positions=positions,
    )


@dataclass(frozen=True)
class Grid:
    """Periodic box ``[-L/2, L/2)^d`` sampled with ``N`` points per axis."""

    extents: tuple
    counts: tuple

    def __post_init__(self):
        ext = tuple(float(v) for v in np.atleast_1d(self.extents))
        cnt = tuple(int(v) for v in np.atleast_1d(self.counts))
        if len(cnt) == 1 and len(ext) > 1:
            cnt = cnt * len(ext)
        if len(ext) == 1 and len(cnt) > 1:
            ext = ext * len(cnt)
        if len(ext) != len(cnt):
            raise ValueError("extents and counts differ in length")
        for L, n in zip(ext, cnt):
            if not L > 0:
                raise ValueError(f"box extent must be positive, got {L}")
            if n <= 0 or n % 2:
                raise ValueError(f"point count must be a positive even integer, got {n}")
        object.__setattr__(self, "extents", ext)
        object.__setattr__(self, "counts", cnt)

    @classmethod
    def cube(cls, d: int, L: float, N: int) -> "Grid":
        return cls((L,) * d, (N,) * d)

    @property
    def d(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> tuple:
        return self.counts

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    @property
    def spacing(self) -> tuple:
        return tuple(L / n for L, n in zip(self.extents, self.counts))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis(self, i: int) -> np.ndarray:
        L, n = self.extents[i], self.counts[i]
        return -L / 2 + (L / n) * np.arange(n)

    def wavenumbers(self, i: int) -> np.ndarray:
        """Angular wavenumbers 2*pi*k/L in FFT order (Nyquist entry is -N/2)."""
        L, n = self.extents[i], self.counts[i]
        return 2 * np.pi * np.fft.fftfreq(n, d=L / n)

    @cached_property
    def coords(self) -> tuple:
        return tuple(np.meshgrid(*[self.axis(i) for i in range(self.d)], indexing="ij"))

    @cached_property
    def r2(self) -> np.ndarray:
        out = np.zeros(self.shape)
        for i in range(self.d):
            a = self.axis(i)
            out += (a ** 2).reshape([-1 if j == i else 1 for j in range(self.d)])
        return out

    @cached_property
    def k_axes(self) -> tuple:
        """Per-axis wavenumbers with the Nyquist entry zeroed, broadcast-shaped."""
        out = []
        for i in range(self.d):
            k = self.wavenumbers(i).copy()
            k[self.counts[i] // 2] = 0.0
            out.append(k.reshape([-1 if j == i else 1 for j in range(self.d)]))
        return tuple(out)

    @cached_property
    def k2(self) -> np.ndarray:
        """|xi|^2 on the full spectral grid, Nyquist modes included."""
        out = np.zeros(self.shape)
        for i in range(self.d):
            k = self.wavenumbers(i)
            out += (k ** 2).reshape([-1 if j == i else 1 for j in range(self.d)])
        return out

    @cached_property
    def k2_deriv(self) -> np.ndarray:
        """|xi|^2 with Nyquist modes zeroed, for derivative-type quantities."""
        out = np.zeros(self.shape)
        for k in self.k_axes:
            out = out + k ** 2
        return out

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep modes with |k| <= N/3 on every axis."""
        mask = np.ones(self.shape, dtype=bool)
        for i in range(self.d):
            n = self.counts[i]
            idx = np.abs(np.fft.fftfreq(n, d=1.0 / n))
            keep = (idx <= n // 3).reshape([-1 if j == i else 1 for j in range(self.d)])
            mask = mask & keep
        return mask

    @cached_property
    def shell_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for i in range(self.d):
            a = np.abs(self.axis(i)) >= SHELL_FRACTION * self.extents[i] / 2
            mask = mask | a.reshape([-1 if j == i else 1 for j in range(self.d)])
        return mask


def check_finite(values: np.ndarray, step=None) -> None:
    bad = ~np.isfinite(values)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        where = f" at step {step}" if step is not None else ""
        raise NonFiniteError(f"non-finite sample at index {idx}{where}", index=idx, step=step)


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.complex128, copy=True)
        if v.size != self.grid.size:
            raise ValueError(f"field has {v.size} samples, grid has {self.grid.size}")
        v = v.reshape(self.grid.shape)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(self.grid, values)

    def scaled(self, alpha: complex) -> "Field":
        return Field(self.grid, alpha * self.values)

    def __len__(self):
        return self.grid.size


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass_sq: float
    lp1_pow: float
    grad_sq: float
    weight_sq: float
    energy: float
    dissipation_integral: float = 0.0
    sigma_norm: float = 0.0
    contaminated: bool = False

    CSV_COLUMNS = (
        "t", "mass_sq", "lp1_pow", "grad_sq", "weight_sq",
        "energy", "dissipation_integral", "contaminated",
    )

    @property
    def mass(self) -> float:
        return math.sqrt(self.mass_sq)


def mass_sq(field: Field) -> float:
    return field.grid.cell_volume * _kernels.power_sum(field.values, 2.0)


def mass_sq_fourier(field: Field) -> float:
    uh = np.fft.fftn(field.values)
    return field.grid.cell_volume / field.grid.size * float(np.sum(np.abs(uh) ** 2))


def grad_sq(field: Field) -> float:
    g = field.grid
    uh = np.fft.fftn(field.values)
    return g.cell_volume / g.size * float(np.sum(g.k2_deriv * (uh.real ** 2 + uh.imag ** 2)))


def lebesgue_pow(field: Field, e: float) -> float:
    """``||u||_e^e`` by the rectangle rule."""
    return field.grid.cell_volume * _kernels.power_sum(field.values, e)


def weight_sq(field: Field) -> float:
    return field.grid.cell_volume * _kernels.weighted_abs2(field.values, field.grid.r2)


def shell_fraction(field: Field) -> float:
    v = field.values
    a2 = v.real ** 2 + v.imag ** 2
    total = float(np.sum(a2))
    if total == 0.0:
        return 0.0
    return float(np.sum(a2[field.grid.shell_mask])) / total


def norms(field: Field, params: ModelParams, t: float = 0.0,
          dissipation_integral: float = 0.0) -> DiagnosticsRecord:
    """All diagnostics of ``field`` at time ``t``.

    The gradient term is spectral (Nyquist mode excluded), ``weight_sq`` uses
    the box coordinate, and every integral is the rectangle rule with weight
    ``h^d``. ``dissipation_integral`` is passed through from the caller.

    ``energy`` is ``1/2 ||grad u||^2 + 2 Re(lam)/(p+1) ||u||_{p+1}^{p+1}``, the
    functional conserved by ``i u_t + 1/2 Lap u = Re(lam) |u|^(p-1) u``.
    """
    check_finite(field.values)
    m = mass_sq(field)
    lp = lebesgue_pow(field, params.p_float + 1.0)
    gs = grad_sq(field)
    ws = weight_sq(field)
    energy = 0.5 * gs + 2.0 * params.lambda_re / (params.p_float + 1.0) * lp
    return DiagnosticsRecord(
        t=float(t),
        mass_sq=m,
        lp1_pow=lp,
        grad_sq=gs,
        weight_sq=ws,
        energy=energy,
        dissipation_integral=float(dissipation_integral),
        sigma_norm=math.sqrt(m) + math.sqrt(gs) + math.sqrt(ws),
        contaminated=shell_fraction(field) > CONTAMINATION_LEVEL,
    )
