"""Strang-split pseudo-spectral integrator for i u_t + (1/2) Lap u = lam |u|^(p-1) u.

The linear substep is the exact Fourier multiplier exp(-i|xi|^2 tau / 2); the
nonlinear substep is the exact pointwise flow of i u' = lam |u|^(p-1) u, whose
modulus obeys rho' = 2 Im(lam) rho^((p+1)/2). See :mod:`dissnls._kernels` for
the pointwise loop.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .types import (
    CONTAMINATION_LEVEL,
    DiagnosticsRecord,
    Field,
    ModelParams,
    NonFiniteError,
    RegimeError,
    check_finite,
    norms,
    shell_fraction,
)


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    t_end: float
    record_stride: int = 100
    dealias: Optional[bool] = None  # None: on for p >= 2, off otherwise

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= 0:
            raise ValueError(f"t_end must be non-negative, got {self.t_end}")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValueError(f"record_stride must be a positive integer, got {self.record_stride}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def dealias_for(self, params: ModelParams) -> bool:
        if self.dealias is None:
            return params.p >= 2
        return bool(self.dealias)


def _propagator(grid, tau: float) -> np.ndarray:
    return np.exp(-0.5j * tau * grid.k2)


def linear_step(field: Field, tau: float) -> Field:
    """Free Schrodinger flow U(tau) = exp(i tau Lap / 2), exact on the grid."""
    check_finite(field.values)
    if tau == 0:
        return field
    uh = np.fft.fftn(field.values) * _propagator(field.grid, tau)
    return field.with_values(np.fft.ifftn(uh))


def nonlinear_step(field: Field, params: ModelParams, tau: float) -> Field:
    """Exact pointwise solution of i u' = lam |u|^(p-1) u over time ``tau``."""
    if params.lambda_im > 0:
        raise RegimeError("nonlinear substep requires Im(lambda) <= 0")
    check_finite(field.values)
    out, _ = _kernels.nonlinear_substep(field.values, params.p_float, params.lambda_re,
                                        params.lambda_im, tau)
    return field.with_values(out)


def strang_step(field: Field, params: ModelParams, config: SolverConfig) -> Field:
    """Half linear, full nonlinear, half linear; optional 2/3 dealiasing after the middle step."""
    dt = config.dt
    half = linear_step(field, dt / 2)
    mid = nonlinear_step(half, params, dt)
    if config.dealias_for(params):
        uh = np.fft.fftn(mid.values) * field.grid.dealias_mask
        mid = field.with_values(np.fft.ifftn(uh))
    return linear_step(mid, dt / 2)


@dataclass
class RunSummary:
    n_steps: int
    n_records: int
    final: DiagnosticsRecord
    final_field: Field
    contaminated: bool
    contaminated_since: Optional[float]
    backend: str
    records: list = dc_field(default_factory=list)


def evolve(field: Field, params: ModelParams, config: SolverConfig,
           sink: Optional[Callable[[DiagnosticsRecord], None]] = None) -> RunSummary:
    """Advance ``field`` to ``config.t_end``, emitting diagnostics every ``record_stride`` steps.

    Consecutive half linear steps are fused into one full step; the full-step
    state is branched off with an extra half step, so the trajectory itself
    does not depend on ``record_stride``. The dissipation integral is the
    trapezoidal rule for ``2 Im(lam) int_0^t ||u||_{p+1}^{p+1} ds`` over every
    full step, so ``mass_sq(t) - mass_sq(0) - dissipation_integral(t)`` is the
    discrete residual of the mass identity.
    """
    params.check_solver()
    grid = field.grid
    if grid.d != params.d:
        raise ValueError(f"grid dimension {grid.d} does not match d = {params.d}")
    check_finite(field.values, step=0)

    records = []
    emit = sink if sink is not None else records.append
    dt = config.dt
    n_steps = config.n_steps
    p = params.p_float
    lam1, lam2 = params.lambda_re, params.lambda_im
    hvol = grid.cell_volume
    p_half = _propagator(grid, dt / 2)
    p_full = _propagator(grid, dt)
    mask = grid.dealias_mask if config.dealias_for(params) else None

    state = {"contaminated": False, "since": None, "count": 0}

    def record(values, t, diss):
        f = Field(grid, values)
        rec = norms(f, params, t=t, dissipation_integral=diss)
        if not state["contaminated"] and shell_fraction(f) > CONTAMINATION_LEVEL:
            state["contaminated"] = True
            state["since"] = t
        if state["contaminated"] != rec.contaminated:
            rec = DiagnosticsRecord(**{**rec.__dict__, "contaminated": state["contaminated"]})
        emit(rec)
        state["count"] += 1
        return f, rec

    final_field, final = record(field.values, 0.0, 0.0)
    diss = 0.0
    if n_steps > 0:
        coef = lam2 * dt * hvol  # trapezoid: 2 lam2 * dt/2 * (s_prev + s_next) * h^d
        s_prev = _kernels.power_sum(field.values, p + 1.0)
        u = np.fft.ifftn(np.fft.fftn(field.values) * p_half)
        for n in range(1, n_steps + 1):
            u, _ = _kernels.nonlinear_substep(u, p, lam1, lam2, dt)
            uh = np.fft.fftn(u)
            if mask is not None:
                uh *= mask
            full = np.fft.ifftn(uh * p_half)
            s_next = _kernels.power_sum(full, p + 1.0)
            if not math.isfinite(s_next):
                check_finite(full, step=n)
                raise NonFiniteError(f"non-finite state at step {n}", step=n)
            diss += coef * (s_prev + s_next)
            s_prev = s_next
            if n % config.record_stride == 0 or n == n_steps:
                final_field, final = record(full, n * dt, diss)
            if n < n_steps:
                u = np.fft.ifftn(uh * p_full)

    return RunSummary(
        n_steps=n_steps,
        n_records=state["count"],
        final=final,
        final_field=final_field,
        contaminated=state["contaminated"],
        contaminated_since=state["since"],
        backend=_kernels.backend(),
        records=records,
    )


def gradient(field: Field) -> list:
    """Spectral gradient components (Nyquist mode zeroed)."""
    uh = np.fft.fftn(field.values)
    return [np.fft.ifftn(1j * k * uh) for k in field.grid.k_axes]


def galilean_selftest(field: Field, tau: float) -> tuple:
    """Relative L2 discrepancies of J(tau) = x + i tau grad against its two factorizations.

    Returns ``(r_group, r_phase)`` for ``U(tau) x U(-tau)`` and
    ``M(tau) (i tau grad) M(-tau)`` with ``M(t) = exp(i|x|^2 / (2t))``.
    """
    grid = field.grid
    v = field.values
    grads = gradient(field)
    direct = [x * v + 1j * tau * g for x, g in zip(grid.coords, grads)]
    scale = math.sqrt(sum(float(np.sum(np.abs(c) ** 2)) for c in direct))
    if scale == 0:
        return 0.0, 0.0

    back = linear_step(field, -tau)
    err1 = 0.0
    for x, ref in zip(grid.coords, direct):
        fwd = linear_step(Field(grid, x * back.values), tau).values
        err1 += float(np.sum(np.abs(fwd - ref) ** 2))
    r1 = math.sqrt(err1) / scale

    if tau == 0:
        raise ValueError("the M(t) factorization needs tau != 0")
    chirp = np.exp(1j * grid.r2 / (2 * tau))
    inner = Field(grid, np.conj(chirp) * v)
    err2 = 0.0
    for g, ref in zip(gradient(inner), direct):
        err2 += float(np.sum(np.abs(chirp * (1j * tau * g) - ref) ** 2))
    r2 = math.sqrt(err2) / scale
    return r1, r2


class DiagnosticsCSV:
    """Sink writing the diagnostics CSV contract, one row per record."""

    def __init__(self, path):
        self.path = path
        self._fh = open(path, "w", newline="")
        self._fh.write(",".join(DiagnosticsRecord.CSV_COLUMNS) + "\n")

    def __call__(self, rec: DiagnosticsRecord) -> None:
        self._fh.write(format_csv_row(rec) + "\n")

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def format_csv_row(rec: DiagnosticsRecord) -> str:
    vals = [rec.t, rec.mass_sq, rec.lp1_pow, rec.grad_sq, rec.weight_sq, rec.energy,
            rec.dissipation_integral]
    return ",".join("%.17g" % v for v in vals) + ",%d" % int(rec.contaminated)


def read_diagnostics_csv(path, params: Optional[ModelParams] = None) -> list:
    """Parse a diagnostics CSV back into records (sigma_norm is recomputed)."""
    import csv

    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(DiagnosticsRecord.CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            vals = {k: float(row[k]) for k in DiagnosticsRecord.CSV_COLUMNS if k != "contaminated"}
            sigma = math.sqrt(vals["mass_sq"]) + math.sqrt(vals["grad_sq"]) + math.sqrt(vals["weight_sq"])
            out.append(DiagnosticsRecord(**vals, sigma_norm=sigma,
                                         contaminated=row["contaminated"].strip() in ("1", "True", "true")))
    return out
