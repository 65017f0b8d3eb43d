"""Verdicts on diagnostics series: decay fits, decay bounds, growth and monotonicity checks.

The theoretical rates are upper bounds with unspecified constants, so a rate
is checked by anchoring the constant at the first record of the window and
asking that the data never rise above the anchored curve (up to 1%).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import theory
from .types import DiagnosticsRecord, ModelParams

#: relative slack for the anchored upper-bound check
BOUND_TOLERANCE = 1e-2
#: relative tolerance on record-to-record mass increase (rounding only)
MASS_TOLERANCE = 1e-12
#: fitted exponent may fall short of the theoretical one by this much
FIT_SLACK = 0.15
#: relative mass-identity residual allowed at dt = 1e-3; the residual is O(dt^2)
MASS_IDENTITY_TOLERANCE = 1e-6
MIN_RECORDS = 20

PAPER_TAGS = frozenset({
    "ide:1", "uni:1", "en:ineq1", "uni:3b", "eq:3", "appendix-A",
    "thm:1", "prop:31", "lem:in1", "interpolation", "gn-energy",
})


class InsufficientDataError(ValueError):
    pass


@dataclass
class Verdict:
    name: str
    tag: str
    status: str  # PASS | FAIL | UNRELIABLE | N/A
    margin: float
    tolerance: float
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.tag not in PAPER_TAGS:
            raise ValueError(f"unknown reference tag {self.tag!r}")

    @property
    def passed(self) -> bool:
        return self.status in ("PASS", "N/A")

    def as_dict(self) -> dict:
        out = asdict(self)
        out["margin"] = _json_float(self.margin)
        out["tolerance"] = _json_float(self.tolerance)
        return out


def _json_float(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else str(x)


def _status(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


def _arrays(series: Sequence[DiagnosticsRecord]) -> dict:
    return {
        "t": np.array([r.t for r in series], dtype=float),
        "mass_sq": np.array([r.mass_sq for r in series], dtype=float),
        "grad_sq": np.array([r.grad_sq for r in series], dtype=float),
        "weight_sq": np.array([r.weight_sq for r in series], dtype=float),
        "energy": np.array([r.energy for r in series], dtype=float),
        "lp1_pow": np.array([r.lp1_pow for r in series], dtype=float),
        "diss": np.array([r.dissipation_integral for r in series], dtype=float),
        "contaminated": np.array([r.contaminated for r in series], dtype=bool),
    }


def default_window(series) -> tuple:
    """The last decade ``[T/10, T]`` of the run."""
    t_end = series[-1].t
    return (t_end / 10.0, t_end)


def _select(series, window, kind):
    if window is None:
        window = default_window(series)
    t_lo, t_hi = float(window[0]), float(window[1])
    if kind == "log" and t_lo < 1:
        raise ValueError(f"log-power fits need t_lo >= 1, got {t_lo}")
    sel = [r for r in series if t_lo <= r.t <= t_hi]
    if len(sel) < MIN_RECORDS:
        raise InsufficientDataError(
            f"{len(sel)} records in window [{t_lo}, {t_hi}], need at least {MIN_RECORDS}")
    m = np.array([r.mass_sq for r in sel])
    if np.any(m <= 0):
        raise ValueError("zero mass in fit window")
    t = np.array([r.t for r in sel])
    return (t_lo, t_hi), t, np.sqrt(m), sel


def _log_time(t, kind):
    if kind == "power":
        return np.log1p(t)
    if kind == "log":
        return np.log(np.log1p(t))
    raise ValueError(f"kind must be 'power' or 'log', got {kind!r}")


@dataclass
class RateFit:
    window: tuple
    kind: str
    exponent: float
    constant: float
    residual: float
    bound_margin: float
    n_points: int

    def as_dict(self) -> dict:
        return asdict(self)


def fit_rate(series: Sequence[DiagnosticsRecord], window=None, kind: str = "power") -> RateFit:
    """Least-squares slope of ``log ||u||_2`` against ``log(1+t)`` or ``log log(1+t)``.

    Returns the negated slope as the exponent. ``bound_margin`` is the largest
    ratio of the data to the fitted law with its constant anchored at the
    first record of the window.
    """
    window, t, norm, sel = _select(series, window, kind)
    x = _log_time(t, kind)
    y = np.log(norm)
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    law = np.exp(slope * x)
    c_ref = norm[0] / law[0]
    return RateFit(
        window=window,
        kind=kind,
        exponent=float(-slope),
        constant=float(math.exp(intercept)),
        residual=float(np.sqrt(np.mean(resid ** 2))),
        bound_margin=float(np.max(norm / (c_ref * law))),
        n_points=len(sel),
    )


@dataclass
class BoundCheck:
    theorem: str
    rate: str
    window: tuple
    margin: float
    c_ref: float
    passed: bool
    contaminated: bool


def check_upper_bound(series: Sequence[DiagnosticsRecord], rate: theory.Rate, window=None) -> BoundCheck:
    """Largest ratio ``||u(t)|| / (C_ref rate(t))`` over the window, ``C_ref`` tight at its first record."""
    window, t, norm, sel = _select(series, window, rate.kind)
    curve = rate(t)
    c_ref = norm[0] / curve[0]
    margin = float(np.max(norm / (c_ref * curve)))
    return BoundCheck(
        theorem=rate.theorem,
        rate=rate.describe(),
        window=window,
        margin=margin,
        c_ref=float(c_ref),
        passed=margin <= 1 + BOUND_TOLERANCE,
        contaminated=any(r.contaminated for r in sel),
    )


def mass_identity_tolerance(dt: Optional[float]) -> float:
    """``1e-6`` at ``dt <= 1e-3``, scaled by ``(dt / 1e-3)^2`` for coarser steps."""
    if dt is None:
        return MASS_IDENTITY_TOLERANCE
    return MASS_IDENTITY_TOLERANCE * max(1.0, (dt / 1e-3) ** 2)


def mass_residual(series: Sequence[DiagnosticsRecord]) -> np.ndarray:
    """Relative residual of ``mass(t) = mass(0) + 2 Im(lam) int ||u||_{p+1}^{p+1}`` at each record."""
    a = _arrays(series)
    m0 = a["mass_sq"][0]
    if m0 == 0:
        return np.zeros_like(a["mass_sq"])
    return (a["mass_sq"] - m0 - a["diss"]) / m0


def _trapezoid_cumulative(y, t):
    out = np.zeros_like(y)
    if len(y) > 1:
        out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def check_monotone_bounds(series: Sequence[DiagnosticsRecord], params: ModelParams,
                          dt: Optional[float] = None) -> list:
    """Verdicts (a)-(e): mass monotone, energy control, gradient growth, virial rate, integrated virial.

    ``dt`` sets the energy tolerance ``10 dt^2 |E(0)|`` per record interval;
    without it the interval between records is used.
    """
    a = _arrays(series)
    t = a["t"]
    out = []
    contaminated = bool(a["contaminated"].any())

    # (a) mass non-increasing, never above the initial mass
    m = a["mass_sq"]
    scale = m[0] if m[0] > 0 else 1.0
    rises = np.diff(m) / scale if len(m) > 1 else np.zeros(1)
    margin = float(max(rises.max(initial=0.0), (m.max() - m[0]) / scale))
    out.append(Verdict("mass_monotone", "uni:1", _status(margin <= MASS_TOLERANCE), margin,
                       MASS_TOLERANCE, {"max_relative_rise": margin}))

    # (b) energy: monotone when Re(lam) >= 0, integrated growth law otherwise
    E = a["energy"]
    step = dt if dt is not None else (float(np.min(np.diff(t))) if len(t) > 1 else 0.0)
    e_scale = abs(E[0]) if E[0] != 0 else max(float(np.max(np.abs(E))), 1.0)
    tol = 10.0 * step ** 2 * e_scale
    if params.lambda_re >= 0:
        jumps = np.diff(E) if len(E) > 1 else np.zeros(1)
        margin = float(jumps.max(initial=0.0))
        out.append(Verdict("energy_nonincreasing", "en:ineq1", _status(margin <= tol), margin, tol,
                           {"branch": "Re(lambda) >= 0", "E0": float(E[0])}))
    else:
        try:
            rhs_exp = float(theory.energy_exponents(params.d, params.p).rhs_exponent)
        except Exception:
            out.append(Verdict("energy_growth", "en:ineq1", "N/A", float("nan"), 0.0,
                               {"reason": "p >= 1+4/d"}))
        else:
            integral = _trapezoid_cumulative(m ** (rhs_exp / 2.0), t)
            growth = E - E[0]
            ok = integral[1:] > 0
            K = float(np.max(growth[1:][ok] / integral[1:][ok], initial=0.0)) if len(t) > 1 else 0.0
            out.append(Verdict("energy_growth", "en:ineq1", _status(math.isfinite(K)), K, float("inf"),
                               {"branch": "Re(lambda) < 0: E(t)-E(0) <= K int ||u||_2^rhs",
                                "rhs_exponent": rhs_exp, "K": K}))

    # (c) smallest K with ||grad u|| <= K (1+t)^(1/2)
    g = np.sqrt(a["grad_sq"])
    K = float(np.max(g / np.sqrt(1.0 + t)))
    K0 = float(np.max(g))
    out.append(Verdict("gradient_growth", "uni:3b", _status(math.isfinite(K)), K, float("inf"),
                       {"K_half": K, "K_bounded": K0}))

    # (d) discrete virial rate d/dt ||xu|| <= ||grad u||
    w = np.sqrt(a["weight_sq"])
    vtol = 1e-2 * float(g.max()) if g.size else 0.0
    if len(t) > 1:
        rate = np.diff(w) / np.diff(t)
        bound = np.maximum(g[1:], g[:-1])
        margin = float(np.max(rate - bound))
    else:
        margin = 0.0
    out.append(Verdict("virial_rate", "eq:3", _status(margin <= vtol), margin, vtol,
                       {"max_excess": margin}))

    # (e) integrated form ||xu(t)|| <= ||xu0|| + int_0^t ||grad u||
    integ = _trapezoid_cumulative(g, t)
    excess = w - w[0] - integ
    itol = 1e-2 * float(w.max()) if w.size else 0.0
    margin = float(excess.max())
    out.append(Verdict("virial_integrated", "appendix-A", _status(margin <= itol), margin, itol,
                       {"C": 1.0}))

    if contaminated:
        for v in out:
            if v.status == "PASS" or v.status == "FAIL":
                v.status = "UNRELIABLE"
    return out


def gradient_growth_constant(series, exponent: float = 0.5) -> float:
    t = np.array([r.t for r in series])
    g = np.sqrt(np.array([r.grad_sq for r in series]))
    return float(np.max(g / (1.0 + t) ** exponent))


@dataclass
class IterationReport:
    d: int
    p: str
    n0: int
    stages: list
    final_exponent: str
    stages_increasing: bool
    gradient_bound: float
    gradient_slope: float
    gradient_bounded: bool
    main_bound: Optional[BoundCheck]

    @property
    def passed(self) -> bool:
        return self.gradient_bounded and self.main_bound is not None and self.main_bound.passed


#: late-time log-log slope of ||grad u|| allowed for "bounded"
GRADIENT_SLOPE_TOLERANCE = 0.05


def iteration_trace(d: int, p, series: Sequence[DiagnosticsRecord], window=None) -> IterationReport:
    """Theory stages ``(a_n, decay exponent)`` up to ``n0`` plus empirical checks of the final stage."""
    res, stages, final = theory.iteration_stages(d, p)
    decays = [s.decay for s in stages]
    increasing = all(b > a for a, b in zip(decays, decays[1:]))
    t = np.array([r.t for r in series])
    g = np.sqrt(np.array([r.grad_sq for r in series]))
    K0 = float(g.max())
    if window is None:
        window = default_window(series)
    sel = (t >= window[0]) & (t <= window[1]) & (g > 0)
    slope = float("nan")
    if sel.sum() >= 2:
        slope = float(np.polyfit(np.log1p(t[sel]), np.log(g[sel]), 1)[0])
    bounded = math.isfinite(K0) and (not math.isfinite(slope) or slope <= GRADIENT_SLOPE_TOLERANCE)
    try:
        main = check_upper_bound(series, final, window)
    except (InsufficientDataError, ValueError):
        main = None
    return IterationReport(
        d=d,
        p=str(res.p),
        n0=res.n0,
        stages=[{"n": s.n, "a_n": str(s.a_n), "decay": str(s.decay)} for s in stages],
        final_exponent=str(final.exponent),
        stages_increasing=increasing,
        gradient_bound=K0,
        gradient_slope=slope,
        gradient_bounded=bounded,
        main_bound=main,
    )


def plot_decay_svg(series: Sequence[DiagnosticsRecord], rates: Sequence[theory.Rate], path,
                   window=None) -> None:
    """Log-log plot of ``||u(t)||_2`` with each rate anchored at the window start."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.fonttype"] = "path"
    t = np.array([r.t for r in series])
    norm = np.sqrt(np.array([r.mass_sq for r in series]))
    keep = (t > 0) & (norm > 0)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(1 + t[keep], norm[keep], "k-", lw=1.5, label=r"$\|u(t)\|_2$")
    if window is None and len(series):
        window = default_window(series)
    if window is not None and keep.any():
        i0 = int(np.argmin(np.abs(t - window[0])))
        tt = t[keep & (t >= t[i0])]
        for rate in rates:
            if rate.kind == "log" and t[i0] < 1:
                continue
            c = norm[i0] / float(rate(t[i0]))
            ax.loglog(1 + tt, c * rate(tt), "--", lw=1, label=f"{rate.theorem}: {rate.describe()}")
    ax.set_xlabel("1 + t")
    ax.set_ylabel("L2 norm")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
