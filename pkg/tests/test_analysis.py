import math
from fractions import Fraction

import numpy as np
import pytest

from dissnls import analysis, theory
from dissnls.analysis import InsufficientDataError, Verdict
from dissnls.profiles import gaussian
from dissnls.solver import SolverConfig, evolve
from dissnls.types import DiagnosticsRecord, Grid, ModelParams

DISS = ModelParams.from_complex(1, 2, -1 - 1j)


def synthetic(t, mass_sq, **extra):
    out = []
    for i, (ti, m) in enumerate(zip(t, mass_sq)):
        vals = dict(t=float(ti), mass_sq=float(m), lp1_pow=0.0, grad_sq=0.0, weight_sq=0.0, energy=0.0,
                    dissipation_integral=0.0, sigma_norm=0.0, contaminated=False)
        vals.update({k: float(v[i]) if not isinstance(v, bool) else v for k, v in extra.items()})
        out.append(DiagnosticsRecord(**vals))
    return out


@pytest.fixture(scope="module")
def proxy_run():
    grid = Grid.cube(1, 200.0, 1024)
    s = evolve(gaussian(grid, 1.0, 5.0), DISS, SolverConfig(dt=5e-3, t_end=50.0, record_stride=100))
    assert not s.contaminated
    return s.records


# --- fits ----------------------------------------------------------------------------

def test_fit_planted_power():
    t = np.linspace(0, 100, 200)
    fit = analysis.fit_rate(synthetic(t, (1 + t) ** -2.0), kind="power")
    assert abs(fit.exponent - 1.0) < 1e-6 and fit.residual < 1e-10
    assert fit.window == (10.0, 100.0)


def test_fit_planted_log_power():
    t = np.geomspace(10, 1e4, 300)
    fit = analysis.fit_rate(synthetic(t, 1 / np.log1p(t)), window=(10, 1e4), kind="log")
    assert abs(fit.exponent - 0.5) < 1e-3


def test_fit_errors():
    t = np.linspace(0, 10, 10)
    with pytest.raises(InsufficientDataError):
        analysis.fit_rate(synthetic(t, np.ones(10)))
    t = np.linspace(0, 10, 50)
    with pytest.raises(ValueError):
        analysis.fit_rate(synthetic(t, np.zeros(50)))
    with pytest.raises(ValueError):
        analysis.fit_rate(synthetic(t, np.ones(50)), window=(0.5, 10), kind="log")


# --- bounds ---------------------------------------------------------------------------

def test_upper_bound_exact_rate_and_faster():
    t = np.linspace(0, 100, 200)
    rate = theory.decay_exponent(1, Fraction(3, 2), "Main")
    same = analysis.check_upper_bound(synthetic(t, (1 + t) ** -2.0), rate)
    assert same.margin == pytest.approx(1.0, abs=1e-12) and same.passed
    fast = synthetic(t, (1 + t) ** -3.0)
    chk = analysis.check_upper_bound(fast, rate)
    # anchored at the first window record, so the maximum ratio is attained there
    assert chk.margin == pytest.approx(1.0, abs=1e-12)
    tt = np.array([r.t for r in fast if r.t >= chk.window[0]])
    ratios = (1 + tt) ** -1.5 / (chk.c_ref * rate(tt))
    assert np.all(ratios[1:] < 1)


def test_upper_bound_detects_slow_decay():
    t = np.linspace(0, 100, 200)
    chk = analysis.check_upper_bound(synthetic(t, (1 + t) ** -0.5), theory.decay_exponent(1, Fraction(3, 2), "Main"))
    assert not chk.passed and chk.margin > 2


def test_bound_margins_nest(proxy_run):
    t = np.linspace(0, 100, 200)
    slow = synthetic(t, (1 + t) ** -0.4)  # slower than every rate: margins exceed one
    margins = [analysis.check_upper_bound(slow, theory.decay_exponent(1, 2, th)).margin
               for th in ("GKS_prev", "Prop31", "Main")]
    assert margins[0] <= margins[1] <= margins[2]
    real = [analysis.check_upper_bound(proxy_run, theory.decay_exponent(1, 2, th)) for th in ("Prop31", "Main")]
    assert all(c.passed for c in real) and real[0].margin <= real[1].margin


# --- monotone bounds ---------------------------------------------------------------

def test_monotone_bounds_on_dissipative_run(proxy_run):
    verdicts = analysis.check_monotone_bounds(proxy_run, DISS, dt=5e-3)
    assert [v.tag for v in verdicts] == ["uni:1", "en:ineq1", "uni:3b", "eq:3", "appendix-A"]
    assert all(v.status == "PASS" for v in verdicts), [(v.name, v.status, v.margin) for v in verdicts]


def test_monotone_bounds_linear_run():
    params = ModelParams(1, 2, 0.0, 0.0)
    s = evolve(gaussian(Grid.cube(1, 100.0, 1024), 1.0, 2.0), params, SolverConfig(dt=0.01, t_end=5, record_stride=10))
    verdicts = {v.name: v for v in analysis.check_monotone_bounds(s.records, params, dt=0.01)}
    assert all(v.status == "PASS" for v in verdicts.values())
    m = [r.mass_sq for r in s.records]
    e = [r.energy for r in s.records]
    assert max(m) - min(m) < 1e-12 * m[0] and max(e) - min(e) < 1e-12 * e[0]


def test_energy_check_pure_dissipation():
    params = ModelParams.from_complex(1, 2, -1j)
    s = evolve(gaussian(Grid.cube(1, 100.0, 1024), 1.0, 3.0), params, SolverConfig(dt=0.01, t_end=5, record_stride=10))
    v = analysis.check_monotone_bounds(s.records, params, dt=0.01)[1]
    assert v.name == "energy_nonincreasing" and v.status == "PASS"


def test_energy_check_flags_increase():
    t = np.linspace(0, 10, 30)
    series = synthetic(t, np.ones(30), energy=np.linspace(1, 2, 30), grad_sq=np.ones(30), weight_sq=np.ones(30))
    v = analysis.check_monotone_bounds(series, ModelParams.from_complex(1, 2, 1 - 1j), dt=0.01)[1]
    assert v.status == "FAIL"


def test_contaminated_series_is_unreliable():
    t = np.linspace(0, 10, 30)
    series = synthetic(t, np.ones(30), grad_sq=np.ones(30), weight_sq=np.ones(30), contaminated=True)
    assert all(v.status == "UNRELIABLE" for v in analysis.check_monotone_bounds(series, DISS))


def test_refinement_keeps_passes():
    runs = []
    for N, dt in ((512, 1e-2), (1024, 5e-3)):
        s = evolve(gaussian(Grid.cube(1, 200.0, N), 1.0, 5.0), DISS,
                   SolverConfig(dt=dt, t_end=20.0, record_stride=int(round(0.5 / dt))))
        runs.append([v.status for v in analysis.check_monotone_bounds(s.records, DISS, dt=dt)])
    assert all(b == "PASS" for a, b in zip(*runs) if a == "PASS")


def test_gradient_constant_stable_under_dt(proxy_run):
    s = evolve(gaussian(Grid.cube(1, 200.0, 1024), 1.0, 5.0), DISS,
               SolverConfig(dt=2.5e-3, t_end=50.0, record_stride=200))
    k1 = analysis.gradient_growth_constant(proxy_run)
    k2 = analysis.gradient_growth_constant(s.records)
    assert abs(k1 / k2 - 1) < 0.2


# --- iteration trace -------------------------------------------------------------

def test_iteration_trace(proxy_run):
    rep = analysis.iteration_trace(1, 2, proxy_run)
    assert [s["decay"] for s in rep.stages] == ["1/6", "8/27", "1/3"]
    assert rep.final_exponent == "1/3" and rep.stages_increasing
    first_negative = next(i for i, s in enumerate(rep.stages, 1) if Fraction(s["a_n"]) < 0)
    assert first_negative == rep.n0 == 3
    assert rep.passed


def test_verdict_tags_validated():
    with pytest.raises(ValueError):
        Verdict("x", "not-a-tag", "PASS", 0.0, 0.0)
    assert Verdict("x", "thm:1", "N/A", math.nan, 0.0).as_dict()["margin"] == "nan"


def test_fit_p_three_halves_long_run():
    # coarse proxy of the desk-scale run; only the late-time slope is used
    params = ModelParams.from_complex(1, Fraction(3, 2), -1 - 1j)
    s = evolve(gaussian(Grid.cube(1, 400.0, 1024), 1.0, 20.0), params,
               SolverConfig(dt=4e-3, t_end=1000.0, record_stride=250))
    fit = analysis.fit_rate(s.records, (100.0, 1000.0))
    assert fit.exponent >= 1.0 - analysis.FIT_SLACK


def test_svg_is_self_contained(tmp_path, proxy_run):
    rates = [theory.decay_exponent(1, 2, th) for th in ("Prop31", "Main")]
    path = tmp_path / "decay.svg"
    analysis.plot_decay_svg(proxy_run, rates, path)
    text = path.read_text()
    assert text.lstrip().startswith("<?xml") and "<svg" in text
    assert "<image" not in text and "xlink:href=\"http" not in text
    assert "<dc:date>" not in text
