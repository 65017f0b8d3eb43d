"""Compare the numba and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Times each pointwise kernel on 1d, 2d and 3d sized arrays, then a short
end-to-end evolution, with both backends in the same process.
"""
import argparse
import timeit

import numpy as np

from dissnls import _kernels
from dissnls.profiles import gaussian
from dissnls.solver import SolverConfig, evolve
from dissnls.types import Grid, ModelParams


def _time(fn, repeat):
    fn()  # warm-up (and jit compilation)
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_table(repeat):
    rng = np.random.default_rng(0)
    rows = []
    for label, n in (("1d 4096", 4096), ("2d 512^2", 512 ** 2), ("3d 128^3", 128 ** 3)):
        u = rng.normal(size=n) + 1j * rng.normal(size=n)
        w = rng.uniform(size=n)
        for p in (2.0, 1.5):
            cases = {
                "substep": (lambda: _kernels.nonlinear_substep_numpy(u, p, -1.0, -1.0, 1e-3),
                            lambda: _kernels.nonlinear_substep_numba(u, p, -1.0, -1.0, 1e-3)),
                "power_sum": (lambda: _kernels.power_sum_numpy(u, p + 1),
                              lambda: _kernels.power_sum_numba(u, p + 1)),
            }
            for name, (f_np, f_nb) in cases.items():
                rows.append((label, f"{name} p={p:g}", _time(f_np, repeat), _time(f_nb, repeat)))
        rows.append((label, "weighted_abs2", _time(lambda: _kernels.weighted_abs2_numpy(u, w), repeat),
                     _time(lambda: _kernels.weighted_abs2_numba(u, w), repeat)))
    return rows


def evolve_time(use_numba, steps=2000):
    _kernels.USE_NUMBA = use_numba
    grid = Grid.cube(1, 400.0, 4096)
    params = ModelParams.from_complex(1, 2, -1 - 1j)
    cfg = SolverConfig(dt=1e-3, t_end=steps * 1e-3, record_stride=500)
    u0 = gaussian(grid, 1.0, 20.0)
    evolve(u0, params, SolverConfig(dt=1e-3, t_end=0.01, record_stride=5))
    t = timeit.default_timer()
    evolve(u0, params, cfg)
    return (timeit.default_timer() - t) / steps


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    print(f"{'size':<10} {'kernel':<16} {'numpy us':>10} {'numba us':>10} {'speedup':>8}")
    for label, name, t_np, t_nb in kernel_table(args.repeat):
        print(f"{label:<10} {name:<16} {t_np * 1e6:10.1f} {t_nb * 1e6:10.1f} {t_np / t_nb:8.2f}")
    saved = _kernels.USE_NUMBA
    try:
        s_np, s_nb = evolve_time(False), evolve_time(True)
    finally:
        _kernels.USE_NUMBA = saved
    print(f"\nfull step, d=1 N=4096 p=2: numpy {s_np * 1e6:.0f} us, numba {s_nb * 1e6:.0f} us "
          f"({s_np / s_nb:.2f}x)")


if __name__ == "__main__":
    main()
