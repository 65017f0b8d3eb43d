"""Pointwise hot loops: the exact nonlinear substep and power-sum reductions.

Two interchangeable implementations live here. The numba one is used by
default; set ``DISSNLS_NO_NUMBA=1`` (before import) to force the pure-numpy
path. Loop and reduction orders are fixed, so each backend is
bit-reproducible on its own; the two backends agree only to rounding.

The substep solves ``i u' = lam |u|^(p-1) u`` in closed form. Writing
``a = |u|^(p-1)`` and ``z = (p-1)|Im lam| a tau``, the modulus is multiplied
by ``(1 + z)^(-1/(p-1))`` and the phase advances by
``Re lam / ((p-1) Im lam) * log1p(z)`` (or ``-Re lam a tau`` when
``Im lam = 0``). This factor form is regular at ``u = 0``.
"""
from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("DISSNLS_NO_NUMBA", "").lower() not in ("1", "true", "yes")


# --- pure numpy -----------------------------------------------------------

def _abs_pow_numpy(amp2, e):
    """|u|^e from |u|^2."""
    if e == 2.0:
        return amp2
    if e == 1.0:
        return np.sqrt(amp2)
    if e == 3.0:
        return amp2 * np.sqrt(amp2)
    if e == 4.0:
        return amp2 * amp2
    return amp2 ** (0.5 * e)


def nonlinear_substep_numpy(u, p, lam_re, lam_im, tau):
    """Advance ``u`` (1-d complex) by ``tau``; returns ``(u_new, sum |u|^(p+1))``."""
    amp2 = u.real * u.real + u.imag * u.imag
    a = _abs_pow_numpy(amp2, p - 1.0)
    s = float(np.sum(a * amp2))
    if lam_im == 0.0:
        out = u * np.exp((-1j * lam_re * tau) * a)
    else:
        z = ((p - 1.0) * (-lam_im) * tau) * a
        lg = np.log1p(z)
        fac = 1.0 / (1.0 + z) if p == 2.0 else np.exp((-1.0 / (p - 1.0)) * lg)
        out = u * (fac * np.exp((1j * lam_re / ((p - 1.0) * lam_im)) * lg))
    out[amp2 == 0.0] = 0.0
    return out, s


def power_sum_numpy(u, e):
    return float(np.sum(_abs_pow_numpy(u.real * u.real + u.imag * u.imag, e)))


def weighted_abs2_numpy(u, w):
    return float(np.sum(w * (u.real * u.real + u.imag * u.imag)))


# --- numba ----------------------------------------------------------------

def _abs_pow_scalar(amp2, e):
    if e == 2.0:
        return amp2
    if e == 1.0:
        return math.sqrt(amp2)
    if e == 3.0:
        return amp2 * math.sqrt(amp2)
    if e == 4.0:
        return amp2 * amp2
    n = 2.0 * e
    if n == math.floor(n) and n <= 8.0:
        # half-integer e: integer power of |u|^(1/2)
        return math.sqrt(math.sqrt(amp2)) ** int(n)
    return math.exp(0.5 * e * math.log(amp2))


def _nonlinear_substep_loop(u, p, lam_re, lam_im, tau):
    n = u.shape[0]
    out = np.empty_like(u)
    s = 0.0
    pm1 = p - 1.0
    inv = -1.0 / pm1
    c = pm1 * (-lam_im) * tau
    coef = lam_re / (pm1 * lam_im) if lam_im != 0.0 else 0.0
    m = int(-inv) if -inv == math.floor(-inv) else 0
    for k in range(n):
        re = u[k].real
        im = u[k].imag
        amp2 = re * re + im * im
        if amp2 == 0.0:
            out[k] = 0.0
            continue
        a = _abs_pow_jit(amp2, pm1)
        s += a * amp2
        if lam_im == 0.0:
            ph = -lam_re * a * tau
            fac = 1.0
        else:
            z = c * a
            lg = math.log1p(z)
            ph = coef * lg
            if m > 0:
                fac = (1.0 / (1.0 + z)) ** m
            else:
                fac = math.exp(inv * lg)
        cr = math.cos(ph) * fac
        ci = math.sin(ph) * fac
        out[k] = complex(re * cr - im * ci, re * ci + im * cr)
    return out, s


def _power_sum_loop(u, e):
    s = 0.0
    for k in range(u.shape[0]):
        amp2 = u[k].real * u[k].real + u[k].imag * u[k].imag
        if amp2 != 0.0:
            s += _abs_pow_jit(amp2, e)
    return s


def _weighted_abs2_loop(u, w):
    s = 0.0
    for k in range(u.shape[0]):
        s += w[k] * (u[k].real * u[k].real + u[k].imag * u[k].imag)
    return s


if HAVE_NUMBA:
    _abs_pow_jit = numba.njit(cache=True, inline="always")(_abs_pow_scalar)
    nonlinear_substep_numba = numba.njit(cache=True)(_nonlinear_substep_loop)
    power_sum_numba = numba.njit(cache=True)(_power_sum_loop)
    weighted_abs2_numba = numba.njit(cache=True)(_weighted_abs2_loop)
else:  # pragma: no cover
    _abs_pow_jit = _abs_pow_scalar
    nonlinear_substep_numba = power_sum_numba = weighted_abs2_numba = None


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


def _flat(u):
    return np.ascontiguousarray(u, dtype=np.complex128).reshape(-1)


def nonlinear_substep(u, p, lam_re, lam_im, tau):
    """Exact nonlinear substep on an array of any shape; returns ``(u_new, sum |u|^(p+1))``."""
    flat = _flat(u)
    args = (float(p), float(lam_re), float(lam_im), float(tau))
    if USE_NUMBA:
        out, s = nonlinear_substep_numba(flat, *args)
    else:
        out, s = nonlinear_substep_numpy(flat, *args)
    return out.reshape(np.shape(u)), float(s)


def power_sum(u, e):
    """``sum |u|^e`` over all samples."""
    if USE_NUMBA:
        return float(power_sum_numba(_flat(u), float(e)))
    return power_sum_numpy(_flat(u), float(e))


def weighted_abs2(u, w):
    """``sum w |u|^2`` over all samples."""
    wf = np.ascontiguousarray(w, dtype=np.float64).reshape(-1)
    if USE_NUMBA:
        return float(weighted_abs2_numba(_flat(u), wf))
    return weighted_abs2_numpy(_flat(u), wf)
