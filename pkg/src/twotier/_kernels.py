"""Hot numeric kernels.

Each kernel has a numba-compiled version and a pure-numpy version with the
same signature. The numba path is used when numba imports and the
environment variable ``TWOTIER_NUMBA`` is not set to ``0``; the benchmark in
``benchmarks/bench_kernels.py`` times both.
"""

import math
import os

import numpy as np
from scipy.special import erfc as _erfc

try:
    from numba import njit
    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        def decorator(func):
            return func
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return decorator

USE_NUMBA = NUMBA_AVAILABLE and os.environ.get("TWOTIER_NUMBA", "1") != "0"

_SQRT3 = math.sqrt(3.0)
_LN10_10 = math.log(10.0) / 10.0


# =============================================================================
# numpy implementations
# =============================================================================

def np_hex_mask(x, y, R):
    """Points inside a flat-topped hexagon of circumradius R centred at 0."""
    ax = np.abs(x)
    ay = np.abs(y)
    return (ay <= 0.5 * _SQRT3 * R) & (_SQRT3 * ax + ay <= _SQRT3 * R)


def np_segment_sum(values, seg, n):
    return np.bincount(seg, weights=values, minlength=n)[:n]


def np_segment_max(values, seg, n):
    out = np.zeros(n)
    np.maximum.at(out, seg, values)
    return out


def np_group_lognormal_sum(z_dB, counts):
    """Sum ``10**(z/10)`` over consecutive groups of sizes ``counts``."""
    n = counts.shape[0]
    seg = np.repeat(np.arange(n), counts)
    return np.bincount(seg, weights=10.0 ** (z_dB / 10.0), minlength=n)[:n]


def np_power_law_sum(scale, dist2, seg, n, alpha):
    """Per-segment sum of ``scale * dist**(-alpha)`` given squared distances."""
    return np.bincount(seg, weights=scale * dist2 ** (-0.5 * alpha), minlength=n)[:n]


def np_lognormal_ccdf(x, s_ln):
    """P(Psi > x) for ln Psi ~ N(0, s_ln^2); x may be 0 or inf."""
    with np.errstate(divide="ignore"):
        lx = np.log(x)
    return 0.5 * _erfc(lx / (s_ln * math.sqrt(2.0)))


# =============================================================================
# numba implementations
# =============================================================================

@njit(cache=True)
def nb_hex_mask(x, y, R):
    out = np.empty(x.shape[0], dtype=np.bool_)
    h = 0.5 * _SQRT3 * R
    for i in range(x.shape[0]):
        ax = abs(x[i])
        ay = abs(y[i])
        out[i] = (ay <= h) and (_SQRT3 * ax + ay <= _SQRT3 * R)
    return out


@njit(cache=True)
def nb_segment_sum(values, seg, n):
    out = np.zeros(n)
    for i in range(values.shape[0]):
        out[seg[i]] += values[i]
    return out


@njit(cache=True)
def nb_segment_max(values, seg, n):
    out = np.zeros(n)
    for i in range(values.shape[0]):
        if values[i] > out[seg[i]]:
            out[seg[i]] = values[i]
    return out


@njit(cache=True)
def nb_group_lognormal_sum(z_dB, counts):
    n = counts.shape[0]
    out = np.zeros(n)
    k = 0
    for i in range(n):
        acc = 0.0
        for _ in range(counts[i]):
            acc += math.exp(z_dB[k] * _LN10_10)
            k += 1
        out[i] = acc
    return out


@njit(cache=True)
def nb_power_law_sum(scale, dist2, seg, n, alpha):
    out = np.zeros(n)
    if alpha == 4.0:
        for i in range(dist2.shape[0]):
            out[seg[i]] += scale[i] / (dist2[i] * dist2[i])
    else:
        h = -0.5 * alpha
        for i in range(dist2.shape[0]):
            out[seg[i]] += scale[i] * math.exp(h * math.log(dist2[i]))
    return out


@njit(cache=True)
def nb_lognormal_ccdf(x, s_ln):
    out = np.empty(x.shape)
    flat_x = x.ravel()
    flat_o = out.ravel()
    c = 1.0 / (s_ln * math.sqrt(2.0))
    for i in range(flat_x.shape[0]):
        xi = flat_x[i]
        if xi <= 0.0:
            flat_o[i] = 1.0
        elif math.isinf(xi):
            flat_o[i] = 0.0
        else:
            flat_o[i] = 0.5 * math.erfc(math.log(xi) * c)
    return out


NUMPY_KERNELS = {
    "hex_mask": np_hex_mask,
    "segment_sum": np_segment_sum,
    "segment_max": np_segment_max,
    "group_lognormal_sum": np_group_lognormal_sum,
    "power_law_sum": np_power_law_sum,
    "lognormal_ccdf": np_lognormal_ccdf,
}

NUMBA_KERNELS = {
    "hex_mask": nb_hex_mask,
    "segment_sum": nb_segment_sum,
    "segment_max": nb_segment_max,
    "group_lognormal_sum": nb_group_lognormal_sum,
    "power_law_sum": nb_power_law_sum,
    "lognormal_ccdf": nb_lognormal_ccdf,
}


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


_active = NUMBA_KERNELS if USE_NUMBA else NUMPY_KERNELS


def hex_mask(x, y, R):
    return _active["hex_mask"](np.ascontiguousarray(x, dtype=np.float64),
                               np.ascontiguousarray(y, dtype=np.float64), float(R))


def segment_sum(values, seg, n):
    return _active["segment_sum"](np.ascontiguousarray(values, dtype=np.float64),
                                  np.ascontiguousarray(seg, dtype=np.int64), int(n))


def segment_max(values, seg, n):
    return _active["segment_max"](np.ascontiguousarray(values, dtype=np.float64),
                                  np.ascontiguousarray(seg, dtype=np.int64), int(n))


def group_lognormal_sum(z_dB, counts):
    return _active["group_lognormal_sum"](np.ascontiguousarray(z_dB, dtype=np.float64),
                                          np.ascontiguousarray(counts, dtype=np.int64))


def power_law_sum(scale, dist2, seg, n, alpha):
    scale = np.broadcast_to(np.asarray(scale, dtype=np.float64), np.shape(dist2))
    return _active["power_law_sum"](np.ascontiguousarray(scale),
                                    np.ascontiguousarray(dist2, dtype=np.float64),
                                    np.ascontiguousarray(seg, dtype=np.int64),
                                    int(n), float(alpha))


def lognormal_ccdf(x, s_ln):
    x = np.asarray(x, dtype=np.float64)
    if s_ln <= 0:
        # degenerate law: Psi == 1
        return (x < 1.0).astype(np.float64)
    return _active["lognormal_ccdf"](np.ascontiguousarray(x), float(s_ln))
