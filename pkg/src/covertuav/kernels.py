"""Dual-backend numeric kernels for the hot loops.

Two kernels dominate runtime: the per-trial radiometer statistic inside the
detection Monte Carlo, and dense evaluation of the per-slot weighted rate
over covert-power grids (used by the power search, its unimodality pre-scan
and the brute-force oracles). Both ship in a compiled numba flavor and a
pure-numpy flavor.

Backend selection: the COVERTUAV_BACKEND environment variable ("numba" or
"numpy") wins; unset, numba is used when importable and numpy otherwise.
`set_backend` switches at runtime (the benchmark suite uses this). Random
draws always happen outside the kernels, so the two flavors see identical
inputs; outputs differ only by float summation order, well below any
decision threshold used in tests.
"""

import math
import os

import numpy as np

__all__ = ["active_backend", "available_backends", "set_backend",
           "radiometer_statistic", "slot_rate_curve"]

_ENV_VAR = "COVERTUAV_BACKEND"

try:
    import numba
except ImportError:  # pragma: no cover - exercised via the numpy backend tests
    numba = None


# -- pure numpy flavor ---------------------------------------------------------


def _np_radiometer_statistic(draws, scale):
    k = draws.shape[1]
    return (draws * draws).sum(axis=1) * (scale / k)


def _np_slot_rate_curve(q_c, c_ba, c_ca, c_cw, g_bw, q_b_max, sigma_a2,
                        sigma_w2, gamma_t, gamma_c, neg_ln_eta, kappa,
                        r_t, r_c):
    budget = q_b_max * g_bw
    p_cw = c_cw * q_c
    feasible = p_cw <= budget
    q_b = np.maximum(q_b_max - p_cw / g_bw, 0.0)
    p_ba = c_ba * q_b
    p_ca = c_ca * q_c
    r_w = np.log2(1.0 + np.maximum(budget - p_cw, 0.0)
                  / (sigma_w2 + neg_ln_eta * p_cw))
    r_s = np.maximum(r_t - r_w, 0.0)
    num = p_ba - gamma_t * sigma_a2
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ratio = np.where(p_ca > 0, num / np.where(p_ca > 0, gamma_t * p_ca, 1.0), 0.0)
        scp = np.where(p_ca > 0,
                       np.where(ratio > 0, -np.expm1(-np.maximum(ratio, 0.0)), 0.0),
                       (num >= 0) * 1.0)
        tail = np.where(p_ca > 0,
                        np.exp(-gamma_c * sigma_a2 / np.where(p_ca > 0, p_ca, 1.0)),
                        0.0)
    if gamma_t <= 0:
        scp = np.ones_like(scp)
    rate = kappa * scp * r_s + (1.0 - kappa) * scp * tail * r_c
    return np.where(feasible, rate, -np.inf)


# -- numba flavor --------------------------------------------------------------


def _nb_radiometer_statistic(draws, scale):  # pragma: no cover - compiled
    n, k = draws.shape
    out = np.empty(n)
    for i in range(n):
        acc = 0.0
        for j in range(k):
            acc += draws[i, j] * draws[i, j]
        out[i] = acc * (scale / k)
    return out


def _nb_slot_rate_curve(q_c, c_ba, c_ca, c_cw, g_bw, q_b_max, sigma_a2,
                        sigma_w2, gamma_t, gamma_c, neg_ln_eta, kappa,
                        r_t, r_c):  # pragma: no cover - compiled
    n = q_c.shape[0]
    out = np.empty(n)
    budget = q_b_max * g_bw
    for i in range(n):
        q = q_c[i]
        p_cw = c_cw * q
        if p_cw > budget:
            out[i] = -np.inf
            continue
        q_b = q_b_max - p_cw / g_bw
        if q_b < 0.0:
            q_b = 0.0
        p_ba = c_ba * q_b
        p_ca = c_ca * q
        head = budget - p_cw
        if head < 0.0:
            head = 0.0
        r_w = math.log2(1.0 + head / (sigma_w2 + neg_ln_eta * p_cw))
        r_s = r_t - r_w
        if r_s < 0.0:
            r_s = 0.0
        num = p_ba - gamma_t * sigma_a2
        if gamma_t <= 0:
            scp = 1.0
            tail = 0.0 if p_ca <= 0 else math.exp(-gamma_c * sigma_a2 / p_ca)
        elif p_ca > 0:
            ratio = num / (gamma_t * p_ca)
            scp = -math.expm1(-ratio) if ratio > 0 else 0.0
            tail = math.exp(-gamma_c * sigma_a2 / p_ca)
        else:
            scp = 1.0 if num >= 0 else 0.0
            tail = 0.0
        out[i] = kappa * scp * r_s + (1.0 - kappa) * scp * tail * r_c
    return out


_IMPLS = {"numpy": {"radiometer_statistic": _np_radiometer_statistic,
                    "slot_rate_curve": _np_slot_rate_curve}}

if numba is not None:
    _IMPLS["numba"] = {
        "radiometer_statistic": numba.njit(cache=True)(_nb_radiometer_statistic),
        "slot_rate_curve": numba.njit(cache=True)(_nb_slot_rate_curve),
    }


def available_backends():
    """Names of the backends importable in this environment."""
    return tuple(sorted(_IMPLS))


def _initial_backend():
    forced = os.environ.get(_ENV_VAR, "").strip().lower()
    if forced:
        if forced not in ("numba", "numpy"):
            raise ValueError(f"{_ENV_VAR} must be 'numba' or 'numpy', got {forced!r}")
        if forced not in _IMPLS:
            raise ImportError(f"{_ENV_VAR}={forced} but numba is not importable")
        return forced
    return "numba" if "numba" in _IMPLS else "numpy"


_ACTIVE = _initial_backend()


def active_backend():
    return _ACTIVE


def set_backend(name):
    """Switch kernel flavor at runtime; returns the previous name."""
    global _ACTIVE
    if name not in _IMPLS:
        raise ValueError(f"unknown backend {name!r}; available: {available_backends()}")
    previous = _ACTIVE
    _ACTIVE = name
    return previous


# -- dispatching wrappers ------------------------------------------------------


def radiometer_statistic(draws, scale):
    """Per-trial average received power from standard-normal draws.

    `draws` has one row per trial and 2m columns (real/imag parts of m
    symbols, unit variance); `scale` is the per-symbol complex variance.
    Returns the length-trials vector of block-averaged powers.
    """
    draws = np.ascontiguousarray(draws, dtype=np.float64)
    if draws.ndim != 2 or draws.shape[1] < 2:
        raise ValueError("draws must be (trials, 2m) with m >= 1")
    if scale <= 0:
        raise ValueError("scale must be positive")
    return _IMPLS[_ACTIVE]["radiometer_statistic"](draws, float(scale))


def slot_rate_curve(q_c, c_ba, c_ca, c_cw, g_bw, q_b_max, sigma_a2, sigma_w2,
                    gamma_t, gamma_c, neg_ln_eta, kappa, r_t, r_c):
    """Weighted slot rate over an array of covert transmit powers.

    Implements the coupled power bookkeeping: the covert cover received by
    the adversary is carved out of the secret user's budget so the received
    sum stays constant, the redundancy rate follows from the outage cap,
    and the weighted sum of the secret and covert terms is returned.
    Infeasible powers (cover exceeding the budget) map to -inf so grid
    argmax skips them. Scalar q_c returns a scalar.
    """
    q = np.ascontiguousarray(np.atleast_1d(q_c), dtype=np.float64)
    if q.ndim != 1:
        raise ValueError("q_c must be scalar or one-dimensional")
    if g_bw <= 0:
        raise ValueError("g_bw must be positive")
    if np.any(q < 0):
        raise ValueError("q_c must be nonnegative")
    out = _IMPLS[_ACTIVE]["slot_rate_curve"](
        q, float(c_ba), float(c_ca), float(c_cw), float(g_bw), float(q_b_max),
        float(sigma_a2), float(sigma_w2), float(gamma_t), float(gamma_c),
        float(neg_ln_eta), float(kappa), float(r_t), float(r_c))
    return out if np.ndim(q_c) else float(out[0])
