"""Numerical kernels: backend switching and numba/numpy agreement."""

import subprocess
import sys

import numpy as np
import pytest

from covertuav import beamform, kernels


CANON = dict(c_ba=5.882352941176471e-07, c_ca=9.756097560975609e-07,
             c_cw=1.0245260037354589e-09, g_bw=7.071067811865476e-09,
             q_b_max=1.0, sigma_a2=1e-12, sigma_w2=1e-12,
             gamma_t=2.0 ** 16 - 1.0, gamma_c=15.0,
             neg_ln_eta=-np.log(0.01), kappa=0.5, r_t=16.0, r_c=4.0)


@pytest.fixture
def both_backends():
    names = kernels.available_backends()
    if len(names) < 2:
        pytest.skip("only one backend importable here")
    return names


def _curve(q):
    return kernels.slot_rate_curve(q, **CANON)


def test_backend_registry():
    assert kernels.active_backend() in kernels.available_backends()
    assert "numpy" in kernels.available_backends()
    assert kernels.available_backends() == tuple(sorted(kernels.available_backends()))


def test_set_backend_round_trip():
    start = kernels.active_backend()
    prev = kernels.set_backend("numpy")
    assert prev == start
    assert kernels.active_backend() == "numpy"
    kernels.set_backend(start)
    assert kernels.active_backend() == start


def test_unknown_backend_rejected():
    with pytest.raises(ValueError, match="unknown backend"):
        kernels.set_backend("tpu")


def test_env_var_validation():
    code = ("import covertuav.kernels as k; print(k.active_backend())")
    out = subprocess.run([sys.executable, "-c", code],
                         env={"PATH": "/usr/bin:/bin", "COVERTUAV_BACKEND": "numpy"},
                         capture_output=True, text=True, cwd="src")
    assert out.returncode == 0 and out.stdout.strip() == "numpy"
    bad = subprocess.run([sys.executable, "-c", code],
                         env={"PATH": "/usr/bin:/bin", "COVERTUAV_BACKEND": "cuda"},
                         capture_output=True, text=True, cwd="src")
    assert bad.returncode != 0 and "COVERTUAV_BACKEND" in bad.stderr


def test_slot_rate_scalar_in_scalar_out():
    out = _curve(5e-6)
    assert isinstance(out, float)
    arr = _curve(np.array([5e-6]))
    assert arr.shape == (1,)
    assert out == arr[0]


def test_slot_rate_input_validation():
    with pytest.raises(ValueError, match="nonnegative"):
        _curve(-1e-6)
    with pytest.raises(ValueError, match="g_bw"):
        kernels.slot_rate_curve(1e-6, **{**CANON, "g_bw": 0.0})
    with pytest.raises(ValueError, match="one-dimensional"):
        _curve(np.zeros((2, 2)))


def test_slot_rate_infeasible_is_minus_inf():
    # cover demand c_cw * q exceeding q_b_max * g_bw cannot be masked
    q_limit = CANON["q_b_max"] * CANON["g_bw"] / CANON["c_cw"]
    assert _curve(2.0 * q_limit) == -np.inf
    assert np.isfinite(_curve(0.5 * q_limit))


def test_backends_agree_on_slot_rate(both_backends):
    q_limit = CANON["q_b_max"] * CANON["g_bw"] / CANON["c_cw"]
    grid = np.concatenate([
        np.array([0.0, 1e-12, q_limit, 2.0 * q_limit]),
        np.geomspace(1e-9, 0.99 * q_limit, 300),
    ])
    results = {}
    start = kernels.active_backend()
    try:
        for name in both_backends:
            kernels.set_backend(name)
            results[name] = kernels.slot_rate_curve(grid, **CANON)
    finally:
        kernels.set_backend(start)
    a, b = (results[n] for n in both_backends)
    finite = np.isfinite(a)
    assert np.array_equal(finite, np.isfinite(b))
    np.testing.assert_allclose(a[finite], b[finite], rtol=1e-12)


def test_backends_agree_on_radiometer(both_backends):
    rng = np.random.default_rng(42)
    draws = rng.standard_normal((64, 200))
    results = {}
    start = kernels.active_backend()
    try:
        for name in both_backends:
            kernels.set_backend(name)
            results[name] = kernels.radiometer_statistic(draws, 1.7e-9)
    finally:
        kernels.set_backend(start)
    a, b = (results[n] for n in both_backends)
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_radiometer_statistic_moments():
    """Block averages of scaled complex noise center on the scale."""
    rng = np.random.default_rng(7)
    m = 100
    draws = rng.standard_normal((20_000, 2 * m))
    stats = kernels.radiometer_statistic(draws, 3.0)
    assert stats.shape == (20_000,)
    assert np.mean(stats) == pytest.approx(3.0, rel=0.01)
    assert np.var(stats) == pytest.approx(9.0 / m, rel=0.05)


def test_radiometer_input_validation():
    with pytest.raises(ValueError, match="draws"):
        kernels.radiometer_statistic(np.zeros(8), 1.0)
    with pytest.raises(ValueError, match="scale"):
        kernels.radiometer_statistic(np.zeros((4, 8)), 0.0)


def test_kernel_matches_slot_env_rate(cfg, gains0):
    """The raw kernel and the slot wrapper describe the same curve."""
    env = beamform.slot_env(cfg, gains0, 0)
    q = np.linspace(0.0, env.q_c_feasible, 64)
    direct = kernels.slot_rate_curve(
        q, c_ba=env.c_ba, c_ca=env.c_ca, c_cw=env.c_cw, g_bw=env.g_bw,
        q_b_max=env.q_b_max, sigma_a2=env.sigma_a2, sigma_w2=env.sigma_w2,
        gamma_t=env.gamma_t, gamma_c=env.gamma_c, neg_ln_eta=env.neg_ln_eta,
        kappa=env.kappa, r_t=env.r_t, r_c=env.r_c)
    np.testing.assert_allclose(env.rate(q), direct, rtol=1e-13)
