import math

import numpy as np
import pytest
import scipy.special as sc

from okl import DomainError, FanRegionError, ScalingSpec, UnreliableEstimateError
from okl.kpz import (BrownianPathSpec, bessel_mellin_check, envelope_ratio, exp_integral_exact, kpz_log_weight,
                     kpz_weight,
                     kpz_weight_exact, mellin_k_closed_form, partition_bound_integral, q_sampler,
                     riemann_integral, right_tail_slope, z_continuum)
from okl.scaling import zn_exact


def test_constant_path_weight():
    assert kpz_weight(0.0, np.zeros(65), 1.0, 1.0, 1.0) == pytest.approx(math.exp(-1), rel=1e-14)


def test_shift_identity():
    rng = np.random.default_rng(0)
    g = np.concatenate([[0.0], np.cumsum(rng.normal(0, 0.05, 128))])
    u, v, x, c = 0.7, 0.4, 0.3, 0.9
    integral = float(riemann_integral(g, 1.0))
    lhs = math.log(kpz_weight(x + c, g, 1.0, u, v)) - math.log(kpz_weight(x, g, 1.0, u, v))
    rhs = -2 * (u + v) * c - (math.exp(-2 * (x + c)) - math.exp(-2 * x)) * integral
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_riemann_is_left_endpoint():
    g = np.array([0.0, 1.0, 2.0])
    assert float(riemann_integral(g, 1.0)) == pytest.approx(0.5 * (1 + math.exp(-2)))


def test_refinement_first_order():
    g_func = lambda t: np.sin(2 * np.pi * np.asarray(t)) + 0.3 * np.asarray(t)  # noqa: E731
    exact = kpz_weight_exact(0.2, g_func, 1.0, 1.0, 0.5)
    errs = []
    for m in (64, 128, 256, 512, 1024):
        t = np.linspace(0, 1, m + 1)
        errs.append(abs(kpz_weight(0.2, g_func(t), 1.0, 1.0, 0.5) - exact) / exact)
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    assert all(1.7 < r < 2.3 for r in ratios)


def test_exact_integral():
    assert exp_integral_exact(lambda t: 0.0 * t, 2.0) == pytest.approx(2.0)


def test_weight_positive():
    rng = np.random.default_rng(1)
    g = np.concatenate([[0.0], np.cumsum(rng.normal(0, 0.1, 64))])
    assert kpz_weight(-0.5, g, 1.0, 2.0, -1.0) > 0.0
    # far left the float underflows, but the log weight stays finite
    assert math.isfinite(kpz_log_weight(-3.0, g * 10, 1.0, 2.0, -1.0))


def test_brownian_variance():
    spec = BrownianPathSpec(64, 2.0)
    paths = spec.paths(np.random.default_rng(2), 40000)
    assert paths[:, 0].max() == 0.0
    assert np.var(paths[:, -1]) == pytest.approx(1.0, rel=0.03)  # L / 2


def test_z_continuum_seed_stability():
    a = z_continuum(1.0, 1.0, n_samples=20000, seed=1)
    b = z_continuum(1.0, 1.0, n_samples=20000, seed=2)
    assert abs(a.value - b.value) <= 3 * math.hypot(a.stderr, b.stderr)
    assert a.window_rel_change <= 1e-8
    # trapezoid in x agrees with the exact per-path x integral
    assert a.value == pytest.approx(a.closed_form_value, rel=1e-6)


@pytest.mark.parametrize("u,v", [(0.15, 0.1), (0.3, 0.2), (0.5, 0.5), (1.0, 1.0), (1.5, -0.5), (0.2, 0.1)])
def test_z_continuum_finite(u, v):
    z = z_continuum(u, v, n_samples=5000, seed=0)
    assert z.finite and z.value > 0 and z.window_rel_change <= 1e-8


def test_z_continuum_domain():
    with pytest.raises(FanRegionError):
        z_continuum(0.5, -0.5)
    with pytest.raises(DomainError):
        z_continuum(1.0, 1.0, n_samples=100, x_window=(5.0, 6.0))


def test_z_continuum_matches_bound_scale():
    # v >= 0: Z is bounded by the closed-form integral (the expectation of exp(-2v g) <= ...)
    z = z_continuum(1.0, 0.0, n_samples=20000, seed=4)
    assert z.value <= partition_bound_integral(1.0, 0.0) * 2.0


@pytest.mark.parametrize("u,v", [(1.0, 1.0), (0.5, 0.0), (0.2, 1.0)])
def test_envelope_ratio_bounded(u, v):
    ratios = envelope_ratio(u, v, np.linspace(-3, 6, 19), n_samples=5000, seed=0)
    assert np.all(np.isfinite(ratios)) and np.all(ratios >= 0)
    # bounded above: interior maximum, decaying towards the right edge
    peak = int(np.argmax(ratios))
    assert peak < len(ratios) - 1
    assert np.all(np.diff(ratios[peak:]) < 0)


def test_agreement_with_lattice_at_64():
    z = z_continuum(1.0, 1.0, n_samples=100000, seed=0)
    zn = zn_exact(ScalingSpec(64, 1.0, 1.0)).value
    assert abs(zn - z.value) / z.value <= 0.05


def test_q_sampler_h_marginal():
    s = q_sampler(1.0, 1.0, n_samples=100000, seed=3)
    w = s.weights
    assert w.sum() == pytest.approx(1.0) and np.all(w >= 0)
    mean = float(np.sum(w * s.h_end))
    var = float(np.sum(w * s.h_end ** 2) - mean ** 2)
    se = math.sqrt(0.5 / s.ess)
    assert abs(mean) <= 4 * se
    assert var == pytest.approx(0.5, abs=4 * 0.5 * math.sqrt(2 / s.ess))


@pytest.mark.parametrize("u,v", [(0.5, 0.5), (1.0, 1.0)])
def test_q_sampler_x_tail(u, v):
    s = q_sampler(u, v, n_samples=200000, seed=5)
    assert math.isfinite(float(np.sum(s.weights * s.x)))
    slope = right_tail_slope(s.x, s.weights)
    assert slope == pytest.approx(-2 * (u + v), rel=0.15)


def test_q_sampler_grid_doubling():
    a = q_sampler(1.0, 1.0, n_samples=50000, seed=8, n_grid=256)
    b = q_sampler(1.0, 1.0, n_samples=50000, seed=9, n_grid=512)
    for fa, fb in ((a.x, b.x), (a.g_end, b.g_end), (a.s_end, b.s_end)):
        ma, mb = np.sum(a.weights * fa), np.sum(b.weights * fb)
        sa = math.sqrt(np.sum(a.weights * (fa - ma) ** 2) / a.ess)
        sb = math.sqrt(np.sum(b.weights * (fb - mb) ** 2) / b.ess)
        assert abs(ma - mb) <= 4 * math.hypot(sa, sb)


def test_q_sampler_paths():
    s = q_sampler(1.0, 1.0, n_samples=2000, seed=0, n_grid=32, keep_paths=True)
    smp = s.sample(3)
    assert smp.g_values[0] == 0.0 and smp.h_values[0] == 0.0
    assert smp.g_values[-1] == pytest.approx(s.g_end[3])
    with pytest.raises(UnreliableEstimateError):
        q_sampler(1.0, 1.0, n_samples=50, seed=0)


@pytest.mark.parametrize("mu,nu,a", [(1, 0, 1), (0, 0, 1), (2, 0.5, 2), (0.5, -0.3, 0.7), (1.2, 1.5, 1),
                                     (3, 0, math.sqrt(2)), (-0.5, 0.2, 3), (0.1, 1.0, 0.5), (2.5, -2.0, 0.8)])
def test_bessel_mellin(mu, nu, a):
    chk = bessel_mellin_check(mu, nu, a)
    assert chk.residual <= 1e-8
    sym = bessel_mellin_check(mu, -nu, a)
    assert sym.quadrature == pytest.approx(chk.quadrature, rel=1e-10)


def test_bessel_closed_form_value():
    assert mellin_k_closed_form(1, 0, 1) == pytest.approx(1.0, rel=1e-15)


@pytest.mark.parametrize("s", [0.3, 1.0, 2.0, 3.5])
def test_partition_bound_integral(s):
    chk = bessel_mellin_check(2 * s - 1, 0.0, math.sqrt(2))
    assert chk.quadrature == pytest.approx(2 ** (s - 2) * sc.gamma(s) ** 2, rel=1e-8)
    assert partition_bound_integral(s / 2, s / 2) == pytest.approx(2 ** (s - 2) * sc.gamma(s) ** 2)


def test_bessel_domain():
    with pytest.raises(DomainError):
        bessel_mellin_check(0.0, 1.5, 1.0)
    with pytest.raises(DomainError):
        bessel_mellin_check(1.0, 0.0, -1.0)
