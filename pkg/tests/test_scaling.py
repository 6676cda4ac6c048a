import math

import numpy as np
import pytest

from okl import CapacityError, DomainError, ScalingSpec, UnreliableEstimateError, scaling_to_asep, total_variation
from okl.kpz import kpz_weight_exact
from okl.rw import increment_law
from okl.scaling import (RescaledPath, admissible_k, combapprox_check, combapprox_log_ratio,
                         combapprox_log_ratio_exact, default_window, hn_log_on_grid, lattice_range,
                         lattice_tilde_z, log_prefactor, log_prefactor_from_densities, minimal_lattice_point,
                         pointwise_convergence_check, qn_exact_marginals, qn_h_allocation_check,
                         qn_increment_law, qn_sampler, resolve_window, rn_h, rn_r, zn_bruteforce, zn_exact,
                         zn_partition)
from okl.stats import trend_report

SPEC = ScalingSpec(4, 1.0, 1.0, 1.0)


def test_lattice():
    assert minimal_lattice_point(4) == pytest.approx(0.5 - math.log(2), abs=1e-15)
    pts = lattice_tilde_z(4, (-1.0, 2.0))
    assert pts[0] == pytest.approx(0.5 - math.log(2))
    assert np.allclose(np.diff(pts), 0.5)
    assert np.allclose(lattice_tilde_z(1, (0.0, 5.5)), [1, 2, 3, 4, 5])
    with pytest.raises(DomainError):
        lattice_range(4, (1.0, 1.0))


def test_rn_h_constant_path():
    path = RescaledPath(0.0, np.zeros(5), np.zeros(5))
    val = rn_h(path, SPEC, enforce_support=False)
    assert val.value == pytest.approx(0.75 ** 5, rel=1e-14)
    assert 0.75 ** 5 == 0.2373046875


def test_rn_h_factor_identity():
    spec = ScalingSpec(9, 0.5, 0.5)
    root, q = spec.sqrt_n, spec.q
    for k in range(1, 20):
        for g in (-2 / 3, 0.0, 1 / 3):
            x = k / root - math.log(root)
            n = round(root * (g + x + math.log(root)))
            lhs = 1 - math.exp(-2 * (g + x)) / 9
            assert lhs == pytest.approx((1 - q) * (1 - q ** n) / (1 - q), abs=1e-12)


def test_prefactor_from_densities():
    rng = np.random.default_rng(0)
    for _ in range(20):
        spec = ScalingSpec(int(rng.integers(2, 400)), rng.uniform(0.1, 2), rng.uniform(-0.05, 2))
        x, g = rng.uniform(-2, 3), rng.uniform(-1, 1)
        assert log_prefactor_from_densities(x, g, spec) == pytest.approx(
            float(log_prefactor(x, g, spec)), abs=1e-10)


def _random_walk(rng, n):
    n_path, m_path = [0], [0]
    for _ in range(n):
        mv = rng.integers(4)
        n_path.append(n_path[-1] + (1 if mv == 0 else -1 if mv == 1 else 0))
        m_path.append(m_path[-1] + (1 if mv == 2 else -1 if mv == 3 else 0))
    return np.array(n_path), np.array(m_path)


def test_varchange_identity():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(2, 40))
        spec = ScalingSpec(n, rng.uniform(0.2, 2), rng.uniform(-0.1, 1.5))
        n_path, m_path = _random_walk(rng, n)
        k = int(rng.integers(1 - n_path.min(), 3 * n + 5))
        path_h = RescaledPath.from_walk(k, n_path, m_path)
        path_r = RescaledPath(path_h.x + 0.5 * math.log(n), path_h.g_values, path_h.h_values)
        h_val = rn_h(path_h, spec)
        r_val = rn_r(path_r, spec)
        assert h_val.in_support and r_val.in_support
        rhs = r_val.log_value + (spec.u + spec.v) * math.log(n) + (n + 1) * math.log1p(-spec.q)
        assert h_val.log_value == pytest.approx(rhs, rel=1e-10, abs=1e-10)


def test_zero_factor_gives_zero():
    spec = ScalingSpec(4, 1.0, 1.0)
    path = RescaledPath(0.5, np.array([0, -0.5, -1.0, -0.5, 0]), np.zeros(5))
    assert rn_r(path, spec).value == 0.0
    x = 1 / 2 - math.log(2)  # k = 1
    path = RescaledPath(x, np.array([0, -0.5, 0, 0, 0]), np.array([0, 0, 0, 0.5, 0]))
    assert rn_h(path, spec).value == 0.0


def test_v_dependence():
    spec = ScalingSpec(16, 0.8, 0.6)
    x, g_end = 2.0, 0.5
    ratio = float(log_prefactor(x, 2 * g_end, spec) - log_prefactor(x, g_end, spec))
    assert ratio == pytest.approx(-2 * spec.v * g_end, rel=1e-14)


def test_zn_exact_vs_brute_force():
    exact = zn_exact(SPEC)
    assert exact.value == pytest.approx(zn_bruteforce(SPEC, exact.window), rel=1e-12)
    assert exact.exact and exact.stderr == 0.0


def test_window_doubling_soundness():
    for n in (4, 8, 12, 64):
        spec = SPEC.with_n(n)
        window, log_z, rel = resolve_window(spec)
        assert rel <= 1e-8
        wide = (window[0] - (window[1] - window[0]), window[1] + (window[1] - window[0]))
        assert zn_exact(spec, wide).value == pytest.approx(math.exp(log_z), rel=1e-8)


def test_default_window_shape():
    lo, hi = default_window(SPEC)
    assert lo >= minimal_lattice_point(4)
    assert hi > lo


def test_zn_bounded_over_ladder():
    values = [zn_exact(SPEC.with_n(n)).value for n in (4, 8, 16, 32, 64)]
    assert all(0 < v < 1.0 for v in values)


def test_zn_importance_sampling():
    spec = SPEC.with_n(8)
    exact = zn_exact(spec).value
    est = zn_partition(spec, method="importance-sampling", n_samples=100000, seed=3)
    assert est.ess > 1000
    assert abs(est.value - exact) <= 4 * est.stderr


def test_ess_gate():
    with pytest.raises(UnreliableEstimateError):
        qn_sampler(SPEC.with_n(16), 50, seed=0)


def test_qn_weights_normalised():
    s = qn_sampler(SPEC.with_n(16), 5000, seed=1)
    assert s.weights.sum() == pytest.approx(1.0)
    assert np.all(s.weights >= 0)


@pytest.mark.parametrize("u,v", [(1.0, 1.0), (2.0, 0.5), (0.3, 0.4)])
def test_qn_increment_law_matches_rw(u, v):
    spec = ScalingSpec(6, u, v)
    params, abcd, _ = scaling_to_asep(spec)
    assert total_variation(qn_increment_law(spec), increment_law(abcd, params.q, 6)) <= 1e-9


def test_h_allocation_invariance():
    for n in (3, 6, 9):
        assert qn_h_allocation_check(SPEC.with_n(n)) <= 1e-12


def test_exact_marginals_consistent():
    spec = SPEC.with_n(6)
    marg = qn_exact_marginals(spec)
    law = qn_increment_law(spec)
    s_from_seq = law.pushforward(lambda s: sum(s) / math.sqrt(6))
    # compare as real-valued laws on a rounded key
    a = s_from_seq.pushforward(lambda v: round(v, 9))
    b = marg["s"].pushforward(lambda v: round(v, 9))
    assert total_variation(a, b) <= 1e-10
    assert marg["h"].mean() == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(CapacityError):
        qn_increment_law(SPEC.with_n(13))


def test_pointwise_zero_path():
    rows = pointwise_convergence_check(0.0, lambda t: 0.0 * t, 1.0, 1.0, [2 ** k for k in range(4, 15)])
    for r in rows:
        assert r.hn_value == pytest.approx((1 - 1 / r.n_steps) ** (r.n_steps + 1), rel=1e-12)
        assert r.h_value == pytest.approx(math.exp(-1))
        assert r.taylor_remainder <= 0
        assert r.abs_error == pytest.approx(1.5 / r.n_steps * math.exp(-1), rel=0.2)
    ratios = [a.abs_error / b.abs_error for a, b in zip(rows, rows[1:])]
    assert all(1.6 <= rt <= 2.4 for rt in ratios)


@pytest.mark.parametrize("x,g", [(0.3, lambda t: np.sin(2 * np.pi * t)), (-0.2, lambda t: t ** 2 - 0.5 * t)])
def test_pointwise_smooth_paths(x, g):
    rows = pointwise_convergence_check(x, g, 1.0, 1.0, [16, 64, 256, 1024])
    errs = [r.abs_error for r in rows]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert all(r.taylor_remainder <= 0 for r in rows)
    gaps = [abs(r.sum_c - r.sum_c_limit) for r in rows]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert rows[0].h_value == pytest.approx(kpz_weight_exact(x, g, 1.0, 1.0, 1.0))


def test_pointwise_requires_zero_start():
    with pytest.raises(DomainError):
        pointwise_convergence_check(0.0, lambda t: 1.0 + 0 * t, 1.0, 1.0, [4])


def test_combapprox_identity_case():
    ks = admissible_k(0.0, 1000)
    assert np.all(combapprox_log_ratio(0.0, ks, 1000) == 0.0)


def test_combapprox_exact_cross_check():
    exact = math.comb(200, 100) / math.comb(200, 110)
    assert math.exp(combapprox_log_ratio(1.0, 0, 100)) == pytest.approx(exact, rel=1e-12)
    assert combapprox_log_ratio_exact(1.0, 0, 100) == pytest.approx(math.log(exact), rel=1e-14)
    for a in (0.5, 1.0, 2.0):
        ks = admissible_k(a, 100)
        approx = combapprox_log_ratio(a, ks, 100)
        exact_vals = [combapprox_log_ratio_exact(a, int(k), 100) for k in ks]
        assert np.max(np.abs(approx - exact_vals)) <= 1e-10


def test_combapprox_domain():
    with pytest.raises(DomainError):
        combapprox_log_ratio(1.0, 50, 100)


@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
def test_combapprox_sup_bounded(a):
    rows = combapprox_check(a, [100, 1000, 10000])
    assert all(math.isfinite(r.sup_ratio) for r in rows)
    assert max(r.sup_ratio for r in rows) <= 1.5 * math.exp(a * a + 2 * a / 3)


@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
def test_combapprox_non_increasing_beyond_1e3(a):
    rows = combapprox_check(a, [1000, 10000, 100000])
    assert trend_report([r.sup_ratio for r in rows], slack=0.10).decreasing
