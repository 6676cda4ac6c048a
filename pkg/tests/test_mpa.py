import itertools
import math

import numpy as np
import pytest

from okl import AbcdParams, AsepParams, ScalingSpec, TruncationError, q_bracket, scaling_to_asep
from okl.asep import generator_stationary
from okl.mpa import (DivergentTruncation, build_rep, check_dehp_relations, log_matrix_element, mpa_law,
                     mpa_state_probability, mpa_state_probability_adaptive)


def test_rep_entries():
    q = 0.4
    rep = build_rep(AbcdParams(0.3, -q, 0.5, -q), q, 10)
    d, e = rep.d_matrix, rep.e_matrix
    # row/column n = 2 in one-based indexing
    assert d[1, 1] == pytest.approx(q_bracket(2, q))
    assert d[1, 2] == pytest.approx(q_bracket(2, q))
    assert e[1, 1] == pytest.approx(q_bracket(2, q))
    assert e[2, 1] == pytest.approx(q_bracket(3, q))
    assert rep.w_vec[2] == pytest.approx(0.125)
    assert rep.v_vec[2] == pytest.approx(0.3 ** 3 * q_bracket(3, q))
    assert np.all(np.triu(d, 2) == 0) and np.all(np.tril(d, -1) == 0)


def test_q_zero_is_binary():
    rep = build_rep(AbcdParams(0.3, 0.0, 0.5, 0.0), 0.0, 6)
    assert set(np.unique(rep.d_matrix)) <= {0.0, 1.0}
    assert set(np.unique(rep.e_matrix)) <= {0.0, 1.0}


def test_divergent_truncation():
    with pytest.raises(DivergentTruncation):
        build_rep(AbcdParams(1.2, -0.5, 0.5, -0.5), 0.5, 10)


@pytest.mark.parametrize("seed", range(5))
def test_dehp_residuals_random(seed):
    rng = np.random.default_rng(seed)
    for _ in range(10000):  # Liggett rates, rejection-sampled until A, C < 1
        q = rng.uniform(0.0, 0.9)
        alpha, beta = rng.uniform(0.2, 1.0, size=2)
        gamma, delta = q * (1 - alpha), q * (1 - beta)
        params = AsepParams(alpha, beta, gamma, delta, q, 3)
        abcd = params.abcd()
        if abcd.a_param < 1 and abcd.c_param < 1:
            break
    else:
        pytest.fail("no admissible rates drawn")
    res = check_dehp_relations(build_rep(abcd, q, 40), alpha, beta, gamma, delta)
    assert res.max <= 1e-10


def test_dehp_residuals_scaled():
    params, abcd, _ = scaling_to_asep(ScalingSpec(9, 1.0, 1.0))
    res = check_dehp_relations(build_rep(abcd, params.q, 40), params.alpha, params.beta, params.gamma,
                               params.delta)
    assert res.max <= 1e-10


def test_dehp_last_row_excluded():
    params, abcd, _ = scaling_to_asep(ScalingSpec(9, 1.0, 1.0))
    rep = build_rep(abcd, params.q, 12)
    full = rep.d_matrix @ rep.e_matrix - params.q * rep.e_matrix @ rep.d_matrix - rep.d_matrix - rep.e_matrix
    assert np.max(np.abs(full[:-1, :-1])) <= 1e-10
    assert np.max(np.abs(full[-1, :])) > 1e-3


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
@pytest.mark.parametrize("u,v", [(1.0, 1.0), (2.0, 0.5), (0.3, 0.4)])
def test_mpa_matches_generator(n, u, v):
    params, abcd, _ = scaling_to_asep(ScalingSpec(n, u, v))
    gen = generator_stationary(params)
    law = mpa_law(abcd, params.q, n)
    assert np.max(np.abs(law.probs - gen.probs)) <= 1e-8


def test_state_probabilities_sum_to_one():
    params, abcd, _ = scaling_to_asep(ScalingSpec(4, 1.0, 1.0))
    total = sum(mpa_state_probability_adaptive(abcd, params.q, tau)[0]
                for tau in itertools.product((0, 1), repeat=4))
    assert total == pytest.approx(1.0, abs=1e-10)


def test_single_site():
    alpha, beta = 0.8, 0.6
    q = 0.3
    gamma, delta = q * (1 - alpha), q * (1 - beta)
    abcd = AsepParams(alpha, beta, gamma, delta, q, 1).abcd()
    p, _ = mpa_state_probability_adaptive(abcd, q, (1,))
    assert p == pytest.approx((alpha + delta) / (alpha + beta + gamma + delta), abs=1e-10)


def test_log_matrix_element_large_word():
    params, abcd, _ = scaling_to_asep(ScalingSpec(400, 1.0, 1.0))
    rep = build_rep(abcd, params.q, 256)
    log_val, sign = log_matrix_element(rep, (2,) * 400)
    assert sign == 1.0 and math.isfinite(log_val) and log_val > 700  # would overflow as a float


def test_fixed_truncation_matches_adaptive():
    params, abcd, _ = scaling_to_asep(ScalingSpec(5, 1.0, 1.0))
    tau = (1, 0, 1, 1, 0)
    assert mpa_state_probability(build_rep(abcd, params.q, 512), tau) == pytest.approx(
        mpa_state_probability_adaptive(abcd, params.q, tau)[0], rel=1e-10)


def test_truncation_error_carries_estimates():
    abcd = AbcdParams(0.999, -0.5, 0.999, -0.5)
    with pytest.raises(TruncationError) as info:
        mpa_state_probability_adaptive(abcd, 0.999, (1, 0), m_start=2, m_max=8)
    assert len(info.value.estimates) == 2
