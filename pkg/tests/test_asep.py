import numpy as np
import pytest
import scipy.linalg as sla

from okl import AsepParams, CapacityError, DomainError, FiniteLaw, ScalingSpec, scaling_to_asep, total_variation
from okl.asep import (all_states, bond_currents, generator_matrix, generator_stationary, gillespie_simulate,
                      height_increment_law, stationary_current, stationary_residual, state_bits, state_index)

RATES = [(1.0, 0.7, 0.2, 0.1, 0.3), (0.4, 1.3, 0.0, 0.5, 0.0), (2.0, 0.5, 1.1, 0.0, 0.8)]


def test_state_encoding():
    assert state_index((1, 0, 1)) == 5
    assert state_bits(5, 3) == (1, 0, 1)
    assert all_states(2) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    with pytest.raises(DomainError):
        state_index((1, 2))


@pytest.mark.parametrize("alpha,beta,gamma,delta,q", RATES)
def test_single_site_balance(alpha, beta, gamma, delta, q):
    law = generator_stationary(AsepParams(alpha, beta, gamma, delta, q, 1))
    assert law.prob((1,)) == pytest.approx((alpha + delta) / (alpha + beta + gamma + delta), abs=1e-14)
    inc = height_increment_law(law)
    assert inc.prob((1,)) == pytest.approx((alpha + delta) / (alpha + beta + gamma + delta), abs=1e-14)


def test_matrix_exponential_oracle():
    params = AsepParams(1.0, 1.0, 0.0, 0.0, 0.0, 2)
    gen = generator_matrix(params).toarray()
    row = sla.expm(1e3 * gen)[0]
    law = generator_stationary(params)
    assert total_variation(law, FiniteLaw(law.outcomes, row / row.sum())) <= 1e-9


def test_generator_rows_sum_to_zero():
    gen = generator_matrix(AsepParams(*RATES[0], 5)).toarray()
    assert np.allclose(gen.sum(axis=1), 0.0, atol=1e-14)


@pytest.mark.parametrize("rates", RATES)
@pytest.mark.parametrize("n", [2, 4, 6])
def test_particle_hole_symmetry(rates, n):
    params = AsepParams(*rates, n)
    pi = generator_stationary(params)
    mirrored = generator_stationary(params.particle_hole())
    mapped = mirrored.pushforward(lambda tau: tuple(1 - t for t in reversed(tau)))
    assert total_variation(pi, mapped) <= 1e-12


@pytest.mark.parametrize("n", [1, 3, 6, 9, 11])
def test_residual_and_normalisation(n):
    params = AsepParams(*RATES[0], n)
    law = generator_stationary(params)
    assert stationary_residual(params, law) <= 1e-12
    assert law.probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(law.probs >= 0)
    inc = height_increment_law(law)
    assert inc.probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert all(s in (-1, 1) for tup in inc.outcomes for s in tup)


def test_dense_sparse_power_agree():
    params = AsepParams(*RATES[0], 8)
    dense = generator_stationary(params, method="dense")
    for method in ("sparse", "power"):
        assert total_variation(dense, generator_stationary(params, method=method)) <= 1e-11


def test_power_iteration_above_ten_sites():
    params, _, _ = scaling_to_asep(ScalingSpec(12, 1.0, 1.0))
    law = generator_stationary(params)
    assert stationary_residual(params, law) <= 1e-12


def test_capacity():
    with pytest.raises(CapacityError):
        generator_stationary(AsepParams(*RATES[0], 15))


def test_increment_pushforward_is_bijective():
    pi = generator_stationary(AsepParams(*RATES[2], 4))
    inc = height_increment_law(pi)
    pulled = inc.pushforward(lambda s: tuple((x + 1) // 2 for x in s))
    assert total_variation(pi, pulled) == 0.0


def test_current_conservation():
    params = AsepParams(*RATES[0], 5)
    pi = generator_stationary(params)
    j = stationary_current(params, pi)
    assert np.allclose(bond_currents(params, pi), j, atol=1e-12)


def test_tasep_current_identity():
    alpha, beta = 0.6, 0.8
    params = AsepParams(alpha, beta, 0.0, 0.0, 0.0, 3)
    pi = generator_stationary(params)
    empty_first = sum(p for tau, p in zip(pi.outcomes, pi.probs) if tau[0] == 0)
    occupied_last = sum(p for tau, p in zip(pi.outcomes, pi.probs) if tau[-1] == 1)
    assert stationary_current(params, pi) == pytest.approx(alpha * empty_first, abs=1e-14)
    assert alpha * empty_first == pytest.approx(beta * occupied_last, abs=1e-12)


def test_gillespie_determinism():
    params = AsepParams(*RATES[0], 4)
    a = gillespie_simulate(params, 50.0, seed=11)
    b = gillespie_simulate(params, 50.0, seed=11)
    assert np.array_equal(a.times, b.times) and np.array_equal(a.states, b.states)
    assert np.array_equal(a.counters, b.counters)
    c = gillespie_simulate(params, 50.0, seed=12)
    assert not np.array_equal(a.states[:50], c.states[:50])


def test_gillespie_counters_balance():
    params = AsepParams(*RATES[0], 4)
    traj = gillespie_simulate(params, 200.0, seed=1, initial_state=(0, 0, 0, 0))
    net_in = traj.entered_left - traj.exited_left - traj.exited_right + traj.entered_right
    assert net_in == sum(traj.bits(traj.n_events))


def test_gillespie_max_events():
    traj = gillespie_simulate(AsepParams(*RATES[0], 3), 1e9, seed=0, max_events=1000)
    assert traj.n_events == 1000
    with pytest.raises(DomainError):
        gillespie_simulate(AsepParams(*RATES[0], 3), 0.0, seed=0)


@pytest.mark.slow
def test_gillespie_site_one_occupation():
    params = AsepParams(*RATES[0], 4)
    exact = generator_stationary(params)
    p1 = sum(p for tau, p in zip(exact.outcomes, exact.probs) if tau[0] == 1)
    traj = gillespie_simulate(params, 1e4, seed=5)
    mean, se = traj.batch_means(1e3, 1e4, n_batches=50)
    first = np.array([tau[0] for tau in all_states(4)]) == 1
    est = mean[first].sum()
    # batch-means error for the marginal directly
    edges = np.linspace(1e3, 1e4, 51)
    vals = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        w = traj.occupation_weights(lo, hi)
        vals.append(w[first].sum() / w.sum())
    se1 = np.std(vals, ddof=1) / np.sqrt(len(vals))
    assert abs(est - p1) <= 3 * se1
