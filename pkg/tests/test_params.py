import math

import numpy as np
import pytest

from okl import (AbcdParams, AsepParams, BoundaryDensities, DomainError, FanRegionError, ScalingSpec,
                 kappa_pm, q_bracket, scaling_to_asep)
from okl.params import log_q_bracket_log, q_bracket_log


def test_q_bracket_examples():
    assert q_bracket(1, 0.37) == 1.0
    assert q_bracket(0, 0.37) == 0.0
    assert q_bracket(3, 0.5) == pytest.approx(1.75, rel=1e-15)


def test_q_bracket_negative_n():
    q = 0.5
    assert q_bracket(-1, q) == pytest.approx((1 - q ** -1) / (1 - q), rel=1e-14)


def test_q_bracket_q_zero():
    assert q_bracket(5, 0.0) == 1.0
    assert q_bracket(0, 0.0) == 0.0


@pytest.mark.parametrize("q", [-0.1, 1.0, 1.5, float("nan")])
def test_q_bracket_domain(q):
    with pytest.raises(DomainError):
        q_bracket(2, q)


def test_q_bracket_large_n_accuracy():
    # q = exp(-2/sqrt(N)) with N = 10^8: the naive formula loses ~8 digits
    log_q = -2.0 / 1e4
    n = 12345
    exact = math.fsum(math.exp(j * log_q) for j in range(n))
    assert q_bracket_log(n, log_q) == pytest.approx(exact, rel=1e-12)
    assert log_q_bracket_log(n, log_q) == pytest.approx(math.log(exact), rel=1e-13)


def test_kappa_examples():
    assert kappa_pm(0.0, 1.0, 0.0) == (0.0, 0.0)
    plus, minus = kappa_pm(0.25, 0.5, 0.2)
    roots = sorted(np.roots([0.5, -0.45, -0.2]))
    assert plus == pytest.approx(roots[1], rel=1e-13)
    assert minus == pytest.approx(roots[0], rel=1e-13)


def test_kappa_domain():
    with pytest.raises(DomainError):
        kappa_pm(0.5, 0.0, 0.1)


def test_scaling_q_value():
    spec = ScalingSpec(4, 1.0, 1.0, 1.0)
    assert spec.q == pytest.approx(math.exp(-1.0), rel=1e-15)
    params, abcd, _ = scaling_to_asep(spec)
    assert params.q == pytest.approx(0.3678794, abs=1e-7)


@pytest.mark.parametrize("u,v,n", [(1, 1, 4), (2, 0.5, 9), (0.3, 0.4, 100), (1.5, -0.5, 16), (-0.2, 0.7, 25)])
def test_scaling_round_trip(u, v, n):
    params, abcd, dens = scaling_to_asep(ScalingSpec(n, u, v))
    q = params.q
    assert kappa_pm(q, params.beta, params.delta)[0] == pytest.approx(abcd.a_param, abs=1e-12)
    assert kappa_pm(q, params.alpha, params.gamma)[0] == pytest.approx(abcd.c_param, abs=1e-12)
    assert params.alpha + params.gamma / q == pytest.approx(1.0, abs=1e-14)
    assert params.beta + params.delta / q == pytest.approx(1.0, abs=1e-14)
    assert abcd.b_param == abcd.d_param == -q
    assert abcd.a_param * abcd.c_param == pytest.approx(q ** (u + v), rel=1e-14)
    assert abcd.a_param * abcd.c_param < 1.0
    assert abcd.in_fan_region()
    # the minus roots agree with B = D = -q
    assert kappa_pm(q, params.beta, params.delta)[1] == pytest.approx(-q, abs=1e-12)
    assert dens.rho_left == pytest.approx(1 / (1 + abcd.c_param))
    assert dens.rho_right == pytest.approx(abcd.a_param / (1 + abcd.a_param))


@pytest.mark.parametrize("n", [10 ** 2, 10 ** 4, 10 ** 6])
def test_density_expansion(n):
    u = 0.7
    _, _, dens = scaling_to_asep(ScalingSpec(n, u, 0.4))
    err = dens.rho_left - (0.5 + u / (2 * math.sqrt(n)))
    # o(N^{-1/2}): the next term is O(1/N)
    assert abs(err) * math.sqrt(n) < 2.0 / math.sqrt(n)


def test_fan_region_rejected():
    with pytest.raises(FanRegionError):
        ScalingSpec(4, 0.5, -0.5)
    with pytest.raises(FanRegionError):
        ScalingSpec(4, -1.0, 0.2)


def test_asep_params_validation():
    with pytest.raises(DomainError):
        AsepParams(0.0, 1.0, 0.0, 0.0, 0.5, 3)
    with pytest.raises(DomainError):
        AsepParams(1.0, 0.0, 0.0, 0.0, 0.5, 3)
    with pytest.raises(DomainError):
        AsepParams(1.0, 1.0, 0.0, 0.0, 0.5, 0)
    with pytest.raises(DomainError):
        AsepParams(-1.0, 1.0, 0.0, 0.0, 0.5, 2)


def test_densities_domain():
    with pytest.raises(DomainError):
        BoundaryDensities.from_abcd(AbcdParams(0.5, 0.0, -1.0, 0.0))
    d = BoundaryDensities.from_abcd(AbcdParams(0.0, 0.0, 0.3, 0.0))
    assert 0 < d.rho_left < 1 and d.rho_right == 0.0
