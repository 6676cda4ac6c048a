"""Model parameters and the maps between them.

Covers the open ASEP rates, the (A, B, C, D) reparameterisation through
``kappa_pm``, boundary densities, q-deformed integers, and the weak
asymmetry scaling ``q = exp(-2/sqrt(N))``, ``A = q**v``, ``C = q**u``,
``B = D = -q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, FanRegionError


def _check_q(q: float) -> None:
    if not (0.0 <= q < 1.0) or math.isnan(q):
        raise DomainError(f"q must lie in [0, 1), got {q!r}")


def q_bracket(n, q: float):
    """q-deformed integer ``[n]_q = (1 - q**n) / (1 - q)``.

    Accepts a scalar or an integer array for ``n``. Negative ``n`` is
    allowed for ``q > 0`` (the value is then negative). Evaluated with
    ``expm1`` so the result stays accurate when ``1 - q`` is tiny.
    """
    _check_q(q)
    n_arr = np.asarray(n)
    if q == 0.0:
        if np.any(n_arr < 0):
            raise DomainError("[n]_0 is undefined for negative n")
        out = (n_arr > 0).astype(float)
        return float(out) if out.ndim == 0 else out
    return q_bracket_log(n_arr, math.log(q))


def q_bracket_log(n, log_q: float):
    """``[n]_q`` given ``log q`` directly (``log_q < 0``).

    Under the weak asymmetry scaling ``log q = -2/sqrt(N)`` is known
    exactly, so powers are formed as ``exp(n log q)`` and never by
    repeated multiplication.
    """
    if not log_q < 0.0:
        raise DomainError(f"log q must be negative, got {log_q!r}")
    n_arr = np.asarray(n, dtype=float)
    out = np.expm1(n_arr * log_q) / math.expm1(log_q)
    return float(out) if out.ndim == 0 else out


def log_q_bracket_log(n, log_q: float):
    """``log [n]_q`` for ``n >= 1`` given ``log q``; ``-inf`` for ``n = 0``."""
    n_arr = np.asarray(n, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.log(-np.expm1(n_arr * log_q)) - math.log(-math.expm1(log_q))
    return float(out) if out.ndim == 0 else out


def kappa_pm(q: float, x: float, y: float) -> tuple[float, float]:
    """Roots ``(kappa_plus, kappa_minus)`` of ``x k^2 - (1-q-x+y) k - y = 0``.

    ``kappa_plus >= kappa_minus``. ``A = kappa_plus(q, beta, delta)`` and
    ``C = kappa_plus(q, alpha, gamma)``; the minus roots give B and D.
    """
    if not x > 0.0:
        raise DomainError(f"kappa_pm needs x > 0, got {x!r}")
    if y < 0.0:
        raise DomainError(f"kappa_pm needs y >= 0, got {y!r}")
    b = 1.0 - q - x + y
    disc = math.sqrt(b * b + 4.0 * x * y)
    # cancellation-free pair: one root from the formula, the other by Vieta
    if b >= 0.0:
        plus = (b + disc) / (2.0 * x)
        minus = -y / (x * plus) if plus != 0.0 else (b - disc) / (2.0 * x)
    else:
        minus = (b - disc) / (2.0 * x)
        plus = -y / (x * minus)
    return plus, minus


@dataclass(frozen=True)
class AsepParams:
    """Open ASEP rates on ``n_sites`` sites.

    Particles enter on the left at ``alpha`` and leave there at ``gamma``;
    they leave on the right at ``beta`` and enter there at ``delta``. Bulk
    jumps go right at rate 1 and left at rate ``q``.
    """

    alpha: float
    beta: float
    gamma: float
    delta: float
    q: float
    n_sites: int

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "delta"):
            val = getattr(self, name)
            if not (val >= 0.0 and math.isfinite(val)):
                raise DomainError(f"{name} must be a finite nonnegative rate, got {val!r}")
        _check_q(self.q)
        if int(self.n_sites) != self.n_sites or self.n_sites < 1:
            raise DomainError(f"n_sites must be a positive integer, got {self.n_sites!r}")
        if not (self.alpha > 0.0 or self.delta > 0.0):
            raise DomainError("no particle can enter: need alpha > 0 or delta > 0")
        if not (self.beta > 0.0 or self.gamma > 0.0):
            raise DomainError("no particle can exit: need beta > 0 or gamma > 0")

    def abcd(self) -> "AbcdParams":
        """The (A, B, C, D) parameters. Requires ``alpha > 0`` and ``beta > 0``."""
        a_plus, a_minus = kappa_pm(self.q, self.beta, self.delta)
        c_plus, c_minus = kappa_pm(self.q, self.alpha, self.gamma)
        return AbcdParams(a_plus, a_minus, c_plus, c_minus)

    def particle_hole(self) -> "AsepParams":
        """Rates of the model seen through ``tau -> 1 - tau`` with sites reversed."""
        return AsepParams(
            alpha=self.beta,
            beta=self.alpha,
            gamma=self.delta,
            delta=self.gamma,
            q=self.q,
            n_sites=self.n_sites,
        )

    def with_sites(self, n_sites: int) -> "AsepParams":
        return AsepParams(self.alpha, self.beta, self.gamma, self.delta, self.q, n_sites)


@dataclass(frozen=True)
class AbcdParams:
    a_param: float
    b_param: float
    c_param: float
    d_param: float

    def in_fan_region(self) -> bool:
        return (
            self.a_param * self.c_param < 1.0
            and -1.0 < self.b_param <= 0.0
            and -1.0 < self.d_param <= 0.0
        )


@dataclass(frozen=True)
class BoundaryDensities:
    rho_left: float
    rho_right: float

    @classmethod
    def from_abcd(cls, abcd: AbcdParams) -> "BoundaryDensities":
        if abcd.c_param <= -1.0:
            raise DomainError("rho_left needs C > -1")
        if abcd.a_param < 0.0:
            raise DomainError("rho_right needs A >= 0")
        return cls(1.0 / (1.0 + abcd.c_param), abcd.a_param / (1.0 + abcd.a_param))


@dataclass(frozen=True)
class ScalingSpec:
    """Weak asymmetry scaling at size ``n_steps`` with Neumann parameters ``u, v``."""

    n_steps: int
    u: float
    v: float
    interval_length: float = 1.0

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise DomainError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        if not self.interval_length > 0.0:
            raise DomainError("interval_length must be positive")
        if not self.u + self.v > 0.0:
            raise FanRegionError(f"fan region requires u + v > 0, got u={self.u}, v={self.v}")

    @property
    def sqrt_n(self) -> float:
        return math.sqrt(self.n_steps)

    @property
    def log_q(self) -> float:
        return -2.0 / math.sqrt(self.n_steps)

    @property
    def q(self) -> float:
        return math.exp(self.log_q)

    @property
    def a_param(self) -> float:
        return math.exp(self.v * self.log_q)

    @property
    def c_param(self) -> float:
        return math.exp(self.u * self.log_q)

    def with_n(self, n_steps: int) -> "ScalingSpec":
        return ScalingSpec(n_steps, self.u, self.v, self.interval_length)


def _liggett_rate(q: float, target: float) -> float:
    """Solve ``kappa_plus(q, r, q (1 - r)) = target`` for ``r`` in (0, 1] by bisection."""
    if target == 0.0:
        return 1.0

    def f(r):
        return kappa_pm(q, r, q * (1.0 - r))[0] - target

    lo = 1e-300
    # kappa_plus decreases from ~(1-q)/r at r -> 0 to 0 at r = 1
    if f(lo) < 0.0 or target < 0.0:
        raise DomainError(f"boundary parameter {target} is not reachable under Liggett's condition")
    return brentq(f, lo, 1.0, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=2000)


def scaling_to_asep(spec: ScalingSpec) -> tuple[AsepParams, AbcdParams, BoundaryDensities]:
    """Rates, (A, B, C, D) and densities for a scaling spec.

    Rates satisfy Liggett's condition ``alpha + gamma/q = 1``,
    ``beta + delta/q = 1``, which pins ``B = D = -q``.
    """
    if not spec.u + spec.v > 0.0:
        raise FanRegionError("fan region requires u + v > 0")
    q = spec.q
    a_target = spec.a_param
    c_target = spec.c_param
    alpha = _liggett_rate(q, c_target)
    beta = _liggett_rate(q, a_target)
    rates = AsepParams(
        alpha=alpha,
        beta=beta,
        gamma=q * (1.0 - alpha),
        delta=q * (1.0 - beta),
        q=q,
        n_sites=spec.n_steps,
    )
    abcd = AbcdParams(a_target, -q, c_target, -q)
    return rates, abcd, BoundaryDensities.from_abcd(abcd)
