"""Continuum weight ``H(x, g, h)``, Brownian paths, and the measure ``Q``.

``H(x, g, h) = exp(-2(u+v)x - 2v g(L) - e^{-2x} int_0^L e^{-2g})``. The
path measure gives each component diffusion coefficient ``1/sqrt(2)``
(variance ``t/2``), the limit of a planar simple walk whose components
each move with probability 1/2.

For a fixed path the x-integral is explicit: with ``I = int e^{-2g}`` and
``s = u + v``,

    int_R H dx = Gamma(s) / 2 * I^{-s} * e^{-2v g(L)},

and ``e^{-2x} I`` given the path is ``Gamma(s, 1)`` distributed under ``Q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.special as sc

from . import kernels
from .errors import DomainError, FanRegionError, UnreliableEstimateError
from .stats import ess_from_log_weights, normalize_log_weights

DEFAULT_GRID = 1024
MIN_ESS = 100.0
WINDOW_RTOL = 1e-8
_CHUNK = 4096


def _check_fan(u: float, v: float) -> None:
    if not u + v > 0:
        raise FanRegionError(f"u + v must be positive, got {u + v}")


@dataclass(frozen=True)
class BrownianPathSpec:
    n_grid: int
    interval_length: float = 1.0

    def __post_init__(self):
        if self.n_grid < 1:
            raise DomainError("n_grid must be positive")
        if not self.interval_length > 0:
            raise DomainError("interval length must be positive")

    @property
    def dt(self) -> float:
        return self.interval_length / self.n_grid

    @property
    def step_std(self) -> float:
        return math.sqrt(self.dt / 2.0)

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.interval_length, self.n_grid + 1)

    def increments(self, rng: np.random.Generator, n_paths: int) -> np.ndarray:
        return rng.normal(0.0, self.step_std, size=(n_paths, self.n_grid))

    def paths(self, rng: np.random.Generator, n_paths: int) -> np.ndarray:
        """``(n_paths, M + 1)`` array of grid values starting at 0."""
        inc = self.increments(rng, n_paths)
        out = np.zeros((n_paths, self.n_grid + 1))
        np.cumsum(inc, axis=1, out=out[:, 1:])
        return out


@dataclass(frozen=True)
class KpzSample:
    x: float
    g_values: np.ndarray = field(repr=False)
    h_values: np.ndarray = field(repr=False)
    weight: float


def riemann_integral(g_values: np.ndarray, interval_length: float) -> np.ndarray:
    """Left-endpoint sum of ``e^{-2g}`` over the grid (last axis)."""
    g = np.asarray(g_values, dtype=float)
    m = g.shape[-1] - 1
    return interval_length / m * np.exp(-2.0 * g[..., :-1]).sum(axis=-1)


def kpz_log_weight(x, g_values, interval_length: float, u: float, v: float):
    """``log H(x, g, h)`` with the integral replaced by the left Riemann sum."""
    g = np.asarray(g_values, dtype=float)
    integral = riemann_integral(g, interval_length)
    return -2.0 * (u + v) * np.asarray(x) - 2.0 * v * g[..., -1] - np.exp(-2.0 * np.asarray(x)) * integral


def kpz_weight(x, g_values, interval_length: float, u: float, v: float):
    return np.exp(kpz_log_weight(x, g_values, interval_length, u, v))


def exp_integral_exact(g_func, interval_length: float) -> float:
    """``int_0^L e^{-2 g(t)} dt`` by adaptive quadrature."""
    val, _ = scipy.integrate.quad(lambda t: math.exp(-2.0 * g_func(t)), 0.0, interval_length,
                                  epsabs=0.0, epsrel=1e-13, limit=500)
    return val


def kpz_weight_exact(x: float, g_func, interval_length: float, u: float, v: float) -> float:
    """``H(x, g, h)`` for a callable path, integral by quadrature."""
    integral = exp_integral_exact(g_func, interval_length)
    return math.exp(-2.0 * (u + v) * x - 2.0 * v * g_func(interval_length)
                    - math.exp(-2.0 * x) * integral)


def path_functionals(spec: BrownianPathSpec, n_paths: int, rng: np.random.Generator):
    """Riemann integrals ``I`` and endpoints ``g(L)`` of fresh Brownian paths."""
    integrals = np.empty(n_paths)
    ends = np.empty(n_paths)
    for lo in range(0, n_paths, _CHUNK):
        hi = min(n_paths, lo + _CHUNK)
        inc = spec.increments(rng, hi - lo)
        kernels.riemann_exp_integral(inc, spec.dt, integrals[lo:hi], ends[lo:hi])
    return integrals, ends


def log_x_integrated_weight(integrals, g_end, u: float, v: float) -> np.ndarray:
    """``log int_R H(x, g, h) dx`` per path."""
    s = u + v
    return math.log(0.5) + sc.gammaln(s) - s * np.log(integrals) - 2.0 * v * np.asarray(g_end)


def default_x_window(u: float, v: float, integrals: np.ndarray) -> tuple[float, float]:
    """x-range holding all but a negligible part of every path's x-integrand.

    The integrand for path ``p`` peaks at ``x_p = log(I_p / s) / 2``; below
    it decays doubly exponentially and above it like ``e^{-2 s x}``.
    """
    s = u + v
    peaks = 0.5 * np.log(np.asarray(integrals) / s)
    return float(peaks.min() - 6.0), float(peaks.max() + 40.0 / (2.0 * s))


def _trapezoid_x(u, v, integrals, g_end, window, n_x):
    xs = np.linspace(window[0], window[1], n_x)
    out = np.empty(len(integrals))
    for lo in range(0, len(integrals), 512):
        hi = min(len(integrals), lo + 512)
        logf = (-2.0 * (u + v) * xs[None, :] - 2.0 * v * g_end[lo:hi, None]
                - np.exp(-2.0 * xs)[None, :] * integrals[lo:hi, None])
        out[lo:hi] = np.trapezoid(np.exp(logf), xs, axis=1)
    return out


@dataclass(frozen=True)
class ZEstimate:
    value: float
    stderr: float
    window: tuple
    window_rel_change: float
    closed_form_value: float
    n_samples: int
    n_grid: int

    @property
    def finite(self) -> bool:
        return math.isfinite(self.value) and math.isfinite(self.stderr)


def z_continuum(u: float, v: float, interval_length: float = 1.0, n_samples: int = 20000,
                seed: int = 0, x_window=None, n_grid: int = DEFAULT_GRID,
                x_step: float = 0.01, window_rtol: float = WINDOW_RTOL) -> ZEstimate:
    """Monte Carlo estimate of ``Z_{u,v} = int dx E[H(x, g, h)]``.

    Paths are Monte Carlo; for each path the x-integral is a trapezoid rule
    on ``x_window``. The window is then doubled about its centre and the
    estimate must move by at most ``window_rtol`` relative, else
    ``DomainError``. ``closed_form_value`` uses the exact per-path
    x-integral as a cross-check.
    """
    _check_fan(u, v)
    spec = BrownianPathSpec(n_grid, interval_length)
    rng = np.random.default_rng(seed)
    integrals, g_end = path_functionals(spec, n_samples, rng)
    if x_window is None:
        x_window = default_x_window(u, v, integrals)
    lo, hi = map(float, x_window)
    if not lo < hi:
        raise DomainError("empty x window")
    n_x = int(math.ceil((hi - lo) / x_step)) + 1
    vals = _trapezoid_x(u, v, integrals, g_end, (lo, hi), n_x)
    width = hi - lo
    wide = (lo - width / 2.0, hi + width / 2.0)
    vals_wide = _trapezoid_x(u, v, integrals, g_end, wide, 2 * n_x - 1)
    est, est_wide = vals.mean(), vals_wide.mean()
    rel = abs(est_wide - est) / abs(est_wide) if est_wide != 0 else math.inf
    if not (math.isfinite(est) and est > 0):
        raise DomainError(f"non-finite partition function estimate {est}")
    if rel > window_rtol:
        raise DomainError(f"x window not wide enough: doubling moved the estimate by {rel:.2e}")
    closed = float(np.exp(log_x_integrated_weight(integrals, g_end, u, v)).mean())
    return ZEstimate(float(est), float(vals.std(ddof=1) / math.sqrt(n_samples)), (lo, hi),
                     float(rel), closed, n_samples, n_grid)


@dataclass
class KpzSampleSet:
    """Self-normalised weighted draws from ``Q``."""

    x: np.ndarray
    g_end: np.ndarray
    h_end: np.ndarray
    weights: np.ndarray
    ess: float
    g_paths: np.ndarray | None = field(default=None, repr=False)
    h_paths: np.ndarray | None = field(default=None, repr=False)

    @property
    def s_end(self) -> np.ndarray:
        return self.g_end + self.h_end

    def __len__(self) -> int:
        return len(self.x)

    def sample(self, i: int) -> KpzSample:
        if self.g_paths is None:
            raise DomainError("paths were not kept; rerun with keep_paths=True")
        return KpzSample(float(self.x[i]), self.g_paths[i], self.h_paths[i], float(self.weights[i]))


def q_sampler(u: float, v: float, interval_length: float = 1.0, n_samples: int = 100000,
              seed: int = 0, n_grid: int = DEFAULT_GRID, keep_paths: bool = False,
              min_ess: float = MIN_ESS) -> KpzSampleSet:
    """Importance sample ``(x, g, h)`` from ``Q_{L;u,v}``.

    Proposal: ``g`` and ``h`` independent Brownian paths, and ``x`` drawn
    exactly from its conditional law given ``g`` (so only the path weight
    ``I^{-s} e^{-2v g(L)}`` remains). ``h`` is untouched by the weight.
    """
    _check_fan(u, v)
    s = u + v
    spec = BrownianPathSpec(n_grid, interval_length)
    rng = np.random.default_rng(seed)
    if keep_paths:
        g_paths = spec.paths(rng, n_samples)
        integrals = riemann_integral(g_paths, interval_length)
        g_end = g_paths[:, -1].copy()
    else:
        g_paths = None
        integrals, g_end = path_functionals(spec, n_samples, rng)
    y = rng.gamma(s, 1.0, size=n_samples)
    x = -0.5 * np.log(y / integrals)
    if keep_paths:
        h_paths = spec.paths(rng, n_samples)
        h_end = h_paths[:, -1].copy()
    else:
        h_paths = None
        h_end = rng.normal(0.0, math.sqrt(interval_length / 2.0), size=n_samples)
    log_w = log_x_integrated_weight(integrals, g_end, u, v)
    ess_val = ess_from_log_weights(log_w)
    if ess_val < min_ess:
        raise UnreliableEstimateError(f"effective sample size {ess_val:.1f} below {min_ess}")
    return KpzSampleSet(x, g_end, h_end, normalize_log_weights(log_w), ess_val, g_paths, h_paths)


def right_tail_slope(values, weights, q_lo: float = 0.99, q_hi: float = 0.9999) -> float:
    """Slope of ``log P(X > t)`` against ``t`` between two upper quantiles."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    order = np.argsort(values)
    xs = values[order]
    cdf = np.cumsum(weights[order]) / weights.sum()
    surv = 1.0 - cdf
    sel = (cdf >= q_lo) & (cdf <= q_hi) & (surv > 0)
    if sel.sum() < 10:
        raise DomainError("too few points in the tail window")
    slope, _ = np.polyfit(xs[sel], np.log(surv[sel]), 1)
    return float(slope)


def envelope_ratio(u: float, v: float, x_grid, interval_length: float = 1.0,
                   n_samples: int = 20000, seed: int = 0, n_grid: int = DEFAULT_GRID) -> np.ndarray:
    """``E_W[H(x, .)] e^{2(u+v)x} / K_0(sqrt(2) e^{-x})`` on ``x_grid``."""
    spec = BrownianPathSpec(n_grid, interval_length)
    integrals, g_end = path_functionals(spec, n_samples, np.random.default_rng(seed))
    out = []
    for x in np.asarray(x_grid, dtype=float):
        mean = np.mean(np.exp(-2.0 * v * g_end - math.exp(-2.0 * x) * integrals))
        out.append(mean / sc.k0(math.sqrt(2.0) * math.exp(-x)))
    return np.array(out)


# Mellin transform of K_nu ------------------------------------------------

@dataclass(frozen=True)
class BesselCheck:
    mu: float
    nu: float
    a: float
    quadrature: float
    closed_form: float

    @property
    def residual(self) -> float:
        return abs(self.quadrature - self.closed_form) / abs(self.closed_form)


def mellin_k_closed_form(mu: float, nu: float, a: float) -> float:
    """``int_0^inf x^mu K_nu(a x) dx`` in closed form."""
    return float(2.0 ** (mu - 1) * a ** (-mu - 1)
                 * sc.gamma((1 + mu + nu) / 2) * sc.gamma((1 + mu - nu) / 2))


def mellin_k_quadrature(mu: float, nu: float, a: float) -> float:
    """Same integral numerically, after ``x = e^t`` and with ``K`` scaled by ``e^{z}``."""

    def integrand(t):
        z = a * math.exp(t)
        return math.exp((mu + 1) * t - z) * sc.kve(nu, z)

    # Left tail decays like e^{(mu+1-|nu|)t} (times |t| when nu = 0), right
    # tail like exp(-a e^t); cut both where they fall below e^{-60}.
    t0 = -math.log(a)
    t_lo = t0 - 70.0 / (mu + 1 - abs(nu))
    t_hi = t0 + math.log(700.0)
    n_left = max(8, int((t0 - t_lo) / 5.0))
    edges = np.unique(np.concatenate([np.linspace(t_lo, t0, n_left), np.linspace(t0, t_hi, 8)]))
    pieces = list(zip(edges[:-1], edges[1:]))
    # a rough pass sets the absolute tolerance, so negligible pieces stop early
    rough = sum(scipy.integrate.quad(integrand, lo, hi, epsrel=1e-6, limit=200)[0] for lo, hi in pieces)
    return sum(scipy.integrate.quad(integrand, lo, hi, epsabs=1e-15 * abs(rough), epsrel=1e-12,
                                    limit=500)[0] for lo, hi in pieces)


def bessel_mellin_check(mu: float, nu: float, a: float) -> BesselCheck:
    if not (mu + 1 - abs(nu) > 0 and a > 0):
        raise DomainError("need mu + 1 > |nu| and a > 0")
    return BesselCheck(mu, nu, a, mellin_k_quadrature(mu, nu, a), mellin_k_closed_form(mu, nu, a))


def partition_bound_integral(u: float, v: float) -> float:
    """``int_R e^{-2(u+v)x} K_0(sqrt(2) e^{-x}) dx = 2^{s-2} Gamma(s)^2`` with ``s = u + v``."""
    _check_fan(u, v)
    s = u + v
    return 2.0 ** (s - 2) * math.gamma(s) ** 2
