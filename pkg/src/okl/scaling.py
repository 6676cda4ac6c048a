"""Rescaled random-walk measures under weak asymmetry.

With ``q = e^{-2/sqrt(N)}`` the walk offset becomes ``x`` on the lattice
``x = k / sqrt(N) - log sqrt(N)`` (``k >= 1``) and the walk coordinates
become ``g = n / sqrt(N)`` and ``h = m / sqrt(N)``. The reweighting is

    H^(N)(x, g, h) = exp(-2(u+v)x - 2v g(L)) prod_{i=0..N} (1 - e^{-2(g_i + x)} / N)

and ``e^{-2(g_i + x)} / N = q^{k + n_i}``, so each factor is ``1 - q^a``
with ``a = k + n_i`` the current level. All exact evaluators below run a
dynamic programme over that level.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.special as sc

from . import kernels
from .errors import CapacityError, DomainError, UnreliableEstimateError
from .kpz import exp_integral_exact, kpz_weight_exact
from .params import ScalingSpec, log_q_bracket_log, scaling_to_asep
from .stats import FiniteLaw, ess_from_log_weights, normalize_log_weights

MAX_EXACT_STEPS = 1024
MAX_MARGINAL_STEPS = 512
MAX_SEQUENCE_STEPS = 12
MIN_ESS = 100.0
WINDOW_RTOL = 1e-8
LAW_RTOL = 1e-13  # exact laws are compared at TV ~ 1e-12
LATTICE_TOL = 1e-9
_CHUNK = 20000


# Lattice ------------------------------------------------------------------

def minimal_lattice_point(n_steps: int) -> float:
    """Smallest element of the lattice, ``N^{-1/2} - log(N) / 2``."""
    return 1.0 / math.sqrt(n_steps) - 0.5 * math.log(n_steps)


def lattice_x(k, n_steps: int):
    return np.asarray(k) / math.sqrt(n_steps) - 0.5 * math.log(n_steps)


def lattice_index(x, n_steps: int):
    """``sqrt(N)(x + log sqrt(N))``, the (real) lattice coordinate of ``x``."""
    return math.sqrt(n_steps) * (np.asarray(x) + 0.5 * math.log(n_steps))


def lattice_range(n_steps: int, window) -> tuple[int, int]:
    """Inclusive range of lattice indices ``k >= 1`` with ``x_k`` in ``window``."""
    lo, hi = map(float, window)
    if not lo < hi:
        raise DomainError("window must satisfy x_lo < x_hi")
    k_lo = max(1, math.ceil(lattice_index(lo, n_steps) - LATTICE_TOL))
    k_hi = math.floor(lattice_index(hi, n_steps) + LATTICE_TOL)
    return k_lo, k_hi


def lattice_tilde_z(n_steps: int, window) -> np.ndarray:
    k_lo, k_hi = lattice_range(n_steps, window)
    return lattice_x(np.arange(k_lo, k_hi + 1), n_steps)


def envelope_constant(spec: ScalingSpec) -> float:
    """``K_v = (1/16) int_0^L e^{4 v t} dt``."""
    v, length = spec.v, spec.interval_length
    if v == 0.0:
        return length / 16.0
    return math.expm1(4.0 * v * length) / (64.0 * v)


def log_envelope(x, spec: ScalingSpec):
    """Log of the decay envelope ``e^{-2(u+v)x} exp(-W(e^{-x} K_v^{1/2})^2)`` (unit constants)."""
    x = np.asarray(x, dtype=float)
    w = sc.lambertw(np.exp(-x) * math.sqrt(envelope_constant(spec))).real
    return -2.0 * (spec.u + spec.v) * x - w ** 2


def envelope_peak(spec: ScalingSpec) -> float:
    grid = np.arange(-30.0, 30.0, 0.01)
    return float(grid[np.argmax(log_envelope(grid, spec))])


def default_window(spec: ScalingSpec, scale: float = 1.0) -> tuple[float, float]:
    """``[max(x_min, x* - 15 s), x* + 30 s / (2(u+v))]`` with ``s = scale``."""
    peak = envelope_peak(spec)
    lo = max(minimal_lattice_point(spec.n_steps), peak - 15.0 * scale)
    hi = peak + 30.0 * scale / (2.0 * (spec.u + spec.v))
    return lo, hi


# Pointwise evaluators -----------------------------------------------------

@dataclass(frozen=True)
class RescaledPath:
    x: float
    g_values: np.ndarray = field(repr=False)
    h_values: np.ndarray = field(repr=False)

    def __post_init__(self):
        g = np.asarray(self.g_values, dtype=float)
        h = np.asarray(self.h_values, dtype=float)
        object.__setattr__(self, "g_values", g)
        object.__setattr__(self, "h_values", h)
        if g.shape != h.shape or g.ndim != 1 or len(g) < 2:
            raise DomainError("g and h must be vectors of equal length N + 1 >= 2")
        if g[0] != 0.0 or h[0] != 0.0:
            raise DomainError("paths start at 0")

    @property
    def n_steps(self) -> int:
        return len(self.g_values) - 1

    @classmethod
    def from_walk(cls, k: int, n_path, m_path) -> "RescaledPath":
        """Image of an integer walk started at lattice index ``k``."""
        n_path = np.asarray(n_path, dtype=float)
        root = math.sqrt(len(n_path) - 1)
        return cls(float(lattice_x(k, len(n_path) - 1)), n_path / root,
                   np.asarray(m_path, dtype=float) / root)

    def is_walk(self) -> bool:
        """Every step moves exactly one of ``g, h`` by ``+-N^{-1/2}``."""
        root = math.sqrt(self.n_steps)
        dg = np.abs(np.diff(self.g_values)) * root
        dh = np.abs(np.diff(self.h_values)) * root
        one_g = np.abs(dg - 1.0) < LATTICE_TOL
        one_h = np.abs(dh - 1.0) < LATTICE_TOL
        zero_g = dg < LATTICE_TOL
        zero_h = dh < LATTICE_TOL
        return bool(np.all((one_g & zero_h) | (zero_g & one_h)))


@dataclass(frozen=True)
class RnEval:
    log_value: float
    in_support: bool

    @property
    def value(self) -> float:
        return math.exp(self.log_value) if self.in_support else 0.0


def _integer_levels(values: np.ndarray) -> np.ndarray:
    levels = np.rint(values)
    if np.any(np.abs(values - levels) > 1e-6):
        raise DomainError("path is not on the lattice")
    return levels.astype(np.int64)


def log_prefactor(x, g_end, spec: ScalingSpec):
    return -2.0 * (spec.u + spec.v) * np.asarray(x) - 2.0 * spec.v * np.asarray(g_end)


def log_prefactor_from_densities(x: float, g_end: float, spec: ScalingSpec) -> float:
    """Same prefactor written with the boundary densities of the scaled ASEP."""
    _, _, dens = scaling_to_asep(spec)
    rl, rr = dens.rho_left, dens.rho_right
    root = spec.sqrt_n
    return (root * x * math.log((1 - rl) * rr / (rl * (1 - rr)))
            + root * g_end * math.log(rr / (1 - rr)))


def rn_r(path: RescaledPath, spec: ScalingSpec) -> RnEval:
    """Unrecentred weight ``exp(-2(u+v)x - 2v g(L)) prod [sqrt(N)(g_i + x)]_q``.

    ``x`` must lie on ``N^{-1/2} Z_{>0}``.
    """
    if path.n_steps != spec.n_steps:
        raise DomainError("path length does not match spec")
    root = spec.sqrt_n
    r = _integer_levels(np.array([root * path.x]))[0]
    if r < 1:
        raise DomainError("x must be a positive multiple of N^{-1/2}")
    levels = r + _integer_levels(root * path.g_values)
    pre = float(log_prefactor(path.x, path.g_values[-1], spec))
    if levels.min() < 1:
        return RnEval(-math.inf, False)
    return RnEval(pre + float(np.sum(log_q_bracket_log(levels, spec.log_q))), True)


def hn_log_on_grid(x: float, g_values, spec: ScalingSpec) -> RnEval:
    """``H^(N)`` evaluated on any grid path, without lattice requirements."""
    g = np.asarray(g_values, dtype=float)
    n = len(g) - 1
    c = np.exp(-2.0 * (g + x)) / n
    pre = float(log_prefactor(x, g[-1], spec))
    if np.any(c >= 1.0):
        return RnEval(-math.inf, False)
    return RnEval(pre + float(np.sum(np.log1p(-c))), True)


def rn_h(path: RescaledPath, spec: ScalingSpec, enforce_support: bool = True) -> RnEval:
    """Recentred weight ``H^(N)(x, g, h)``.

    With ``enforce_support`` the path must be a rescaled walk, ``x`` must be
    on the recentred lattice and every level ``sqrt(N)(g_i + x + log sqrt N)``
    must be at least 1; otherwise the value is 0.
    """
    if path.n_steps != spec.n_steps:
        raise DomainError("path length does not match spec")
    if enforce_support:
        k = lattice_index(path.x, spec.n_steps)
        if abs(k - round(k)) > 1e-6 or round(k) < 1 or not path.is_walk():
            return RnEval(-math.inf, False)
        levels = round(k) + _integer_levels(spec.sqrt_n * path.g_values)
        if levels.min() < 1:
            return RnEval(-math.inf, False)
    return hn_log_on_grid(path.x, path.g_values, spec)


# Exact dynamic programmes -------------------------------------------------

def _level_tables(spec: ScalingSpec, top: int):
    """``log(1 - q^a)`` and the end factor ``-2v(a/sqrt N - log sqrt N)`` for ``a = 0..top+1``."""
    a = np.arange(top + 2)
    with np.errstate(divide="ignore"):
        log_fac = np.log(-np.expm1(a * spec.log_q))
    log_fac[0] = -np.inf
    log_fac[-1] = -np.inf  # padding row, never reached
    log_end = -2.0 * spec.v * lattice_x(a, spec.n_steps)
    return log_fac, log_end


def _backward_values(spec: ScalingSpec, top: int) -> tuple[np.ndarray, float]:
    """``B[a]`` = walk expectation of the product and end factor from level ``a``.

    Returned as ``(B / scale, log scale)`` on ``a = 0..top+1``.
    """
    log_fac, log_end = _level_tables(spec, top)
    fac = np.exp(log_fac)
    logb = log_fac + log_end
    shift = np.max(logb[np.isfinite(logb)])
    b = np.exp(logb - shift)
    log_scale = shift
    for _ in range(spec.n_steps):
        nb = 0.5 * b
        nb[1:] += 0.25 * b[:-1]
        nb[:-1] += 0.25 * b[1:]
        nb *= fac
        m = nb.max()
        b = nb / m
        log_scale += math.log(m)
    return b, log_scale


def _start_log_weights(spec: ScalingSpec, ks: np.ndarray) -> np.ndarray:
    """``-2u x_k``: the part of the prefactor fixed at the start."""
    return -2.0 * spec.u * lattice_x(ks, spec.n_steps)


@dataclass(frozen=True)
class ZnEstimate:
    value: float
    stderr: float
    method: str
    window: tuple
    n_lattice: int
    window_rel_change: float | None = None
    ess: float | None = None
    n_samples: int | None = None

    @property
    def exact(self) -> bool:
        return self.method == "exact-dp"


def _log_zn_over(spec: ScalingSpec, b: np.ndarray, log_scale: float, k_lo: int, k_hi: int) -> float:
    ks = np.arange(k_lo, k_hi + 1)
    with np.errstate(divide="ignore"):
        terms = _start_log_weights(spec, ks) + np.log(b[ks])
    return log_scale + float(sc.logsumexp(terms)) - 0.5 * math.log(spec.n_steps)


def _widen(spec: ScalingSpec, window) -> tuple[float, float]:
    lo, hi = map(float, window)
    # at least one lattice spacing, or a narrow window could "double" onto the same points
    half = max((hi - lo) / 2.0, 1.0 / spec.sqrt_n)
    return max(minimal_lattice_point(spec.n_steps), lo - half), hi + half


def _window_check(spec: ScalingSpec, window) -> tuple[float, float]:
    """``(log Z^(N) on window, relative change when the window is doubled)``."""
    wide = _widen(spec, window)
    k_lo, k_hi = lattice_range(spec.n_steps, window)
    w_lo, w_hi = lattice_range(spec.n_steps, wide)
    if k_hi < k_lo:
        raise DomainError("window contains no lattice points")
    b, log_scale = _backward_values(spec, w_hi + spec.n_steps)
    log_z = _log_zn_over(spec, b, log_scale, k_lo, k_hi)
    log_z_wide = _log_zn_over(spec, b, log_scale, w_lo, w_hi)
    return log_z, abs(math.expm1(log_z - log_z_wide))


def resolve_window(spec: ScalingSpec, x_window=None, window_rtol: float = WINDOW_RTOL,
                   max_widenings: int = 8) -> tuple[tuple[float, float], float, float]:
    """Window that passes the doubling check, starting from ``x_window`` or the default.

    The window is doubled until doubling it once more changes ``Z^(N)`` by at
    most ``window_rtol``. Returns ``(window, log Z^(N), relative change)``.
    """
    window = default_window(spec) if x_window is None else tuple(map(float, x_window))
    for _ in range(max_widenings + 1):
        log_z, rel = _window_check(spec, window)
        if rel <= window_rtol:
            return window, log_z, rel
        window = _widen(spec, window)
    raise DomainError(f"x window did not settle: doubling still moves Z^(N) by {rel:.2e}")


def zn_exact(spec: ScalingSpec, x_window=None, max_steps: int = MAX_EXACT_STEPS,
             window_rtol: float = WINDOW_RTOL) -> ZnEstimate:
    """``Z^(N)`` by a backward DP over levels, on a window passing the doubling check."""
    if spec.n_steps > max_steps:
        raise CapacityError(f"exact Z^(N) limited to N <= {max_steps}")
    window, log_z, rel = resolve_window(spec, x_window, window_rtol)
    k_lo, k_hi = lattice_range(spec.n_steps, window)
    return ZnEstimate(math.exp(log_z), 0.0, "exact-dp", window, k_hi - k_lo + 1,
                      window_rel_change=rel)


def zn_bruteforce(spec: ScalingSpec, x_window=None) -> float:
    """``Z^(N)`` by enumerating all ``4^N`` walks and the window (small ``N`` only)."""
    if spec.n_steps > 8:
        raise CapacityError("enumeration limited to 8 steps")
    x_window = resolve_window(spec, x_window)[0]
    k_lo, k_hi = lattice_range(spec.n_steps, x_window)
    moves = ((1, 0), (-1, 0), (0, 1), (0, -1))
    total = 0.0
    for choice in itertools.product(range(4), repeat=spec.n_steps):
        n, m = [0], [0]
        for c in choice:
            n.append(n[-1] + moves[c][0])
            m.append(m[-1] + moves[c][1])
        for k in range(k_lo, k_hi + 1):
            total += rn_h(RescaledPath.from_walk(k, n, m), spec).value
    return total / 4 ** spec.n_steps / spec.sqrt_n


_TRACKS = {
    # (level shift, aux shift) for the moves n+, n-, m+, m-
    "g": ((1, 1), (-1, -1), (0, 0), (0, 0)),
    "h": ((1, 0), (-1, 0), (0, 1), (0, -1)),
    "s": ((1, 1), (-1, -1), (0, 1), (0, -1)),
}


def _shift2(w: np.ndarray, da: int, dc: int) -> np.ndarray:
    out = np.zeros_like(w)
    src_a = slice(max(0, -da), w.shape[0] - max(0, da))
    dst_a = slice(max(0, da), w.shape[0] - max(0, -da))
    src_c = slice(max(0, -dc), w.shape[1] - max(0, dc))
    dst_c = slice(max(0, dc), w.shape[1] - max(0, -dc))
    out[dst_a, dst_c] = w[src_a, src_c]
    return out


def _forward_aux(spec: ScalingSpec, k_lo: int, k_hi: int, track: str) -> np.ndarray:
    """Weights of the auxiliary coordinate (``n``, ``m`` or ``n + m``) at step N.

    Returns an array over ``c = -N..N``, unnormalised.
    """
    n = spec.n_steps
    top = k_hi + n
    log_fac, log_end = _level_tables(spec, top)
    fac = np.exp(log_fac)
    w = np.zeros((top + 2, 2 * n + 1))
    ks = np.arange(k_lo, k_hi + 1)
    start = _start_log_weights(spec, ks) + log_fac[ks]
    w[ks, n] = np.exp(start - start.max())
    for _ in range(n):
        nw = sum(0.25 * _shift2(w, da, dc) for da, dc in _TRACKS[track])
        nw *= fac[:, None]
        w = nw / nw.max()
    end = np.exp(log_end - log_end[1:-1].max())
    return end @ w


def _x_weights(spec: ScalingSpec, k_lo: int, k_hi: int) -> np.ndarray:
    b, _ = _backward_values(spec, k_hi + spec.n_steps)
    ks = np.arange(k_lo, k_hi + 1)
    with np.errstate(divide="ignore"):
        lw = _start_log_weights(spec, ks) + np.log(b[ks])
    return np.exp(lw - lw.max())


def qn_exact_marginals(spec: ScalingSpec, x_window=None,
                       max_steps: int = MAX_MARGINAL_STEPS) -> dict[str, FiniteLaw]:
    """Exact laws of ``x``, ``g(L)``, ``h(L)`` and ``g(L) + h(L)`` under ``Q^(N)``."""
    n = spec.n_steps
    if n > max_steps:
        raise CapacityError(f"exact marginals limited to N <= {max_steps}")
    x_window = resolve_window(spec, x_window, LAW_RTOL)[0]
    k_lo, k_hi = lattice_range(n, x_window)
    out = {}
    xw = _x_weights(spec, k_lo, k_hi)
    keep = xw > 0
    out["x"] = FiniteLaw.from_weights(
        [float(v) for v in lattice_x(np.arange(k_lo, k_hi + 1)[keep], n)], xw[keep])
    values = np.arange(-n, n + 1) / spec.sqrt_n
    for name, track in (("g", "g"), ("h", "h"), ("s", "s")):
        w = _forward_aux(spec, k_lo, k_hi, track)
        keep = w > 0
        out[name] = FiniteLaw.from_weights([float(v) for v in values[keep]], w[keep])
    return out


def qn_increment_law(spec: ScalingSpec, x_window=None) -> FiniteLaw:
    """Law of the sign sequence ``sqrt(N) (g + h)`` increments under ``Q^(N)``.

    Outcomes are tuples of +-1 in the same order as occupation states; the
    rescaled increments are these divided by ``sqrt(N)``.
    """
    n = spec.n_steps
    if n > MAX_SEQUENCE_STEPS:
        raise CapacityError(f"sign-sequence law limited to N <= {MAX_SEQUENCE_STEPS}")
    x_window = resolve_window(spec, x_window, LAW_RTOL)[0]
    k_lo, k_hi = lattice_range(n, x_window)
    top = k_hi + n
    log_fac, log_end = _level_tables(spec, top)
    fac = np.exp(log_fac)
    ks = np.arange(k_lo, k_hi + 1)
    x = np.zeros((1, top + 2))
    start = _start_log_weights(spec, ks) + log_fac[ks]
    x[0, ks] = np.exp(start - start.max())
    log_scale = np.zeros(1)
    for _ in range(n):
        down = 0.25 * x
        down[:, :-1] += 0.25 * x[:, 1:]
        up = 0.25 * x
        up[:, 1:] += 0.25 * x[:, :-1]
        x = np.stack([down, up], axis=1).reshape(-1, top + 2) * fac
        log_scale = np.repeat(log_scale, 2)
        s = x.max(axis=1)
        s = np.where(s > 0, s, 1.0)
        x /= s[:, None]
        log_scale += np.log(s)
    end = np.exp(log_end - log_end[1:-1].max())
    with np.errstate(divide="ignore"):
        lw = log_scale + np.log(x @ end)
    outcomes = [tuple(2 * ((j >> (n - 1 - i)) & 1) - 1 for i in range(n)) for j in range(1 << n)]
    return FiniteLaw(tuple(outcomes), normalize_log_weights(lw))


def qn_h_allocation_check(spec: ScalingSpec, x_window=None) -> float:
    """Max over ``j`` of TV(law of ``m_N`` given ``j`` m-moves under ``Q^(N)``, SSRW law).

    The DP carries ``(level, j, m)`` with ``m`` tracked explicitly, so the
    comparison with the binomial walk law is not automatic.
    """
    n = spec.n_steps
    if n > MAX_SEQUENCE_STEPS:
        raise CapacityError(f"allocation check limited to N <= {MAX_SEQUENCE_STEPS}")
    x_window = resolve_window(spec, x_window)[0]
    k_lo, k_hi = lattice_range(n, x_window)
    top = k_hi + n
    log_fac, log_end = _level_tables(spec, top)
    fac = np.exp(log_fac)
    w = np.zeros((top + 2, n + 1, 2 * n + 1))
    ks = np.arange(k_lo, k_hi + 1)
    start = _start_log_weights(spec, ks) + log_fac[ks]
    w[ks, 0, n] = np.exp(start - start.max())
    for _ in range(n):
        nw = np.zeros_like(w)
        nw[1:] += 0.25 * w[:-1]
        nw[:-1] += 0.25 * w[1:]
        nw[:, 1:, 1:] += 0.25 * w[:, :-1, :-1]
        nw[:, 1:, :-1] += 0.25 * w[:, :-1, 1:]
        nw *= fac[:, None, None]
        w = nw / nw.max()
    end = np.exp(log_end - log_end[1:-1].max())
    joint = np.tensordot(end, w, axes=(0, 0))  # (j, m)
    worst = 0.0
    for j in range(n + 1):
        row = joint[j]
        if row.sum() <= 0:
            continue
        row = row / row.sum()
        ref = np.zeros(2 * n + 1)
        for i in range(j + 1):
            ref[n + 2 * i - j] = math.comb(j, i) / 2 ** j
        worst = max(worst, 0.5 * float(np.abs(row - ref).sum()))
    return worst


def zn_partition(spec: ScalingSpec, x_window=None, method: str = "exact-dp",
                 n_samples: int = 100000, seed: int = 0, min_ess: float = MIN_ESS) -> ZnEstimate:
    """``Z^(N)`` by exact DP or by importance sampling."""
    if method == "exact-dp":
        return zn_exact(spec, x_window)
    if method == "importance-sampling":
        sample = qn_sampler(spec, n_samples, seed, x_window=x_window, min_ess=min_ess)
        return ZnEstimate(sample.z_value, sample.z_stderr, method, sample.window,
                          sample.n_lattice, ess=sample.ess, n_samples=n_samples)
    raise DomainError(f"unknown method {method!r}")


# Importance sampling ------------------------------------------------------

@dataclass
class QnSample:
    """Weighted draws from ``Q^(N)`` (uniform lattice ``x`` times walk proposal)."""

    spec: ScalingSpec
    k: np.ndarray
    n_end: np.ndarray
    m_end: np.ndarray
    log_weights: np.ndarray
    weights: np.ndarray
    ess: float
    z_value: float
    z_stderr: float
    window: tuple
    n_lattice: int
    n_steps_paths: np.ndarray | None = field(default=None, repr=False)
    m_steps_paths: np.ndarray | None = field(default=None, repr=False)

    @property
    def x(self) -> np.ndarray:
        return lattice_x(self.k, self.spec.n_steps)

    @property
    def g_end(self) -> np.ndarray:
        return self.n_end / self.spec.sqrt_n

    @property
    def h_end(self) -> np.ndarray:
        return self.m_end / self.spec.sqrt_n

    @property
    def s_end(self) -> np.ndarray:
        return (self.n_end + self.m_end) / self.spec.sqrt_n

    def profiles(self) -> np.ndarray:
        """``g + h`` on the grid for each draw (needs ``keep_paths``)."""
        if self.n_steps_paths is None:
            raise DomainError("paths were not kept; rerun with keep_paths=True")
        inc = self.n_steps_paths.astype(np.int64) + self.m_steps_paths
        out = np.zeros((len(inc), inc.shape[1] + 1))
        np.cumsum(inc, axis=1, out=out[:, 1:])
        return out / self.spec.sqrt_n


_N_INC = np.array([1, -1, 0, 0], dtype=np.int8)
_M_INC = np.array([0, 0, 1, -1], dtype=np.int8)


def qn_sampler(spec: ScalingSpec, n_samples: int, seed: int, x_window=None,
               keep_paths: bool = False, min_ess: float = MIN_ESS) -> QnSample:
    n = spec.n_steps
    x_window = resolve_window(spec, x_window)[0]
    k_lo, k_hi = lattice_range(n, x_window)
    n_lattice = k_hi - k_lo + 1
    if n_lattice < 1:
        raise DomainError("window contains no lattice points")
    rng = np.random.default_rng(seed)
    ks, n_end, m_end, logh = [], [], [], []
    n_paths, m_paths = [], []
    for lo in range(0, n_samples, _CHUNK):
        size = min(_CHUNK, n_samples - lo)
        k = rng.integers(k_lo, k_hi + 1, size=size)
        moves = rng.integers(0, 4, size=(size, n))
        dn = _N_INC[moves]
        dm = _M_INC[moves]
        out_log = np.empty(size)
        out_end = np.empty(size, dtype=np.int64)
        kernels.hn_log_weights(k.astype(np.int64), dn, spec.log_q, out_log, out_end)
        x = lattice_x(k, n)
        logh.append(out_log + log_prefactor(x, out_end / spec.sqrt_n, spec))
        ks.append(k)
        n_end.append(out_end)
        m_end.append(dm.sum(axis=1, dtype=np.int64))
        if keep_paths:
            n_paths.append(dn)
            m_paths.append(dm)
    logh = np.concatenate(logh)
    ess_val = ess_from_log_weights(logh)
    if ess_val < min_ess:
        raise UnreliableEstimateError(f"effective sample size {ess_val:.1f} below {min_ess}")
    # proposal mass per (k, path) is 4^-N / n_lattice; Z^(N) carries N^{-1/2}
    shift = float(np.max(logh))
    w = np.exp(logh - shift)
    factor = n_lattice / spec.sqrt_n
    z = factor * math.exp(shift) * float(w.mean())
    z_se = factor * math.exp(shift) * float(w.std(ddof=1)) / math.sqrt(n_samples)
    return QnSample(spec, np.concatenate(ks), np.concatenate(n_end), np.concatenate(m_end),
                    logh, w / w.sum(), ess_val, z, z_se, tuple(map(float, x_window)), n_lattice,
                    np.concatenate(n_paths) if keep_paths else None,
                    np.concatenate(m_paths) if keep_paths else None)


# Pointwise convergence ----------------------------------------------------

@dataclass(frozen=True)
class PointwiseRow:
    n_steps: int
    hn_value: float
    h_value: float
    max_abs_c: float
    sum_c: float
    sum_c_limit: float
    sum_abs_c: float
    taylor_remainder: float

    @property
    def abs_error(self) -> float:
        return abs(self.hn_value - self.h_value)


def _eval_path(g_func, t: np.ndarray) -> np.ndarray:
    vals = np.asarray(g_func(t), dtype=float)
    if vals.shape != t.shape:
        vals = np.array([float(g_func(s)) for s in t])
    return vals


def pointwise_convergence_check(x: float, g_func, u: float, v: float, n_values,
                                interval_length: float = 1.0) -> list[PointwiseRow]:
    """Compare ``H^(N)`` on grid restrictions of ``g`` with the continuum ``H``.

    Also reports the three quantities behind the product-to-exponential
    limit for ``c_i = -e^{-2(g(t_i) + x)} / N``: ``max |c_i|``, ``sum c_i``
    (against its limit ``-e^{-2x} int e^{-2g}``) and ``sum |c_i|``, plus
    ``sum (log(1 + c_i) - c_i)``, which is never positive.
    """
    if abs(float(g_func(0.0))) > 1e-12:
        raise DomainError("g must start at 0")
    h_val = kpz_weight_exact(x, g_func, interval_length, u, v)
    limit = -math.exp(-2.0 * x) * exp_integral_exact(g_func, interval_length)
    rows = []
    for n in n_values:
        spec = ScalingSpec(int(n), u, v, interval_length)
        t = np.linspace(0.0, interval_length, spec.n_steps + 1)
        g = _eval_path(g_func, t)
        c = -np.exp(-2.0 * (g + x)) / spec.n_steps
        hn = hn_log_on_grid(x, g, spec)
        rows.append(PointwiseRow(spec.n_steps, hn.value, h_val, float(np.max(np.abs(c))),
                                 float(c.sum()), limit, float(np.abs(c).sum()),
                                 float(np.sum(np.log1p(c) - c))))
    return rows


# Binomial ratio -----------------------------------------------------------

def _combapprox_domain(a: float, k, n: int) -> np.ndarray:
    k = np.asarray(k)
    bound = n ** (5.0 / 6.0)
    ok = (np.abs(k) < bound) & (np.abs(k + a * math.sqrt(n)) < bound)
    return ok


def combapprox_log_ratio(a: float, k, n: int) -> np.ndarray:
    """``log[exp(-2ak/sqrt N) C(2N, N+k) / C(2N, N+k+s)]`` with ``s = round(a sqrt N)``."""
    k = np.asarray(k, dtype=np.int64)
    if not np.all(_combapprox_domain(a, k, n)):
        raise DomainError("k outside |k|, |k + a sqrt(N)| < N^{5/6}")
    s = int(round(a * math.sqrt(n)))
    kf = k.astype(float)
    # C(2N, N+k) / C(2N, N+k+s) = (N+k+s)! (N-k-s)! / ((N+k)! (N-k)!)
    log_binom_ratio = ((sc.gammaln(n + kf + s + 1) - sc.gammaln(n + kf + 1))
                       + (sc.gammaln(n - kf - s + 1) - sc.gammaln(n - kf + 1)))
    return -2.0 * a * kf / math.sqrt(n) + log_binom_ratio


def combapprox_log_ratio_exact(a: float, k: int, n: int) -> float:
    """Same quantity with exact integer binomials."""
    if not _combapprox_domain(a, k, n):
        raise DomainError("k outside |k|, |k + a sqrt(N)| < N^{5/6}")
    s = int(round(a * math.sqrt(n)))
    frac = Fraction(math.comb(2 * n, n + k), math.comb(2 * n, n + k + s))
    return -2.0 * a * k / math.sqrt(n) + math.log(frac.numerator) - math.log(frac.denominator)


@dataclass(frozen=True)
class CombapproxRow:
    n: int
    a: float
    sup_ratio: float
    argsup_k: int
    inf_ratio: float
    n_points: int


def admissible_k(a: float, n: int) -> np.ndarray:
    bound = n ** (5.0 / 6.0)
    ks = np.arange(-math.ceil(bound), math.ceil(bound) + 1)
    return ks[_combapprox_domain(a, ks, n)]


def combapprox_check(a: float, n_values) -> list[CombapproxRow]:
    """Sup and inf of the ratio over every admissible integer ``k``, per ``N``."""
    rows = []
    for n in n_values:
        ks = admissible_k(a, int(n))
        lr = combapprox_log_ratio(a, ks, int(n))
        i = int(np.argmax(lr))
        rows.append(CombapproxRow(int(n), a, float(np.exp(lr[i])), int(ks[i]),
                                  float(np.exp(lr.min())), len(ks)))
    return rows
