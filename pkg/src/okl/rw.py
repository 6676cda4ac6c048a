"""Reweighted two-dimensional random walk representation of the open ASEP.

A configuration is an offset ``r >= 1`` and an N-step walk ``(n, m)`` in
which every step moves one coordinate by +-1. Its weight is

    C^r * A^(n_N + r) * prod_{i=0..N} [n_i + r]_q

(the ``4^N`` prefactor cancels the SSRW path probability ``4^-N``), and
zero unless ``n_i + r >= 1`` throughout. The increments
``s_i = (n_i + m_i) - (n_{i-1} + m_{i-1})`` then have the stationary law
of the open ASEP height increments.

Only ``a = n + r`` enters the weight, so the dynamic programmes run over
``a`` and count the two m-moves as a factor 2 (or, for a fixed sign
sequence, as one extra way to realise each step).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, DivergenceError, DomainError
from .params import AbcdParams, q_bracket
from .stats import FiniteLaw

MAX_LAW_STEPS = 12
TAIL_RTOL = 1e-12


@dataclass(frozen=True)
class LatticePath2D:
    offset: int
    n_path: tuple
    m_path: tuple

    def __post_init__(self):
        n_path = tuple(int(v) for v in self.n_path)
        m_path = tuple(int(v) for v in self.m_path)
        object.__setattr__(self, "n_path", n_path)
        object.__setattr__(self, "m_path", m_path)
        if int(self.offset) != self.offset or self.offset < 1:
            raise DomainError("offset r must be a positive integer")
        if len(n_path) != len(m_path) or not n_path:
            raise DomainError("n_path and m_path must have equal, positive length")
        if n_path[0] != 0 or m_path[0] != 0:
            raise DomainError("walks start at (0, 0)")
        for i in range(1, len(n_path)):
            dn = n_path[i] - n_path[i - 1]
            dm = m_path[i] - m_path[i - 1]
            if abs(dn) + abs(dm) != 1:
                raise DomainError(f"step {i} must move exactly one coordinate by 1")

    @property
    def n_steps(self) -> int:
        return len(self.n_path) - 1

    @classmethod
    def from_moves(cls, offset: int, moves) -> "LatticePath2D":
        """Build from moves in ``{'n+', 'n-', 'm+', 'm-'}``."""
        n, m = [0], [0]
        for mv in moves:
            dn = {"n+": 1, "n-": -1}.get(mv, 0)
            dm = {"m+": 1, "m-": -1}.get(mv, 0)
            if dn == dm == 0:
                raise DomainError(f"unknown move {mv!r}")
            n.append(n[-1] + dn)
            m.append(m[-1] + dm)
        return cls(offset, tuple(n), tuple(m))

    def increments(self) -> tuple[int, ...]:
        h = [a + b for a, b in zip(self.n_path, self.m_path)]
        return tuple(h[i] - h[i - 1] for i in range(1, len(h)))


@dataclass(frozen=True)
class RwWeight:
    log_weight: float
    in_support: bool

    @property
    def weight(self) -> float:
        return math.exp(self.log_weight) if self.in_support else 0.0


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def rw_weight(path: LatticePath2D, abcd: AbcdParams, q: float) -> RwWeight:
    a, c = abcd.a_param, abcd.c_param
    if a < 0 or c < 0:
        raise DomainError("log-space weights need A, C >= 0")
    r = path.offset
    levels = np.array(path.n_path) + r
    if levels.min() < 1:
        return RwWeight(-math.inf, False)
    log_w = (
        r * _log(c)
        + (path.n_path[-1] + r) * _log(a)
        + float(np.sum(np.log(q_bracket(levels, q))))
    )
    return RwWeight(log_w, True)


def _check_convergent(abcd: AbcdParams) -> None:
    if abcd.a_param < 0 or abcd.c_param < 0:
        raise DomainError("the random-walk weights need A, C >= 0")
    if not abcd.a_param * abcd.c_param < 1.0:
        raise DivergenceError(f"sum over r diverges: AC = {abcd.a_param * abcd.c_param} >= 1")
    if abcd.c_param == 0.0 or abcd.a_param == 0.0:
        raise DomainError("A = 0 or C = 0 gives an identically zero measure")


def _log_tail_bound(abcd: AbcdParams, q: float, n_steps: int, r_max: int) -> float:
    """log of an upper bound on the contribution of all ``r > r_max``.

    Uses ``[k]_q <= 1/(1-q)``, ``A^(n_N) <= max(A, 1/A)^N`` and ``4^N``
    walks per offset.
    """
    ac = abcd.a_param * abcd.c_param
    spread = max(abcd.a_param, 1.0 / abcd.a_param)
    return (
        n_steps * math.log(4.0 * spread)
        - (n_steps + 1) * math.log1p(-q)
        + (r_max + 1) * math.log(ac)
        - math.log1p(-ac)
    )


def _levels(q: float, top: int) -> np.ndarray:
    """``[a]_q`` for ``a = 0 .. top`` (``[0]_q = 0``)."""
    return np.asarray(q_bracket(np.arange(top + 1), q), dtype=float)


def _log_partition_dp(abcd: AbcdParams, q: float, n_steps: int, r_max: int) -> float:
    top = r_max + n_steps
    br = _levels(q, top + 1)
    a_idx = np.arange(top + 2)
    x = np.zeros(top + 2)
    init = np.arange(1, r_max + 1)
    x[init] = np.exp(init * math.log(abcd.c_param)) * br[init]
    log_scale = 0.0
    for _ in range(n_steps):
        y = 2.0 * x
        y[1:] += x[:-1]
        y[:-1] += x[1:]
        y *= br
        y[0] = 0.0
        y[-1] = 0.0  # band cut: a never exceeds r_max + N anyway
        s = y.max()
        x = y / s
        log_scale += math.log(s)
    final = x * np.exp(a_idx * math.log(abcd.a_param))
    return log_scale + math.log(final.sum())


def auto_r_max(abcd: AbcdParams, q: float, n_steps: int, rtol: float = TAIL_RTOL) -> int:
    """Smallest power-of-two offset cutoff whose tail bound is below ``rtol * Z``."""
    _check_convergent(abcd)
    r_max = 16
    while True:
        log_z = _log_partition_dp(abcd, q, n_steps, r_max)
        if _log_tail_bound(abcd, q, n_steps, r_max) <= math.log(rtol) + log_z:
            return r_max
        r_max *= 2
        if r_max > 1 << 22:
            raise DivergenceError("offset cutoff exploded; AC too close to 1")


def partition_function(abcd: AbcdParams, q: float, n_steps: int, r_max="auto") -> float:
    """``log Z~_N(q)``, the total weight over offsets and walks.

    The offset sum is cut at ``r_max``; with ``"auto"`` the cutoff is
    chosen so that a rigorous tail bound is below ``1e-12`` of the sum.
    """
    _check_convergent(abcd)
    if n_steps < 0:
        raise DomainError("n_steps must be nonnegative")
    if r_max == "auto":
        r_max = auto_r_max(abcd, q, n_steps)
    return _log_partition_dp(abcd, q, n_steps, int(r_max))


def _log_sign_weights(abcd: AbcdParams, q: float, n_steps: int, r_max: int) -> np.ndarray:
    """Unnormalised log weight of each sign sequence.

    Row ``k`` corresponds to the sign tuple whose binary expansion (most
    significant first, 1 = up step) equals ``k``.
    """
    top = r_max + n_steps
    br = _levels(q, top + 1)
    a_idx = np.arange(top + 2)
    x = np.zeros((1, top + 2))
    init = np.arange(1, r_max + 1)
    x[0, init] = np.exp(init * math.log(abcd.c_param)) * br[init]
    log_scale = np.zeros(1)
    for _ in range(n_steps):
        # down step: n-1 or m-1;  up step: n+1 or m+1
        down = x.copy()
        down[:, :-1] += x[:, 1:]
        up = x.copy()
        up[:, 1:] += x[:, :-1]
        x = np.stack([down, up], axis=1).reshape(-1, top + 2) * br
        x[:, 0] = 0.0
        x[:, -1] = 0.0
        log_scale = np.repeat(log_scale, 2)
        s = x.max(axis=1)
        s = np.where(s > 0, s, 1.0)
        x /= s[:, None]
        log_scale += np.log(s)
    final = x @ np.exp(a_idx * math.log(abcd.a_param))
    with np.errstate(divide="ignore"):
        return log_scale + np.log(final)


def sign_tuples(n_steps: int) -> list[tuple[int, ...]]:
    """All sign sequences, ordered like occupation states (-1 <-> 0, +1 <-> 1)."""
    return [tuple(2 * ((k >> (n_steps - 1 - i)) & 1) - 1 for i in range(n_steps))
            for k in range(1 << n_steps)]


def increment_law(abcd: AbcdParams, q: float, n_steps: int, r_max="auto") -> FiniteLaw:
    """Law of the height increments ``s_1 .. s_N`` under the reweighted walk."""
    if n_steps > MAX_LAW_STEPS:
        raise CapacityError(f"increment law limited to {MAX_LAW_STEPS} steps, got {n_steps}")
    if n_steps < 1:
        raise DomainError("n_steps must be positive")
    _check_convergent(abcd)
    if r_max == "auto":
        r_max = auto_r_max(abcd, q, n_steps)
    log_z = _log_partition_dp(abcd, q, n_steps, int(r_max))
    probs = np.exp(_log_sign_weights(abcd, q, n_steps, int(r_max)) - log_z)
    return FiniteLaw(tuple(sign_tuples(n_steps)), probs)


# Enumeration oracle -------------------------------------------------------

_MOVES = ((1, 0), (-1, 0), (0, 1), (0, -1))


def enumerate_walks(n_steps: int):
    """Yield every N-step 2D simple walk as ``(n_path, m_path)``."""
    for choice in itertools.product(range(4), repeat=n_steps):
        n, m = [0], [0]
        for c in choice:
            dn, dm = _MOVES[c]
            n.append(n[-1] + dn)
            m.append(m[-1] + dm)
        yield tuple(n), tuple(m)


def brute_force_partition_function(abcd: AbcdParams, q: float, n_steps: int, r_max: int) -> float:
    """``Z~_N`` (not its log) by summing every walk and offset ``r <= r_max``."""
    total = 0.0
    walks = list(enumerate_walks(n_steps))
    for r in range(1, r_max + 1):
        for n_path, m_path in walks:
            total += rw_weight(LatticePath2D(r, n_path, m_path), abcd, q).weight
    return total


def brute_force_increment_law(abcd: AbcdParams, q: float, n_steps: int, r_max: int,
                              flip_m: bool = False) -> FiniteLaw:
    """Increment law by enumeration; ``flip_m`` relabels m+ as m- and back."""
    table: dict = {s: 0.0 for s in sign_tuples(n_steps)}
    walks = list(enumerate_walks(n_steps))
    for r in range(1, r_max + 1):
        for n_path, m_path in walks:
            w = rw_weight(LatticePath2D(r, n_path, m_path), abcd, q).weight
            if w == 0.0:
                continue
            m_used = tuple(-v for v in m_path) if flip_m else m_path
            h = [a + b for a, b in zip(n_path, m_used)]
            key = tuple(h[i] - h[i - 1] for i in range(1, len(h)))
            table[key] += w
    return FiniteLaw.from_dict(table)
