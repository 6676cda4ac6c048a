"""Matrix product ansatz in the Enaud-Derrida representation.

The matrices are stored as bands: with ``b[n] = [n]_q`` (``n = 1..M``),
``D`` has ``b`` on the diagonal and ``b[n]`` at ``(n, n+1)``; ``E`` has
``b`` on the diagonal and ``b[n]`` at ``(n, n-1)``. Entries that would
reference index ``M + 1`` are dropped. ``<W| = sum C^n <n|`` and
``|V> = sum A^n [n]_q |n>``.

These vectors satisfy the boundary relations only for rates obeying
Liggett's condition ``gamma = q (1 - alpha)``, ``delta = q (1 - beta)``,
which is what ``scaling_to_asep`` produces.

Products are formed as row-vector sweeps with per-step rescaling, so
no matrix power is ever materialised and nothing overflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .asep import all_states, state_index
from .errors import CapacityError, DomainError, TruncationError
from .params import AbcdParams, q_bracket
from .stats import FiniteLaw

M_START = 32
M_MAX = 4096
RTOL = 1e-10


class DivergentTruncation(DomainError):
    """A or C is at least 1, so truncating the boundary vectors is not valid."""


@dataclass(frozen=True)
class TruncatedRep:
    dim: int
    q: float
    bracket: np.ndarray = field(repr=False)
    w_vec: np.ndarray = field(repr=False)
    v_vec: np.ndarray = field(repr=False)

    @property
    def d_matrix(self) -> np.ndarray:
        b = self.bracket
        return np.diag(b) + np.diag(b[:-1], 1)

    @property
    def e_matrix(self) -> np.ndarray:
        b = self.bracket
        return np.diag(b) + np.diag(b[1:], -1)


def build_rep(abcd: AbcdParams, q: float, dim: int) -> TruncatedRep:
    """Truncated Enaud-Derrida matrices and boundary vectors of size ``dim``."""
    if dim < 2:
        raise DomainError("truncation dimension must be at least 2")
    a, c = abcd.a_param, abcd.c_param
    if not (a < 1.0 and c < 1.0):
        raise DivergentTruncation(
            f"boundary vectors do not decay (A={a}, C={c}); use the random-walk evaluator"
        )
    n = np.arange(1, dim + 1)
    bracket = np.asarray(q_bracket(n, q), dtype=float)
    w_vec = np.power(float(c), n)
    v_vec = np.power(float(a), n) * bracket
    return TruncatedRep(dim, q, bracket, w_vec, v_vec)


@dataclass(frozen=True)
class DehpResiduals:
    bulk: float
    right_vector: float
    left_vector: float

    @property
    def max(self) -> float:
        return max(self.bulk, self.right_vector, self.left_vector)


def check_dehp_relations(rep: TruncatedRep, alpha: float, beta: float, gamma: float,
                         delta: float) -> DehpResiduals:
    """Residuals of ``DE - qED = D + E``, ``(beta D - delta E)|V> = |V>`` and
    ``<W|(alpha E - gamma D) = <W|`` on interior indices.

    The last row and column are dropped: they see the band cut.
    """
    d, e = rep.d_matrix, rep.e_matrix
    bulk = d @ e - rep.q * (e @ d) - d - e
    right = (beta * d - delta * e) @ rep.v_vec - rep.v_vec
    left = rep.w_vec @ (alpha * e - gamma * d) - rep.w_vec
    return DehpResiduals(
        bulk=float(np.max(np.abs(bulk[:-1, :-1]))),
        right_vector=float(np.max(np.abs(right[:-1]))),
        left_vector=float(np.max(np.abs(left[:-1]))),
    )


def _apply(x: np.ndarray, b: np.ndarray, particle) -> np.ndarray:
    """Row vectors times D (``particle`` true) or E; works on stacked rows."""
    y = x * b
    out = y.copy()
    if np.ndim(particle) == 0:
        if particle:
            out[..., 1:] += y[..., :-1]
        else:
            out[..., :-1] += y[..., 1:]
        return out
    mask = np.asarray(particle, dtype=bool)
    out[mask, 1:] += y[mask, :-1]
    out[~mask, :-1] += y[~mask, 1:]
    return out


def _rescale(x: np.ndarray, log_scale: np.ndarray) -> np.ndarray:
    m = np.max(np.abs(x), axis=-1, keepdims=True)
    m = np.where(m > 0, m, 1.0)
    log_scale += np.log(m[..., 0])
    return x / m


def log_matrix_element(rep: TruncatedRep, word) -> tuple[float, float]:
    """``(log|<W| prod X_i |V>|, sign)`` with ``X_i = D`` for 1 and ``E`` for 0.

    ``word`` may also contain 2 for ``D + E``.
    """
    x = rep.w_vec.astype(float).copy()
    log_scale = np.zeros(())
    x = _rescale(x, log_scale)
    for letter in word:
        if letter == 2:
            x = _apply(x, rep.bracket, True) + _apply(x, rep.bracket, False)
        else:
            x = _apply(x, rep.bracket, bool(letter))
        x = _rescale(x, log_scale)
    val = float(x @ rep.v_vec)
    if val == 0.0:
        return -math.inf, 0.0
    return float(log_scale) + math.log(abs(val)), math.copysign(1.0, val)


def mpa_state_probability(rep: TruncatedRep, tau) -> float:
    """``<W| prod (D tau_i + E (1 - tau_i)) |V> / <W|(D + E)^N|V>`` at fixed truncation."""
    tau = tuple(int(t) for t in tau)
    state_index(tau)  # validates entries
    log_num, s_num = log_matrix_element(rep, tau)
    log_den, s_den = log_matrix_element(rep, (2,) * len(tau))
    if s_den == 0.0:
        raise DomainError("normalisation <W|(D+E)^N|V> vanishes")
    if s_num == 0.0:
        return 0.0
    return s_num * s_den * math.exp(log_num - log_den)


def mpa_state_probability_adaptive(abcd: AbcdParams, q: float, tau, m_start: int = M_START,
                                   m_max: int = M_MAX, rtol: float = RTOL) -> tuple[float, int]:
    """State probability with the truncation doubled until it settles.

    Returns ``(probability, dim)``. Raises ``TruncationError`` carrying the
    last two estimates if ``m_max`` is reached first.
    """
    dim = m_start
    prev = mpa_state_probability(build_rep(abcd, q, dim), tau)
    while dim < m_max:
        dim *= 2
        cur = mpa_state_probability(build_rep(abcd, q, dim), tau)
        if abs(cur - prev) <= rtol * abs(cur):
            return cur, dim
        prev = cur
    raise TruncationError(f"no convergence up to dimension {m_max}", (prev, cur))


def _all_log_elements(rep: TruncatedRep, n_sites: int) -> np.ndarray:
    """Unnormalised log weights of all ``2**N`` states, in state-index order."""
    x = rep.w_vec[None, :].astype(float)
    log_scale = np.zeros(1)
    x = _rescale(x, log_scale)
    for _ in range(n_sites):
        # branch every row on the next site: E first (bit 0), then D (bit 1)
        xe = _apply(x, rep.bracket, False)
        xd = _apply(x, rep.bracket, True)
        x = np.stack([xe, xd], axis=1).reshape(-1, rep.dim)
        log_scale = np.repeat(log_scale, 2)
        x = _rescale(x, log_scale)
    vals = x @ rep.v_vec
    with np.errstate(divide="ignore"):
        return log_scale + np.log(vals)


MAX_LAW_SITES = 14


def mpa_law(abcd: AbcdParams, q: float, n_sites: int, m_start: int = M_START,
            m_max: int = M_MAX, rtol: float = RTOL) -> FiniteLaw:
    """Stationary law of all ``2**N`` states with adaptive truncation."""
    if n_sites > MAX_LAW_SITES:
        raise CapacityError(f"full MPA law limited to {MAX_LAW_SITES} sites")
    dim = m_start

    def law_at(m):
        logs = _all_log_elements(build_rep(abcd, q, m), n_sites)
        w = np.exp(logs - np.max(logs))
        return w / w.sum()

    prev = law_at(dim)
    while dim < m_max:
        dim *= 2
        cur = law_at(dim)
        big = cur > 1e-300
        if np.all(np.abs(cur - prev)[big] <= rtol * cur[big]):
            return FiniteLaw(tuple(all_states(n_sites)), cur)
        prev = cur
    raise TruncationError(f"no convergence up to dimension {m_max}", (prev, cur))
