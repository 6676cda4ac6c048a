"""Open ASEP as an explicit continuous-time Markov chain.

States are integers ``0 .. 2**N - 1`` whose binary expansion, most
significant bit first, reads ``tau_1 .. tau_N``; ``format(s, f"0{N}b")``
is therefore the occupation string.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .errors import CapacityError, DomainError, SingularityError
from .params import AsepParams
from .stats import FiniteLaw

MAX_EXACT_SITES = 14
DENSE_SITES = 10
RESIDUAL_TOL = 1e-12
POWER_MARGIN = 1e-2

OccupancyState = tuple  # (tau_1, ..., tau_N), entries 0/1


def state_bits(index: int, n_sites: int) -> tuple[int, ...]:
    return tuple((index >> (n_sites - 1 - i)) & 1 for i in range(n_sites))


def state_index(bits) -> int:
    out = 0
    for b in bits:
        if b not in (0, 1):
            raise DomainError(f"occupancy entries must be 0 or 1, got {b!r}")
        out = (out << 1) | int(b)
    return out


def all_states(n_sites: int) -> list[tuple[int, ...]]:
    return [state_bits(s, n_sites) for s in range(1 << n_sites)]


def bit_matrix(n_sites: int) -> np.ndarray:
    """``(2**N, N)`` array of occupations, row ``s`` = ``state_bits(s)``."""
    s = np.arange(1 << n_sites)[:, None]
    shifts = np.arange(n_sites - 1, -1, -1)[None, :]
    return (s >> shifts) & 1


def generator_matrix(params: AsepParams) -> sp.csr_matrix:
    """Rate matrix ``L`` with ``L[s, s'] = rate(s -> s')`` and zero row sums."""
    n = params.n_sites
    if n > MAX_EXACT_SITES:
        raise CapacityError(f"generator for {n} sites exceeds the {MAX_EXACT_SITES}-site limit")
    size = 1 << n
    s = np.arange(size, dtype=np.int64)
    top = 1 << (n - 1)
    rows, cols, vals = [], [], []

    def add(mask, target, rate):
        if rate == 0.0:
            return
        rows.append(s[mask])
        cols.append(target[mask])
        vals.append(np.full(int(mask.sum()), float(rate)))

    empty_first = (s & top) == 0
    add(empty_first, s | top, params.alpha)
    add(~empty_first, s & ~top, params.gamma)
    full_last = (s & 1) == 1
    add(full_last, s & ~1, params.beta)
    add(~full_last, s | 1, params.delta)
    for i in range(n - 1):
        shift = n - 2 - i
        hi = (s >> (shift + 1)) & 1
        lo = (s >> shift) & 1
        swapped = s ^ (3 << shift)
        add((hi == 1) & (lo == 0), swapped, 1.0)
        add((hi == 0) & (lo == 1), swapped, params.q)

    r = np.concatenate(rows)
    c = np.concatenate(cols)
    v = np.concatenate(vals)
    off = sp.csr_matrix((v, (r, c)), shape=(size, size))
    exit_rates = np.asarray(off.sum(axis=1)).ravel()
    return (off - sp.diags(exit_rates)).tocsr()


def _solve_dense(gen: sp.csr_matrix) -> np.ndarray:
    size = gen.shape[0]
    a = gen.T.toarray()
    a[-1, :] = 1.0
    b = np.zeros(size)
    b[-1] = 1.0
    try:
        lu = scipy.linalg.lu_factor(a, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularityError("stationary system is singular") from exc
    if np.any(np.abs(np.diag(lu[0])) < 1e-13 * np.abs(a).max()):
        raise SingularityError("generator has more than one closed class")
    pi = scipy.linalg.lu_solve(lu, b)
    # one round of iterative refinement
    pi += scipy.linalg.lu_solve(lu, b - a @ pi)
    return pi


def _solve_sparse(gen: sp.csr_matrix) -> np.ndarray:
    size = gen.shape[0]
    a = gen.T.tolil()
    a[size - 1, :] = np.ones(size)
    a = a.tocsc()
    b = np.zeros(size)
    b[-1] = 1.0
    with np.errstate(all="raise"):
        try:
            lu = spla.splu(a)
        except (RuntimeError, FloatingPointError) as exc:
            raise SingularityError("stationary system is singular") from exc
    pi = lu.solve(b)
    pi += lu.solve(b - a @ pi)
    return pi


def _solve_power(gen: sp.csr_matrix, n_sites: int, tol: float, max_iter: int) -> np.ndarray:
    """Power iteration on the uniformised kernel ``I + L / Lambda``."""
    exit_max = float(-gen.diagonal().min())
    lam = max(n_sites + 3.0, 1.0001 * exit_max)
    kernel = (sp.identity(gen.shape[0], format="csr") + gen / lam).T.tocsr()
    gen_t = gen.T.tocsr()
    pi = np.full(gen.shape[0], 1.0 / gen.shape[0])
    # the error is roughly residual / spectral gap, so aim well below tol
    target = POWER_MARGIN * tol
    for it in range(max_iter):
        pi = kernel @ pi
        if it % 50 == 0:
            pi /= pi.sum()
            if np.max(np.abs(gen_t @ pi)) <= target:
                return pi
    raise SingularityError(f"power iteration did not reach residual {tol} in {max_iter} sweeps")


def generator_stationary(params: AsepParams, method: str = "auto", tol: float = RESIDUAL_TOL,
                         max_iter: int = 2_000_000) -> FiniteLaw:
    """Unique stationary law ``pi`` with ``pi L = 0``.

    ``method`` is ``"dense"`` (LU on the full matrix), ``"sparse"`` (sparse
    LU), ``"power"`` (uniformised power iteration) or ``"auto"``: dense up
    to 10 sites, power iteration beyond.
    """
    n = params.n_sites
    if n > MAX_EXACT_SITES:
        raise CapacityError(f"exact stationary law limited to {MAX_EXACT_SITES} sites, got {n}")
    gen = generator_matrix(params)
    if method == "auto":
        method = "dense" if n <= DENSE_SITES else "power"
    if method == "dense":
        pi = _solve_dense(gen)
    elif method == "sparse":
        pi = _solve_sparse(gen)
    elif method == "power":
        pi = _solve_power(gen, n, tol, max_iter)
    else:
        raise DomainError(f"unknown method {method!r}")
    if not np.all(np.isfinite(pi)):
        raise SingularityError("stationary solve produced non-finite values")
    if pi.min() < -1e-10:
        raise SingularityError("stationary solve produced a signed vector; chain is reducible")
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    residual = float(np.max(np.abs(gen.T @ pi)))
    if residual > tol:
        raise SingularityError(f"stationary residual {residual:.3e} exceeds {tol:.1e}")
    return FiniteLaw(tuple(all_states(n)), pi)


def stationary_residual(params: AsepParams, law: FiniteLaw) -> float:
    gen = generator_matrix(params)
    pi = np.array([law.prob(state_bits(s, params.n_sites)) for s in range(gen.shape[0])])
    return float(np.max(np.abs(gen.T @ pi)))


def height_increment_law(pi: FiniteLaw) -> FiniteLaw:
    """Push ``pi`` forward through ``tau -> (2 tau_1 - 1, ..., 2 tau_N - 1)``."""
    return pi.pushforward(lambda tau: tuple(2 * t - 1 for t in tau))


@dataclass
class Trajectory:
    """Piecewise-constant path: ``states[i]`` holds on ``[times[i], times[i+1])``."""

    n_sites: int
    times: np.ndarray
    states: np.ndarray
    t_final: float
    counters: np.ndarray = field(repr=False)

    @property
    def n_events(self) -> int:
        return len(self.times) - 1

    @property
    def entered_left(self) -> int:
        return int(self.counters[0])

    @property
    def exited_left(self) -> int:
        return int(self.counters[1])

    @property
    def exited_right(self) -> int:
        return int(self.counters[2])

    @property
    def entered_right(self) -> int:
        return int(self.counters[3])

    def bits(self, i: int) -> tuple[int, ...]:
        return state_bits(int(self.states[i]), self.n_sites)

    def _durations(self, t_from: float, t_to: float) -> np.ndarray:
        ends = np.append(self.times[1:], self.t_final)
        lo = np.maximum(self.times, t_from)
        hi = np.minimum(ends, t_to)
        return np.clip(hi - lo, 0.0, None)

    def occupation_weights(self, t_from: float = 0.0, t_to: float | None = None) -> np.ndarray:
        """Time spent in each state over ``[t_from, t_to]`` (length ``2**N``)."""
        t_to = self.t_final if t_to is None else t_to
        dur = self._durations(t_from, t_to)
        return np.bincount(self.states, weights=dur, minlength=1 << self.n_sites)

    def occupation_law(self, t_from: float = 0.0, t_to: float | None = None) -> FiniteLaw:
        w = self.occupation_weights(t_from, t_to)
        return FiniteLaw.from_weights(all_states(self.n_sites), w)

    def batch_means(self, t_from: float, t_to: float, n_batches: int = 50):
        """Batch-means estimate of the occupation law and its standard errors.

        Returns ``(mean, stderr)`` arrays over the ``2**N`` states.
        """
        edges = np.linspace(t_from, t_to, n_batches + 1)
        laws = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            w = self.occupation_weights(lo, hi)
            laws.append(w / w.sum())
        laws = np.array(laws)
        return laws.mean(axis=0), laws.std(axis=0, ddof=1) / np.sqrt(n_batches)


def gillespie_simulate(params: AsepParams, t_end: float, seed: int, initial_state=None,
                       max_events: int | None = None, block: int = 65536) -> Trajectory:
    """Exact continuous-time trajectory of the open ASEP.

    Stops at ``t_end`` or after ``max_events`` jumps, whichever comes first;
    in the latter case ``t_final`` is the time of the last jump. The same
    seed always gives the same trajectory, under either kernel backend.
    """
    if not t_end > 0.0:
        raise DomainError("t_end must be positive")
    n = params.n_sites
    if n > 62:
        raise CapacityError("states are stored as 64-bit integers; at most 62 sites")
    if initial_state is None:
        state = 0
    elif isinstance(initial_state, (int, np.integer)):
        state = int(initial_state)
    else:
        if len(initial_state) != n:
            raise DomainError("initial state length must equal n_sites")
        state = state_index(initial_state)
    rng = np.random.default_rng(seed)
    counters = np.zeros(4, dtype=np.int64)
    times = [np.zeros(1)]
    states = [np.array([state], dtype=np.int64)]
    t = 0.0
    remaining = max_events
    done = False
    while True:
        cap = block if remaining is None else min(block, remaining)
        if cap <= 0:
            break
        uniforms = rng.random(2 * cap)
        out_s = np.empty(cap, dtype=np.int64)
        out_t = np.empty(cap, dtype=np.float64)
        n_ev, state, t, done = kernels.gillespie_block(
            state, t, n, params.alpha, params.gamma, params.beta, params.delta, params.q,
            float(t_end), uniforms, out_s, out_t, counters,
        )
        times.append(out_t[:n_ev].copy())
        states.append(out_s[:n_ev].copy())
        if remaining is not None:
            remaining -= n_ev
        if done:
            break
    times = np.concatenate(times)
    states = np.concatenate(states)
    t_final = float(t_end) if done else float(times[-1])
    return Trajectory(n, times, states, t_final, counters)


def stationary_current(params: AsepParams, pi: FiniteLaw) -> float:
    """Mean particle current through the left boundary under ``pi``."""
    first = np.array([tau[0] for tau in pi.outcomes])
    return float(pi.probs @ np.where(first == 0, params.alpha, -params.gamma))


def bond_currents(params: AsepParams, pi: FiniteLaw) -> np.ndarray:
    """Mean net current across each bulk bond ``(i, i+1)``."""
    bits = np.array(pi.outcomes)
    hi, lo = bits[:, :-1], bits[:, 1:]
    return pi.probs @ ((hi == 1) & (lo == 0)) - params.q * (pi.probs @ ((hi == 0) & (lo == 1)))
