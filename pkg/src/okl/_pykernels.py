"""Pure Python / NumPy versions of the hot kernels.

Signatures match ``_ckernels.pyx`` exactly; ``okl.kernels`` picks one
at import. Both consume pre-drawn uniforms in the same order, so given the
same draws they produce identical results.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"


def gillespie_block(state, t, n_sites, alpha, gamma, beta, delta, q, t_end,
                    uniforms, out_states, out_times, counters):
    """Advance the open ASEP until ``t_end`` or the uniforms run out.

    Two uniforms per event: the first sets the holding time, the second
    picks the event by a linear scan in the fixed order left boundary,
    bulk bonds left to right, right boundary. Returns
    ``(n_events, state, t, reached_end)``.
    """
    n_uniform = len(uniforms)
    cap = len(out_states)
    top = 1 << (n_sites - 1)
    n_ev = 0
    pos = 0
    while pos + 1 < n_uniform and n_ev < cap:
        # total rate
        left_rate = alpha if not (state & top) else gamma
        right_rate = beta if (state & 1) else delta
        total = left_rate + right_rate
        for i in range(n_sites - 1):
            hi = (state >> (n_sites - 1 - i)) & 1
            lo = (state >> (n_sites - 2 - i)) & 1
            if hi and not lo:
                total += 1.0
            elif lo and not hi:
                total += q
        dt = -math.log1p(-uniforms[pos]) / total
        if t + dt > t_end:
            return n_ev, state, t_end, True
        t += dt
        target = uniforms[pos + 1] * total
        pos += 2
        acc = left_rate
        if target < acc:
            if state & top:
                counters[1] += 1
            else:
                counters[0] += 1
            state ^= top
        else:
            done = False
            for i in range(n_sites - 1):
                shift = n_sites - 2 - i
                hi = (state >> (shift + 1)) & 1
                lo = (state >> shift) & 1
                if hi and not lo:
                    acc += 1.0
                elif lo and not hi:
                    acc += q
                else:
                    continue
                if target < acc:
                    state ^= (3 << shift)
                    done = True
                    break
            if not done:
                if state & 1:
                    counters[2] += 1
                else:
                    counters[3] += 1
                state ^= 1
        out_states[n_ev] = state
        out_times[n_ev] = t
        n_ev += 1
    return n_ev, state, t, False


def hn_log_weights(start, steps, log_q, out_log, out_end):
    """``log prod_{i=0..N} (1 - q^(start + n_i))`` for a batch of walks.

    ``steps[p, i]`` is the n-increment of step ``i`` (0 when the other
    coordinate moved). A walk with ``start + n_i <= 0`` anywhere gets
    ``-inf``. ``out_end`` receives ``n_N``.
    """
    start = np.asarray(start, dtype=np.int64)
    levels = start[:, None] + np.concatenate(
        [np.zeros((len(start), 1), dtype=np.int64), np.cumsum(steps, axis=1, dtype=np.int64)], axis=1
    )
    bad = np.any(levels <= 0, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.log(-np.expm1(np.maximum(levels, 1) * log_q))
    res = terms.sum(axis=1)
    res[bad] = -np.inf
    out_log[:] = res
    out_end[:] = levels[:, -1] - start


def riemann_exp_integral(increments, dt, out_integral, out_end):
    """Left-endpoint Riemann sum of ``exp(-2 g)`` for paths built from increments.

    ``g_0 = 0`` and ``g_{i+1} = g_i + increments[:, i]``; the sum runs over
    ``g_0 .. g_{M-1}``.
    """
    g = np.cumsum(increments, axis=1)
    head = np.exp(-2.0 * g[:, :-1]).sum(axis=1) if g.shape[1] > 1 else 0.0
    out_integral[:] = dt * (1.0 + head)
    out_end[:] = g[:, -1]
