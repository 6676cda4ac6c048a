# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot kernels; see ``_pykernels`` for the contracts."""

from libc.math cimport exp, expm1, log, log1p, INFINITY

import numpy as np

BACKEND = "cython"


def gillespie_block(long long state, double t, int n_sites, double alpha, double gamma,
                    double beta, double delta, double q, double t_end,
                    const double[::1] uniforms, long long[::1] out_states,
                    double[::1] out_times, long long[::1] counters):
    cdef Py_ssize_t n_uniform = uniforms.shape[0]
    cdef Py_ssize_t cap = out_states.shape[0]
    cdef long long top = (<long long>1) << (n_sites - 1)
    cdef Py_ssize_t n_ev = 0
    cdef Py_ssize_t pos = 0
    cdef double left_rate, right_rate, total, dt, target, acc
    cdef int i, shift, hi, lo, done
    cdef bint reached_end = False
    with nogil:
        while pos + 1 < n_uniform and n_ev < cap:
            if state & top:
                left_rate = gamma
            else:
                left_rate = alpha
            if state & 1:
                right_rate = beta
            else:
                right_rate = delta
            total = left_rate + right_rate
            for i in range(n_sites - 1):
                hi = (state >> (n_sites - 1 - i)) & 1
                lo = (state >> (n_sites - 2 - i)) & 1
                if hi and not lo:
                    total += 1.0
                elif lo and not hi:
                    total += q
            dt = -log1p(-uniforms[pos]) / total
            if t + dt > t_end:
                reached_end = True
                t = t_end
                break
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
                done = 0
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
                        state ^= ((<long long>3) << shift)
                        done = 1
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
    return n_ev, state, t, reached_end


def hn_log_weights(start, steps, double log_q, double[::1] out_log, long long[::1] out_end):
    cdef const long long[::1] a = np.ascontiguousarray(start, dtype=np.int64)
    cdef const signed char[:, ::1] st = np.ascontiguousarray(steps, dtype=np.int8)
    cdef Py_ssize_t n_paths = st.shape[0]
    cdef Py_ssize_t n_steps = st.shape[1]
    cdef Py_ssize_t p, i
    cdef long long level, k
    cdef long long top = (max(int(np.max(start)), 0) if n_paths else 0) + n_steps
    # levels are integers in [1, top]; tabulate log(1 - q^k) once
    cdef double[::1] table = np.empty(top + 1, dtype=np.float64)
    cdef double acc
    table[0] = -INFINITY
    for k in range(1, top + 1):
        table[k] = log(-expm1(k * log_q))
    with nogil:
        for p in range(n_paths):
            level = a[p]
            acc = table[level] if level > 0 else -INFINITY
            for i in range(n_steps):
                level += st[p, i]
                if level <= 0:
                    acc = -INFINITY
                else:
                    acc += table[level]
            out_log[p] = acc
            out_end[p] = level - a[p]


def riemann_exp_integral(increments, double dt, double[::1] out_integral, double[::1] out_end):
    cdef const double[:, ::1] inc = np.ascontiguousarray(increments, dtype=np.float64)
    cdef Py_ssize_t n_paths = inc.shape[0]
    cdef Py_ssize_t n_inc = inc.shape[1]
    cdef Py_ssize_t p, i
    cdef double g, acc
    with nogil:
        for p in range(n_paths):
            g = 0.0
            acc = 1.0
            for i in range(n_inc - 1):
                g += inc[p, i]
                acc += exp(-2.0 * g)
            g += inc[p, n_inc - 1]
            out_integral[p] = dt * acc
            out_end[p] = g
