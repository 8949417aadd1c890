# cython: language_level=3
"""Compiled hot kernels; see ``_pykernels`` for the reference semantics."""
import numpy as np

cimport numpy as cnp
from libc.math cimport log2

cnp.import_array()

cdef enum:
    OUTPUT_BITS = 63


def sample_rounds(const double[:, ::1] uniforms, const double[:, :, ::1] cum,
                  const int[:, ::1] choice, const unsigned char[::1] targets,
                  const double[::1] ef, const double[::1] fb):
    cdef Py_ssize_t trials = uniforms.shape[0], n = uniforms.shape[1]
    sum_f_a = np.zeros(trials, dtype=np.int64)
    sum_q_a = np.zeros(trials, dtype=np.int64)
    code_a = np.zeros(trials, dtype=np.uint64)
    sum_ef_a = np.zeros(trials, dtype=np.float64)
    sum_fb_a = np.zeros(trials, dtype=np.float64)
    cdef long long[::1] sum_f = sum_f_a
    cdef long long[::1] sum_q = sum_q_a
    cdef unsigned long long[::1] code = code_a
    cdef double[::1] sum_ef = sum_ef_a
    cdef double[::1] sum_fb = sum_fb_a
    cdef Py_ssize_t r, i
    cdef int k, t, cell, f, q
    cdef long long sf, sq
    cdef unsigned long long cd
    cdef double u, se, sb
    with nogil:
        for r in range(trials):
            sf = 0
            sq = 0
            cd = 0
            se = 0.0
            sb = 0.0
            for i in range(n):
                k = choice[i, sf]
                t = targets[i]
                u = uniforms[r, i]
                if u < cum[k, t, 0]:
                    cell = 0
                elif u < cum[k, t, 1]:
                    cell = 1
                elif u < cum[k, t, 2]:
                    cell = 2
                else:
                    cell = 3
                f = cell >> 1
                q = cell & 1
                se = se + ef[k]
                sb = sb + fb[k]
                sf += f
                sq += q
                if i < OUTPUT_BITS:
                    if t == 1:
                        cd = (cd << 1) | <unsigned long long>q
                    else:
                        cd = (cd << 1) | <unsigned long long>(1 - q)
            sum_f[r] = sf
            sum_q[r] = sq
            code[r] = cd
            sum_ef[r] = se
            sum_fb[r] = sb
    return sum_f_a, sum_q_a, code_a, sum_ef_a, sum_fb_a


def dag_backward(const long long[::1] child_ptr, const int[::1] child_idx,
                 const double[::1] child_prob, const unsigned char[::1] cheater,
                 const double[::1] leaf_value, int sense):
    cdef Py_ssize_t n_nodes = cheater.shape[0]
    value_a = np.zeros(n_nodes, dtype=np.float64)
    pick_a = np.full(n_nodes, -1, dtype=np.int32)
    cdef double[::1] val = value_a
    cdef int[::1] pick = pick_a
    cdef Py_ssize_t v, j, lo, hi, bpos
    cdef double best, x, acc
    with nogil:
        for v in range(n_nodes):
            lo = child_ptr[v]
            hi = child_ptr[v + 1]
            if lo == hi:
                val[v] = leaf_value[v]
            elif cheater[v]:
                best = val[child_idx[lo]]
                bpos = lo
                for j in range(lo + 1, hi):
                    x = val[child_idx[j]]
                    if (sense > 0 and x > best) or (sense <= 0 and x < best):
                        best = x
                        bpos = j
                val[v] = best
                pick[v] = <int>bpos
            else:
                acc = 0.0
                for j in range(lo, hi):
                    acc = acc + child_prob[j] * val[child_idx[j]]
                val[v] = acc
    return value_a, pick_a


def dag_reach(const long long[::1] child_ptr, const int[::1] child_idx,
              const double[::1] child_prob, const unsigned char[::1] cheater,
              const int[::1] pick, Py_ssize_t root):
    cdef Py_ssize_t n_nodes = cheater.shape[0]
    reach_a = np.zeros(n_nodes, dtype=np.float64)
    cdef double[::1] reach = reach_a
    cdef Py_ssize_t v, j, lo, hi
    cdef double r
    reach[root] = 1.0
    with nogil:
        v = root
        while v >= 0:
            r = reach[v]
            lo = child_ptr[v]
            hi = child_ptr[v + 1]
            if r != 0.0 and lo != hi:
                if cheater[v]:
                    reach[child_idx[pick[v]]] += r
                else:
                    for j in range(lo, hi):
                        reach[child_idx[j]] = reach[child_idx[j]] + r * child_prob[j]
            v -= 1
    return reach_a


def dag_distributions(const long long[::1] child_ptr, const int[::1] child_idx,
                      const double[::1] child_prob, const unsigned char[::1] cheater,
                      const int[::1] pick, const int[::1] leaf_out, Py_ssize_t n_out):
    cdef Py_ssize_t n_nodes = cheater.shape[0]
    d_a = np.zeros((n_nodes, n_out), dtype=np.float64)
    cdef double[:, ::1] d = d_a
    cdef Py_ssize_t v, j, o, lo, hi, c
    cdef double p
    with nogil:
        for v in range(n_nodes):
            lo = child_ptr[v]
            hi = child_ptr[v + 1]
            if lo == hi:
                d[v, leaf_out[v]] = 1.0
            elif cheater[v]:
                c = child_idx[pick[v]]
                for o in range(n_out):
                    d[v, o] = d[c, o]
            else:
                for j in range(lo, hi):
                    c = child_idx[j]
                    p = child_prob[j]
                    for o in range(n_out):
                        d[v, o] = d[v, o] + p * d[c, o]
    return d_a


cdef inline double _entropy(const double[::1] p) noexcept nogil:
    cdef double h = 0.0, x
    cdef Py_ssize_t o
    for o in range(p.shape[0]):
        x = p[o]
        if x > 0.0:
            h = h - x * log2(x)
    return h


def entropy_bits(p):
    cdef const double[::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    return _entropy(pv)


def local_search_best(const long long[::1] child_ptr, const int[::1] child_idx,
                      const unsigned char[::1] cheater, const int[::1] pick,
                      const double[::1] reach, const double[:, ::1] d,
                      const double[::1] p_root):
    cdef Py_ssize_t n_nodes = cheater.shape[0], n_out = p_root.shape[0]
    cdef double h0 = _entropy(p_root)
    cdef double best_h = h0 - 1e-12, h, r, x
    cdef Py_ssize_t best_v = -1, best_pos = -1, v, j, o, lo, hi, cur, alt
    with nogil:
        for v in range(n_nodes):
            if reach[v] <= 0.0 or not cheater[v]:
                continue
            lo = child_ptr[v]
            hi = child_ptr[v + 1]
            if hi - lo < 2:
                continue
            r = reach[v]
            cur = child_idx[pick[v]]
            for j in range(lo, hi):
                if j == pick[v]:
                    continue
                alt = child_idx[j]
                h = 0.0
                for o in range(n_out):
                    x = p_root[o] + r * (d[alt, o] - d[cur, o])
                    if x > 0.0:
                        h = h - x * log2(x)
                if h < best_h:
                    best_h = h
                    best_v = v
                    best_pos = j
    if best_v < 0:
        return h0, -1, -1
    return best_h, best_v, best_pos
