# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled projection kernels (hot path of the planner's inner loops).

Same algorithms and iteration counts as `_kernels_py.py`; see that module for
the reference semantics.
"""

import numpy as np

BACKEND = "compiled"

cdef int _BISECT_ITERS = 64


cdef void _proj_row(double[:] v, double total, double[:] caps, double cap_max, double[:] out) noexcept nogil:
    cdef Py_ssize_t m = v.shape[0]
    cdef Py_ssize_t i, it
    cdef double lo, hi, mid, s, xi, err
    cdef int n_free
    if total <= 0.0:
        for i in range(m):
            out[i] = 0.0
        return
    lo = v[0]
    hi = v[0]
    for i in range(1, m):
        if v[i] < lo:
            lo = v[i]
        if v[i] > hi:
            hi = v[i]
    lo -= cap_max
    for it in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        s = 0.0
        for i in range(m):
            xi = v[i] - mid
            if xi < 0.0:
                xi = 0.0
            elif xi > caps[i]:
                xi = caps[i]
            s += xi
        if s > total:
            lo = mid
        else:
            hi = mid
    mid = 0.5 * (lo + hi)
    s = 0.0
    n_free = 0
    for i in range(m):
        xi = v[i] - mid
        if xi < 0.0:
            xi = 0.0
        elif xi > caps[i]:
            xi = caps[i]
        out[i] = xi
        s += xi
        if 0.0 < xi < caps[i]:
            n_free += 1
    if n_free > 0:
        err = (total - s) / n_free
        for i in range(m):
            if 0.0 < out[i] < caps[i]:
                xi = out[i] + err
                if xi < 0.0:
                    xi = 0.0
                elif xi > caps[i]:
                    xi = caps[i]
                out[i] = xi


def proj_rows_simplex_box(v, totals, caps):
    v_arr = np.ascontiguousarray(v, dtype=np.float64)
    t_arr = np.ascontiguousarray(totals, dtype=np.float64)
    c_arr = np.ascontiguousarray(caps, dtype=np.float64)
    out = np.zeros_like(v_arr)
    cdef double[:, :] vm = v_arr
    cdef double[:, :] om = out
    cdef double[:] tm = t_arr
    cdef double[:] cm = c_arr
    cdef double cap_max = float(c_arr.max()) if c_arr.size else 0.0
    cdef Py_ssize_t k
    with nogil:
        for k in range(vm.shape[0]):
            _proj_row(vm[k], tm[k], cm, cap_max, om[k])
    return out


def proj_halfspace(x, a, double b):
    x_arr = np.ascontiguousarray(x, dtype=np.float64)
    a_arr = np.ascontiguousarray(a, dtype=np.float64)
    out = x_arr.copy()
    cdef double[:] xm = x_arr
    cdef double[:] am = a_arr
    cdef double[:] om = out
    cdef double dot = 0.0, nrm = 0.0, scale
    cdef Py_ssize_t i, n = xm.shape[0]
    with nogil:
        for i in range(n):
            dot += am[i] * xm[i]
            nrm += am[i] * am[i]
        if dot - b > 0.0 and nrm > 0.0:
            scale = (dot - b) / nrm
            for i in range(n):
                om[i] = xm[i] - scale * am[i]
    return out


def dykstra_project(u, totals, caps, a_mat, b_vec, int max_cycles, double tol,
                    p_rows_in=None, p_half_in=None):
    """Dykstra projection onto (row simplex-boxes) ∩ (halfspaces).

    Returns (projection, converged, max_violation, p_rows, p_half);
    mirrors the fallback, including the warm-start semantics.
    """
    u_arr = np.ascontiguousarray(u, dtype=np.float64)
    t_arr = np.ascontiguousarray(totals, dtype=np.float64)
    c_arr = np.ascontiguousarray(caps, dtype=np.float64)
    a_arr = np.ascontiguousarray(a_mat, dtype=np.float64)
    b_arr = np.ascontiguousarray(b_vec, dtype=np.float64)
    if a_arr.ndim != 2:
        a_arr = a_arr.reshape(-1, u_arr.size)

    cdef Py_ssize_t k_rows = u_arr.shape[0], m_cols = u_arr.shape[1]
    cdef Py_ssize_t flat_n = k_rows * m_cols
    cdef Py_ssize_t n_half = a_arr.shape[0]

    x = u_arr.copy()
    x_flat = x.reshape(-1)
    if p_rows_in is None:
        p_rows = np.zeros((k_rows, m_cols), dtype=np.float64)
    else:
        p_rows = np.array(p_rows_in, dtype=np.float64, copy=True)
    if p_half_in is None:
        p_half = np.zeros((n_half, flat_n), dtype=np.float64)
    else:
        p_half = np.array(p_half_in, dtype=np.float64, copy=True)
    work_row = np.empty(m_cols, dtype=np.float64)
    row_out = np.empty(m_cols, dtype=np.float64)
    prev_cycle = np.empty((k_rows, m_cols), dtype=np.float64)

    cdef double[:, :] xm = x
    cdef double[:] xf = x_flat
    cdef double[:, :] prm = p_rows
    cdef double[:, :] phm = p_half
    cdef double[:, :] am = a_arr
    cdef double[:] bm = b_arr
    cdef double[:] tm = t_arr
    cdef double[:] cm = c_arr
    cdef double[:] wr = work_row
    cdef double[:] ro = row_out
    cdef double[:, :] pv = prev_cycle
    cdef double cap_max = float(c_arr.max()) if c_arr.size else 0.0

    cdef Py_ssize_t cycle, k, i, j
    cdef double delta, viol, dot, nrm, scale, zi, step
    cdef double delta_tol = tol if tol > 1e-10 else 1e-10

    for cycle in range(max_cycles):
        delta = 0.0
        with nogil:
            for k in range(k_rows):
                for i in range(m_cols):
                    pv[k, i] = xm[k, i]
            for k in range(k_rows):
                for i in range(m_cols):
                    wr[i] = xm[k, i] + prm[k, i]
                _proj_row(wr, tm[k], cm, cap_max, ro)
                for i in range(m_cols):
                    prm[k, i] = wr[i] - ro[i]
                    xm[k, i] = ro[i]
            for j in range(n_half):
                dot = 0.0
                nrm = 0.0
                for i in range(flat_n):
                    zi = xf[i] + phm[j, i]
                    dot += am[j, i] * zi
                    nrm += am[j, i] * am[j, i]
                if dot - bm[j] > 0.0 and nrm > 0.0:
                    scale = (dot - bm[j]) / nrm
                else:
                    scale = 0.0
                for i in range(flat_n):
                    zi = xf[i] + phm[j, i] - scale * am[j, i]
                    phm[j, i] = xf[i] + phm[j, i] - zi
                    xf[i] = zi
            # Net change over the full cycle, matching the reference backend.
            for k in range(k_rows):
                for i in range(m_cols):
                    step = xm[k, i] - pv[k, i]
                    if step < 0.0:
                        step = -step
                    if step > delta:
                        delta = step
        viol = _max_violation(x, t_arr, c_arr, a_arr, b_arr)
        if viol <= tol and delta <= delta_tol:
            return x, True, viol, p_rows, p_half
    viol = _max_violation(x, t_arr, c_arr, a_arr, b_arr)
    return x, viol <= tol, viol, p_rows, p_half


def _max_violation(x, totals, caps, a_mat, b_vec):
    viol = max(float(-x.min(initial=0.0)), float((x - caps[None, :]).max(initial=0.0)))
    if x.size:
        viol = max(viol, float(np.abs(x.sum(axis=1) - totals).max()))
    if a_mat.shape[0]:
        viol = max(viol, float((a_mat @ x.reshape(-1) - b_vec).max(initial=0.0)))
    return viol
