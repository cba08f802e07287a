"""Pure-NumPy projection kernels (fallback backend).

Mirrors the compiled extension in `_kernels.pyx`: identical algorithms and
iteration counts so both backends agree to floating-point noise. Rows are
vectorized here instead of looped, which keeps the fallback usable for large
tasks; the compiled backend wins on the many-small-problem regime.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

_BISECT_ITERS = 64


def proj_rows_simplex_box(v: np.ndarray, totals: np.ndarray, caps: np.ndarray) -> np.ndarray:
    """Project each row of v onto {x: 0 <= x <= caps, sum(x) = totals[row]}.

    `caps` is one upper bound per column, shared by all rows; a zero cap
    closes the column. Rows with a zero total project to zero. Each row is
    solved by bisection on the shift tau in x = clip(v - tau, 0, caps),
    whose sum is monotone in tau.
    """
    v = np.asarray(v, dtype=float)
    caps = np.asarray(caps, dtype=float)
    out = np.zeros_like(v)
    active = np.asarray(totals, dtype=float) > 0
    if not np.any(active):
        return out
    va = v[active]
    ta = np.asarray(totals, dtype=float)[active]
    cap_max = caps.max()
    lo = va.min(axis=1) - cap_max
    hi = va.max(axis=1)
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        s = np.clip(va - mid[:, None], 0.0, caps[None, :]).sum(axis=1)
        too_big = s > ta
        lo = np.where(too_big, mid, lo)
        hi = np.where(too_big, hi, mid)
    tau = 0.5 * (lo + hi)
    x = np.clip(va - tau[:, None], 0.0, caps[None, :])
    # Spread the residual rounding error over strictly interior coordinates.
    interior = (x > 0.0) & (x < caps[None, :])
    n_free = interior.sum(axis=1)
    err = ta - x.sum(axis=1)
    fix = np.where(n_free > 0, err / np.maximum(n_free, 1), 0.0)
    x = np.clip(x + interior * fix[:, None], 0.0, caps[None, :])
    out[active] = x
    return out


def proj_halfspace(x: np.ndarray, a: np.ndarray, b: float) -> np.ndarray:
    """Project the flat vector x onto {z: a.z <= b}."""
    viol = float(a @ x) - b
    if viol <= 0.0:
        return np.asarray(x, dtype=float).copy()
    return x - (viol / float(a @ a)) * a


def dykstra_project(
    u: np.ndarray,
    totals: np.ndarray,
    caps: np.ndarray,
    a_mat: np.ndarray,
    b_vec: np.ndarray,
    max_cycles: int,
    tol: float,
    p_rows: np.ndarray = None,
    p_half: np.ndarray = None,
):
    """Dykstra's alternating projection onto (row simplex-boxes) ∩ (halfspaces).

    u has shape (K, M) and is not modified. Returns (projection, converged,
    max_violation, p_rows, p_half); `converged` is False when the cycle cap
    was hit while the iterate still violated some constraint by more than tol
    (which is also the empty-intersection signal). The correction vectors can
    be fed back in when projecting a nearby point; that warm start trades the
    exact-nearest-point guarantee for far fewer cycles, which is fine inside
    a line-searched descent loop.
    """
    u = np.asarray(u, dtype=float)
    caps = np.asarray(caps, dtype=float)
    k, m = u.shape
    n_half = a_mat.shape[0]
    x = u.copy()
    p_rows = np.zeros_like(x) if p_rows is None else p_rows.copy()
    p_half = np.zeros((n_half, k * m)) if p_half is None else p_half.copy()
    prev = np.empty_like(x)
    delta_tol = max(tol, 1e-10)
    for _ in range(max_cycles):
        prev[...] = x
        y = proj_rows_simplex_box(x + p_rows, totals, caps)
        p_rows = x + p_rows - y
        x = y
        flat = x.reshape(-1)
        for j in range(n_half):
            z = flat + p_half[j]
            y_flat = proj_halfspace(z, a_mat[j], float(b_vec[j]))
            p_half[j] = z - y_flat
            flat = y_flat
        x = flat.reshape(k, m)
        viol = _max_violation(x, totals, caps, a_mat, b_vec)
        delta = np.abs(x - prev).max() if x.size else 0.0
        if viol <= tol and delta <= delta_tol:
            return x, True, viol, p_rows, p_half
    viol = _max_violation(x, totals, caps, a_mat, b_vec)
    return x, viol <= tol, viol, p_rows, p_half


def _max_violation(x, totals, caps, a_mat, b_vec):
    viol = max(float(-x.min(initial=0.0)), float((x - caps[None, :]).max(initial=0.0)))
    if x.size:
        viol = max(viol, float(np.abs(x.sum(axis=1) - totals).max()))
    if a_mat.shape[0]:
        viol = max(viol, float((a_mat @ x.reshape(-1) - b_vec).max(initial=0.0)))
    return viol
