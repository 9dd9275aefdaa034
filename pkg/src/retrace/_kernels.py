"""Numeric hot kernels with optional numba acceleration.

Every kernel ships in two interchangeable flavours: a numba ``@njit``
build and a pure-numpy fallback. The active backend is chosen once at
import time: numba when importable, unless the environment variable
``RETRACE_NUMBA`` is set to ``0``/``false``/``off``/``no``. Both flavours
stay importable through :func:`build_impls` so they can be compared
directly (see ``benchmarks/bench_backends.py``).

Results are deterministic within a backend. Across backends the values
agree to float rounding (libm vs vectorized transcendentals can differ in
the last ulp).
"""

from __future__ import annotations

import logging
import os

import numpy as np

log = logging.getLogger("retrace")

#: names every backend must provide
KERNEL_NAMES = ("pairwise_sq_dists", "rbf_kernel", "gmm_log_pdf", "smo_solve")


# ---------------------------------------------------------------------------
# pure-numpy implementations (vectorized)
# ---------------------------------------------------------------------------


def _pairwise_sq_dists_np(x, z):
    diff = x[:, None, :] - z[None, :, :]
    return np.sum(diff * diff, axis=2)


def _rbf_kernel_np(x, z, gamma):
    return np.exp(-gamma * _pairwise_sq_dists_np(x, z))


def _gmm_log_pdf_np(x, means, variances):
    diff = x[:, None, :] - means[None, :, :]
    quad = np.sum(diff * diff / variances[None, :, :], axis=2)
    norm = np.sum(np.log(2.0 * np.pi * variances), axis=1)
    return -0.5 * (norm[None, :] + quad)


# ---------------------------------------------------------------------------
# loop bodies for numba compilation (the SMO body doubles as the plain
# fallback: its inner array updates are vectorized either way)
# ---------------------------------------------------------------------------


def _pairwise_sq_dists_loops(x, z):
    n, d = x.shape
    m = z.shape[0]
    out = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for t in range(d):
                diff = x[i, t] - z[j, t]
                acc += diff * diff
            out[i, j] = acc
    return out


def _rbf_kernel_loops(x, z, gamma):
    n, d = x.shape
    m = z.shape[0]
    out = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for t in range(d):
                diff = x[i, t] - z[j, t]
                acc += diff * diff
            out[i, j] = np.exp(-gamma * acc)
    return out


def _gmm_log_pdf_loops(x, means, variances):
    n, d = x.shape
    k = means.shape[0]
    out = np.empty((n, k))
    for c in range(k):
        norm = 0.0
        for t in range(d):
            norm += np.log(2.0 * np.pi * variances[c, t])
        for i in range(n):
            quad = 0.0
            for t in range(d):
                diff = x[i, t] - means[c, t]
                quad += diff * diff / variances[c, t]
            out[i, c] = -0.5 * (norm + quad)
    return out


def _smo_solve_body(K, y, C, tol, step_eps, max_passes):
    """Sequential-minimal-optimization solver for the soft-margin dual.

    Maximizes ``sum(a) - 0.5 * a' (yy' * K) a`` subject to ``0 <= a <= C``
    and ``sum(a * y) == 0`` by repeated analytic two-variable updates
    (Platt-style, with the max-|E1-E2| second-choice heuristic). The pair
    search order is fixed, so the result is a pure function of the inputs.

    The error cache ``E[i] = f(x_i) - y_i`` (with ``f(x) = sum_j a_j y_j
    K_j(x) + b``) is rebuilt from scratch at the start of every
    full-sweep pass, so the convergence decision is not polluted by
    accumulated float drift.

    Once the pair search stabilizes, the bias is recentred on the midpoint
    of its KKT-feasible interval (the multipliers pin the bias only up to
    an interval when every support vector sits at a bound) and the
    conditions are verified against exactly recomputed decision values;
    optimization resumes if any violation above ``tol`` survives.

    Returns ``(alpha, b, passes, status)``; status 0 means every example
    satisfies its KKT condition within ``tol``, 1 means ``max_passes``
    was exhausted first.
    """
    n = K.shape[0]
    alpha = np.zeros(n)
    b = 0.0
    E = -y.copy()
    passes = 0
    cand = np.empty(2 * n + 1, np.int64)

    while True:
        examine_all = True
        num_changed = 0
        while num_changed > 0 or examine_all:
            if passes >= max_passes:
                return alpha, b, passes, 1
            passes += 1
            if examine_all:
                E = (alpha * y) @ K + b - y
            num_changed = 0
            for i2 in range(n):
                if not examine_all and (alpha[i2] <= 0.0 or alpha[i2] >= C):
                    continue
                y2 = y[i2]
                alph2 = alpha[i2]
                E2 = E[i2]
                r2 = E2 * y2
                if not ((r2 < -tol and alph2 < C) or (r2 > tol and alph2 > 0.0)):
                    continue

                # candidate partners: heuristic pick, then non-bound
                # examples in rotation order after i2, then everything
                nonbound = (alpha > 0.0) & (alpha < C)
                m = 0
                if nonbound.sum() > 1:
                    gaps = np.where(nonbound, np.abs(E - E2), -1.0)
                    cand[m] = np.argmax(gaps)
                    m += 1
                for off in range(1, n + 1):
                    j = (i2 + off) % n
                    if nonbound[j]:
                        cand[m] = j
                        m += 1
                for off in range(1, n + 1):
                    cand[m] = (i2 + off) % n
                    m += 1

                for ci in range(m):
                    i1 = cand[ci]
                    if i1 == i2:
                        continue
                    y1 = y[i1]
                    alph1 = alpha[i1]
                    E1 = E[i1]
                    s = y1 * y2
                    if s < 0.0:
                        L = max(0.0, alph2 - alph1)
                        H = min(C, C + alph2 - alph1)
                    else:
                        L = max(0.0, alph2 + alph1 - C)
                        H = min(C, alph2 + alph1)
                    if L >= H:
                        continue
                    k11 = K[i1, i1]
                    k12 = K[i1, i2]
                    k22 = K[i2, i2]
                    eta = k11 + k22 - 2.0 * k12
                    if eta > 0.0:
                        a2 = alph2 + y2 * (E1 - E2) / eta
                        if a2 < L:
                            a2 = L
                        elif a2 > H:
                            a2 = H
                    else:
                        # flat direction: the dual gain is linear in the
                        # step, so the best point is a clip bound
                        dl = L - alph2
                        dh = H - alph2
                        gain_l = dl * y2 * (E1 - E2) - 0.5 * eta * dl * dl
                        gain_h = dh * y2 * (E1 - E2) - 0.5 * eta * dh * dh
                        if gain_l > gain_h + step_eps:
                            a2 = L
                        elif gain_h > gain_l + step_eps:
                            a2 = H
                        else:
                            continue
                    if abs(a2 - alph2) < step_eps * (a2 + alph2 + step_eps):
                        continue
                    # snap to the exact bounds: float dust parked next to
                    # 0 or C would otherwise masquerade as an interior
                    # support vector and wreck the bias interval
                    bsnap = 1e-8 * C
                    if a2 < bsnap:
                        a2 = 0.0
                    elif a2 > C - bsnap:
                        a2 = C
                    a1 = alph1 + s * (alph2 - a2)
                    if a1 < bsnap:
                        a1 = 0.0
                        a2 = alph2 + s * alph1
                    elif a1 > C - bsnap:
                        a1 = C
                        a2 = alph2 + s * (alph1 - C)
                    # purge rounding dust at the corners: the shift is far
                    # below constraint noise, and dust-sized multipliers
                    # would misclassify as interior support vectors
                    dust = 1e-12 * C
                    if a1 < dust:
                        a1 = 0.0
                    elif a1 > C - dust:
                        a1 = C
                    if a2 < dust:
                        a2 = 0.0
                    elif a2 > C - dust:
                        a2 = C
                    d1 = y1 * (a1 - alph1)
                    d2 = y2 * (a2 - alph2)
                    b1 = b - E1 - d1 * k11 - d2 * k12
                    b2 = b - E2 - d1 * k12 - d2 * k22
                    if 0.0 < a1 < C:
                        b_new = b1
                    elif 0.0 < a2 < C:
                        b_new = b2
                    else:
                        b_new = 0.5 * (b1 + b2)
                    E = E + d1 * K[i1] + d2 * K[i2] + (b_new - b)
                    alpha[i1] = a1
                    alpha[i2] = a2
                    b = b_new
                    num_changed += 1
                    break

            if examine_all:
                examine_all = False
            elif num_changed == 0:
                examine_all = True

        # pair search stabilized: recentre the bias on its KKT-feasible
        # interval and verify against exact decision values
        g = (alpha * y) @ K
        beta = y - g
        b_lo = -1e300
        b_hi = 1e300
        for i in range(n):
            nb = 0.0 < alpha[i] < C
            if nb or (alpha[i] <= 0.0 and y[i] > 0.0) or (
                alpha[i] >= C and y[i] < 0.0
            ):
                if beta[i] > b_lo:
                    b_lo = beta[i]
            if nb or (alpha[i] <= 0.0 and y[i] < 0.0) or (
                alpha[i] >= C and y[i] > 0.0
            ):
                if beta[i] < b_hi:
                    b_hi = beta[i]
        b = 0.5 * (b_lo + b_hi)
        bad = 0
        for i in range(n):
            margin = y[i] * (g[i] + b)
            if alpha[i] <= 0.0:
                if margin < 1.0 - tol:
                    bad += 1
            elif alpha[i] >= C:
                if margin > 1.0 + tol:
                    bad += 1
            elif abs(margin - 1.0) > tol:
                bad += 1
        if bad == 0:
            return alpha, b, passes, 0
        # violations survive the recentred bias: resume optimizing


# ---------------------------------------------------------------------------
# backend assembly
# ---------------------------------------------------------------------------


def numba_requested() -> bool:
    """True unless RETRACE_NUMBA is set to a falsy value."""
    flag = os.environ.get("RETRACE_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "off", "no")


def build_impls(use_numba: bool) -> dict:
    """Return the kernel table for one backend.

    With ``use_numba=True`` the loop bodies are compiled with
    ``numba.njit(cache=True)``; otherwise the vectorized numpy versions
    (and the plain-python SMO loop) are returned.
    """
    if not use_numba:
        return {
            "pairwise_sq_dists": _pairwise_sq_dists_np,
            "rbf_kernel": _rbf_kernel_np,
            "gmm_log_pdf": _gmm_log_pdf_np,
            "smo_solve": _smo_solve_body,
        }
    from numba import njit

    jit = njit(cache=True)
    return {
        "pairwise_sq_dists": jit(_pairwise_sq_dists_loops),
        "rbf_kernel": jit(_rbf_kernel_loops),
        "gmm_log_pdf": jit(_gmm_log_pdf_loops),
        "smo_solve": jit(_smo_solve_body),
    }


def _select_backend() -> str:
    if not numba_requested():
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        log.warning("numba not importable; falling back to numpy kernels")
        return "numpy"
    return "numba"


BACKEND = _select_backend()
_ACTIVE = build_impls(BACKEND == "numba")


def _as_f64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def pairwise_sq_dists(x, z) -> np.ndarray:
    """Squared euclidean distances between every row of x and of z."""
    return _ACTIVE["pairwise_sq_dists"](_as_f64(x), _as_f64(z))


def rbf_kernel(x, z, gamma: float) -> np.ndarray:
    """RBF kernel matrix exp(-gamma * ||x_i - z_j||^2)."""
    return _ACTIVE["rbf_kernel"](_as_f64(x), _as_f64(z), float(gamma))


def gmm_log_pdf(x, means, variances) -> np.ndarray:
    """(n, k) log densities of diagonal-covariance gaussians."""
    return _ACTIVE["gmm_log_pdf"](_as_f64(x), _as_f64(means), _as_f64(variances))


def smo_solve(
    K,
    y,
    C: float,
    tol: float,
    step_eps: float = 1e-12,
    max_passes: int = 10_000,
):
    """Run the SMO dual solver on a precomputed kernel matrix."""
    return _ACTIVE["smo_solve"](
        _as_f64(K), _as_f64(y), float(C), float(tol), float(step_eps),
        int(max_passes),
    )
