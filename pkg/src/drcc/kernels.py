"""Numeric inner loops, each in a numba and a numpy flavour.

Every public name is bound to one of the two implementations at import time
(see :mod:`drcc._accel`). Both flavours are importable directly as
``<name>_nb`` and ``<name>_np`` so tests and the benchmark can compare them.

Sample arrays are always sorted non-increasing (``xi[0]`` is the largest).
"""

import math

import numpy as np

from ._accel import njit, pick

# slack added to alpha*N before flooring so grid points are not misclassified
GUARD = 1e-12


# ---------------------------------------------------------------------------
# flooded water amount  (1/N) * sum_{n=1}^{alpha N} (v - xi^n)^+
# ---------------------------------------------------------------------------


@njit
def water_nb(xi, v, alpha):
    n = xi.shape[0]
    an = alpha * n
    k = int(math.floor(an + GUARD))
    if k > n:
        k = n
    frac = an - k
    if frac < 0.0:
        frac = 0.0
    total = 0.0
    for i in range(k):
        e = v - xi[i]
        if e > 0.0:
            total += e
    if k < n and frac > 0.0:
        e = v - xi[k]
        if e > 0.0:
            total += frac * e
    return total / n


def water_np(xi, v, alpha):
    n = xi.shape[0]
    an = alpha * n
    k = min(int(math.floor(an + GUARD)), n)
    frac = max(an - k, 0.0)
    total = float(np.maximum(v - xi[:k], 0.0).sum())
    if k < n and frac > 0.0:
        total += frac * max(v - xi[k], 0.0)
    return total / n


# ---------------------------------------------------------------------------
# critical index j*: largest j with water(xi^j, alpha) >= eps (1-based, 0 = none)
# ---------------------------------------------------------------------------


@njit
def critical_index_nb(xi, eps, alpha):
    # water(xi[j], alpha) is nonincreasing in j, so the qualifying set is a prefix
    n = xi.shape[0]
    lo = 0
    hi = n
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if water_nb(xi, xi[mid - 1], alpha) >= eps:
            lo = mid
        else:
            hi = mid - 1
    return lo


def critical_index_np(xi, eps, alpha):
    n = xi.shape[0]
    an = alpha * n
    k = min(int(math.floor(an + GUARD)), n)
    frac = max(an - k, 0.0)
    # water at every level xi^j at once: rows are levels, columns are samples
    excess = np.maximum(xi[:, None] - xi[None, :k], 0.0).sum(axis=1)
    if k < n and frac > 0.0:
        excess += frac * np.maximum(xi - xi[k], 0.0)
    ok = np.nonzero(excess / n >= eps)[0]
    return int(ok[-1]) + 1 if ok.size else 0


# ---------------------------------------------------------------------------
# continuous worst-case VaR for many alphas
# ---------------------------------------------------------------------------


@njit
def var_continuous_nb(xi, eps, alphas, out_c, out_d, out_j):
    n = xi.shape[0]
    prefix = np.zeros(n + 1)
    for i in range(n):
        prefix[i + 1] = prefix[i] + xi[i]
    for a in range(alphas.shape[0]):
        alpha = alphas[a]
        an = alpha * n
        k = int(math.floor(an + GUARD))
        if k > n:
            k = n
        frac = an - k
        if frac < 0.0:
            frac = 0.0
        j = critical_index_nb(xi, eps, alpha)
        tail = prefix[k] - prefix[j]
        if k < n:
            tail += frac * xi[k]
        level = (n * eps + tail) / (an - j)
        out_c[a] = level
        out_j[a] = j
        if j > 0:
            out_d[a] = xi[j - 1]
        else:
            out_d[a] = level


def var_continuous_np(xi, eps, alphas, out_c, out_d, out_j):
    n = xi.shape[0]
    prefix = np.concatenate(([0.0], np.cumsum(xi)))
    for a, alpha in enumerate(alphas):
        an = alpha * n
        k = min(int(math.floor(an + GUARD)), n)
        frac = max(an - k, 0.0)
        j = critical_index_np(xi, eps, alpha)
        tail = prefix[k] - prefix[j]
        if k < n:
            tail += frac * xi[k]
        level = (n * eps + tail) / (an - j)
        out_c[a] = level
        out_j[a] = j
        out_d[a] = xi[j - 1] if j > 0 else level


# ---------------------------------------------------------------------------
# smallest alpha reaching water eps at a fixed level (bisection)
# ---------------------------------------------------------------------------


@njit
def alpha_bisect_nb(xi, v, eps, tol):
    # returns -1.0 when no alpha < 1 reaches eps
    if water_nb(xi, v, 1.0) <= eps:
        return -1.0
    lo = 0.0
    hi = 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if water_nb(xi, v, mid) >= eps:
            hi = mid
        else:
            lo = mid
    return hi


def alpha_bisect_np(xi, v, eps, tol):
    if water_np(xi, v, 1.0) <= eps:
        return -1.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if water_np(xi, v, mid) >= eps:
            hi = mid
        else:
            lo = mid
    return hi


@njit
def alpha_levels_nb(xi, eps, tol, out):
    for i in range(xi.shape[0]):
        out[i] = alpha_bisect_nb(xi, xi[i], eps, tol)


def alpha_levels_np(xi, eps, tol, out):
    for i in range(xi.shape[0]):
        out[i] = alpha_bisect_np(xi, xi[i], eps, tol)


# ---------------------------------------------------------------------------
# greedy extended-polymatroid vertex for h(S) = sqrt(sigma + sum_{s in S} d_s)
# ---------------------------------------------------------------------------


@njit
def greedy_pi_nb(sigma, d, order, out):
    acc = sigma
    prev = 0.0
    for pos in range(order.shape[0]):
        s = order[pos]
        acc += d[s]
        cur = math.sqrt(acc)
        out[s] = cur - prev
        prev = cur


def greedy_pi_np(sigma, d, order, out):
    levels = np.sqrt(sigma + np.cumsum(d[order]))
    out[order] = np.diff(levels, prepend=0.0)


# ---------------------------------------------------------------------------
# dense tableau pivot
# ---------------------------------------------------------------------------


@njit
def pivot_nb(tab, row, col):
    m, n = tab.shape
    piv = tab[row, col]
    for j in range(n):
        tab[row, j] /= piv
    for i in range(m):
        if i == row:
            continue
        f = tab[i, col]
        if f != 0.0:
            for j in range(n):
                tab[i, j] -= f * tab[row, j]
        tab[i, col] = 0.0
    tab[row, col] = 1.0


def pivot_np(tab, row, col):
    tab[row] /= tab[row, col]
    f = tab[:, col].copy()
    f[row] = 0.0
    tab -= np.outer(f, tab[row])
    tab[:, col] = 0.0
    tab[row, col] = 1.0


water = pick(water_nb, water_np)
critical_index = pick(critical_index_nb, critical_index_np)
var_continuous = pick(var_continuous_nb, var_continuous_np)
alpha_bisect = pick(alpha_bisect_nb, alpha_bisect_np)
alpha_levels = pick(alpha_levels_nb, alpha_levels_np)
greedy_pi = pick(greedy_pi_nb, greedy_pi_np)
pivot = pick(pivot_nb, pivot_np)
