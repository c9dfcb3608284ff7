"""Compiled inner loops for DII evaluation and mini-batch training.

Everything here is sequential and reduces in a fixed order, so results are
bitwise reproducible for a given input. The numpy implementations in
:mod:`dii_causal.dii` are the readable reference these kernels are tested
against.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def kth_smallest(a, n, k):
    """k-th smallest (1-based) of ``a[:n]``; reorders ``a`` in place."""
    lo = 0
    hi = n - 1
    kk = k - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if a[mid] < a[lo]:
            a[mid], a[lo] = a[lo], a[mid]
        if a[hi] < a[lo]:
            a[hi], a[lo] = a[lo], a[hi]
        if a[mid] < a[hi]:
            a[mid], a[hi] = a[hi], a[mid]
        pivot = a[hi]
        store = lo
        for p in range(lo, hi):
            if a[p] < pivot:
                a[p], a[store] = a[store], a[p]
                store += 1
        a[store], a[hi] = a[hi], a[store]
        if store == kk:
            return a[store]
        elif store < kk:
            lo = store + 1
        else:
            hi = store - 1
    return a[kk]


@njit(cache=True)
def dii_rows(x, w, ranks, mask, kvec, prefactor, want_grad):
    """DII of ``x * w`` against precomputed target ranks.

    Returns ``(dii, grad, bad_row)``; ``bad_row >= 0`` flags a row whose
    admissible distances are all zero (no usable scale).
    """
    n, d = x.shape
    w2 = w * w
    grad = np.zeros(d)
    js = np.empty(n, dtype=np.int64)
    dv = np.empty(n)
    buf = np.empty(n)
    c = np.empty(n)
    rv = np.empty(n)
    dd = np.empty((n, d))
    s_a = np.empty(d)
    t_a = np.empty(d)
    total = 0.0
    for i in range(n):
        cnt = 0
        for j in range(n):
            if mask[i, j]:
                js[cnt] = j
                cnt += 1
        dmin = np.inf
        for q in range(cnt):
            j = js[q]
            s = 0.0
            for a in range(d):
                diff = x[i, a] - x[j, a]
                sq = diff * diff
                dd[q, a] = sq
                s += w2[a] * sq
            dv[q] = s
            buf[q] = s
            rv[q] = ranks[i, j]
            if s < dmin:
                dmin = s
        lam = prefactor * kth_smallest(buf, cnt, kvec[i])
        if lam <= 0.0:
            pos = np.inf
            for q in range(cnt):
                if dv[q] > 0.0 and dv[q] < pos:
                    pos = dv[q]
            if pos == np.inf:
                return np.nan, grad, i
            lam = prefactor * pos
        inv = 1.0 / lam
        zsum = 0.0
        for q in range(cnt):
            e = np.exp((dmin - dv[q]) * inv)
            c[q] = e
            zsum += e
        rc = 0.0
        for q in range(cnt):
            c[q] /= zsum
            rc += c[q] * rv[q]
        norm = 2.0 / (n * (cnt + 1.0))
        total += norm * rc
        if want_grad:
            for a in range(d):
                s_a[a] = 0.0
                t_a[a] = 0.0
            for q in range(cnt):
                cq = c[q]
                rcq = rv[q] * cq
                for a in range(d):
                    s_a[a] += cq * dd[q, a]
                    t_a[a] += rcq * dd[q, a]
            scale = norm * 2.0 * inv
            for a in range(d):
                grad[a] += scale * w[a] * (rc * s_a[a] - t_a[a])
    return total, grad, -1


@njit(cache=True)
def _batch_mask(times, half_width):
    n = times.shape[0]
    mask = np.empty((n, n), dtype=np.bool_)
    for i in range(n):
        for j in range(n):
            mask[i, j] = i != j and abs(times[i] - times[j]) > half_width
    return mask


@njit(cache=True)
def _ranks_sorting(z, mask):
    n, dz = z.shape
    ranks = np.zeros((n, n), dtype=np.int64)
    keyed = np.empty(n)
    for i in range(n):
        for j in range(n):
            if mask[i, j]:
                s = 0.0
                for a in range(dz):
                    diff = z[i, a] - z[j, a]
                    s += diff * diff
                keyed[j] = s
            else:
                keyed[j] = np.inf
        order = np.argsort(keyed, kind="mergesort")
        r = 1
        for p in range(n):
            j = order[p]
            if mask[i, j]:
                ranks[i, j] = r
                r += 1
    return ranks


@njit(cache=True)
def _ranks_1d(zc, mask, order):
    """Ranks for a 1-D target by walking outward from each point in sorted order.

    Requires distinct values (``order`` is an argsort of ``zc``); the caller
    falls back to :func:`_ranks_sorting` otherwise.
    """
    n = zc.shape[0]
    pos = np.empty(n, dtype=np.int64)
    for p in range(n):
        pos[order[p]] = p
    ranks = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        zi = zc[i]
        left = pos[i] - 1
        right = pos[i] + 1
        r = 1
        while left >= 0 or right < n:
            if left < 0:
                take_left = False
            elif right >= n:
                take_left = True
            else:
                jl = order[left]
                jr = order[right]
                dl = (zi - zc[jl]) * (zi - zc[jl])
                dr = (zi - zc[jr]) * (zi - zc[jr])
                take_left = dl < dr or (dl == dr and jl < jr)
            if take_left:
                j = order[left]
                left -= 1
            else:
                j = order[right]
                right += 1
            if mask[i, j]:
                ranks[i, j] = r
                r += 1
    return ranks


@njit(cache=True)
def batch_ranks_and_mask(z, times, half_width):
    """Target ranks and admissibility mask for one mini-batch (ties by position)."""
    mask = _batch_mask(times, half_width)
    if z.shape[1] == 1:
        zc = z[:, 0].copy()
        order = np.argsort(zc, kind="mergesort")
        distinct = True
        for p in range(1, zc.shape[0]):
            if zc[order[p]] == zc[order[p - 1]]:
                distinct = False
                break
        if distinct:
            return _ranks_1d(zc, mask, order), mask
    return _ranks_sorting(z, mask), mask


@njit(cache=True)
def train_epoch(x, z, times, perm, n_batches, batch_size, w, m, v, step,
                lr, beta1, beta2, eps, half_width, k, prefactor):
    """One epoch of Adam over disjoint mini-batches drawn from ``perm``.

    ``w``, ``m`` and ``v`` are updated in place. Returns the mean pre-update
    batch DII, the new global step count and a degenerate-row flag.
    """
    d = x.shape[1]
    loss = 0.0
    kvec = np.empty(batch_size, dtype=np.int64)
    for b in range(n_batches):
        idx = np.sort(perm[b * batch_size:(b + 1) * batch_size])
        xb = x[idx]
        zb = z[idx]
        tb = times[idx]
        ranks, mask = batch_ranks_and_mask(zb, tb, half_width)
        for i in range(batch_size):
            cnt = 0
            for j in range(batch_size):
                if mask[i, j]:
                    cnt += 1
            kvec[i] = min(k, cnt)
        val, g, bad = dii_rows(xb, w, ranks, mask, kvec, prefactor, True)
        if bad >= 0:
            return np.nan, step, bad
        loss += val
        step += 1
        bc1 = 1.0 - beta1 ** step
        bc2 = 1.0 - beta2 ** step
        for a in range(d):
            m[a] = beta1 * m[a] + (1.0 - beta1) * g[a]
            v[a] = beta2 * v[a] + (1.0 - beta2) * g[a] * g[a]
            w[a] -= lr * (m[a] / bc1) / (np.sqrt(v[a] / bc2) + eps)
    return loss / n_batches, step, -1
