"""Compiled inner loops for tree induction and routing.

All kernels take the design matrix transposed, ``Xt`` of shape
``(n_features, n_rows)``, so that one feature's values are contiguous.
Categorical codes are stored as exact floats.  ``level_counts[f] == 0`` marks
a continuous feature.

Inbag rows are counted with their bootstrap multiplicity ``w``; counts are
held in float64 during split search (exact for any realistic n) so the gain
arithmetic is identical for every caller.
"""

import numpy as np
from numba import njit

# Gains at or below this are treated as zero; rounding noise on an
# uninformative split is ~1e-17.
MIN_GAIN = 1e-12

_ONE = np.uint64(1)


@njit(cache=True, nogil=True)
def _side_term(pos, tot):
    # tot * gini(pos / tot) with gini(p) = 2 p (1 - p)
    if tot <= 0.0:
        return 0.0
    return 2.0 * pos * (tot - pos) / tot


@njit(cache=True, nogil=True)
def split_continuous(values, labels, weights, rows):
    """Best midpoint threshold; returns (found, threshold, gain)."""
    m = rows.shape[0]
    vals = np.empty(m)
    tot = 0.0
    pos = 0.0
    for i in range(m):
        r = rows[i]
        vals[i] = values[r]
        tot += weights[r]
        pos += weights[r] * labels[r]
    if m < 2 or tot <= 0.0:
        return False, 0.0, 0.0
    parent = _side_term(pos, tot)
    order = np.argsort(vals, kind="mergesort")
    best = MIN_GAIN
    found = False
    thr = 0.0
    wl = 0.0
    pl = 0.0
    for i in range(m - 1):
        r = rows[order[i]]
        wl += weights[r]
        pl += weights[r] * labels[r]
        v0 = vals[order[i]]
        v1 = vals[order[i + 1]]
        if v0 < v1:
            wr = tot - wl
            if wl <= 0.0 or wr <= 0.0:
                continue
            gain = (parent - _side_term(pl, wl) - _side_term(pos - pl, wr)) / tot
            if gain > best:
                best = gain
                found = True
                thr = 0.5 * (v0 + v1)
                if thr >= v1:
                    thr = v0
    if not found:
        return False, 0.0, 0.0
    return True, thr, best


@njit(cache=True, nogil=True)
def split_categorical(codes, labels, weights, rows, n_levels):
    """Best binary partition of the observed levels by the ordering shortcut.

    Levels are sorted by positive proportion (ties by code) and the k-1 cut
    points of that order are scanned; for a binary response this attains the
    optimum over all 2^(k-1)-1 partitions.  The returned left mask is the
    smaller of a partition's two sides as an integer, and ties in gain go to
    the smaller mask.

    Returns (found, left_mask, gain, observed_mask).
    """
    cnt = np.zeros(n_levels)
    pc = np.zeros(n_levels)
    m = rows.shape[0]
    for i in range(m):
        r = rows[i]
        c = int(codes[r])
        cnt[c] += weights[r]
        pc[c] += weights[r] * labels[r]
    observed = np.uint64(0)
    k = 0
    for c in range(n_levels):
        if cnt[c] > 0.0:
            observed |= _ONE << np.uint64(c)
            k += 1
    if k < 2:
        return False, np.uint64(0), 0.0, observed
    lv = np.empty(k, dtype=np.int64)
    prop = np.empty(k)
    t = 0
    tot = 0.0
    pos = 0.0
    for c in range(n_levels):
        if cnt[c] > 0.0:
            lv[t] = c
            prop[t] = pc[c] / cnt[c]
            tot += cnt[c]
            pos += pc[c]
            t += 1
    parent = _side_term(pos, tot)
    order = np.argsort(prop, kind="mergesort")
    best = MIN_GAIN
    found = False
    best_mask = np.uint64(0)
    wl = 0.0
    pl = 0.0
    mask = np.uint64(0)
    for j in range(k - 1):
        c = lv[order[j]]
        wl += cnt[c]
        pl += pc[c]
        mask |= _ONE << np.uint64(c)
        gain = (parent - _side_term(pl, wl) - _side_term(pos - pl, tot - wl)) / tot
        comp = observed ^ mask
        cmask = mask if mask < comp else comp
        if gain > best or (found and gain == best and cmask < best_mask):
            best = gain
            found = True
            best_mask = cmask
    if not found:
        return False, np.uint64(0), 0.0, observed
    return True, best_mask, best, observed


@njit(cache=True, nogil=True)
def _goes_left(v, is_cat, thr, lmask, obs):
    if is_cat:
        bit = _ONE << np.uint64(int(v))
        if (obs & bit) == 0:
            return False
        return (lmask & bit) != 0
    return v <= thr


@njit(cache=True, nogil=True)
def grow_kernel(Xt, y, w, level_counts, mtry, min_node_size, max_depth, keys):
    """Grow one CART tree depth-first on the rows with ``w > 0``.

    ``keys[k]`` holds uniform draws for node ``k``; the ``mtry`` features with
    the smallest keys are the candidates at that node.  ``max_depth < 0`` means
    unlimited.
    """
    rows = np.flatnonzero(w > 0)
    m = rows.shape[0]
    cap = max(2 * m - 1, 1)
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    lmask = np.zeros(cap, dtype=np.uint64)
    obs = np.zeros(cap, dtype=np.uint64)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    depth = np.zeros(cap, dtype=np.int64)
    n_in = np.zeros(cap, dtype=np.int64)
    n_in_pos = np.zeros(cap, dtype=np.int64)
    start = np.zeros(cap, dtype=np.int64)
    end = np.zeros(cap, dtype=np.int64)
    wf = w.astype(np.float64)
    yf = y.astype(np.float64)

    stack = np.empty(cap, dtype=np.int64)
    sp = 0
    count = 1
    end[0] = m
    stack[sp] = 0
    sp += 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        s = start[node]
        e = end[node]
        tot = 0
        pos = 0
        for i in range(s, e):
            r = rows[i]
            tot += w[r]
            pos += w[r] * y[r]
        n_in[node] = tot
        n_in_pos[node] = pos
        if pos == 0 or pos == tot or tot < min_node_size:
            continue
        if max_depth >= 0 and depth[node] >= max_depth:
            continue

        node_rows = rows[s:e]
        cand = np.argsort(keys[node], kind="mergesort")
        best_gain = MIN_GAIN
        best_f = -1
        best_thr = 0.0
        best_mask = np.uint64(0)
        best_obs = np.uint64(0)
        for t in range(mtry):
            f = cand[t]
            if level_counts[f] > 0:
                found, msk, gain, ob = split_categorical(Xt[f], yf, wf, node_rows, level_counts[f])
                if found and gain > best_gain:
                    best_gain = gain
                    best_f = f
                    best_thr = 0.0
                    best_mask = msk
                    best_obs = ob
            else:
                found, thr, gain = split_continuous(Xt[f], yf, wf, node_rows)
                if found and gain > best_gain:
                    best_gain = gain
                    best_f = f
                    best_thr = thr
                    best_mask = np.uint64(0)
                    best_obs = np.uint64(0)
        if best_f < 0:
            continue

        is_cat = level_counts[best_f] > 0
        i = s
        j = e - 1
        while i <= j:
            r = rows[i]
            if _goes_left(Xt[best_f, r], is_cat, best_thr, best_mask, best_obs):
                i += 1
            else:
                rows[i] = rows[j]
                rows[j] = r
                j -= 1
        if i == s or i == e:
            continue

        feature[node] = best_f
        threshold[node] = best_thr
        lmask[node] = best_mask
        obs[node] = best_obs
        lc = count
        rc = count + 1
        count += 2
        left[node] = lc
        right[node] = rc
        start[lc] = s
        end[lc] = i
        start[rc] = i
        end[rc] = e
        depth[lc] = depth[node] + 1
        depth[rc] = depth[node] + 1
        stack[sp] = rc
        stack[sp + 1] = lc
        sp += 2

    return (
        feature[:count].copy(),
        threshold[:count].copy(),
        lmask[:count].copy(),
        obs[:count].copy(),
        left[:count].copy(),
        right[:count].copy(),
        depth[:count].copy(),
        n_in[:count].copy(),
        n_in_pos[:count].copy(),
    )


@njit(cache=True, nogil=True)
def route_kernel(feature, threshold, lmask, obs, left, right, level_counts, Xt, y, rows):
    """Send ``rows`` down the tree, counting visits and positives per node.

    A categorical level not observed inbag at a split goes right and is
    counted in the returned ``unseen`` total.
    """
    k = feature.shape[0]
    n_oob = np.zeros(k, dtype=np.int64)
    n_pos = np.zeros(k, dtype=np.int64)
    unseen = 0
    for i in range(rows.shape[0]):
        r = rows[i]
        node = 0
        while True:
            n_oob[node] += 1
            n_pos[node] += y[r]
            f = feature[node]
            if f < 0:
                break
            v = Xt[f, r]
            if level_counts[f] > 0:
                bit = _ONE << np.uint64(int(v))
                if (obs[node] & bit) == 0:
                    unseen += 1
                    node = right[node]
                elif (lmask[node] & bit) != 0:
                    node = left[node]
                else:
                    node = right[node]
            elif v <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
    return n_oob, n_pos, unseen


@njit(cache=True, nogil=True)
def apply_kernel(feature, threshold, lmask, obs, left, right, level_counts, Xt):
    """Leaf index reached by every column of ``Xt``."""
    n = Xt.shape[1]
    out = np.empty(n, dtype=np.int64)
    for r in range(n):
        node = 0
        while feature[node] >= 0:
            f = feature[node]
            if _goes_left(Xt[f, r], level_counts[f] > 0, threshold[node], lmask[node], obs[node]):
                node = left[node]
            else:
                node = right[node]
        out[r] = node
    return out
