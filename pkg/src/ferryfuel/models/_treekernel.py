"""Compiled exact-greedy tree growth shared by every tree family.

One kernel covers CART and second-order boosting. Each sample carries a
gradient ``g``, a hessian ``h`` and an integer multiplicity ``c``; the score
of a split is

    G_L^2/(H_L+lam) + G_R^2/(H_R+lam) - G^2/(H+lam)

and a leaf predicts ``-G/(H+lam)``. With ``g = -w*y``, ``h = w`` and
``lam = 0`` the score is exactly the weighted SSE reduction and the leaf value
is the weighted mean, which is plain CART.

Growth is breadth first over a presorted column order, so one pass per
feature per level evaluates every candidate split of every open node.
"""
import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _pick_features(m, k, out_row):
    # partial Fisher-Yates over positions 0..m-1
    pool = np.arange(m)
    for i in range(k):
        j = i + np.random.randint(0, m - i)
        tmp = pool[i]
        pool[i] = pool[j]
        pool[j] = tmp
        out_row[pool[i]] = True


@njit(cache=True, nogil=True)
def grow(Xt, order_in, g, h, c, allowed, max_depth, min_samples_split,
         min_samples_leaf, min_child_weight, reg_lambda, gamma, half,
         max_features, seed, rel_tol):
    d, n = Xt.shape
    np.random.seed(seed)
    nf = allowed.shape[0]

    # per-sample (g, h, c) packed so the scan touches one cache line
    ghc = np.empty((n, 3))
    node_of = np.full(n, -1, np.int32)
    n_active = 0
    G = 0.0
    H = 0.0
    C = 0.0
    Q = 0.0
    for s in range(n):
        ghc[s, 0] = g[s]
        ghc[s, 1] = h[s]
        ghc[s, 2] = c[s]
        if c[s] > 0:
            node_of[s] = 0
            n_active += 1
            G += g[s]
            H += h[s]
            C += c[s]
            if h[s] > 0:
                Q += g[s] * g[s] / h[s]

    cap = 2 * max(n_active, 1) + 1
    feat = np.full(cap, -1, np.int32)
    thr = np.zeros(cap)
    left = np.full(cap, -1, np.int32)
    right = np.full(cap, -1, np.int32)
    value = np.zeros(cap)
    count = np.zeros(cap)
    hess = np.zeros(cap)
    gain = np.zeros(cap)
    depth = np.zeros(cap, np.int32)
    sumG = np.zeros(cap)
    sumQ = np.zeros(cap)
    distinct = np.zeros(cap, np.int64)
    importance = np.zeros(d)

    sumG[0] = G
    hess[0] = H
    count[0] = C
    sumQ[0] = Q
    distinct[0] = n_active
    value[0] = -G / (H + reg_lambda) if H + reg_lambda > 0 else 0.0
    n_nodes = 1
    if n_active == 0:
        return (feat[:1], thr[:1], left[:1], right[:1], value[:1], count[:1],
                hess[:1], gain[:1], importance)

    # sorted sample ids and their values, restricted to allowed features and
    # active samples; compacted further as nodes close
    order = np.empty((nf, n_active), np.int32)
    xs = np.empty((nf, n_active))
    for a in range(nf):
        f = allowed[a]
        q = 0
        for i in range(n):
            s = order_in[f, i]
            if node_of[s] >= 0:
                order[a, q] = s
                xs[a, q] = Xt[f, s]
                q += 1
    n_order = n_active

    slot_map = np.full(cap, -1, np.int32)
    level = np.zeros(1, np.int32)
    subsample_features = max_features < nf

    while level.shape[0] > 0:
        m = level.shape[0]
        open_nodes = np.empty(m, np.int32)
        k = 0
        n_open = 0
        for j in range(m):
            nd = level[j]
            Hn = hess[nd]
            spread = sumQ[nd] - (sumG[nd] * sumG[nd] / Hn if Hn > 0 else 0.0)
            if (depth[nd] < max_depth and count[nd] >= min_samples_split
                    and count[nd] >= 2 * min_samples_leaf
                    and Hn >= 2 * min_child_weight
                    and spread > rel_tol * sumQ[nd]):
                slot_map[nd] = k
                open_nodes[k] = nd
                k += 1
                n_open += distinct[nd]
        if k == 0:
            break

        if n_open < (3 * n_order) // 4:
            for a in range(nf):
                q = 0
                for i in range(n_order):
                    s = order[a, i]
                    nd = node_of[s]
                    if nd >= 0 and slot_map[nd] >= 0:
                        order[a, q] = s
                        xs[a, q] = xs[a, i]
                        q += 1
            n_order = n_open

        # fmask indexed by position in ``allowed``
        fmask = np.zeros((k, nf), np.bool_)
        if subsample_features:
            for sl in range(k):
                _pick_features(nf, max_features, fmask[sl])

        best = np.full(k, -np.inf)
        best_f = np.full(k, -1, np.int32)
        best_t = np.zeros(k)
        GL = np.zeros(k)
        HL = np.zeros(k)
        CL = np.zeros(k)
        lastx = np.zeros(k)
        seen = np.zeros(k, np.bool_)

        for a in range(nf):
            f = allowed[a]
            GL[:] = 0.0
            HL[:] = 0.0
            CL[:] = 0.0
            seen[:] = False
            row = order[a]
            xrow = xs[a]
            for i in range(n_order):
                s = row[i]
                nd = node_of[s]
                if nd < 0:
                    continue
                sl = slot_map[nd]
                if sl < 0:
                    continue
                if subsample_features and not fmask[sl, a]:
                    continue
                x = xrow[i]
                if seen[sl] and x > lastx[sl]:
                    cl = CL[sl]
                    cr = count[nd] - cl
                    hl = HL[sl]
                    hr = hess[nd] - hl
                    if (cl >= min_samples_leaf and cr >= min_samples_leaf
                            and hl >= min_child_weight and hr >= min_child_weight):
                        gl = GL[sl]
                        gr = sumG[nd] - gl
                        sc = (gl * gl / (hl + reg_lambda) + gr * gr / (hr + reg_lambda)
                              - sumG[nd] * sumG[nd] / (hess[nd] + reg_lambda))
                        # scores within tolerance tie; the earlier (feature, threshold) stays
                        if sc > best[sl] + rel_tol * sumQ[nd]:
                            best[sl] = sc
                            best_f[sl] = f
                            t = 0.5 * (lastx[sl] + x)
                            if t >= x:
                                t = lastx[sl]
                            best_t[sl] = t
                GL[sl] += ghc[s, 0]
                HL[sl] += ghc[s, 1]
                CL[sl] += ghc[s, 2]
                lastx[sl] = x
                seen[sl] = True

        # commit splits
        is_split = np.zeros(k, np.bool_)
        n_children = 0
        for sl in range(k):
            nd = open_nodes[sl]
            if best_f[sl] < 0:
                continue
            gn = half * best[sl] - gamma
            if gn > rel_tol * sumQ[nd]:
                is_split[sl] = True
                feat[nd] = best_f[sl]
                thr[nd] = best_t[sl]
                gain[nd] = gn
                importance[best_f[sl]] += gn
                left[nd] = n_nodes
                right[nd] = n_nodes + 1
                for ch in range(n_nodes, n_nodes + 2):
                    depth[ch] = depth[nd] + 1
                n_nodes += 2
                n_children += 2

        # route samples of split nodes, retire the rest
        for i in range(n_order):
            s = order[0, i]
            nd = node_of[s]
            if nd < 0:
                continue
            sl = slot_map[nd]
            if sl < 0 or not is_split[sl]:
                node_of[s] = -1
                continue
            if Xt[feat[nd], s] <= thr[nd]:
                ch = left[nd]
            else:
                ch = right[nd]
            node_of[s] = ch
            gs = ghc[s, 0]
            hs = ghc[s, 1]
            sumG[ch] += gs
            hess[ch] += hs
            count[ch] += ghc[s, 2]
            distinct[ch] += 1
            if hs > 0:
                sumQ[ch] += gs * gs / hs

        new_level = np.empty(n_children, np.int32)
        q = 0
        for sl in range(k):
            nd = open_nodes[sl]
            slot_map[nd] = -1
            if is_split[sl]:
                new_level[q] = left[nd]
                new_level[q + 1] = right[nd]
                q += 2
        for j in range(n_children):
            ch = new_level[j]
            denom = hess[ch] + reg_lambda
            value[ch] = -sumG[ch] / denom if denom > 0 else 0.0
        level = new_level

    return (feat[:n_nodes], thr[:n_nodes], left[:n_nodes], right[:n_nodes],
            value[:n_nodes], count[:n_nodes], hess[:n_nodes], gain[:n_nodes],
            importance)


@njit(cache=True, nogil=True)
def apply(X, feat, thr, left, right):
    """Leaf index reached by every row of ``X``."""
    n = X.shape[0]
    out = np.empty(n, np.int32)
    for i in range(n):
        nd = 0
        while left[nd] >= 0:
            if X[i, feat[nd]] <= thr[nd]:
                nd = left[nd]
            else:
                nd = right[nd]
        out[i] = nd
    return out


@njit(cache=True, nogil=True)
def predict(X, feat, thr, left, right, value):
    n = X.shape[0]
    out = np.empty(n)
    for i in range(n):
        nd = 0
        while left[nd] >= 0:
            if X[i, feat[nd]] <= thr[nd]:
                nd = left[nd]
            else:
                nd = right[nd]
        out[i] = value[nd]
    return out
