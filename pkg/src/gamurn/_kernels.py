"""Compiled inner loops.

Every kernel draws from a ``numpy.random.Generator`` passed in by the caller,
so results depend only on the generator's seed.  Group indices are 0-based
here; the public modules convert to the 1-based labels used everywhere else.
"""
import math

import numpy as np
from numba import njit

NEG_INF = -np.inf

MODE_TREE = 0
MODE_GUMBEL = 1
MODE_LINEAR = 2

STATUS_OK = 0
STATUS_PRECISION = 1


@njit(cache=True)
def logaddexp(a, b):
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


@njit(cache=True)
def lse_tree_set(tree, cap, i, v):
    pos = cap + i
    tree[pos] = v
    pos >>= 1
    while pos >= 1:
        tree[pos] = logaddexp(tree[2 * pos], tree[2 * pos + 1])
        pos >>= 1


@njit(cache=True)
def lse_tree_sample(rng, tree, cap):
    # one fresh uniform per level keeps the law exact even for p(left) ~ 1 - 1e-300
    pos = 1
    while pos < cap:
        left = tree[2 * pos]
        if left == NEG_INF:
            pos = 2 * pos + 1
            continue
        if tree[2 * pos + 1] == NEG_INF:
            pos = 2 * pos
            continue
        if rng.random() < math.exp(left - tree[pos]):
            pos = 2 * pos
        else:
            pos = 2 * pos + 1
    return pos - cap


@njit(cache=True)
def group_offset(cubic, j):
    if cubic:
        g = float(j + 1)
        return g * g * g
    return 0.0


@njit(cache=True)
def _pick(rng, mode, logw, w, total, tree, cap, L):
    if mode == MODE_TREE:
        return lse_tree_sample(rng, tree, cap)
    if mode == MODE_GUMBEL:
        best = 0
        best_v = NEG_INF
        for j in range(L):
            v = logw[j] - math.log(-math.log(rng.random()))
            if v > best_v:
                best_v = v
                best = j
        return best
    target = rng.random() * total[0]
    acc = 0.0
    for j in range(L):
        acc += w[j]
        if target < acc:
            return j
    return L - 1


@njit(cache=True)
def _set_weight(mode, j, lw, logw, w, total, tree, cap):
    logw[j] = lw
    if mode == MODE_TREE:
        lse_tree_set(tree, cap, j, lw)
    elif mode == MODE_LINEAR:
        nw = math.exp(lw)
        total[0] += nw - w[j]
        w[j] = nw


@njit(cache=True)
def gam_advance(rng, mode, sizes, logw, w, total, tree, cap, L, n, n_target,
                s_arr, log_f, cubic, labels, parents, record_labels, record_parents):
    """Advance a GAM from ``n`` members to ``n_target`` members; returns ``(L, n)``."""
    while n < n_target:
        if rng.random() < s_arr[n]:
            if record_parents:
                parents[L] = _pick(rng, mode, logw, w, total, tree, cap, L) + 1
            sizes[L] = 1
            _set_weight(mode, L, log_f[1] + group_offset(cubic, L), logw, w, total, tree, cap)
            k = L
            L += 1
        else:
            k = _pick(rng, mode, logw, w, total, tree, cap, L)
            sizes[k] += 1
            _set_weight(mode, k, log_f[sizes[k]] + group_offset(cubic, k), logw, w, total, tree, cap)
        if record_labels:
            labels[n] = k + 1
        n += 1
        if mode == MODE_LINEAR and (n & 4095) == 0:
            acc = 0.0
            for j in range(L):
                acc += w[j]
            total[0] = acc
    return L, n


# --------------------------------------------------------------------------
# exponential embedding
# --------------------------------------------------------------------------

@njit(cache=True)
def min_tree_set(tree, cap, i, v):
    pos = cap + i
    tree[pos] = v
    pos >>= 1
    while pos >= 1:
        a = tree[2 * pos]
        b = tree[2 * pos + 1]
        tree[pos] = a if a <= b else b
        pos >>= 1


@njit(cache=True)
def min_tree_argmin(tree, cap):
    pos = 1
    while pos < cap:
        if tree[2 * pos] <= tree[2 * pos + 1]:
            pos = 2 * pos
        else:
            pos = 2 * pos + 1
    return pos - cap


@njit(cache=True)
def rubin_run(rng, p, log_f, cubic, n_points, pos, lab, bern, firer,
              last, cand, arrivals, size, parent, level, mintree, cap):
    """Generate the first ``n_points`` points of the embedded point process.

    Returns ``(L, status)``.  ``cand[m]`` is group m's pending candidate point,
    ``arrivals[m]`` counts exponentials drawn so far (pending one included).
    """
    pos[0] = 0.0
    lab[0] = 1
    bern[0] = 1
    firer[0] = 0
    last[0] = 0.0
    size[0] = 1
    level[0] = 1
    parent[0] = 0
    cand[0] = rng.standard_exponential() * math.exp(-(log_f[1] + group_offset(cubic, 0)))
    arrivals[0] = 1
    if cand[0] <= 0.0:
        return 1, STATUS_PRECISION
    min_tree_set(mintree, cap, 0, cand[0])
    L = 1
    for i in range(1, n_points):
        u = min_tree_argmin(mintree, cap)
        x = cand[u]
        pos[i] = x
        firer[i] = u + 1
        if rng.random() < p:
            m = L
            L += 1
            lab[i] = m + 1
            bern[i] = 1
            parent[m] = u + 1
            last[m] = x
            size[m] = 1
            level[m] = 1
            arrivals[m] = 1
            cand[m] = x + rng.standard_exponential() * math.exp(-(log_f[1] + group_offset(cubic, m)))
            if not cand[m] > x:
                return L, STATUS_PRECISION
            min_tree_set(mintree, cap, m, cand[m])
        else:
            lab[i] = u + 1
            bern[i] = 0
            size[u] += 1
        last[u] = x
        level[u] = size[u]
        arrivals[u] += 1
        nxt = x + rng.standard_exponential() * math.exp(-(log_f[size[u]] + group_offset(cubic, u)))
        if not nxt > x:
            return L, STATUS_PRECISION
        cand[u] = nxt
        min_tree_set(mintree, cap, u, nxt)
    return L, STATUS_OK


@njit(cache=True)
def clock_extend(rng, p, log_f, offset, level, partial, n_terms):
    """Continue one group's clock past its pending point by ``n_terms`` exponentials.

    The Bernoulli of the pending point is drawn first.  Returns
    ``(partial, level, terms_done)``; stops early when ``log_f`` runs out.
    """
    done = 0
    nmax = log_f.shape[0] - 1
    while done < n_terms:
        if rng.random() >= p:
            level += 1
        if level > nmax:
            if rng.random() < p:
                level -= 1
            break
        partial += rng.standard_exponential() * math.exp(-(log_f[level] + offset))
        done += 1
    return partial, level, done


@njit(cache=True)
def clock_path(rng, p, log_f, offset, n, pos_out, bern_out, level_out):
    """First ``n`` increments of an isolated group clock started at 0.

    ``level_out[i]`` is the thinned count used for increment ``i + 1`` and
    ``bern_out[i]`` the Bernoulli attached to the resulting point.
    """
    lev = 1
    x = 0.0
    for i in range(n):
        x += rng.standard_exponential() * math.exp(-(log_f[lev] + offset))
        pos_out[i] = x
        level_out[i] = lev
        if rng.random() < p:
            bern_out[i] = 1
        else:
            bern_out[i] = 0
            lev += 1


@njit(cache=True)
def clock_suffix_sums(rng, p, inv_f, resid, n_arr, out):
    """Suffix sums ``out[k] = sum_{s>k} W_s / f(N(s))`` of a fresh clock, ``k = 0..n_arr``.

    Increments past ``n_arr`` are replaced by their conditional mean
    ``resid[l]`` given the level ``l = N(n_arr + 1)``; ``inv_f[l] = 1/f(l)``.
    """
    lev = 1
    top = inv_f.shape[0] - 1
    for s in range(n_arr):
        out[s] = rng.standard_exponential() * inv_f[min(lev, top)]
        if rng.random() >= p:
            lev += 1
    acc = resid[min(lev, resid.shape[0] - 1)]
    out[n_arr] = acc
    for s in range(n_arr - 1, -1, -1):
        acc += out[s]
        out[s] = acc


@njit(cache=True)
def _below(rng, rate_inv, z_resid, bound):
    """Is a fresh level-represented clock sum below ``bound``?  Stops early once it is not."""
    acc = 0.0
    for i in range(1, rate_inv.shape[0]):
        acc += rng.standard_exponential() * rate_inv[i]
        if acc >= bound:
            return False
    return acc + z_resid < bound


@njit(cache=True)
def eta_samples(rng, p, inv_f, resid, rate_inv, z_resid, n_arr, n_samples, out):
    """Offspring counts ``sum_k 1{Z_k < Y_k}`` with a fresh clock sum ``Z_k`` per ``k``.

    ``Y_k`` are suffix sums of one clock truncated after ``n_arr`` arrivals;
    ``Z`` is a sum of independent ``Exp(1) * rate_inv[i]`` blocks plus the
    mean ``z_resid`` of the omitted ones.
    """
    ys = np.empty(n_arr + 1)
    for j in range(n_samples):
        clock_suffix_sums(rng, p, inv_f, resid, n_arr, ys)
        c = 0
        for k in range(1, n_arr + 1):
            if _below(rng, rate_inv, z_resid, ys[k]):
                c += 1
        out[j] = c


@njit(cache=True)
def rejection_e(rng, p, inv_f, resid, inv_f1, k_star, n_arr, max_proposals, n_accept, out):
    """Draw ``Exp(1) / f(1)`` variates accepted when below ``Y_{k*}(clock 1) - Y_1(clock 2)``.

    Returns ``(accepted, proposals)``; stops at ``n_accept`` acceptances or
    ``max_proposals`` proposals, whichever comes first.
    """
    y1 = np.empty(n_arr + 1)
    y2 = np.empty(n_arr + 1)
    acc = 0
    prop = 0
    while acc < n_accept and prop < max_proposals:
        prop += 1
        e = rng.standard_exponential() * inv_f1
        clock_suffix_sums(rng, p, inv_f, resid, n_arr, y1)
        clock_suffix_sums(rng, p, inv_f, resid, n_arr, y2)
        if e <= y1[k_star] - y2[1]:
            out[acc] = e
            acc += 1
    return acc, prop


# --------------------------------------------------------------------------
# urns
# --------------------------------------------------------------------------

@njit(cache=True)
def urn_run(rng, tab_w, tab_r, log_domain, white, red, n_draws, checkpoints, out_white, out_red):
    """Draw ``n_draws`` balls; white is picked w.p. ``W(white)/(W(white)+R(red))``.

    ``checkpoints`` are draw counts (ascending); the composition after that
    many draws is written to ``out_white``/``out_red``.
    """
    c = 0
    nc = checkpoints.shape[0]
    while c < nc and checkpoints[c] == 0:
        out_white[c] = white
        out_red[c] = red
        c += 1
    for d in range(1, n_draws + 1):
        if log_domain:
            pw = 1.0 / (1.0 + math.exp(tab_r[red] - tab_w[white]))
        else:
            a = tab_w[white]
            pw = a / (a + tab_r[red])
        if rng.random() < pw:
            white += 1
        else:
            red += 1
        while c < nc and checkpoints[c] == d:
            out_white[c] = white
            out_red[c] = red
            c += 1
    return white, red
