"""Compiled inner loops for path simulation.

All kernels work on a contiguous block of paths ``[path0, path0 + n_block)``
and draw from per-path counter streams, so a block's output is a pure
function of (seed, path ids, inputs).
"""

import math

import numba as nb
import numpy as np

from .gaussian import iso_profile_nb
from .rng import normal_pair, uniform_pair

# monitor slots recorded per checkpoint (running over [0, t])
MON_GRAD_EXCESS = 0  # max_s  |sigma grad f|^2 - N(1-N)
MON_MAX_PARTIAL = 1  # max_s max_i |d_i f|
MON_LEVEL1 = 2  # max_s  (|sigma grad f| - I(N)) I(N) / sqrt(kappa_s), where positive
MON_KAPPA = 3  # max_s  max_i (d_i f)^2
MON_MIN_ISO = 4  # min_s  I(N_s)
N_MON = 5


@nb.njit(nogil=True, cache=True)
def multilinear_value_grad(table, n, x, levels, adj, grad):
    """Value and gradient of the multilinear extension of a corner table.

    The table is contracted one coordinate at a time (top bit first) using
    lo + p (hi - lo) with p = (1 + x_i)/2, which keeps constant tables exact;
    the gradient comes from a reverse sweep.  O(2^n) work.
    """
    size = 1 << n
    for j in range(size):
        levels[j] = table[j]
    off = 0
    width = size
    for lvl in range(n):
        c = n - 1 - lvl
        half = width >> 1
        p = 0.5 * (1.0 + x[c])
        nxt = off + width
        for j in range(half):
            lo = levels[off + j]
            levels[nxt + j] = lo + p * (levels[off + half + j] - lo)
        off = nxt
        width = half
    value = levels[off]
    # reverse sweep: adj holds the adjoint of the level being expanded
    adj[0] = 1.0
    width = 1
    off_child = off
    for lvl in range(n - 1, -1, -1):
        c = n - 1 - lvl
        half = width
        width = half << 1
        off_parent = off_child - width
        p = 0.5 * (1.0 + x[c])
        q = 1.0 - p
        g = 0.0
        for j in range(half):
            g += adj[j] * (levels[off_parent + half + j] - levels[off_parent + j])
        grad[c] = 0.5 * g
        if lvl > 0:
            for j in range(half - 1, -1, -1):
                a = adj[j]
                adj[j] = q * a
                adj[half + j] = p * a
        off_child = off_parent
    return value


@nb.njit(nogil=True, cache=True)
def _advance(x, h, tol, shrink, path, tag, k0, k1, state):
    """Advance one coordinate by time h with boundary step control.

    state[0] = next draw counter, state[1] = 1 if a spare normal is stored,
    state[2] = spare value.  Returns the new coordinate.
    """
    rem = h
    while rem > 0.0:
        ax = abs(x)
        gap = 1.0 - ax
        if gap <= tol:
            return 1.0 if x > 0 else -1.0
        v = (1.0 - x) * (1.0 + x)
        hh = rem
        if v < 0.01:
            hmax = (shrink * gap) ** 2 / v
            if hmax < hh:
                hh = hmax
        if state[1] > 0.5:
            z = state[2]
            state[1] = 0.0
        else:
            z, z2 = normal_pair(np.int64(state[0]), path, tag, k0, k1)
            state[0] += 1.0
            state[1] = 1.0
            state[2] = z2
        x = x + math.sqrt(v * hh) * z
        if x >= 1.0 - tol:
            x = 1.0
        elif x <= -1.0 + tol:
            x = -1.0
        if hh >= rem:
            rem = 0.0
        else:
            rem -= hh
    return x


@nb.njit(nogil=True, cache=True)
def rbm_block(path0, n_block, n, x0, steps, ck_index, table, has_f, tol, shrink,
              tag, k0, k1, out_x, out_n, out_qv, out_mon):
    """Simulate ``n_block`` renormalized Brownian paths in dimension n.

    steps: time increments of the grid; ck_index: sorted grid indices at which
    to record (index 0 is time 0).  When ``has_f`` the multilinear extension
    of ``table`` is tracked: N, its quadratic variation and the monitors.
    """
    n_ck = ck_index.shape[0]
    n_steps = steps.shape[0]
    size = 1 << n
    levels = np.empty(2 * size)
    adj = np.empty(size)
    grad = np.empty(n)
    x = np.empty(n)
    state = np.empty((n, 3))
    for b in range(n_block):
        path = path0 + b
        for i in range(n):
            x[i] = x0[i]
            # each coordinate is its own stream: path index spread over coordinates
            state[i, 0] = 0.0
            state[i, 1] = 0.0
            state[i, 2] = 0.0
        qv = 0.0
        m_grad = -np.inf
        m_part = 0.0
        m_lvl1 = 0.0
        m_kappa = 0.0
        m_iso = np.inf
        ck = 0
        for k in range(n_steps + 1):
            val = 0.0
            sgrad2 = 0.0
            if has_f:
                val = multilinear_value_grad(table, n, x, levels, adj, grad)
                kap = 0.0
                for i in range(n):
                    gi = grad[i]
                    sgrad2 += (1.0 - x[i]) * (1.0 + x[i]) * gi * gi
                    if gi * gi > kap:
                        kap = gi * gi
                ex = sgrad2 - val * (1.0 - val)
                if ex > m_grad:
                    m_grad = ex
                if math.sqrt(kap) > m_part:
                    m_part = math.sqrt(kap)
                if kap > m_kappa:
                    m_kappa = kap
                iso = iso_profile_nb(min(max(val, 0.0), 1.0))
                if iso < m_iso:
                    m_iso = iso
                sg = math.sqrt(sgrad2)
                if iso > 0.0 and kap > 0.0 and sg > iso:
                    e1 = (sg - iso) * iso / math.sqrt(kap)
                    if e1 > m_lvl1:
                        m_lvl1 = e1
            while ck < n_ck and ck_index[ck] == k:
                for i in range(n):
                    out_x[b, ck, i] = x[i]
                out_n[b, ck] = val
                out_qv[b, ck] = qv
                out_mon[b, ck, 0] = m_grad
                out_mon[b, ck, 1] = m_part
                out_mon[b, ck, 2] = m_lvl1
                out_mon[b, ck, 3] = m_kappa
                out_mon[b, ck, 4] = m_iso
                ck += 1
            if k == n_steps or ck >= n_ck:
                break
            h = steps[k]
            if has_f:
                qv += sgrad2 * h
            for i in range(n):
                x[i] = _advance(x[i], h, tol, shrink, path * n + i, tag, k0, k1, state[i])


@nb.njit(nogil=True, cache=True)
def model_block(path0, n_block, m0, steps, ck_index, tol, tag, k0, k1, out_m, out_qv):
    """Euler-Maruyama for dM = I(M) dW on [0,1], absorbed at the endpoints."""
    n_ck = ck_index.shape[0]
    n_steps = steps.shape[0]
    for b in range(n_block):
        path = path0 + b
        m = m0
        qv = 0.0
        draw = 0
        have = False
        spare = 0.0
        ck = 0
        for k in range(n_steps + 1):
            while ck < n_ck and ck_index[ck] == k:
                out_m[b, ck] = m
                out_qv[b, ck] = qv
                ck += 1
            if k == n_steps or ck >= n_ck:
                break
            if m <= 0.0 or m >= 1.0:
                continue
            h = steps[k]
            iso = iso_profile_nb(m)
            if have:
                z = spare
                have = False
            else:
                z, spare = normal_pair(draw, path, tag, k0, k1)
                draw += 1
                have = True
            qv += iso * iso * h
            m = m + iso * math.sqrt(h) * z
            if m <= tol:
                m = 0.0
            elif m >= 1.0 - tol:
                m = 1.0


@nb.njit(nogil=True, cache=True)
def _corner_weights(x, n, w, d):
    """w[j] = P(corner j | x); d[i, j] = dw[j]/dx_i."""
    size = 1 << n
    for j in range(size):
        p = 1.0
        for i in range(n):
            p *= 0.5 * (1.0 + x[i]) if (j >> i) & 1 else 0.5 * (1.0 - x[i])
        w[j] = p
        for i in range(n):
            q = 0.5 if (j >> i) & 1 else -0.5
            for k in range(n):
                if k != i:
                    q *= 0.5 * (1.0 + x[k]) if (j >> k) & 1 else 0.5 * (1.0 - x[k])
            d[i, j] = q


@nb.njit(nogil=True, cache=True)
def gradient_excess_all_tables(states, n, out):
    """out[c] = max over states of sum_i (1-x_i^2)(d_i g)^2 - g(1-g) for table code c.

    Table code c has value bit j of c at corner j.  Per state, the value and
    partials of every table are assembled from subset-sum lookups over
    8-corner chunks, so the cost per (state, table) is O(n * 2^n / 8).
    """
    size = 1 << n
    chunk = 8 if size >= 8 else size
    n_chunks = size // chunk
    n_masks = 1 << chunk
    n_tables = 1 << size
    n_q = n + 1
    lut = np.zeros((n_q, n_chunks, n_masks))
    w = np.empty(size)
    d = np.empty((n, size))
    vals = np.empty(n_q)
    var = np.empty(n)
    for c in range(n_tables):
        out[c] = -np.inf
    for s in range(states.shape[0]):
        x = states[s]
        _corner_weights(x, n, w, d)
        for i in range(n):
            var[i] = (1.0 - x[i]) * (1.0 + x[i])
        for ch in range(n_chunks):
            for mask in range(1, n_masks):
                low = mask & (-mask)
                b = 0
                while (low >> b) != 1:
                    b += 1
                j = ch * chunk + b
                prev = mask ^ low
                lut[0, ch, mask] = lut[0, ch, prev] + w[j]
                for i in range(n):
                    lut[i + 1, ch, mask] = lut[i + 1, ch, prev] + d[i, j]
        # tables split as (upper chunks, first chunk); the upper part is shared
        for upper in range(n_tables // n_masks):
            for q in range(n_q):
                vals[q] = 0.0
            for ch in range(1, n_chunks):
                mask = (upper >> ((ch - 1) * chunk)) & (n_masks - 1)
                for q in range(n_q):
                    vals[q] += lut[q, ch, mask]
            base = upper * n_masks
            for lo in range(n_masks):
                g = vals[0] + lut[0, 0, lo]
                e = -g * (1.0 - g)
                for i in range(n):
                    di = vals[i + 1] + lut[i + 1, 0, lo]
                    e += var[i] * di * di
                if e > out[base + lo]:
                    out[base + lo] = e


@nb.njit(nogil=True, cache=True)
def parseval_gap_all_tables(n, n_points, k0, k1, tag, out_min):
    """Minimum biased Parseval gap of every 0/1 table over its own random points.

    Points for table c are uniform in (-1,1)^n from stream (c, tag).
    """
    size = 1 << n
    n_tables = 1 << size
    table = np.empty(size)
    levels = np.empty(2 * size)
    adj = np.empty(size)
    grad = np.empty(n)
    x = np.empty(n)
    for c in range(n_tables):
        for j in range(size):
            table[j] = float((c >> j) & 1)
        best = np.inf
        draw = 0
        for _ in range(n_points):
            i = 0
            while i < n:
                u1, u2 = uniform_pair(draw, c, tag, k0, k1)
                draw += 1
                for u in (u1, u2):
                    v = 2.0 * u - 1.0
                    if i < n and -1.0 < v < 1.0:
                        x[i] = v
                        i += 1
            g = multilinear_value_grad(table, n, x, levels, adj, grad)
            gap = g - g * g
            for k in range(n):
                gap -= (1.0 - x[k] * x[k]) * grad[k] * grad[k]
            if gap < best:
                best = gap
        out_min[c] = best
