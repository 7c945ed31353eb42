"""Compiled inner loops shared by the exact and windowed matchers.

Grid conventions: ``x`` holds the breakpoints of the first SRV function (index
``i``), ``y`` those of the second (index ``j``); ``ip[r, s]`` is the inner
product of interval values ``r`` and ``s``.
"""

import numba as nb
import numpy as np

EXTENT_EPS = 1e-15
NODE_TOL = 1e-12


@nb.njit(cache=True)
def edge_weight(x, y, ip, i, j, k, l, clamp, prune):
    """Weight of the straight edge (i, j) -> (k, l) with k > i, l > j.

    Returns -1.0 when ``prune`` is set and the open segment passes through
    another grid node.
    """
    x0 = x[i]
    y0 = y[j]
    dx = x[k] - x0
    dy = y[l] - y0
    r = i
    s = j
    cx = x0
    cy = y0
    w = 0.0
    while r < k and s < l:
        tx = (x[r + 1] - x0) / dx
        ty = (y[s + 1] - y0) / dy
        if abs(tx - ty) <= NODE_TOL:
            nx = x[r + 1]
            ny = y[s + 1]
            step = 3
        elif tx < ty:
            nx = x[r + 1]
            ny = y0 + tx * dy
            step = 1
        else:
            nx = x0 + ty * dx
            ny = y[s + 1]
            step = 2
        ex = nx - cx
        ey = ny - cy
        if ex > EXTENT_EPS and ey > EXTENT_EPS:
            v = ip[r, s]
            if clamp and v < 0.0:
                v = 0.0
            w += v * np.sqrt(ex * ey)
        cx = nx
        cy = ny
        if step == 1:
            r += 1
        elif step == 2:
            s += 1
        else:
            r += 1
            s += 1
            if prune and (r < k or s < l):
                return -1.0
    return w


@nb.njit(cache=True)
def longest_path(x, y, ip, window, hv_anywhere, prune):
    """Max-weight monotone node path from (0, 0) to (m, n).

    Diagonal edges jump (i, j) -> (k, l) with k > i, l > j (at most ``window``
    in each index when ``window > 0``).  Unit horizontal/vertical steps carry
    weight 0 and are allowed everywhere (``hv_anywhere``) or only along the
    grid boundary.  Ties keep the lexicographically smallest predecessor.
    """
    m = x.size - 1
    n = y.size - 1
    best = np.full((m + 1, n + 1), -np.inf)
    pred = np.full((m + 1, n + 1, 2), -1, dtype=np.int64)
    best[0, 0] = 0.0
    for k in range(m + 1):
        for l in range(n + 1):
            if k == 0 and l == 0:
                continue
            b = -np.inf
            bi = -1
            bj = -1
            ilo = 0 if window <= 0 else max(0, k - window)
            jlo = 0 if window <= 0 else max(0, l - window)
            for i in range(ilo, k):
                for j in range(jlo, l):
                    bij = best[i, j]
                    if bij == -np.inf:
                        continue
                    w = edge_weight(x, y, ip, i, j, k, l, True, prune)
                    if w < 0.0:
                        continue
                    v = bij + w
                    if v > b:
                        b = v
                        bi = i
                        bj = j
                if i == k - 1 and (hv_anywhere or l == 0 or l == n):
                    v = best[k - 1, l]
                    if v > b:
                        b = v
                        bi = k - 1
                        bj = l
            if l > 0 and (hv_anywhere or k == 0 or k == m):
                v = best[k, l - 1]
                if v > b:
                    b = v
                    bi = k
                    bj = l - 1
            best[k, l] = b
            pred[k, l, 0] = bi
            pred[k, l, 1] = bj
    return best, pred


@nb.njit(cache=True)
def path_cells(x, y, nodes):
    """Cells crossed by a node path with their horizontal/vertical extents.

    Unit horizontal (vertical) steps are reported as cells with zero vertical
    (horizontal) extent.  Returns (r, s, ex, ey) arrays in path order.
    """
    m = x.size - 1
    n = y.size - 1
    cap = 0
    for t in range(nodes.shape[0] - 1):
        cap += (nodes[t + 1, 0] - nodes[t, 0]) + (nodes[t + 1, 1] - nodes[t, 1]) + 1
    rr = np.empty(cap, dtype=np.int64)
    ss = np.empty(cap, dtype=np.int64)
    exs = np.empty(cap)
    eys = np.empty(cap)
    c = 0
    for t in range(nodes.shape[0] - 1):
        i = nodes[t, 0]
        j = nodes[t, 1]
        k = nodes[t + 1, 0]
        l = nodes[t + 1, 1]
        if k > i and l == j:
            for r in range(i, k):
                rr[c] = r
                ss[c] = min(j, n - 1)
                exs[c] = x[r + 1] - x[r]
                eys[c] = 0.0
                c += 1
            continue
        if l > j and k == i:
            for s in range(j, l):
                rr[c] = min(i, m - 1)
                ss[c] = s
                exs[c] = 0.0
                eys[c] = y[s + 1] - y[s]
                c += 1
            continue
        x0 = x[i]
        y0 = y[j]
        dx = x[k] - x0
        dy = y[l] - y0
        r = i
        s = j
        cx = x0
        cy = y0
        while r < k and s < l:
            tx = (x[r + 1] - x0) / dx
            ty = (y[s + 1] - y0) / dy
            if abs(tx - ty) <= NODE_TOL:
                nx = x[r + 1]
                ny = y[s + 1]
                step = 3
            elif tx < ty:
                nx = x[r + 1]
                ny = y0 + tx * dy
                step = 1
            else:
                nx = x0 + ty * dx
                ny = y[s + 1]
                step = 2
            ex = nx - cx
            ey = ny - cy
            if ex > EXTENT_EPS and ey > EXTENT_EPS:
                rr[c] = r
                ss[c] = s
                exs[c] = ex
                eys[c] = ey
                c += 1
            cx = nx
            cy = ny
            if step == 1:
                r += 1
            elif step == 2:
                s += 1
            else:
                r += 1
                s += 1
    return rr[:c], ss[:c], exs[:c], eys[:c]


@nb.njit(cache=True)
def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


@nb.njit(cache=True)
def uniform_templates(m, n):
    """Cell offsets and sqrt(dx*dy) weights of every jump on a uniform m x n grid.

    Entry ``(a, b)`` describes the edge (0, 0) -> (a, b); on a uniform grid an
    edge (i, j) -> (i + a, j + b) crosses the translated cells with the same
    extents.  Jumps whose segment passes through an interior node get an
    empty range (they are pruned).
    """
    x = np.arange(m + 1) / m
    y = np.arange(n + 1) / n
    total = 0
    for a in range(1, m + 1):
        for b in range(1, n + 1):
            if _gcd(a, b) == 1:
                total += a + b - 1
    dr = np.empty(total, dtype=np.int64)
    ds = np.empty(total, dtype=np.int64)
    w = np.empty(total)
    start = np.zeros((m + 1, n + 1), dtype=np.int64)
    stop = np.zeros((m + 1, n + 1), dtype=np.int64)
    c = 0
    for a in range(1, m + 1):
        for b in range(1, n + 1):
            start[a, b] = c
            if _gcd(a, b) != 1:
                stop[a, b] = c
                continue
            x0 = 0.0
            y0 = 0.0
            dx = x[a]
            dy = y[b]
            r = 0
            s = 0
            cx = 0.0
            cy = 0.0
            while r < a and s < b:
                tx = (x[r + 1] - x0) / dx
                ty = (y[s + 1] - y0) / dy
                # coprime jumps only meet a node at the far end
                if r + 1 == a and s + 1 == b:
                    nx = x[a]
                    ny = y[b]
                    step = 3
                elif tx < ty:
                    nx = x[r + 1]
                    ny = y0 + tx * dy
                    step = 1
                else:
                    nx = x0 + ty * dx
                    ny = y[s + 1]
                    step = 2
                ex = nx - cx
                ey = ny - cy
                if ex > EXTENT_EPS and ey > EXTENT_EPS:
                    dr[c] = r
                    ds[c] = s
                    w[c] = np.sqrt(ex * ey)
                    c += 1
                cx = nx
                cy = ny
                if step == 1:
                    r += 1
                elif step == 2:
                    s += 1
                else:
                    r += 1
                    s += 1
            stop[a, b] = c
    return dr[:c], ds[:c], w[:c], start, stop


@nb.njit(cache=True)
def _better(v, i, j, b, bi, bj):
    # larger energy wins; exact ties go to the lexicographically smaller node
    if v > b:
        return True
    return v == b and (i < bi or (i == bi and j < bj))


@nb.njit(cache=True)
def longest_path_uniform(ip, dr, ds, w, start, stop, cum1, cum2, window, hv_anywhere):
    """``longest_path`` specialised to uniform grids via precomputed templates.

    ``cum1``/``cum2`` are prefix sums of the squared SRV norms times the
    interval widths.  By Cauchy-Schwarz an edge spanning intervals i..k and
    j..l weighs at most sqrt((cum1[k]-cum1[i]) * (cum2[l]-cum2[j])), which
    lets most candidates be skipped without walking their cells.
    """
    m, n = ip.shape
    pos = np.maximum(ip, 0.0).ravel()
    flat = dr * n + ds
    best = np.full((m + 1, n + 1), -np.inf)
    pred = np.full((m + 1, n + 1, 2), -1, dtype=np.int64)
    best[0, 0] = 0.0
    slack = 1.0 + 1e-9
    for k in range(m + 1):
        for l in range(n + 1):
            if k == 0 and l == 0:
                continue
            b = -np.inf
            bi = m + 1
            bj = n + 1
            if k > 0 and (hv_anywhere or l == 0 or l == n):
                v = best[k - 1, l]
                if _better(v, k - 1, l, b, bi, bj):
                    b = v
                    bi = k - 1
                    bj = l
            if l > 0 and (hv_anywhere or k == 0 or k == m):
                v = best[k, l - 1]
                if _better(v, k, l - 1, b, bi, bj):
                    b = v
                    bi = k
                    bj = l - 1
            ilo = 0 if window <= 0 else max(0, k - window)
            jlo = 0 if window <= 0 else max(0, l - window)
            if k > 0 and l > 0:
                # the unit diagonal usually sets a strong bound early
                v = best[k - 1, l - 1] + pos[(k - 1) * n + l - 1] * w[start[1, 1]]
                if _better(v, k - 1, l - 1, b, bi, bj):
                    b = v
                    bi = k - 1
                    bj = l - 1
            for i in range(ilo, k):
                e1 = cum1[k] - cum1[i]
                for j in range(jlo, l):
                    bij = best[i, j]
                    if bij == -np.inf:
                        continue
                    if bij + np.sqrt(e1 * (cum2[l] - cum2[j])) * slack < b:
                        continue
                    st = start[k - i, l - j]
                    en = stop[k - i, l - j]
                    if en == st:
                        continue
                    base = i * n + j
                    acc = 0.0
                    for t in range(st, en):
                        acc += pos[base + flat[t]] * w[t]
                    v = bij + acc
                    if _better(v, i, j, b, bi, bj):
                        b = v
                        bi = i
                        bj = j
            if bi > m:
                bi = -1
                bj = -1
            best[k, l] = b
            pred[k, l, 0] = bi
            pred[k, l, 1] = bj
    return best, pred
