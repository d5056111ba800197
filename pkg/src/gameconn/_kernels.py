"""Compiled graph kernels.

Every kernel receives a graph tuple ``g``::

    (mode, fptr, fidx, rptr, ridx, winners, k, strides, loff, kmax)

``mode == 0``: explicit CSR adjacency (forward and reverse).
``mode == 1``: implicit best-response graph read from a winner table.

Neighbours are visited through ``next_nbr(g, v, forward, cursor)`` which
returns ``(neighbour, next_cursor)`` and ``neighbour == -1`` when exhausted.
Order is by coordinate ascending, then action ascending, for both modes.
"""

from __future__ import annotations

import numpy as np
from numba import njit

CSR = 0
IMPLICIT_BEST = 1


@njit(cache=True, inline="always")
def next_nbr(g, v, forward, cur):
    mode = g[0]
    if mode == 0:
        if forward:
            ptr = g[1]
            idx = g[2]
        else:
            ptr = g[3]
            idx = g[4]
        pos = ptr[v] + cur
        if pos < ptr[v + 1]:
            return np.int64(idx[pos]), cur + 1
        return np.int64(-1), cur
    winners = g[5]
    k = g[6]
    strides = g[7]
    loff = g[8]
    kmax = g[9]
    n = k.shape[0]
    if forward:
        i = cur
        while i < n:
            s = strides[i]
            ki = k[i]
            d = (v // s) % ki
            w = np.int64(winners[loff[i] + (v // (s * ki)) * s + v % s])
            if w != d:
                return v + (w - d) * s, i + 1
            i += 1
        return np.int64(-1), np.int64(n)
    i = cur // kmax
    a = cur % kmax
    while i < n:
        s = strides[i]
        ki = k[i]
        d = (v // s) % ki
        w = np.int64(winners[loff[i] + (v // (s * ki)) * s + v % s])
        if w == d:
            while a < ki:
                if a != d:
                    return v + (a - d) * s, i * kmax + a + 1
                a += 1
        i += 1
        a = 0
    return np.int64(-1), n * kmax


@njit(cache=True)
def sink_source_flags(g, nv):
    sink = np.zeros(nv, dtype=np.bool_)
    source = np.zeros(nv, dtype=np.bool_)
    for v in range(nv):
        w, _ = next_nbr(g, v, True, 0)
        sink[v] = w < 0
        w, _ = next_nbr(g, v, False, 0)
        source[v] = w < 0
    return sink, source


@njit(cache=True)
def tarjan(g, nv):
    """Strongly connected components.

    Component ids are assigned in completion order, so every edge between
    distinct components goes from a higher id to a lower id.
    """
    index = np.full(nv, -1, dtype=np.int64)
    low = np.zeros(nv, dtype=np.int64)
    onstack = np.zeros(nv, dtype=np.bool_)
    stack = np.empty(nv, dtype=np.int64)
    call_v = np.empty(nv, dtype=np.int64)
    call_cur = np.empty(nv, dtype=np.int64)
    comp = np.full(nv, -1, dtype=np.int64)
    counter = 0
    ncomp = 0
    sp = 0
    for root in range(nv):
        if index[root] != -1:
            continue
        index[root] = counter
        low[root] = counter
        counter += 1
        stack[sp] = root
        sp += 1
        onstack[root] = True
        call_v[0] = root
        call_cur[0] = 0
        csp = 1
        while csp > 0:
            v = call_v[csp - 1]
            w, nxt = next_nbr(g, v, True, call_cur[csp - 1])
            if w >= 0:
                call_cur[csp - 1] = nxt
                if index[w] == -1:
                    index[w] = counter
                    low[w] = counter
                    counter += 1
                    stack[sp] = w
                    sp += 1
                    onstack[w] = True
                    call_v[csp] = w
                    call_cur[csp] = 0
                    csp += 1
                elif onstack[w] and index[w] < low[v]:
                    low[v] = index[w]
            else:
                csp -= 1
                if low[v] == index[v]:
                    while True:
                        sp -= 1
                        x = stack[sp]
                        onstack[x] = False
                        comp[x] = ncomp
                        if x == v:
                            break
                    ncomp += 1
                if csp > 0:
                    u = call_v[csp - 1]
                    if low[v] < low[u]:
                        low[u] = low[v]
    return comp, ncomp


@njit(cache=True)
def bfs(g, nv, seeds, forward):
    """Vertices reachable from (forward) or reaching (backward) any seed."""
    seen = np.zeros(nv, dtype=np.bool_)
    queue = np.empty(nv, dtype=np.int64)
    head = 0
    tail = 0
    for s in seeds:
        if not seen[s]:
            seen[s] = True
            queue[tail] = s
            tail += 1
    while head < tail:
        v = queue[head]
        head += 1
        cur = np.int64(0)
        while True:
            w, cur = next_nbr(g, v, forward, cur)
            if w < 0:
                break
            if not seen[w]:
                seen[w] = True
                queue[tail] = w
                tail += 1
    return seen


@njit(cache=True)
def component_structure(g, nv, comp, ncomp):
    """Sizes, outgoing-edge flags and DAG adjacency of the condensation."""
    size = np.zeros(ncomp, dtype=np.int64)
    has_out = np.zeros(ncomp, dtype=np.bool_)
    m = 0
    for v in range(nv):
        size[comp[v]] += 1
        cur = np.int64(0)
        while True:
            w, cur = next_nbr(g, v, True, cur)
            if w < 0:
                break
            if comp[w] != comp[v]:
                has_out[comp[v]] = True
                m += 1
    src = np.empty(m, dtype=np.int64)
    dst = np.empty(m, dtype=np.int64)
    e = 0
    for v in range(nv):
        cur = np.int64(0)
        while True:
            w, cur = next_nbr(g, v, True, cur)
            if w < 0:
                break
            if comp[w] != comp[v]:
                src[e] = comp[v]
                dst[e] = comp[w]
                e += 1
    succ_ptr, succ = _group(src, dst, ncomp)
    pred_ptr, pred = _group(dst, src, ncomp)
    return size, has_out, succ_ptr, succ, pred_ptr, pred


@njit(cache=True)
def _group(keys, vals, nkeys):
    ptr = np.zeros(nkeys + 1, dtype=np.int64)
    for x in keys:
        ptr[x + 1] += 1
    for i in range(nkeys):
        ptr[i + 1] += ptr[i]
    fill = ptr[:-1].copy()
    out = np.empty(keys.shape[0], dtype=np.int64)
    for j in range(keys.shape[0]):
        out[fill[keys[j]]] = vals[j]
        fill[keys[j]] += 1
    return ptr, out


@njit(cache=True)
def reach_sums(ptr, adj, ncomp, weights, descendants):
    """For each component, total weight over components it reaches
    (``descendants``) or that reach it, itself included.

    Uses ancestor/descendant bitsets propagated in topological order.
    """
    words = (ncomp + 63) // 64
    bits = np.zeros((ncomp, words), dtype=np.uint64)
    if descendants:
        order = np.arange(ncomp)
    else:
        order = np.arange(ncomp - 1, -1, -1)
    for c in order:
        bits[c, c // 64] |= np.uint64(1) << np.uint64(c % 64)
        for j in range(ptr[c], ptr[c + 1]):
            o = adj[j]
            for t in range(words):
                bits[c, t] |= bits[o, t]
    out = np.zeros(ncomp, dtype=np.int64)
    for c in range(ncomp):
        total = 0
        for t in range(words):
            x = bits[c, t]
            b = 0
            while x != 0:
                if x & np.uint64(1):
                    total += weights[t * 64 + b]
                x >>= np.uint64(1)
                b += 1
        out[c] = total
    return out


@njit(cache=True)
def reach_sums_bfs(ptr, adj, ncomp, weights, descendants):
    """Same contract as reach_sums; one traversal per component, O(C^2) memory-free."""
    out = np.zeros(ncomp, dtype=np.int64)
    seen = np.full(ncomp, -1, dtype=np.int64)
    queue = np.empty(ncomp, dtype=np.int64)
    for c in range(ncomp):
        head = 0
        tail = 1
        queue[0] = c
        seen[c] = c
        total = 0
        while head < tail:
            x = queue[head]
            head += 1
            total += weights[x]
            for j in range(ptr[x], ptr[x + 1]):
                y = adj[j]
                if seen[y] != c:
                    seen[y] = c
                    queue[tail] = y
                    tail += 1
        out[c] = total
    return out


@njit(cache=True)
def classify(g, nv):
    """Returns (num_sinks, acyclic, weakly_acyclic, connected, super_connected)."""
    sink, source = sink_source_flags(g, nv)
    nsinks = 0
    for v in range(nv):
        if sink[v]:
            nsinks += 1
    comp, ncomp = tarjan(g, nv)
    acyclic = ncomp == nv

    size = np.zeros(ncomp, dtype=np.int64)
    has_out = np.zeros(ncomp, dtype=np.bool_)
    for v in range(nv):
        size[comp[v]] += 1
        cur = np.int64(0)
        while True:
            w, cur = next_nbr(g, v, True, cur)
            if w < 0:
                break
            if comp[w] != comp[v]:
                has_out[comp[v]] = True
                break
    weakly = True
    for c in range(ncomp):
        if not has_out[c] and size[c] > 1:
            weakly = False
            break

    nonsinks = nv - nsinks
    connected = weakly and nsinks > 0
    if connected:
        seed = np.empty(1, dtype=np.int64)
        for s in range(nv):
            if sink[s]:
                seed[0] = s
                seen = bfs(g, nv, seed, False)
                cnt = 0
                for v in range(nv):
                    if seen[v] and not sink[v]:
                        cnt += 1
                if cnt < nonsinks:
                    connected = False
                    break

    return nsinks, acyclic, weakly, connected, super_connected_from(g, nv, sink, source, comp)


@njit(cache=True)
def super_connected_from(g, nv, sink, source, comp):
    """Every non-sink reaches every non-source, and a sink exists.

    Non-source non-sinks must all share one component C*.  Then it suffices
    that every source non-sink reaches C* and C* reaches every non-source
    sink.  Without such vertices, every non-source is a sink and each is
    checked by one backward traversal.
    """
    nsinks = 0
    for v in range(nv):
        if sink[v]:
            nsinks += 1
    if nsinks == 0:
        return False
    star = -1
    rep = -1
    for v in range(nv):
        if not sink[v] and not source[v]:
            if star == -1:
                star = comp[v]
                rep = v
            elif comp[v] != star:
                return False
    seed = np.empty(1, dtype=np.int64)
    if star >= 0:
        seed[0] = rep
        back = bfs(g, nv, seed, False)
        for v in range(nv):
            if source[v] and not sink[v] and not back[v]:
                return False
        fwd = bfs(g, nv, seed, True)
        for v in range(nv):
            if sink[v] and not source[v] and not fwd[v]:
                return False
        return True
    for s in range(nv):
        if sink[s] and not source[s]:
            seed[0] = s
            back = bfs(g, nv, seed, False)
            for v in range(nv):
                if not sink[v] and not back[v]:
                    return False
    return True


@njit(cache=True)
def weakly_acyclic_by_bfs(g, nv):
    """Union of vertices reaching a sink covers everything."""
    sink, _ = sink_source_flags(g, nv)
    seeds = np.flatnonzero(sink)
    if seeds.shape[0] == 0:
        return False
    return bool(np.all(bfs(g, nv, seeds, False)))


# --- best-response graph construction -------------------------------------------


@njit(cache=True)
def best_response_csr(winners, k, strides, loff, nv):
    """Forward and reverse CSR, neighbours ordered by coordinate then action."""
    n = k.shape[0]
    fptr = np.zeros(nv + 1, dtype=np.int64)
    rptr = np.zeros(nv + 1, dtype=np.int64)
    for v in range(nv):
        for i in range(n):
            s = strides[i]
            d = (v // s) % k[i]
            w = np.int64(winners[_line(v, i, k, strides, loff)])
            if w != d:
                fptr[v + 1] += 1
            else:
                rptr[v + 1] += k[i] - 1
    for v in range(nv):
        fptr[v + 1] += fptr[v]
        rptr[v + 1] += rptr[v]
    fidx = np.empty(fptr[nv], dtype=np.int64)
    ridx = np.empty(rptr[nv], dtype=np.int64)
    for v in range(nv):
        e = fptr[v]
        r = rptr[v]
        for i in range(n):
            s = strides[i]
            d = (v // s) % k[i]
            w = np.int64(winners[_line(v, i, k, strides, loff)])
            base = v - d * s
            if w != d:
                fidx[e] = base + w * s
                e += 1
            else:
                for a in range(k[i]):
                    if a != d:
                        ridx[r] = base + a * s
                        r += 1
    return fptr, fidx, rptr, ridx


@njit(cache=True)
def better_response_csr(rankings, k, strides, loff, roff, nv):
    """Edge a -> b within a line iff b is ranked strictly above a."""
    n = k.shape[0]
    fdeg = np.zeros(nv + 1, dtype=np.int64)
    rdeg = np.zeros(nv + 1, dtype=np.int64)
    for v in range(nv):
        for i in range(n):
            s = strides[i]
            ki = k[i]
            d = (v // s) % ki
            base = roff[i] + ((v // (s * ki)) * s + v % s) * ki
            pos = 0
            while rankings[base + pos] != d:
                pos += 1
            fdeg[v + 1] += pos
            rdeg[v + 1] += ki - 1 - pos
    for v in range(nv):
        fdeg[v + 1] += fdeg[v]
        rdeg[v + 1] += rdeg[v]
    m = fdeg[nv]
    fidx = np.empty(m, dtype=np.int64)
    ridx = np.empty(m, dtype=np.int64)
    rank_of = np.empty(np.max(k), dtype=np.int64)
    for v in range(nv):
        fe = fdeg[v]
        re = rdeg[v]
        for i in range(n):
            s = strides[i]
            ki = k[i]
            d = (v // s) % ki
            base = roff[i] + ((v // (s * ki)) * s + v % s) * ki
            for p in range(ki):
                rank_of[rankings[base + p]] = p
            for a in range(ki):
                if a == d:
                    continue
                if rank_of[a] < rank_of[d]:
                    fidx[fe] = v + (a - d) * s
                    fe += 1
                else:
                    ridx[re] = v + (a - d) * s
                    re += 1
    return fdeg, fidx, rdeg, ridx


# --- winner-table helpers ---------------------------------------------------------


@njit(cache=True)
def count_wins(winners, k, strides, loff, nv):
    n = k.shape[0]
    wins = np.zeros(nv, dtype=np.int64)
    for i in range(n):
        s = strides[i]
        ki = k[i]
        nlines = nv // ki
        for c in range(nlines):
            base = (c // s) * s * ki + c % s
            wins[base + np.int64(winners[loff[i] + c]) * s] += 1
    return wins


@njit(cache=True)
def count_sinks(winners, k, strides, loff, nv):
    wins = count_wins(winners, k, strides, loff, nv)
    n = k.shape[0]
    total = 0
    for v in range(nv):
        if wins[v] == n:
            total += 1
    return total


# --- dynamics -----------------------------------------------------------------------

BEST_INERTIA = 0
BETTER_INERTIA = 1
ONE_AT_A_TIME = 2


@njit(cache=True, inline="always")
def _line(v, i, k, strides, loff):
    s = strides[i]
    ki = k[i]
    return loff[i] + (v // (s * ki)) * s + v % s


@njit(cache=True)
def is_sink_profile(v, winners, k, strides, loff):
    for i in range(k.shape[0]):
        s = strides[i]
        if np.int64(winners[_line(v, i, k, strides, loff)]) != (v // s) % k[i]:
            return False
    return True


@njit(cache=True)
def step_profile(v, kind, p, winners, rankings, roff, k, strides, loff, rng):
    n = k.shape[0]
    new = v
    if kind == ONE_AT_A_TIME:
        i = rng.integers(0, n)
        s = strides[i]
        d = (v // s) % k[i]
        w = np.int64(winners[_line(v, i, k, strides, loff)])
        return v + (w - d) * s
    for i in range(n):
        u = rng.random()
        if u >= p[i]:
            continue
        s = strides[i]
        ki = k[i]
        d = (v // s) % ki
        L = _line(v, i, k, strides, loff)
        if kind == BEST_INERTIA:
            w = np.int64(winners[L])
        else:
            base = roff[i] + (L - loff[i]) * ki
            pos = 0
            while rankings[base + pos] != d:
                pos += 1
            if pos == 0:
                continue
            w = np.int64(rankings[base + rng.integers(0, pos)])
        new += (w - d) * s
    return new


@njit(cache=True)
def run_dynamics(start, kind, p, winners, rankings, roff, k, strides, loff, cap, rng, record):
    """Iterate until a sink is hit or ``cap`` steps were taken.

    ``record`` receives the first ``len(record)`` profiles of the trajectory.
    Returns (steps, absorbed, final, recorded).
    """
    v = start
    steps = 0
    nrec = record.shape[0]
    recorded = 0
    if nrec > 0:
        record[0] = v
        recorded = 1
    while True:
        if is_sink_profile(v, winners, k, strides, loff):
            return steps, True, v, recorded
        if steps >= cap:
            return steps, False, v, recorded
        v = step_profile(v, kind, p, winners, rankings, roff, k, strides, loff, rng)
        steps += 1
        if recorded < nrec:
            record[recorded] = v
            recorded += 1
