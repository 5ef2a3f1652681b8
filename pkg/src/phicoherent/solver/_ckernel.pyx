# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled propagation and search; a line-for-line port of ``_pykernel``.

Domains are ``uint64`` bitmasks, so ``n`` must be at most 62 and scaled
weight sums must fit in ``int64`` (``CompiledProblem.kernel_safe``).
"""

from libc.stdint cimport int64_t, uint64_t
from libc.stdlib cimport free, malloc
from libc.string cimport memcpy

import numpy as np

cdef extern from "time.h" nogil:
    ctypedef long time_t
    struct timespec:
        time_t tv_sec
        long tv_nsec
    int clock_gettime(int clk_id, timespec *tp)
    int CLOCK_MONOTONIC

cdef enum:
    UNSAT = 0
    SAT = 1
    TIMEOUT = 2
    STOPPED = 3
    CHECK_EVERY = 256
    NEG_K = 5
    AND_K = 3
    OR_K = 4
    C_NODE = 0
    C_PHI = 1


cdef inline int lo(uint64_t x) nogil:
    return __builtin_ctzll(x)


cdef inline int hi(uint64_t x) nogil:
    return 63 - __builtin_clzll(x)


cdef extern from *:
    int __builtin_ctzll(unsigned long long) nogil
    int __builtin_clzll(unsigned long long) nogil


cdef inline double now() nogil:
    cdef timespec ts
    clock_gettime(CLOCK_MONOTONIC, &ts)
    return ts.tv_sec + ts.tv_nsec * 1e-9


cdef struct Prob:
    int n
    uint64_t full
    uint64_t nbit
    int num_nodes
    int num_cons
    int num_vars
    const int64_t *kind
    const int64_t *ca
    const int64_t *cb
    const int64_t *con_kind
    const int64_t *con_ref
    const int64_t *wptr
    const int64_t *widx
    const int64_t *phi_subj
    const int64_t *phi_tptr
    const int64_t *phi_tnode
    const int64_t *phi_tw
    const int64_t *phi_lo
    const int64_t *phi_hi
    const int64_t *exo_ptr
    const int64_t *exo_mem
    const int64_t *order


cdef struct Work:
    int *queue
    int qlen
    char *inq
    int *changed
    int nchanged


cdef inline uint64_t ge(const Prob *p, int v) nogil:
    if v <= 0:
        return p.full
    if v > 63:
        return 0
    return p.full & ~((<uint64_t>1 << v) - 1)


cdef inline uint64_t le(int v) nogil:
    if v < 0:
        return 0
    return (<uint64_t>1 << (v + 1)) - 1


cdef inline uint64_t below(int v) nogil:
    # values strictly below v
    return (<uint64_t>1 << v) - 1


cdef inline uint64_t reverse(const Prob *p, uint64_t m) nogil:
    cdef uint64_t out = 0
    cdef int b
    while m:
        b = lo(m)
        out |= <uint64_t>1 << (p.n - b)
        m &= m - 1
    return out


cdef inline void mark(Work *w, int node) nogil:
    w.changed[w.nchanged] = node
    w.nchanged += 1


cdef bint node_prop(const Prob *p, int k, uint64_t *dom, Work *w) nogil:
    cdef int kind = p.kind[k]
    cdef int a = p.ca[k]
    cdef int b
    cdef uint64_t K = dom[k], A = dom[a], B, K2, A2, B2, img, sup, BR, AR
    cdef int minA, maxA, minB, maxB, minA2, maxA2
    if kind == NEG_K:
        K2 = K & reverse(p, A)
        if not K2:
            return False
        A2 = A & reverse(p, K2)
        if not A2:
            return False
        if K2 != K:
            dom[k] = K2
            mark(w, k)
        if A2 != A:
            dom[a] = A2
            mark(w, a)
        return True

    b = p.cb[k]
    B = dom[b]
    minA = lo(A); maxA = hi(A); minB = lo(B); maxB = hi(B)
    if kind == AND_K:
        img = (A & le(maxB)) | (B & le(maxA))
    elif kind == OR_K:
        img = (A & ge(p, minB)) | (B & ge(p, minA))
    else:
        img = (B & below(maxA)) | (p.nbit if minA <= maxB else 0)
    K2 = K & img
    if not K2:
        return False
    if K2 != K:
        dom[k] = K2
        mark(w, k)

    BR = B & K2
    if kind == AND_K:
        sup = (K2 & le(maxB)) | (ge(p, lo(BR) + 1) if BR else 0)
    elif kind == OR_K:
        sup = (K2 & ge(p, minB)) | (below(hi(BR)) if BR else 0)
    else:
        sup = (le(maxB) if K2 & p.nbit else 0) | (ge(p, lo(BR) + 1) if BR else 0)
    A2 = A & sup
    if not A2:
        return False
    if A2 != A:
        dom[a] = A2
        mark(w, a)

    B = dom[b]
    minA2 = lo(A2); maxA2 = hi(A2)
    AR = A2 & K2
    if kind == AND_K:
        sup = (K2 & le(maxA2)) | (ge(p, lo(AR) + 1) if AR else 0)
    elif kind == OR_K:
        sup = (K2 & ge(p, minA2)) | (below(hi(AR)) if AR else 0)
    else:
        sup = (ge(p, minA2) if K2 & p.nbit else 0) | (K2 & below(maxA2))
    B2 = B & sup
    if not B2:
        return False
    if B2 != B:
        dom[b] = B2
        mark(w, b)
    return True


cdef bint phi_prop(const Prob *p, int j, uint64_t *dom, Work *w) nogil:
    cdef int n1 = p.n + 1
    cdef int s = p.phi_subj[j]
    cdef int t0 = p.phi_tptr[j], t1 = p.phi_tptr[j + 1], t, v, d, node
    cdef int64_t smin = 0, smax = 0, wt, l, h, wlo, whi, cmin, cmax, rmin, rmax, x
    cdef uint64_t D, S, S2, allowed, m, low, keep
    for t in range(t0, t1):
        D = dom[p.phi_tnode[t]]
        wt = p.phi_tw[t]
        if wt > 0:
            smin += wt * lo(D)
            smax += wt * hi(D)
        else:
            smin += wt * hi(D)
            smax += wt * lo(D)
    cdef int base = j * n1
    S = dom[s]
    allowed = 0
    m = S
    while m:
        low = m & (~m + 1)
        v = lo(m)
        m ^= low
        l = p.phi_lo[base + v]
        h = p.phi_hi[base + v]
        if l < h and l < smax and h >= smin:
            allowed |= low
    S2 = S & allowed
    if not S2:
        return False
    if S2 != S:
        dom[s] = S2
        mark(w, s)
    wlo = p.phi_lo[base + lo(S2)]
    whi = p.phi_hi[base + hi(S2)]
    if smin > wlo and smax <= whi:
        return True
    for t in range(t0, t1):
        node = p.phi_tnode[t]
        wt = p.phi_tw[t]
        D = dom[node]
        if wt > 0:
            cmin = wt * lo(D)
            cmax = wt * hi(D)
        else:
            cmin = wt * hi(D)
            cmax = wt * lo(D)
        rmin = smin - cmin
        rmax = smax - cmax
        keep = 0
        m = D
        while m:
            low = m & (~m + 1)
            d = lo(m)
            m ^= low
            x = wt * d
            if rmin + x <= whi and rmax + x > wlo:
                keep |= low
        if keep != D:
            if not keep:
                return False
            dom[node] = keep
            mark(w, node)
    return True


cdef bint exo_prop(const Prob *p, int g, uint64_t *dom, Work *w) nogil:
    cdef uint64_t nbit = p.nbit, D
    cdef int i, mem, must = 0, ncan = 0, last = -1
    cdef int e0 = p.exo_ptr[g], e1 = p.exo_ptr[g + 1]
    for i in range(e0, e1):
        D = dom[p.exo_mem[i]]
        if D & nbit:
            ncan += 1
            last = p.exo_mem[i]
            if D == nbit:
                must += 1
    if must > 1 or ncan == 0:
        return False
    if must == 1:
        for i in range(e0, e1):
            mem = p.exo_mem[i]
            D = dom[mem]
            if (D & nbit) and D != nbit:
                dom[mem] = D & ~nbit
                mark(w, mem)
    elif ncan == 1:
        dom[last] = nbit
        mark(w, last)
    return True


cdef inline void wake(const Prob *p, Work *w, int node) nogil:
    cdef int i, cj
    for i in range(p.wptr[node], p.wptr[node + 1]):
        cj = p.widx[i]
        if not w.inq[cj]:
            w.inq[cj] = 1
            w.queue[w.qlen] = cj
            w.qlen += 1


cdef bint propagate(const Prob *p, uint64_t *dom, Work *w) nogil:
    cdef int ci, kind, i
    cdef bint ok
    while w.qlen:
        w.qlen -= 1
        ci = w.queue[w.qlen]
        w.inq[ci] = 0
        kind = p.con_kind[ci]
        w.nchanged = 0
        if kind == C_NODE:
            ok = node_prop(p, p.con_ref[ci], dom, w)
        elif kind == C_PHI:
            ok = phi_prop(p, p.con_ref[ci], dom, w)
        else:
            ok = exo_prop(p, p.con_ref[ci], dom, w)
        if not ok:
            for i in range(w.qlen):
                w.inq[w.queue[i]] = 0
            w.qlen = 0
            return False
        for i in range(w.nchanged):
            wake(p, w, w.changed[i])
    return True


cdef int loop(const Prob *p, uint64_t *dom, Work *w, uint64_t *saved, int *tvar, uint64_t *trest,
              double deadline, const unsigned char *stop,
              long long *decisions, long long *conflicts) nogil:
    cdef int nn = p.num_nodes, nv = p.num_vars
    cdef int i, var, ticks = 0, depth = 0
    cdef uint64_t D, val, rest
    cdef size_t row = nn * sizeof(uint64_t)
    cdef bint ok
    if not propagate(p, dom, w):
        return UNSAT
    while True:
        var = -1
        for i in range(nv):
            D = dom[p.order[i]]
            if D & (D - 1):
                var = p.order[i]
                break
        if var < 0:
            return SAT
        D = dom[var]
        val = D & (~D + 1)
        memcpy(saved + depth * nn, dom, row)
        tvar[depth] = var
        trest[depth] = D ^ val
        depth += 1
        dom[var] = val
        decisions[0] += 1
        ticks += 1
        wake(p, w, var)
        ok = propagate(p, dom, w)
        while not ok:
            conflicts[0] += 1
            if ticks >= CHECK_EVERY:
                ticks = 0
                if stop[0]:
                    return STOPPED
                if deadline >= 0 and now() > deadline:
                    return TIMEOUT
            while depth and not trest[depth - 1]:
                depth -= 1
            if not depth:
                return UNSAT
            var = tvar[depth - 1]
            rest = trest[depth - 1]
            val = rest & (~rest + 1)
            rest ^= val
            memcpy(dom, saved + (depth - 1) * nn, row)
            if rest:
                trest[depth - 1] = rest
            else:
                depth -= 1
            dom[var] = val
            decisions[0] += 1
            ticks += 1
            wake(p, w, var)
            ok = propagate(p, dom, w)


cdef int run(const Prob *p, uint64_t *dom, double deadline, const unsigned char *stop,
             long long *decisions, long long *conflicts) nogil:
    cdef int nn = p.num_nodes, nv = p.num_vars, i, status
    cdef Work w
    for i in range(nn):
        if dom[i] == 0:
            return UNSAT
    w.queue = <int *>malloc((p.num_cons + 1) * sizeof(int))
    w.inq = <char *>malloc(p.num_cons + 1)
    # one propagator call marks a node at most twice
    w.changed = <int *>malloc((2 * nn + 4) * sizeof(int))
    cdef uint64_t *saved = <uint64_t *>malloc((nv + 1) * nn * sizeof(uint64_t) + 8)
    cdef int *tvar = <int *>malloc((nv + 1) * sizeof(int))
    cdef uint64_t *trest = <uint64_t *>malloc((nv + 1) * sizeof(uint64_t))
    if w.queue == NULL or w.inq == NULL or w.changed == NULL or saved == NULL or tvar == NULL or trest == NULL:
        status = -1
    else:
        w.qlen = 0
        for i in range(p.num_cons - 1, -1, -1):
            w.queue[w.qlen] = i
            w.qlen += 1
            w.inq[i] = 1
        status = loop(p, dom, &w, saved, tvar, trest, deadline, stop, decisions, conflicts)
    free(w.queue); free(w.inq); free(w.changed); free(saved); free(tvar); free(trest)
    return status


def search(p, dom, double timeout, stop):
    """Same contract as ``_pykernel.search``; ``timeout`` < 0 means none and
    ``stop`` is a writable one-byte buffer polled during search."""
    arrs = p.arrays()
    cdef const int64_t[::1] kind = arrs["kind"], ca = arrs["ca"], cb = arrs["cb"]
    cdef const int64_t[::1] con_kind = arrs["con_kind"], con_ref = arrs["con_ref"]
    cdef const int64_t[::1] wptr = arrs["watch_ptr"], widx = arrs["watch_idx"]
    cdef const int64_t[::1] phi_subj = arrs["phi_subj"], phi_tptr = arrs["phi_tptr"]
    cdef const int64_t[::1] phi_tnode = arrs["phi_tnode"], phi_tw = arrs["phi_tw"]
    cdef const int64_t[::1] phi_lo = arrs["phi_lo"], phi_hi = arrs["phi_hi"]
    cdef const int64_t[::1] exo_ptr = arrs["exo_ptr"], exo_mem = arrs["exo_mem"]
    cdef const int64_t[::1] order = arrs["order"]
    cdef const unsigned char[::1] stopv = stop
    cdef uint64_t[::1] d = np.array(list(dom) + [0], dtype=np.uint64)
    cdef Prob pr
    pr.n = p.n
    pr.full = p.full
    pr.nbit = <uint64_t>1 << p.n
    pr.num_nodes = p.num_nodes
    pr.num_cons = p.num_cons
    pr.num_vars = p.num_vars

    # every array carries a trailing sentinel, so [0] is always addressable
    pr.kind = &kind[0]
    pr.ca = &ca[0]
    pr.cb = &cb[0]
    pr.con_kind = &con_kind[0]
    pr.con_ref = &con_ref[0]
    pr.wptr = &wptr[0]
    pr.widx = &widx[0]
    pr.phi_subj = &phi_subj[0]
    pr.phi_tptr = &phi_tptr[0]
    pr.phi_tnode = &phi_tnode[0]
    pr.phi_tw = &phi_tw[0]
    pr.phi_lo = &phi_lo[0]
    pr.phi_hi = &phi_hi[0]
    pr.exo_ptr = &exo_ptr[0]
    pr.exo_mem = &exo_mem[0]
    pr.order = &order[0]

    cdef long long decisions = 0, conflicts = 0
    cdef double deadline = now() + timeout if timeout >= 0 else -1.0
    cdef int status
    cdef uint64_t *dp = &d[0]
    with nogil:
        status = run(&pr, dp, deadline, &stopv[0], &decisions, &conflicts)
    if status < 0:
        raise MemoryError("search kernel could not allocate its trail")
    stats = {"decisions": decisions, "conflicts": conflicts}
    if status != SAT:
        return status, None, stats
    values = [lo(d[i]) for i in range(p.num_vars)]
    return status, values, stats
