"""Pure-Python propagation and search over a :class:`CompiledProblem`.

Works for any ``n`` (domains are Python ints).  The Cython kernel in
``_ckernel.pyx`` mirrors this file step for step; both must return the same
assignment for the same input.
"""

from __future__ import annotations

import time
from functools import lru_cache

from .compile import AND_K, C_EXO, C_NODE, C_PHI, IMPL_K, NEG_K, OR_K

UNSAT, SAT, TIMEOUT, STOPPED = 0, 1, 2, 3
# decisions between deadline/stop checks; propagation here is slow enough
# that a small stride costs nothing
CHECK_EVERY = 16


def _lo(x: int) -> int:
    return (x & -x).bit_length() - 1


def _hi(x: int) -> int:
    return x.bit_length() - 1


@lru_cache(maxsize=None)
def _rev_table(n: int) -> list:
    width = n + 1
    return [int(format(m, f"0{width}b")[::-1], 2) for m in range(1 << width)]


class _Ctx:
    __slots__ = ("p", "n", "full", "nbit", "rev")

    def __init__(self, p):
        self.p = p
        self.n = p.n
        self.full = p.full
        self.nbit = 1 << p.n
        self.rev = _rev_table(p.n) if p.n <= 12 else None

    def reverse(self, m: int) -> int:
        if self.rev is not None:
            return self.rev[m]
        n = self.n
        out = 0
        while m:
            low = m & -m
            out |= 1 << (n - (low.bit_length() - 1))
            m ^= low
        return out

    # masks over 0..n
    def ge(self, v: int) -> int:
        return self.full & ~((1 << v) - 1) if v > 0 else self.full

    def le(self, v: int) -> int:
        return (1 << (v + 1)) - 1 if v >= 0 else 0


def _node(c: _Ctx, k: int, dom: list, changed: list) -> bool:
    p = c.p
    kind = p.kind[k]
    a = p.ca[k]
    K = dom[k]
    A = dom[a]
    if kind == NEG_K:
        K2 = K & c.reverse(A)
        if not K2:
            return False
        A2 = A & c.reverse(K2)
        if not A2:
            return False
        if K2 != K:
            dom[k] = K2
            changed.append(k)
        if A2 != A:
            dom[a] = A2
            changed.append(a)
        return True

    b = p.cb[k]
    B = dom[b]
    minA, maxA, minB, maxB = _lo(A), _hi(A), _lo(B), _hi(B)
    if kind == AND_K:
        img = (A & c.le(maxB)) | (B & c.le(maxA))
    elif kind == OR_K:
        img = (A & c.ge(minB)) | (B & c.ge(minA))
    else:
        img = (B & ((1 << maxA) - 1)) | (c.nbit if minA <= maxB else 0)
    K2 = K & img
    if not K2:
        return False
    if K2 != K:
        dom[k] = K2
        changed.append(k)

    BR = B & K2
    if kind == AND_K:
        sup = (K2 & c.le(maxB)) | (c.ge(_lo(BR) + 1) if BR else 0)
    elif kind == OR_K:
        sup = (K2 & c.ge(minB)) | (((1 << _hi(BR)) - 1) if BR else 0)
    else:
        sup = (c.le(maxB) if K2 & c.nbit else 0) | (c.ge(_lo(BR) + 1) if BR else 0)
    A2 = A & sup
    if not A2:
        return False
    if A2 != A:
        dom[a] = A2
        changed.append(a)

    B = dom[b]
    minA2, maxA2 = _lo(A2), _hi(A2)
    AR = A2 & K2
    if kind == AND_K:
        sup = (K2 & c.le(maxA2)) | (c.ge(_lo(AR) + 1) if AR else 0)
    elif kind == OR_K:
        sup = (K2 & c.ge(minA2)) | (((1 << _hi(AR)) - 1) if AR else 0)
    else:
        sup = (c.ge(minA2) if K2 & c.nbit else 0) | (K2 & ((1 << maxA2) - 1))
    B2 = B & sup
    if not B2:
        return False
    if B2 != B:
        dom[b] = B2
        changed.append(b)
    return True


def _phi(c: _Ctx, j: int, dom: list, changed: list) -> bool:
    p = c.p
    n1 = c.n + 1
    s = p.phi_subj[j]
    t0, t1 = p.phi_tptr[j], p.phi_tptr[j + 1]
    tnode, tw = p.phi_tnode, p.phi_tw
    smin = smax = 0
    for t in range(t0, t1):
        D = dom[tnode[t]]
        w = tw[t]
        if w > 0:
            smin += w * _lo(D)
            smax += w * _hi(D)
        else:
            smin += w * _hi(D)
            smax += w * _lo(D)
    base = j * n1
    lo, hi = p.phi_lo, p.phi_hi
    S = dom[s]
    allowed = 0
    m = S
    while m:
        low = m & -m
        v = low.bit_length() - 1
        m ^= low
        l, h = lo[base + v], hi[base + v]
        if l < h and l < smax and h >= smin:
            allowed |= low
    S2 = S & allowed
    if not S2:
        return False
    if S2 != S:
        dom[s] = S2
        changed.append(s)
    wlo = lo[base + _lo(S2)]
    whi = hi[base + _hi(S2)]
    if smin > wlo and smax <= whi:
        return True
    for t in range(t0, t1):
        node = tnode[t]
        w = tw[t]
        D = dom[node]
        if w > 0:
            cmin, cmax = w * _lo(D), w * _hi(D)
        else:
            cmin, cmax = w * _hi(D), w * _lo(D)
        rmin = smin - cmin
        rmax = smax - cmax
        keep = 0
        m = D
        while m:
            low = m & -m
            d = low.bit_length() - 1
            m ^= low
            x = w * d
            if rmin + x <= whi and rmax + x > wlo:
                keep |= low
        if keep != D:
            if not keep:
                return False
            dom[node] = keep
            changed.append(node)
    return True


def _exo(c: _Ctx, g: int, dom: list, changed: list) -> bool:
    p = c.p
    nbit = c.nbit
    members = p.exo_mem[p.exo_ptr[g]:p.exo_ptr[g + 1]]
    must = 0
    can = []
    for m in members:
        D = dom[m]
        if D & nbit:
            can.append(m)
            if D == nbit:
                must += 1
    if must > 1 or not can:
        return False
    if must == 1:
        for m in can:
            D = dom[m]
            if D != nbit:
                dom[m] = D & ~nbit
                changed.append(m)
    elif len(can) == 1:
        m = can[0]
        dom[m] = nbit
        changed.append(m)
    return True


def propagate(c: _Ctx, dom: list, queue: list, inq: bytearray) -> bool:
    p = c.p
    con_kind, con_ref = p.con_kind, p.con_ref
    wptr, widx = p.watch_ptr, p.watch_idx
    changed: list = []
    while queue:
        ci = queue.pop()
        inq[ci] = 0
        kind = con_kind[ci]
        if kind == C_NODE:
            ok = _node(c, con_ref[ci], dom, changed)
        elif kind == C_PHI:
            ok = _phi(c, con_ref[ci], dom, changed)
        else:
            ok = _exo(c, con_ref[ci], dom, changed)
        if not ok:
            for cj in queue:
                inq[cj] = 0
            queue.clear()
            return False
        for node in changed:
            for w in range(wptr[node], wptr[node + 1]):
                cj = widx[w]
                if not inq[cj]:
                    inq[cj] = 1
                    queue.append(cj)
        changed.clear()
    return True


def _wake(p, node: int, queue: list, inq: bytearray) -> None:
    for w in range(p.watch_ptr[node], p.watch_ptr[node + 1]):
        cj = p.watch_idx[w]
        if not inq[cj]:
            inq[cj] = 1
            queue.append(cj)


def root_propagate(p, dom: list) -> bool:
    """Propagate every constraint once from scratch, in place."""
    c = _Ctx(p)
    if any(d == 0 for d in dom):
        return False
    queue = list(range(p.num_cons - 1, -1, -1))
    inq = bytearray([1]) * p.num_cons
    return propagate(c, dom, queue, inq)


def search(p, dom: list, deadline=None, stop=None):
    """Depth-first search for a full assignment of the concept names.

    Returns ``(status, values, stats)`` where ``values`` lists one numerator
    per name when ``status == SAT``.
    """
    c = _Ctx(p)
    dom = list(dom)
    stats = {"decisions": 0, "conflicts": 0}
    if not root_propagate(p, dom):
        return UNSAT, None, stats
    order = p.order
    nvars = p.num_vars
    queue: list = []
    inq = bytearray(p.num_cons)
    trail: list = []
    ticks = 0
    while True:
        var = -1
        for v in order:
            D = dom[v]
            if D & (D - 1):
                var = v
                break
        if var < 0:
            return SAT, [_lo(dom[v]) for v in range(nvars)], stats
        D = dom[var]
        val = D & -D
        trail.append((list(dom), var, D ^ val))
        dom[var] = val
        stats["decisions"] += 1
        ticks += 1
        _wake(p, var, queue, inq)
        ok = propagate(c, dom, queue, inq)
        while not ok:
            stats["conflicts"] += 1
            if ticks >= CHECK_EVERY:
                ticks = 0
                if stop is not None and stop.is_set():
                    return STOPPED, None, stats
                if deadline is not None and time.monotonic() > deadline:
                    return TIMEOUT, None, stats
            while trail and not trail[-1][2]:
                trail.pop()
            if not trail:
                return UNSAT, None, stats
            saved, var, rest = trail[-1]
            val = rest & -rest
            rest ^= val
            if rest:
                trail[-1] = (saved, var, rest)
                dom[:] = saved
            else:
                trail.pop()
                dom[:] = saved
            dom[var] = val
            stats["decisions"] += 1
            ticks += 1
            _wake(p, var, queue, inq)
            ok = propagate(c, dom, queue, inq)
