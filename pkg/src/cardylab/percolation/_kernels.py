"""Compiled event evaluation over many replicas.

Every kernel takes the site table of a discrete domain (axial coordinates and
the neighbour table, -1 for a missing or cut neighbour) plus boolean site
masks, and never allocates per replica.  ``nogil`` lets a thread pool run
independent replica blocks concurrently.
"""

from __future__ import annotations

import numba as nb
import numpy as np

from ..rng import replica_key, site_is_blue

BOUNDARY = 0  # blue cluster from src reaches tgt
INTERIOR = 1  # union of blue src-and-tgt clusters cuts probe off from third
CIRCUIT = 2  # sites of the colour inside ring separate src from tgt
RADIAL = 3  # a path whose ring sites have the colour joins src to tgt


@nb.njit(cache=True, nogil=True)
def _flood_reaches(nbr, seeds_mask, passable, target, seen, stack, stamp):
    """Flood from passable seeds through passable sites; True when a target site is reached."""
    n = nbr.shape[0]
    top = 0
    for i in range(n):
        if seeds_mask[i] and passable[i]:
            if target[i]:
                return True
            seen[i] = stamp
            stack[top] = i
            top += 1
    while top > 0:
        top -= 1
        i = stack[top]
        for k in range(6):
            j = nbr[i, k]
            if j >= 0 and passable[j] and seen[j] != stamp:
                if target[j]:
                    return True
                seen[j] = stamp
                stack[top] = j
                top += 1
    return False


@nb.njit(cache=True, nogil=True)
def boundary_event(blue, nbr, src, tgt, seen, stack, stamp):
    return _flood_reaches(nbr, src, blue, tgt, seen, stack, stamp)


@nb.njit(cache=True, nogil=True)
def interior_event(blue, nbr, src, tgt, third, probe, seen, stack, removed, members, stamp):
    """Blue crossing between src and tgt that separates ``probe`` from ``third``.

    A separating path cannot run through the probe's own hex, so the probe
    is treated as not blue.  The union of every blue cluster touching both
    src and tgt is removed; the event holds iff the probe cannot reach a
    third-arc site without entering it.
    """
    own = blue[probe]
    blue[probe] = False
    res = _interior_union(blue, nbr, src, tgt, third, probe, seen, stack, removed, members, stamp)
    blue[probe] = own
    return res


@nb.njit(cache=True, nogil=True)
def _interior_union(blue, nbr, src, tgt, third, probe, seen, stack, removed, members, stamp):
    n = nbr.shape[0]
    for i in range(n):
        removed[i] = False
    # label clusters grown from src sites
    for s in range(n):
        if not (src[s] and blue[s]) or seen[s] == stamp:
            continue
        seen[s] = stamp
        stack[0] = s
        top = 1
        cnt = 0
        hit = False
        while top > 0:
            top -= 1
            i = stack[top]
            members[cnt] = i
            cnt += 1
            if tgt[i]:
                hit = True
            for k in range(6):
                j = nbr[i, k]
                if j >= 0 and blue[j] and seen[j] != stamp:
                    seen[j] = stamp
                    stack[top] = j
                    top += 1
        if hit:
            for t in range(cnt):
                removed[members[t]] = True
    stamp2 = stamp + 1
    if third[probe]:
        return False
    seen[probe] = stamp2
    stack[0] = probe
    top = 1
    while top > 0:
        top -= 1
        i = stack[top]
        for k in range(6):
            j = nbr[i, k]
            if j >= 0 and not removed[j] and seen[j] != stamp2:
                if third[j]:
                    return False
                seen[j] = stamp2
                stack[top] = j
                top += 1
    return True


@nb.njit(cache=True, nogil=True)
def interior_event_direct(blue, nbr, src, tgt, third, probe, seen, stack, removed, members, stamp):
    """Same event tested cluster by cluster: does one blue src-tgt cluster alone separate?"""
    own = blue[probe]
    blue[probe] = False
    res = _interior_single(blue, nbr, src, tgt, third, probe, seen, stack, removed, members, stamp)
    blue[probe] = own
    return res


@nb.njit(cache=True, nogil=True)
def _interior_single(blue, nbr, src, tgt, third, probe, seen, stack, removed, members, stamp):
    n = nbr.shape[0]
    st = stamp
    _reset(removed)  # the union route leaves its removed set behind
    for s in range(n):
        if not (src[s] and blue[s]):
            continue
        # collect the cluster of s unless already handled (marked in `removed` as visited)
        if removed[s]:
            continue
        cnt = 0
        removed[s] = True
        stack[0] = s
        top = 1
        hit = False
        while top > 0:
            top -= 1
            i = stack[top]
            members[cnt] = i
            cnt += 1
            if tgt[i]:
                hit = True
            for k in range(6):
                j = nbr[i, k]
                if j >= 0 and blue[j] and not removed[j]:
                    removed[j] = True
                    stack[top] = j
                    top += 1
        if not hit:
            continue
        st += 1
        # mark cluster with stamp st, then flood from probe avoiding it
        for t in range(cnt):
            seen[members[t]] = st
        st += 1
        if third[probe]:
            continue
        ok = True
        seen[probe] = st
        stack[0] = probe
        top = 1
        while top > 0 and ok:
            top -= 1
            i = stack[top]
            for k in range(6):
                j = nbr[i, k]
                if j >= 0 and seen[j] != st and seen[j] != st - 1:
                    if third[j]:
                        ok = False
                        break
                    seen[j] = st
                    stack[top] = j
                    top += 1
        if ok:
            _reset(removed)
            return True
    _reset(removed)
    return False


@nb.njit(cache=True, nogil=True)
def _reset(a):
    for i in range(a.shape[0]):
        a[i] = False


@nb.njit(cache=True, nogil=True)
def ring_event(blue, nbr, src, ring, tgt, circuit, seen, stack, passable, stamp):
    n = nbr.shape[0]
    if circuit:
        for i in range(n):
            passable[i] = not (ring[i] and blue[i])
        return not _flood_reaches(nbr, src, passable, tgt, seen, stack, stamp)
    for i in range(n):
        passable[i] = (not ring[i]) or blue[i]
    return _flood_reaches(nbr, src, passable, tgt, seen, stack, stamp)


@nb.njit(cache=True, nogil=True)
def run_block(seed, r0, count, flip, uv, nbr, mode, src, tgt, third, probe, out):
    """Evaluate ``count`` replicas starting at ``r0``; results go to ``out[0:count]``."""
    n = nbr.shape[0]
    blue = np.empty(n, dtype=np.bool_)
    seen = np.zeros(n, dtype=np.int64)
    stack = np.empty(max(n, 1), dtype=np.int64)
    removed = np.zeros(n, dtype=np.bool_)
    members = np.empty(max(n, 1), dtype=np.int64)
    stamp = 0
    for t in range(count):
        key = replica_key(seed, r0 + t)
        for i in range(n):
            blue[i] = site_is_blue(key, uv[i, 0], uv[i, 1]) != flip
        stamp += 4
        if mode == BOUNDARY:
            out[t] = boundary_event(blue, nbr, src, tgt, seen, stack, stamp)
        elif mode == INTERIOR:
            out[t] = interior_event(blue, nbr, src, tgt, third, probe, seen, stack, removed, members, stamp)
        elif mode == CIRCUIT:
            out[t] = ring_event(blue, nbr, src, third, tgt, True, seen, stack, removed, stamp)
        else:
            out[t] = ring_event(blue, nbr, src, third, tgt, False, seen, stack, removed, stamp)


@nb.njit(cache=True, nogil=True)
def enumerate_all(free, nbr, src, tgt, third, probe, base_blue, out_fast, out_direct):
    """Evaluate the interior event and its direct oracle on all 2^k colourings of ``free`` sites."""
    n = nbr.shape[0]
    k = free.shape[0]
    blue = base_blue.copy()
    seen = np.zeros(n, dtype=np.int64)
    stack = np.empty(max(n, 1), dtype=np.int64)
    removed = np.zeros(n, dtype=np.bool_)
    members = np.empty(max(n, 1), dtype=np.int64)
    stamp = 0
    for m in range(1 << k):
        for t in range(k):
            blue[free[t]] = (m >> t) & 1 == 1
        stamp += 4
        out_fast[m] = interior_event(blue, nbr, src, tgt, third, probe, seen, stack, removed, members, stamp)
        stamp += 4
        out_direct[m] = interior_event_direct(blue, nbr, src, tgt, third, probe, seen, stack, removed, members, stamp)
        stamp += 2 * n + 4
