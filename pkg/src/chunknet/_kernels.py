"""Compiled inner loops shared by the public modules.

Conventions used throughout:

* a bit vector of ``nbits`` bits is a row of ``ceil(nbits / 64)`` uint64
  words; bit ``j`` is bit ``j % 64`` (LSB first) of word ``j // 64``;
* rows may carry extra trailing words (coded-symbol payload) that are XORed
  along with the coefficient words but never pivoted on;
* random state is a one-element uint64 array advanced by :func:`next_u64`,
  bit-compatible with :class:`chunknet.rng.Stream`.

Draw counts (part of the reproducibility contract):

* :func:`simulate_kernel`: per transmission, one draw for the chunk choice,
  then either ``ceil(alpha / 64)`` draws (source emission) or
  ``ceil(B / 64)`` draws (relay emission with ``B`` buffered packets in the
  chosen chunk). Wasted slots draw nothing beyond the chunk choice.
* :func:`generate_links_kernel`: one draw per appended transmission.
"""

from __future__ import annotations

import numpy as np
from numba import njit

U64 = np.uint64
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_ONE = np.uint64(1)
_ZERO = np.uint64(0)
_ALL = np.uint64(0xFFFFFFFFFFFFFFFF)
_DEBRUIJN = np.uint64(0x03F79D71B4CB0A89)
_DEBRUIJN_TABLE = np.array(
    [0, 1, 48, 2, 57, 49, 28, 3, 61, 58, 50, 42, 38, 29, 17, 4,
     62, 55, 59, 36, 53, 51, 43, 22, 45, 39, 33, 30, 24, 18, 12, 5,
     63, 47, 56, 27, 60, 41, 37, 16, 54, 35, 52, 21, 44, 32, 23, 11,
     46, 26, 40, 15, 34, 20, 31, 10, 25, 14, 19, 9, 13, 8, 7, 6],
    dtype=np.int64,
)


@njit(cache=True, inline="always")
def next_u64(state):
    s = state[0] + _GOLDEN
    state[0] = s
    z = (s ^ (s >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def below(state, bound):
    u = next_u64(state) >> np.uint64(32)
    return np.int64((u * np.uint64(bound)) >> np.uint64(32))


@njit(cache=True, inline="always")
def ctz(x):
    """Index of the lowest set bit of a nonzero uint64."""
    iso = x & (~x + _ONE)
    return _DEBRUIJN_TABLE[np.int64((iso * _DEBRUIJN) >> np.uint64(58))]


@njit(cache=True, inline="always")
def popcount(x):
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return np.int64((x * np.uint64(0x0101010101010101)) >> np.uint64(56))


@njit(cache=True)
def tail_mask(nbits):
    r = nbits % 64
    if r == 0:
        return _ALL
    return (_ONE << np.uint64(r)) - _ONE


# --------------------------------------------------------------------------
# elimination


@njit(cache=True)
def insert_row(v, basis, has, ncoef):
    """Reduce ``v`` against ``basis`` (first-nonzero pivoting) and insert it.

    ``basis[b]`` holds a vector whose lowest set coefficient bit is ``b``.
    ``v`` is modified in place. Returns the new pivot or -1 when ``v`` reduced
    to zero over its coefficient words.
    """
    width = v.shape[0]
    lo = 0
    while True:
        while lo < ncoef and v[lo] == _ZERO:
            lo += 1
        if lo == ncoef:
            return -1
        b = lo * 64 + ctz(v[lo])
        if has[b]:
            for j in range(lo, width):
                v[j] ^= basis[b, j]
        else:
            for j in range(width):
                basis[b, j] = v[j]
            has[b] = True
            return b


@njit(cache=True)
def eliminate(rows, nbits, basis, has):
    """Insert every row of ``rows`` into an (initially empty) basis; return the rank.

    Stops early once ``nbits`` pivots exist.
    """
    ncoef = (nbits + 63) // 64
    width = rows.shape[1]
    v = np.empty(width, dtype=np.uint64)
    rank = 0
    for i in range(rows.shape[0]):
        if rank == nbits:
            break
        for j in range(width):
            v[j] = rows[i, j]
        if insert_row(v, basis, has, ncoef) >= 0:
            rank += 1
    return rank


@njit(cache=True)
def rank_kernel(rows, nbits):
    basis = np.zeros((nbits, rows.shape[1]), dtype=np.uint64)
    has = np.zeros(nbits, dtype=np.bool_)
    return eliminate(rows, nbits, basis, has)


@njit(cache=True)
def back_substitute(basis, has, nbits):
    """Fully reduce a full-rank basis; returns the payload words of each unknown.

    Requires ``has`` to be all true. Payload words are ``basis[:, ncoef:]``.
    """
    ncoef = (nbits + 63) // 64
    width = basis.shape[1]
    out = np.zeros((nbits, width - ncoef), dtype=np.uint64)
    for b in range(nbits - 1, -1, -1):
        acc = basis[b, ncoef:].copy()
        for w in range(b // 64, ncoef):
            word = basis[b, w]
            if w == b // 64:
                word &= ~((_ONE << np.uint64(b % 64)) | ((_ONE << np.uint64(b % 64)) - _ONE))
            while word != _ZERO:
                j = w * 64 + ctz(word)
                word &= word - _ONE
                for p in range(width - ncoef):
                    acc[p] ^= out[j, p]
        for p in range(width - ncoef):
            out[b, p] = acc[p]
    return out


@njit(cache=True)
def reduce_to_rref(basis, has, ncoef):
    """Turn a first-nonzero-pivot basis into reduced echelon form in place."""
    nbits = has.shape[0]
    width = basis.shape[1]
    for b in range(nbits - 1, -1, -1):
        if not has[b]:
            continue
        for w in range(b // 64, ncoef):
            word = basis[b, w]
            if w == b // 64:
                word &= ~((_ONE << np.uint64(b % 64)) | ((_ONE << np.uint64(b % 64)) - _ONE))
            while word != _ZERO:
                j = w * 64 + ctz(word)
                word &= word - _ONE
                if has[j]:
                    for x in range(w, width):
                        basis[b, x] ^= basis[j, x]


# --------------------------------------------------------------------------
# schedules


@njit(cache=True)
def generate_links_kernel(l, target, state, cap):
    """Append uniformly random links until the greedy capacity reaches ``target``.

    Returns the link of each tick (1-based); length -1 array on cap overflow.
    """
    size = max(16, l * target * 2)
    links = np.empty(size, dtype=np.int32)
    avail = np.zeros(l + 1, dtype=np.int64)
    m = 0
    while avail[l] < target:
        if m >= cap:
            return np.full(1, -1, dtype=np.int32)
        if m == size:
            grown = np.empty(size * 2, dtype=np.int32)
            grown[:size] = links
            links = grown
            size *= 2
        i = below(state, l) + 1
        links[m] = i
        m += 1
        if i == 1:
            avail[1] += 1
        elif avail[i - 1] > 0:
            avail[i - 1] -= 1
            avail[i] += 1
    return links[:m].copy()


@njit(cache=True)
def greedy_capacity_kernel(links, times, l):
    """Layer-by-layer greedy chain matching; ``links``/``times`` sorted by time."""
    m = links.shape[0]
    prev = np.empty(m, dtype=np.int64)
    cur = np.empty(m, dtype=np.int64)
    n_prev = 0
    for t in range(m):
        if links[t] == 1:
            prev[n_prev] = times[t]
            n_prev += 1
    for i in range(2, l + 1):
        ptr = 0
        n_cur = 0
        for t in range(m):
            if links[t] != i:
                continue
            if ptr < n_prev and prev[ptr] < times[t]:
                ptr += 1
                cur[n_cur] = times[t]
                n_cur += 1
        prev, cur = cur, prev
        n_prev = n_cur
    return n_prev


# --------------------------------------------------------------------------
# transfer simulation


@njit(cache=True)
def source_emission(out, chunk, stride, k, alpha, ncoef, state, message):
    for j in range(ncoef):
        out[j] = next_u64(state)
    out[ncoef - 1] &= tail_mask(alpha)
    npay = message.shape[1]
    if npay == 0:
        return
    for w in range(ncoef):
        word = out[w]
        while word != _ZERO:
            j = w * 64 + ctz(word)
            word &= word - _ONE
            sym = (chunk * stride + j) % k
            for p in range(npay):
                out[ncoef + p] ^= message[sym, p]


@njit(cache=True)
def simulate_kernel(links, l, k, q, stride, alpha, nonempty_policy, state, message):
    """Run one transfer; returns (vectors, chunk ids), chunk id -1 for wasted slots.

    Row ``t`` of the vectors is what link ``links[t]`` delivered at tick ``t``:
    ``ceil(alpha/64)`` local coefficient words followed by the payload words.
    """
    m = links.shape[0]
    ncoef = (alpha + 63) // 64
    width = ncoef + message.shape[1]
    vec = np.zeros((m, width), dtype=np.uint64)
    chunk = np.full(m, -1, dtype=np.int32)
    nxt = np.full(m, -1, dtype=np.int32)
    head = np.full((l + 1, q), -1, dtype=np.int32)
    tail = np.full((l + 1, q), -1, dtype=np.int32)
    count = np.zeros((l + 1, q), dtype=np.int64)
    nonempty = np.zeros(l + 1, dtype=np.int64)
    for t in range(m):
        i = links[t]
        sender = i - 1
        if sender == 0 or not nonempty_policy:
            w = below(state, q)
        else:
            c = nonempty[sender]
            u = below(state, c if c > 0 else 1)
            if c == 0:
                continue
            w = -1
            for x in range(q):
                if count[sender, x] > 0:
                    if u == 0:
                        w = x
                        break
                    u -= 1
        if sender == 0:
            source_emission(vec[t], w, stride, k, alpha, ncoef, state, message)
        else:
            if count[sender, w] == 0:
                continue
            p = head[sender, w]
            bit = 0
            word = _ZERO
            while p != -1:
                if bit % 64 == 0:
                    word = next_u64(state)
                if (word >> np.uint64(bit % 64)) & _ONE:
                    for x in range(width):
                        vec[t, x] ^= vec[p, x]
                bit += 1
                p = nxt[p]
        chunk[t] = w
        if count[i, w] == 0:
            head[i, w] = t
            nonempty[i] += 1
        else:
            nxt[tail[i, w]] = t
        tail[i, w] = t
        count[i, w] += 1
    return vec, chunk


@njit(cache=True)
def to_global_kernel(vec, chunk, k, stride, alpha):
    """Scatter aperture-local coefficient rows into length-k rows (payload words kept)."""
    ncoef = (alpha + 63) // 64
    kw = (k + 63) // 64
    npay = vec.shape[1] - ncoef
    out = np.zeros((vec.shape[0], kw + npay), dtype=np.uint64)
    for r in range(vec.shape[0]):
        base = chunk[r] * stride
        for w in range(ncoef):
            word = vec[r, w]
            while word != _ZERO:
                j = w * 64 + ctz(word)
                word &= word - _ONE
                g = (base + j) % k
                out[r, g // 64] |= _ONE << np.uint64(g % 64)
        for p in range(npay):
            out[r, kw + p] = vec[r, ncoef + p]
    return out


# --------------------------------------------------------------------------
# chunked decoder


@njit(cache=True)
def chunked_decode_kernel(vec, chunk, k, q, stride, alpha):
    """Iterative per-chunk decoding with cross-chunk substitution.

    Returns (known flags, payload values per symbol, rounds with progress).
    Chunks are visited in index order; a chunk is re-eliminated only when the
    number of known symbols in its support changed since its last visit.
    """
    ncoef = (alpha + 63) // 64
    width = vec.shape[1]
    npay = width - ncoef
    m = vec.shape[0]
    known = np.zeros(k, dtype=np.bool_)
    values = np.zeros((k, npay), dtype=np.uint64)

    order = np.argsort(chunk, kind="mergesort")
    starts = np.zeros(q + 1, dtype=np.int64)
    for r in range(m):
        starts[chunk[r] + 1] += 1
    for w in range(q):
        starts[w + 1] += starts[w]

    seen = np.full(q, -1, dtype=np.int64)
    basis = np.zeros((alpha, width), dtype=np.uint64)
    has = np.zeros(alpha, dtype=np.bool_)
    row = np.empty(width, dtype=np.uint64)
    kmask = np.zeros(ncoef, dtype=np.uint64)
    ndecoded = 0
    rounds = 0
    while ndecoded < k:
        progress = False
        for w in range(q):
            lo = starts[w]
            hi = starts[w + 1]
            if hi == lo:
                continue
            nk = 0
            for x in range(ncoef):
                kmask[x] = _ZERO
            for j in range(alpha):
                if known[(w * stride + j) % k]:
                    kmask[j // 64] |= _ONE << np.uint64(j % 64)
                    nk += 1
            if nk == seen[w] or nk == alpha:
                seen[w] = nk
                continue
            basis[:, :] = _ZERO
            has[:] = False
            for r in range(lo, hi):
                src = order[r]
                for x in range(width):
                    row[x] = vec[src, x]
                if npay > 0:
                    for x in range(ncoef):
                        word = row[x] & kmask[x]
                        while word != _ZERO:
                            j = x * 64 + ctz(word)
                            word &= word - _ONE
                            sym = (w * stride + j) % k
                            for p in range(npay):
                                row[ncoef + p] ^= values[sym, p]
                for x in range(ncoef):
                    row[x] &= ~kmask[x]
                insert_row(row, basis, has, ncoef)
            reduce_to_rref(basis, has, ncoef)
            for b in range(alpha):
                if not has[b]:
                    continue
                ones = 0
                for x in range(ncoef):
                    ones += popcount(basis[b, x])
                if ones != 1:
                    continue
                sym = (w * stride + b) % k
                if not known[sym]:
                    known[sym] = True
                    for p in range(npay):
                        values[sym, p] = basis[b, ncoef + p]
                    ndecoded += 1
                    nk += 1
                    progress = True
            seen[w] = nk
        if not progress:
            break
        rounds += 1
    return known, values, rounds


# --------------------------------------------------------------------------
# aperture-rank probe


@njit(cache=True)
def aperture_rank_kernel(k, q, stride, alpha, n, trials, balanced, state):
    """Count trials whose k x n aperture-restricted Bernoulli matrix has rank k."""
    kw = (k + 63) // 64
    ncoef = (alpha + 63) // 64
    rows = np.zeros((n, kw), dtype=np.uint64)
    local = np.zeros(ncoef, dtype=np.uint64)
    basis = np.zeros((k, kw), dtype=np.uint64)
    has = np.zeros(k, dtype=np.bool_)
    full = 0
    for _ in range(trials):
        rows[:, :] = _ZERO
        for c in range(n):
            if balanced:
                w = c % q
            else:
                w = below(state, q)
            for x in range(ncoef):
                local[x] = next_u64(state)
            local[ncoef - 1] &= tail_mask(alpha)
            for x in range(ncoef):
                word = local[x]
                while word != _ZERO:
                    j = x * 64 + ctz(word)
                    word &= word - _ONE
                    g = (w * stride + j) % k
                    rows[c, g // 64] |= _ONE << np.uint64(g % 64)
        basis[:, :] = _ZERO
        has[:] = False
        if eliminate(rows, k, basis, has) == k:
            full += 1
    return full
