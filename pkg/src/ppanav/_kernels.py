# Word-parallel kernels over bit-packed planes.
#
# A plane is a (256, 4) uint64 array. Column c of row r lives in word c // 64,
# bit c % 64, so "east" (increasing column) is a left shift inside a word with
# the carry entering the next word's low bits.

import numpy as np
from numba import njit

SIZE = 256
WORDS = 4

_ONE = np.uint64(1)
_ZERO = np.uint64(0)

# Directions, in the order the fill sweeps them.
EAST, WEST, SOUTH, NORTH = 0, 1, 2, 3

# Kogge-Stone steps cover runs up to 255 pixels.
_STEPS = (1, 2, 4, 8, 16, 32, 64, 128)

# Sweep rounds before handing a tortuous mask to the span filler.
MAX_ROUNDS = 24


@njit(cache=True)
def shift_into(x, direction, k, out):
    """Translate ``x`` by ``k`` pixels toward ``direction``, zero fill."""
    n = x.shape[0]
    if direction == SOUTH or direction == NORTH:
        for r in range(n):
            src = r - k if direction == SOUTH else r + k
            for w in range(WORDS):
                out[r, w] = x[src, w] if 0 <= src < n else _ZERO
        return
    q = k // 64
    s = np.uint64(k % 64)
    inv = np.uint64(64 - k % 64)
    for r in range(n):
        for w in range(WORDS):
            if direction == EAST:
                a = w - q
                b = w - q - 1
                hi = x[r, a] << s if a >= 0 else _ZERO
                if s != _ZERO and b >= 0:
                    hi |= x[r, b] >> inv
            else:
                a = w + q
                b = w + q + 1
                hi = x[r, a] >> s if a < WORDS else _ZERO
                if s != _ZERO and b < WORDS:
                    hi |= x[r, b] << inv
            out[r, w] = hi


@njit(cache=True)
def shift(x, direction, k):
    out = np.empty_like(x)
    if k >= SIZE:
        out[:] = _ZERO
        return out
    shift_into(x, direction, k, out)
    return out


@njit(cache=True)
def _any(x):
    for r in range(x.shape[0]):
        for w in range(x.shape[1]):
            if x[r, w] != _ZERO:
                return True
    return False


@njit(cache=True)
def _propagators(mask):
    # pro[d, i] marks pixels whose 2**i predecessors along d are all in mask.
    # levels[d] counts the non-empty ones; longer steps cannot propagate.
    pro = np.empty((4, len(_STEPS), SIZE, WORDS), dtype=np.uint64)
    levels = np.zeros(4, dtype=np.int64)
    tmp = np.empty((SIZE, WORDS), dtype=np.uint64)
    for d in range(4):
        cur = mask.copy()
        for i in range(len(_STEPS)):
            if not _any(cur):
                break
            pro[d, i] = cur
            levels[d] = i + 1
            shift_into(cur, d, _STEPS[i], tmp)
            cur &= tmp
    return pro, levels


@njit(cache=True)
def _occluded_fill(gen, pro, levels, d, tmp):
    # gen |= every mask pixel reachable from gen by a straight run along d
    for i in range(levels[d]):
        shift_into(gen, d, _STEPS[i], tmp)
        gen |= pro[d, i] & tmp


@njit(cache=True)
def unpack(x):
    out = np.zeros((SIZE, SIZE), dtype=np.bool_)
    for r in range(SIZE):
        for w in range(WORDS):
            word = x[r, w]
            if word == _ZERO:
                continue
            for b in range(64):
                if (word >> np.uint64(b)) & _ONE:
                    out[r, 64 * w + b] = True
    return out


@njit(cache=True)
def pack(bits):
    out = np.zeros((SIZE, WORDS), dtype=np.uint64)
    for r in range(SIZE):
        for c in range(SIZE):
            if bits[r, c]:
                out[r, c // 64] |= _ONE << np.uint64(c % 64)
    return out


@njit(cache=True)
def _span_fill(filled, mask, stack_r, stack_c, top):
    # Scanline fill: pop a seed, claim its horizontal span, queue the rows
    # above and below wherever a new span starts. Returns pixels claimed.
    claimed = 0
    while top > 0:
        top -= 1
        r = stack_r[top]
        c = stack_c[top]
        if filled[r, c] or not mask[r, c]:
            continue
        lo = c
        while lo > 0 and mask[r, lo - 1] and not filled[r, lo - 1]:
            lo -= 1
        hi = c
        while hi < SIZE - 1 and mask[r, hi + 1] and not filled[r, hi + 1]:
            hi += 1
        for j in range(lo, hi + 1):
            filled[r, j] = True
        claimed += hi - lo + 1
        for nr in (r - 1, r + 1):
            if nr < 0 or nr >= SIZE:
                continue
            inside = False
            for j in range(lo, hi + 1):
                if mask[nr, j] and not filled[nr, j]:
                    if not inside:
                        if top >= stack_r.shape[0]:
                            stack_r = np.concatenate((stack_r, np.empty_like(stack_r)))
                            stack_c = np.concatenate((stack_c, np.empty_like(stack_c)))
                        stack_r[top] = nr
                        stack_c[top] = j
                        top += 1
                        inside = True
                else:
                    inside = False
    return claimed


@njit(cache=True)
def span_flood(mask, seeds):
    """Queue-based flood used when directional sweeps stop converging quickly."""
    m = unpack(mask)
    s = unpack(seeds)
    filled = np.zeros((SIZE, SIZE), dtype=np.bool_)
    cap = 4096
    stack_r = np.empty(cap, dtype=np.int32)
    stack_c = np.empty(cap, dtype=np.int32)
    for r in range(SIZE):
        for c in range(SIZE):
            if s[r, c] and m[r, c] and not filled[r, c]:
                stack_r[0] = r
                stack_c[0] = c
                _span_fill(filled, m, stack_r, stack_c, 1)
    return pack(filled)


@njit(cache=True)
def sweep_flood(mask, seeds, max_rounds):
    """Directional sweeps to a fixpoint; returns (result, converged)."""
    gen = seeds & mask
    pro, levels = _propagators(mask)
    tmp = np.empty_like(gen)
    for _ in range(max_rounds):
        before = gen.copy()
        for d in range(4):
            _occluded_fill(gen, pro, levels, d, tmp)
        same = True
        for r in range(SIZE):
            for w in range(WORDS):
                if gen[r, w] != before[r, w]:
                    same = False
                    break
            if not same:
                break
        if same:
            return gen, True
    return gen, False


@njit(cache=True)
def flood(mask, seeds):
    out, converged = sweep_flood(mask, seeds, MAX_ROUNDS)
    if converged:
        return out
    # Sweeps already claimed part of the region; finish from there.
    return span_flood(mask, out)


@njit(cache=True)
def popcount(x):
    total = 0
    for r in range(x.shape[0]):
        for w in range(x.shape[1]):
            v = x[r, w]
            v = v - ((v >> np.uint64(1)) & np.uint64(0x5555555555555555))
            v = (v & np.uint64(0x3333333333333333)) + ((v >> np.uint64(2)) & np.uint64(0x3333333333333333))
            v = (v + (v >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
            total += int((v * np.uint64(0x0101010101010101)) >> np.uint64(56))
    return total


@njit(cache=True)
def _lowest_bit(word):
    b = 0
    while not (word >> np.uint64(b)) & _ONE:
        b += 1
    return b


@njit(cache=True)
def _highest_bit(word):
    b = 63
    while not (word >> np.uint64(b)) & _ONE:
        b -= 1
    return b


@njit(cache=True)
def first_set(x):
    for r in range(SIZE):
        for w in range(WORDS):
            if x[r, w] != _ZERO:
                return r, 64 * w + _lowest_bit(x[r, w])
    return -1, -1


@njit(cache=True)
def bounding_box(x):
    rmin = -1
    rmax = -1
    cols = np.zeros(WORDS, dtype=np.uint64)
    for r in range(SIZE):
        any_set = False
        for w in range(WORDS):
            if x[r, w] != _ZERO:
                any_set = True
                cols[w] |= x[r, w]
        if any_set:
            if rmin < 0:
                rmin = r
            rmax = r
    if rmin < 0:
        return -1, -1, -1, -1
    cmin = -1
    cmax = -1
    for w in range(WORDS):
        if cols[w] != _ZERO:
            if cmin < 0:
                cmin = 64 * w + _lowest_bit(cols[w])
            cmax = 64 * w + _highest_bit(cols[w])
    return rmin, cmin, rmax, cmax


@njit(cache=True)
def component_stats(x):
    """Per 4-connected component: first pixel in scan order and pixel count.

    Rows of the result are (row, col, area), in scan order of first pixels.
    """
    m = unpack(x)
    filled = np.zeros((SIZE, SIZE), dtype=np.bool_)
    stack_r = np.empty(4096, dtype=np.int32)
    stack_c = np.empty(4096, dtype=np.int32)
    stats = []
    for r in range(SIZE):
        for c in range(SIZE):
            if m[r, c] and not filled[r, c]:
                stack_r[0] = r
                stack_c[0] = c
                area = _span_fill(filled, m, stack_r, stack_c, 1)
                stats.append((r, c, area))
    out = np.empty((len(stats), 3), dtype=np.int64)
    for i in range(len(stats)):
        out[i, 0] = stats[i][0]
        out[i, 1] = stats[i][1]
        out[i, 2] = stats[i][2]
    return out


@njit(cache=True)
def count_components(x):
    m = unpack(x)
    filled = np.zeros((SIZE, SIZE), dtype=np.bool_)
    stack_r = np.empty(4096, dtype=np.int32)
    stack_c = np.empty(4096, dtype=np.int32)
    n = 0
    for r in range(SIZE):
        for c in range(SIZE):
            if m[r, c] and not filled[r, c]:
                stack_r[0] = r
                stack_c[0] = c
                _span_fill(filled, m, stack_r, stack_c, 1)
                n += 1
    return n
