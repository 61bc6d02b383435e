"""Compiled inner loops for walk simulation.

The environment of a nearest-neighbour walk is only ever extended at the two
ends of the visited interval, so a dense buffer indexed by ``position + offset``
plus the current ``[lo, hi]`` range replaces a hash map.
"""
import math

import numpy as np
from numba import njit

# status codes returned by the regeneration kernel
OK = 0
STEP_BUDGET_EXCEEDED = 1


@njit(nogil=True, cache=True)
def rwre_endpoint(gen, n, a, b, omega):
    """Z_n of a walk in a fresh environment. ``omega`` needs length >= 2n + 1."""
    off = (omega.shape[0] - 1) // 2
    x = 0
    lo = 0
    hi = 0
    omega[off] = gen.beta(a, b)
    for _ in range(n):
        if gen.random() < omega[x + off]:
            x += 1
            if x > hi:
                hi = x
                omega[x + off] = gen.beta(a, b)
        else:
            x -= 1
            if x < lo:
                lo = x
                omega[x + off] = gen.beta(a, b)
    return x


@njit(nogil=True, cache=True)
def rwcre_endpoint(gen, pieces, a, b, omega, per_piece):
    """Sum of independent walk endpoints, one fresh environment per piece.

    If ``per_piece`` has the same length as ``pieces`` each endpoint is stored.
    """
    keep = per_piece.shape[0] == pieces.shape[0]
    total = 0
    for k in range(pieces.shape[0]):
        z = rwre_endpoint(gen, pieces[k], a, b, omega)
        if keep:
            per_piece[k] = z
        total += z
    return total


@njit(nogil=True, cache=True)
def _grow(arr, new_size, shift):
    out = np.empty(new_size, arr.dtype)
    out[shift:shift + arr.shape[0]] = arr
    return out


@njit(nogil=True, cache=True)
def regeneration_direct(gen, a, b, horizon_base, max_steps):
    """Second regeneration increment of a fresh walk.

    A level x >= 1 stays *clean* while the walk has never stepped from x to
    x - 1 since first reaching it. Clean levels form a stack (the walk dirties
    them from the top when it moves left). Levels are confirmed as regeneration
    levels once the running maximum is ``horizon`` sites beyond them.

    Returns ``(dz, dt, status)``.
    """
    cap = 1024
    off = cap // 2
    omega = np.empty(cap)
    omega[off] = gen.beta(a, b)
    lo = 0
    hi = 0
    hit = np.empty(cap, np.int64)      # hitting time of each level >= 0
    hit[0] = 0
    stack = np.empty(cap, np.int64)    # clean levels, increasing
    depth = 0
    x = 0
    t = 0
    while t < max_steps:
        if depth >= 2:
            scale = max(2, stack[1])
            horizon = horizon_base * max(1, int(math.ceil(math.log2(scale))))
            if hi >= stack[1] + horizon:
                x1 = stack[0]
                x2 = stack[1]
                return x2 - x1, hit[x2] - hit[x1], OK
        t += 1
        if gen.random() < omega[x + off]:
            x += 1
            if x > hi:
                hi = x
                if x + off >= omega.shape[0]:
                    omega = _grow(omega, 2 * omega.shape[0], 0)
                omega[x + off] = gen.beta(a, b)
                if x >= hit.shape[0]:
                    hit = _grow(hit, 2 * hit.shape[0], 0)
                hit[x] = t
                if depth >= stack.shape[0]:
                    stack = _grow(stack, 2 * stack.shape[0], 0)
                stack[depth] = x
                depth += 1
        else:
            # stepping x -> x-1 dirties every clean level >= x
            while depth > 0 and stack[depth - 1] >= x:
                depth -= 1
            x -= 1
            if x < lo:
                lo = x
                if x + off < 0:
                    extra = omega.shape[0]
                    omega = _grow(omega, omega.shape[0] + extra, extra)
                    off += extra
                omega[x + off] = gen.beta(a, b)
    return 0, 0, STEP_BUDGET_EXCEEDED


@njit(nogil=True, cache=True)
def regeneration_branching(gen, a, b, max_generations):
    """(nu, nu + 2 * sum V_i) for the branching chain with immigration.

    Generation i draws a fresh omega; each of the V_{i-1} + 1 parents has a
    Geometric(omega) number of children (failures before the first success).
    Returns ``(dz, dt, status)``.
    """
    v = 0
    total = 0
    for i in range(1, max_generations + 1):
        w = gen.beta(a, b)
        v = gen.negative_binomial(v + 1, w)
        if v == 0:
            return i, i + 2 * total, OK
        total += v
    return 0, 0, STEP_BUDGET_EXCEEDED
