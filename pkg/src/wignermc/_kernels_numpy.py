"""Pure-numpy kernel backend.

Vectorised over trajectories; every function here has a scalar-loop twin in
:mod:`wignermc._kernels_numba` with identical draw addressing and identical
per-trajectory arithmetic, so the two backends agree to roundoff.

State arrays are (n, 4) float64 in (px, py, x, y) order.  Field parameters
arrive packed as (b0, b1, ex, ey, charge, mass).  All random draws go
through Philox4x32-10 keyed by the master seed, with the counter holding
(draw position, stream index); see :mod:`wignermc._philox`.
"""

from __future__ import annotations

import numpy as np

from ._philox import MASK32, MULT_HI, MULT_LO, ROUNDS, U53_INV, WEYL_0, WEYL_1

BACKEND_NAME = "numpy"


def uniforms(seed, streams, pos):
    """Uniform [0, 1) draws at addresses (seed, streams[i], pos[i])."""
    streams = np.asarray(streams, dtype=np.uint64)
    pos = np.asarray(pos, dtype=np.uint64)
    c0 = pos & MASK32
    c1 = pos >> np.uint64(32)
    c2 = streams & MASK32
    c3 = streams >> np.uint64(32)
    seed = int(seed)
    k0 = np.uint64(seed & MASK32)
    k1 = np.uint64((seed >> 32) & MASK32)
    for r in range(ROUNDS):
        if r > 0:
            k0 = (k0 + np.uint64(WEYL_0)) & np.uint64(MASK32)
            k1 = (k1 + np.uint64(WEYL_1)) & np.uint64(MASK32)
        prod0 = np.uint64(MULT_HI) * c0
        prod1 = np.uint64(MULT_LO) * c2
        hi0 = prod0 >> np.uint64(32)
        lo0 = prod0 & np.uint64(MASK32)
        hi1 = prod1 >> np.uint64(32)
        lo1 = prod1 & np.uint64(MASK32)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    bits = ((c0 << np.uint64(32)) | c1) >> np.uint64(11)
    return bits.astype(np.float64) * U53_INV


def _derivs(px, py, x, y, b0, b1, ex, ey, q, m):
    bz = b0 + b1 * y
    ax = q * (ex * x + py * bz / m)
    ay = q * (ey * y - px * bz / m)
    return ax, ay, px / m, py / m


def _rk4_step_arrays(px, py, x, y, h, fp):
    # h may be a scalar or a per-row array; both broadcast the same way
    b0, b1, ex, ey, q, m = fp
    a1x, a1y, v1x, v1y = _derivs(px, py, x, y, b0, b1, ex, ey, q, m)
    hh = 0.5 * h
    a2x, a2y, v2x, v2y = _derivs(px + hh * a1x, py + hh * a1y,
                                 x + hh * v1x, y + hh * v1y,
                                 b0, b1, ex, ey, q, m)
    a3x, a3y, v3x, v3y = _derivs(px + hh * a2x, py + hh * a2y,
                                 x + hh * v2x, y + hh * v2y,
                                 b0, b1, ex, ey, q, m)
    a4x, a4y, v4x, v4y = _derivs(px + h * a3x, py + h * a3y,
                                 x + h * v3x, y + h * v3y,
                                 b0, b1, ex, ey, q, m)
    s = h / 6.0
    return (px + s * (a1x + 2.0 * a2x + 2.0 * a3x + a4x),
            py + s * (a1y + 2.0 * a2y + 2.0 * a3y + a4y),
            x + s * (v1x + 2.0 * v2x + 2.0 * v3x + v4x),
            y + s * (v1y + 2.0 * v2y + 2.0 * v3y + v4y))


def propagate_batch(states, durations, h, fp):
    """Advance each row of ``states`` by its own signed duration, in place.

    Fixed-step RK4: floor(|dur| / h) full steps of signed size h, then one
    partial step landing exactly on the target time.  A zero-length partial
    step is still applied; it is an exact identity.
    """
    durations = np.asarray(durations, dtype=np.float64)
    absdur = np.abs(durations)
    sign = np.where(durations < 0.0, -1.0, 1.0)
    k = (absdur / h).astype(np.int64)
    rem = absdur - k * h
    neg = rem < 0.0
    k = np.where(neg, k - 1, k)
    rem = np.where(neg, rem + h, rem)

    px, py, x, y = states[:, 0], states[:, 1], states[:, 2], states[:, 3]
    remaining = k.copy()
    idx = np.nonzero(remaining > 0)[0]
    while idx.size:
        hs = sign[idx] * h
        px[idx], py[idx], x[idx], y[idx] = _rk4_step_arrays(
            px[idx], py[idx], x[idx], y[idx], hs, fp)
        remaining[idx] -= 1
        idx = idx[remaining[idx] > 0]
    hs = sign * rem
    px[:], py[:], x[:], y[:] = _rk4_step_arrays(px, py, x, y, hs, fp)


def forward_walk(states, final_time, gamma, h, fp, offs, signs, cumprob,
                 abs_total, seed, stream0, stride, cap):
    """Forward signed-particle walk from t = 0 to ``final_time``.

    Each trajectory alternates exponential free flights (rate gamma) with
    scattering events drawn from the stencil table: at an event the state is
    shifted by ``-offs[k]`` and the weight multiplied by
    ``abs_total * signs[k]``.  Draws per trajectory, in order: flight
    uniform, then a term uniform when the flight ends before ``final_time``.

    Returns (weights, counts, capped); ``states`` holds the time-T states
    in place.  Trajectories that would exceed ``cap`` events are flagged
    capped and abandoned.
    """
    n = states.shape[0]
    weights = np.ones(n)
    counts = np.zeros(n, dtype=np.int64)
    capped = np.zeros(n, dtype=bool)
    if gamma <= 0.0:
        propagate_batch(states, np.full(n, final_time), h, fp)
        return weights, counts, capped

    streams = np.uint64(stream0) + np.uint64(stride) * np.arange(n, dtype=np.uint64)
    pos = np.zeros(n, dtype=np.uint64)
    t = np.zeros(n)
    alive = np.arange(n)
    while alive.size:
        u = uniforms(seed, streams[alive], pos[alive])
        pos[alive] += np.uint64(1)
        flight = -np.log1p(-u) / gamma
        t_next = t[alive] + flight
        done = t_next > final_time
        dur = np.where(done, final_time - t[alive], flight)
        sub = states[alive]
        propagate_batch(sub, dur, h, fp)
        states[alive] = sub
        t[alive] = np.where(done, final_time, t_next)

        scat = alive[~done]
        if scat.size:
            hit_cap = counts[scat] >= cap
            capped[scat[hit_cap]] = True
            scat = scat[~hit_cap]
        if scat.size:
            u2 = uniforms(seed, streams[scat], pos[scat])
            pos[scat] += np.uint64(1)
            k = np.searchsorted(cumprob, u2, side="right")
            states[scat] -= offs[k]
            weights[scat] *= abs_total * signs[k]
            counts[scat] += 1
        alive = scat
    return weights, counts, capped


def backward_walk(states, n_events, final_time, gamma, h, fp, offs, signs,
                  cumprob, abs_total, seed, stream0, stride):
    """Backward walk with exactly ``n_events`` scatterings.

    Starts from time-T states, draws event times t_i = u * t_{i-1}
    (t_0 = final_time), propagates backwards between them, shifts by
    ``+offs[k]`` at each event and multiplies the weight by
    ``gamma * t_{i-1} * abs_total * signs[k]``.  Per event the draws are:
    time uniform, then term uniform.  Ends at t = 0; the exponential
    prefactor exp(-T*gamma) is left to the caller.
    """
    n = states.shape[0]
    weights = np.ones(n)
    streams = np.uint64(stream0) + np.uint64(stride) * np.arange(n, dtype=np.uint64)
    pos = np.zeros(n, dtype=np.uint64)
    t_prev = np.full(n, final_time)
    for _ in range(n_events):
        u = uniforms(seed, streams, pos)
        pos += np.uint64(1)
        t_i = u * t_prev
        propagate_batch(states, t_i - t_prev, h, fp)
        u2 = uniforms(seed, streams, pos)
        pos += np.uint64(1)
        k = np.searchsorted(cumprob, u2, side="right")
        states += offs[k]
        weights *= gamma * t_prev * abs_total * signs[k]
        t_prev = t_i
    propagate_batch(states, -t_prev, h, fp)
    return weights
