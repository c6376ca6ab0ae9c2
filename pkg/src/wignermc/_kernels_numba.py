"""Numba kernel backend: scalar per-trajectory loops under ``@njit``.

Twin of :mod:`wignermc._kernels_numpy`; same function names, same draw
addressing, same per-trajectory arithmetic.  Compiled lazily with on-disk
caching so repeated runs skip compilation.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ._philox import MASK32, MULT_HI, MULT_LO, U53_INV, WEYL_0, WEYL_1

BACKEND_NAME = "numba"

_M32 = np.uint64(MASK32)
_MHI = np.uint64(MULT_HI)
_MLO = np.uint64(MULT_LO)
_W0 = np.uint64(WEYL_0)
_W1 = np.uint64(WEYL_1)
_S32 = np.uint64(32)
_S11 = np.uint64(11)


@njit(cache=True)
def _u01(seed, stream, pos):
    # one Philox4x32-10 block per draw; counter = (pos, stream)
    c0 = pos & _M32
    c1 = pos >> _S32
    c2 = stream & _M32
    c3 = stream >> _S32
    k0 = seed & _M32
    k1 = seed >> _S32
    for r in range(10):
        if r > 0:
            k0 = (k0 + _W0) & _M32
            k1 = (k1 + _W1) & _M32
        prod0 = _MHI * c0
        prod1 = _MLO * c2
        hi0 = prod0 >> _S32
        lo0 = prod0 & _M32
        hi1 = prod1 >> _S32
        lo1 = prod1 & _M32
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    bits = ((c0 << _S32) | c1) >> _S11
    return bits * U53_INV


@njit(cache=True)
def _uniforms_impl(seed, streams, pos, out):
    for i in range(streams.shape[0]):
        out[i] = _u01(seed, streams[i], pos[i])


def uniforms(seed, streams, pos):
    """Uniform [0, 1) draws at addresses (seed, streams[i], pos[i])."""
    streams = np.ascontiguousarray(streams, dtype=np.uint64)
    pos = np.ascontiguousarray(pos, dtype=np.uint64)
    out = np.empty(streams.shape[0])
    _uniforms_impl(np.uint64(seed), streams, pos, out)
    return out


@njit(cache=True, inline="always")
def _rk4_step(px, py, x, y, h, b0, b1, ex, ey, q, m):
    bz = b0 + b1 * y
    a1x = q * (ex * x + py * bz / m)
    a1y = q * (ey * y - px * bz / m)
    v1x = px / m
    v1y = py / m
    hh = 0.5 * h
    px2 = px + hh * a1x
    py2 = py + hh * a1y
    x2 = x + hh * v1x
    y2 = y + hh * v1y
    bz = b0 + b1 * y2
    a2x = q * (ex * x2 + py2 * bz / m)
    a2y = q * (ey * y2 - px2 * bz / m)
    v2x = px2 / m
    v2y = py2 / m
    px3 = px + hh * a2x
    py3 = py + hh * a2y
    x3 = x + hh * v2x
    y3 = y + hh * v2y
    bz = b0 + b1 * y3
    a3x = q * (ex * x3 + py3 * bz / m)
    a3y = q * (ey * y3 - px3 * bz / m)
    v3x = px3 / m
    v3y = py3 / m
    px4 = px + h * a3x
    py4 = py + h * a3y
    x4 = x + h * v3x
    y4 = y + h * v3y
    bz = b0 + b1 * y4
    a4x = q * (ex * x4 + py4 * bz / m)
    a4y = q * (ey * y4 - px4 * bz / m)
    v4x = px4 / m
    v4y = py4 / m
    s = h / 6.0
    return (px + s * (a1x + 2.0 * a2x + 2.0 * a3x + a4x),
            py + s * (a1y + 2.0 * a2y + 2.0 * a3y + a4y),
            x + s * (v1x + 2.0 * v2x + 2.0 * v3x + v4x),
            y + s * (v1y + 2.0 * v2y + 2.0 * v3y + v4y))


@njit(cache=True, inline="always")
def _advance(px, py, x, y, duration, h, b0, b1, ex, ey, q, m):
    # floor(|dur|/h) full steps plus one exact partial step
    absdur = abs(duration)
    sign = -1.0 if duration < 0.0 else 1.0
    k = int(absdur / h)
    rem = absdur - k * h
    if rem < 0.0:
        k -= 1
        rem += h
    hs = sign * h
    for _ in range(k):
        px, py, x, y = _rk4_step(px, py, x, y, hs, b0, b1, ex, ey, q, m)
    px, py, x, y = _rk4_step(px, py, x, y, sign * rem, b0, b1, ex, ey, q, m)
    return px, py, x, y


@njit(cache=True)
def _propagate_batch_impl(states, durations, h, fp):
    b0, b1, ex, ey, q, m = fp[0], fp[1], fp[2], fp[3], fp[4], fp[5]
    for i in range(states.shape[0]):
        px, py, x, y = _advance(states[i, 0], states[i, 1], states[i, 2],
                                states[i, 3], durations[i], h,
                                b0, b1, ex, ey, q, m)
        states[i, 0] = px
        states[i, 1] = py
        states[i, 2] = x
        states[i, 3] = y


def propagate_batch(states, durations, h, fp):
    """Advance each row of ``states`` by its own signed duration, in place."""
    durations = np.ascontiguousarray(durations, dtype=np.float64)
    _propagate_batch_impl(states, durations, float(h), fp)


@njit(cache=True)
def _forward_walk_impl(states, final_time, gamma, h, fp, offs, signs,
                       cumprob, abs_total, seed, stream0, stride, cap,
                       weights, counts, capped):
    b0, b1, ex, ey, q, m = fp[0], fp[1], fp[2], fp[3], fp[4], fp[5]
    one = np.uint64(1)
    for i in range(states.shape[0]):
        stream = stream0 + stride * np.uint64(i)
        pos = np.uint64(0)
        px, py, x, y = states[i, 0], states[i, 1], states[i, 2], states[i, 3]
        t = 0.0
        w = 1.0
        n_ev = 0
        while True:
            u = _u01(seed, stream, pos)
            pos += one
            flight = -np.log1p(-u) / gamma
            if t + flight > final_time:
                px, py, x, y = _advance(px, py, x, y, final_time - t, h,
                                        b0, b1, ex, ey, q, m)
                break
            px, py, x, y = _advance(px, py, x, y, flight, h,
                                    b0, b1, ex, ey, q, m)
            t += flight
            if n_ev >= cap:
                capped[i] = True
                break
            u2 = _u01(seed, stream, pos)
            pos += one
            k = 0
            while u2 >= cumprob[k]:
                k += 1
            px -= offs[k, 0]
            py -= offs[k, 1]
            x -= offs[k, 2]
            y -= offs[k, 3]
            w *= abs_total * signs[k]
            n_ev += 1
        states[i, 0] = px
        states[i, 1] = py
        states[i, 2] = x
        states[i, 3] = y
        weights[i] = w
        counts[i] = n_ev


def forward_walk(states, final_time, gamma, h, fp, offs, signs, cumprob,
                 abs_total, seed, stream0, stride, cap):
    """Forward signed-particle walk; see the numpy twin for the contract."""
    n = states.shape[0]
    weights = np.ones(n)
    counts = np.zeros(n, dtype=np.int64)
    capped = np.zeros(n, dtype=bool)
    if gamma <= 0.0:
        propagate_batch(states, np.full(n, final_time), h, fp)
        return weights, counts, capped
    _forward_walk_impl(states, float(final_time), float(gamma), float(h), fp,
                       offs, signs, cumprob, float(abs_total),
                       np.uint64(seed), np.uint64(stream0), np.uint64(stride),
                       int(cap), weights, counts, capped)
    return weights, counts, capped


@njit(cache=True)
def _backward_walk_impl(states, n_events, final_time, gamma, h, fp, offs,
                        signs, cumprob, abs_total, seed, stream0, stride,
                        weights):
    b0, b1, ex, ey, q, m = fp[0], fp[1], fp[2], fp[3], fp[4], fp[5]
    one = np.uint64(1)
    for i in range(states.shape[0]):
        stream = stream0 + stride * np.uint64(i)
        pos = np.uint64(0)
        px, py, x, y = states[i, 0], states[i, 1], states[i, 2], states[i, 3]
        t_prev = final_time
        w = 1.0
        for _ in range(n_events):
            u = _u01(seed, stream, pos)
            pos += one
            t_i = u * t_prev
            px, py, x, y = _advance(px, py, x, y, t_i - t_prev, h,
                                    b0, b1, ex, ey, q, m)
            u2 = _u01(seed, stream, pos)
            pos += one
            k = 0
            while u2 >= cumprob[k]:
                k += 1
            px += offs[k, 0]
            py += offs[k, 1]
            x += offs[k, 2]
            y += offs[k, 3]
            w *= gamma * t_prev * abs_total * signs[k]
            t_prev = t_i
        px, py, x, y = _advance(px, py, x, y, -t_prev, h, b0, b1, ex, ey, q, m)
        states[i, 0] = px
        states[i, 1] = py
        states[i, 2] = x
        states[i, 3] = y
        weights[i] = w


def backward_walk(states, n_events, final_time, gamma, h, fp, offs, signs,
                  cumprob, abs_total, seed, stream0, stride):
    """Backward walk with fixed event count; see the numpy twin."""
    n = states.shape[0]
    weights = np.ones(n)
    _backward_walk_impl(states, int(n_events), float(final_time),
                        float(gamma), float(h), fp, offs, signs, cumprob,
                        float(abs_total), np.uint64(seed), np.uint64(stream0),
                        np.uint64(stride), weights)
    return weights
