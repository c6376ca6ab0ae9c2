"""Philox4x32-10 counter-based generator: constants and reference code.

Every random draw in this package is addressed, not streamed: the value of
draw ``pos`` on stream ``stream`` under master seed ``seed`` is

    block = philox4x32_10(counter=(pos_lo, pos_hi, stream_lo, stream_hi),
                          key=(seed_lo, seed_hi))
    u64   = (block[0] << 32) | block[1]
    u     = (u64 >> 11) * 2**-53          # uniform in [0, 1)

so streams for distinct indices are disjoint by construction and a draw can
be reproduced from ``(seed, stream, pos)`` alone.  The kernels modules carry
their own numba / vectorised-numpy builds of the same function; this module
holds the shared constants plus a plain-Python build used for documentation
and as the comparison target in tests.

Stream indices are allocated as ``task_id * 2**32 + 4 * index + channel``
(see :func:`stream_base`), with channels 0..3 reserved for start sampling,
walk dynamics, resampling jitter and spare use.
"""

from __future__ import annotations

MULT_HI = 0xD2511F53  # multiplies counter word 0
MULT_LO = 0xCD9E8D57  # multiplies counter word 2
WEYL_0 = 0x9E3779B9
WEYL_1 = 0xBB67AE85
ROUNDS = 10
MASK32 = 0xFFFFFFFF

U53_INV = 1.0 / 9007199254740992.0  # 2**-53

ALGORITHM = "philox4x32-10"

# Stream channel map, shared by both kernel backends.
CHANNEL_START = 0  # start-point sampling (rejection attempts included)
CHANNEL_WALK = 1  # flight times, scattering-term choices
CHANNEL_JITTER = 2  # in-cell jitter when resampling from a grid
CHANNEL_SPARE = 3
STREAM_STRIDE = 4


def stream_base(task_id: int, channel: int) -> int:
    """First stream index for a task/channel; trajectory i adds 4*i."""
    if not (0 <= task_id < 2 ** 32):
        raise ValueError("task_id must fit in 32 bits")
    if not (0 <= channel < STREAM_STRIDE):
        raise ValueError("channel out of range")
    return (task_id << 32) + channel


def philox4x32(c0: int, c1: int, c2: int, c3: int, k0: int, k1: int):
    """One Philox4x32-10 block, plain Python. Returns four 32-bit words."""
    for r in range(ROUNDS):
        if r > 0:
            k0 = (k0 + WEYL_0) & MASK32
            k1 = (k1 + WEYL_1) & MASK32
        prod0 = MULT_HI * c0
        prod1 = MULT_LO * c2
        hi0, lo0 = prod0 >> 32, prod0 & MASK32
        hi1, lo1 = prod1 >> 32, prod1 & MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


def uniform(seed: int, stream: int, pos: int) -> float:
    """The uniform draw at address ``(seed, stream, pos)``, in [0, 1)."""
    y0, y1, _, _ = philox4x32(
        pos & MASK32,
        (pos >> 32) & MASK32,
        stream & MASK32,
        (stream >> 32) & MASK32,
        seed & MASK32,
        (seed >> 32) & MASK32,
    )
    return (((y0 << 32) | y1) >> 11) * U53_INV
