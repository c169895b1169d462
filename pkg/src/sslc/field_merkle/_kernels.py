"""Compiled batch permutation. Mirrors ``poseidon.permute`` row by row."""

from __future__ import annotations

import numpy as np
from numba import njit, uint64

_P = uint64(0xFFFFFFFF00000001)
_EPS = uint64(0xFFFFFFFF)
_M32 = uint64(0xFFFFFFFF)
_S32 = uint64(32)


@njit(cache=True, inline="always")
def _reduce128(hi, lo):
    hh = hi >> _S32
    hl = hi & _M32
    t0 = lo - hh
    if lo < hh:
        t0 -= _EPS
    t1 = hl * _EPS
    t2 = t0 + t1
    if t2 < t1:
        t2 += _EPS
    if t2 >= _P:
        t2 -= _P
    return t2


@njit(cache=True, inline="always")
def _mul(a, b):
    a0 = a & _M32
    a1 = a >> _S32
    b0 = b & _M32
    b1 = b >> _S32
    p00 = a0 * b0
    p01 = a0 * b1
    p10 = a1 * b0
    p11 = a1 * b1
    mid = (p01 & _M32) + (p10 & _M32) + (p00 >> _S32)
    lo = (p00 & _M32) | ((mid & _M32) << _S32)
    hi = p11 + (p01 >> _S32) + (p10 >> _S32) + (mid >> _S32)
    return _reduce128(hi, lo)


@njit(cache=True, inline="always")
def _add(a, b):
    s = a + b
    if s < a:
        s += _EPS
    if s >= _P:
        s -= _P
    return s


@njit(cache=True, inline="always")
def _sbox(x):
    x2 = _mul(x, x)
    x3 = _mul(x2, x)
    x4 = _mul(x2, x2)
    return _mul(x3, x4)


@njit(cache=True)
def permute_rows(states, rc, mds, half_full, partial):
    """In-place permutation of each row of ``states`` (uint64, shape (N, 12))."""
    n = states.shape[0]
    rounds = rc.shape[0]
    s = np.empty(12, dtype=np.uint64)
    t = np.empty(12, dtype=np.uint64)
    for row in range(n):
        for i in range(12):
            s[i] = states[row, i]
        for r in range(rounds):
            full = r < half_full or r >= half_full + partial
            for i in range(12):
                s[i] = _add(s[i], rc[r, i])
            if full:
                for i in range(12):
                    s[i] = _sbox(s[i])
            else:
                s[0] = _sbox(s[0])
            # MDS entries are < 2^6, so each 32-bit half accumulates below 2^42
            for i in range(12):
                lo_acc = uint64(0)
                hi_acc = uint64(0)
                for j in range(12):
                    m = mds[i, j]
                    lo_acc += (s[j] & _M32) * m
                    hi_acc += (s[j] >> _S32) * m
                lo = ((hi_acc & _M32) << _S32) + lo_acc
                carry = uint64(1) if lo < lo_acc else uint64(0)
                t[i] = _reduce128((hi_acc >> _S32) + carry, lo)
            for i in range(12):
                s[i] = t[i]
        for i in range(12):
            states[row, i] = s[i]
