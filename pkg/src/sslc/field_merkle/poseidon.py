"""Poseidon permutation over Goldilocks (width 12) and the tagged sponge built on it.

Round constants and the MDS matrix are read from a versioned parameter file shipped
with the package, so the digest of that file pins every hash the system produces.
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .field import MODULUS

PARAMS_FILE = "poseidon_goldilocks_v1.json"

WIDTH = 12
RATE = 8
DIGEST_WIDTH = 4
TAG_SLOT = 8
LENGTH_SLOT = 9


@lru_cache(maxsize=1)
def load_parameters() -> dict:
    text = resources.files("sslc.data").joinpath(PARAMS_FILE).read_text()
    params = json.loads(text)
    if int(params["field_modulus"], 16) != MODULUS:
        raise ValueError("parameter file is for a different field")
    return params


def parameter_bytes() -> bytes:
    """Raw bytes of the parameter file, hashed into every setup."""
    return resources.files("sslc.data").joinpath(PARAMS_FILE).read_bytes()


def domain_tag(name: str) -> int:
    return load_parameters()["domain_tags"][name]


class _Tables:
    def __init__(self, params: dict) -> None:
        self.half_full = params["half_full_rounds"]
        self.partial = params["partial_rounds"]
        self.rounds = 2 * self.half_full + self.partial
        rc = [int(x, 16) for x in params["round_constants"]]
        self.rc = [rc[WIDTH * r : WIDTH * (r + 1)] for r in range(self.rounds)]
        circ, diag = params["mds_circ"], params["mds_diag"]
        # out[r] = sum_i circ[i] * v[(i + r) % 12] + diag[r] * v[r]
        self.mds = [[0] * WIDTH for _ in range(WIDTH)]
        for r in range(WIDTH):
            for i in range(WIDTH):
                self.mds[r][(i + r) % WIDTH] += circ[i]
            self.mds[r][r] += diag[r]
        self.mds_np = np.array(self.mds, dtype=np.uint64)
        self.rc_np = np.array(self.rc, dtype=np.uint64)


@lru_cache(maxsize=1)
def _tables() -> _Tables:
    return _Tables(load_parameters())


def _is_full(t: _Tables, r: int) -> bool:
    return r < t.half_full or r >= t.half_full + t.partial


def permute(state: Sequence[int]) -> list[int]:
    """Reference permutation on Python integers."""
    if len(state) != WIDTH:
        raise ValueError(f"state must have {WIDTH} elements")
    t = _tables()
    p = MODULUS
    s = [int(x) % p for x in state]
    for r in range(t.rounds):
        rc = t.rc[r]
        s = [(s[i] + rc[i]) % p for i in range(WIDTH)]
        if _is_full(t, r):
            s = [pow(x, 7, p) for x in s]
        else:
            s[0] = pow(s[0], 7, p)
        s = [sum(m * x for m, x in zip(row, s)) % p for row in t.mds]
    return s


def permute_batch(states: np.ndarray) -> np.ndarray:
    """Apply the permutation to every row of an (N, 12) uint64 array."""
    t = _tables()
    out = np.array(states, dtype=np.uint64, order="C", copy=True)
    if out.ndim != 2 or out.shape[1] != WIDTH:
        raise ValueError(f"expected shape (N, {WIDTH})")
    _kernels.permute_rows(out, t.rc_np, t.mds_np, t.half_full, t.partial)
    return out


def sponge(inputs: Sequence[int], tag: int) -> tuple[int, int, int, int]:
    """Overwrite-mode sponge; the tag and input length occupy the first two capacity slots."""
    if len(inputs) == 0:
        raise ValueError("sponge input must be nonempty")
    state = [0] * WIDTH
    state[TAG_SLOT] = tag
    state[LENGTH_SLOT] = len(inputs)
    for start in range(0, len(inputs), RATE):
        chunk = inputs[start : start + RATE]
        for i, x in enumerate(chunk):
            v = int(x)
            if not 0 <= v < MODULUS:
                v %= MODULUS
            state[i] = v
        state = permute(state)
    return tuple(state[:DIGEST_WIDTH])  # type: ignore[return-value]


def sponge_batch(inputs: np.ndarray, tag: int) -> np.ndarray:
    """Row-wise ``sponge`` over an (N, L) uint64 array; returns (N, 4)."""
    inputs = np.asarray(inputs, dtype=np.uint64)
    n, length = inputs.shape
    if length == 0:
        raise ValueError("sponge input must be nonempty")
    state = np.zeros((n, WIDTH), dtype=np.uint64)
    if n == 0:
        return state[:, :DIGEST_WIDTH]
    state[:, TAG_SLOT] = tag
    state[:, LENGTH_SLOT] = length
    for start in range(0, length, RATE):
        chunk = inputs[:, start : start + RATE]
        state[:, : chunk.shape[1]] = chunk
        state = permute_batch(state)
    return state[:, :DIGEST_WIDTH]


def as_elements(values: Iterable) -> list[int]:
    return [int(v) for v in values]
