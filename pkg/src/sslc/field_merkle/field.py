"""Arithmetic in the 64-bit Goldilocks prime field."""

from __future__ import annotations

from typing import Union

MODULUS = 2**64 - 2**32 + 1
EPSILON = 2**32 - 1  # 2^64 mod p


class FieldElement:
    """An element of GF(p), p = 2^64 - 2^32 + 1, kept as its least nonnegative residue."""

    __slots__ = ("value",)

    def __init__(self, value: int = 0) -> None:
        self.value = int(value) % MODULUS

    def _coerce(self, other: Union["FieldElement", int]) -> int:
        if isinstance(other, FieldElement):
            return other.value
        if isinstance(other, int):
            return other % MODULUS
        return NotImplemented  # type: ignore[return-value]

    def __add__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else FieldElement(self.value + o)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else FieldElement(self.value - o)

    def __rsub__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else FieldElement(o - self.value)

    def __mul__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else FieldElement(self.value * o)

    __rmul__ = __mul__

    def __neg__(self) -> "FieldElement":
        return FieldElement(-self.value)

    def __pow__(self, e: int) -> "FieldElement":
        if e < 0:
            return self.inverse() ** (-e)
        return FieldElement(pow(self.value, e, MODULUS))

    def inverse(self) -> "FieldElement":
        if self.value == 0:
            raise ZeroDivisionError("zero has no inverse in GF(p)")
        return FieldElement(pow(self.value, MODULUS - 2, MODULUS))

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self * FieldElement(o).inverse()

    def __eq__(self, other) -> bool:
        if isinstance(other, FieldElement):
            return self.value == other.value
        if isinstance(other, int):
            return self.value == other % MODULUS
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.value)

    def __int__(self) -> int:
        return self.value

    def __repr__(self) -> str:
        return f"FieldElement({self.value})"
