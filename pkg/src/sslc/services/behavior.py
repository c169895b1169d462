"""Honest and adversarial behaviors for full nodes and the oracle."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional


class NodeMode(str, enum.Enum):
    HONEST = "HONEST"
    WRONG_COUNT = "WRONG_COUNT"
    WRONG_ROOT = "WRONG_ROOT"
    UNAVAILABLE = "UNAVAILABLE"
    STALE_VIEW = "STALE_VIEW"


class OracleMode(str, enum.Enum):
    HONEST = "HONEST"
    OMIT_TX = "OMIT_TX"
    DUPLICATE_TX = "DUPLICATE_TX"
    TAMPER_RESULT = "TAMPER_RESULT"
    TAMPER_ROOT = "TAMPER_ROOT"
    TAMPER_K = "TAMPER_K"
    FOREIGN_TX = "FOREIGN_TX"


def _parse(text: str) -> tuple[str, Optional[int]]:
    """'WRONG_COUNT(3)' -> ('WRONG_COUNT', 3); 'HONEST' -> ('HONEST', None)."""
    text = text.strip()
    if "(" in text and text.endswith(")"):
        name, arg = text[:-1].split("(", 1)
        return name.strip().upper(), int(arg) if arg.strip() else None
    if ":" in text:
        name, arg = text.split(":", 1)
        return name.strip().upper(), int(arg)
    return text.upper(), None


@dataclass(frozen=True)
class NodeBehavior:
    """``param`` is the delta for WRONG_COUNT, the block for WRONG_ROOT (None: every block),
    and the visible height for STALE_VIEW."""

    mode: NodeMode = NodeMode.HONEST
    param: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", NodeMode(self.mode))
        if self.mode is NodeMode.WRONG_COUNT and self.param is None:
            object.__setattr__(self, "param", 1)
        if self.mode is NodeMode.STALE_VIEW and self.param is None:
            object.__setattr__(self, "param", 1)

    @classmethod
    def parse(cls, text: str) -> "NodeBehavior":
        name, arg = _parse(text)
        return cls(NodeMode(name), arg)

    def __str__(self) -> str:
        return self.mode.value if self.param is None else f"{self.mode.value}({self.param})"


@dataclass(frozen=True)
class OracleBehavior:
    """``param`` is the count for OMIT_TX, the delta for TAMPER_RESULT / TAMPER_K, and the
    block for TAMPER_ROOT (None: the first claimed block)."""

    mode: OracleMode = OracleMode.HONEST
    param: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", OracleMode(self.mode))
        defaults = {OracleMode.OMIT_TX: 1, OracleMode.TAMPER_RESULT: 1, OracleMode.TAMPER_K: 1}
        if self.param is None and self.mode in defaults:
            object.__setattr__(self, "param", defaults[self.mode])

    @classmethod
    def parse(cls, text: str) -> "OracleBehavior":
        name, arg = _parse(text)
        return cls(OracleMode(name), arg)

    def __str__(self) -> str:
        return self.mode.value if self.param is None else f"{self.mode.value}({self.param})"
