"""Backend contract, parameter and proof containers, and the proof file format."""

from __future__ import annotations

import base64
import json
import struct
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

from ..field_merkle import Digest, domain_tag, hash_elements
from ..query_engine import QuerySpec
from ..statement import Batch, Claim, StepStatement

MAGIC = b"SSLCPRF1"
STEP = "step"
FINAL = "final"


class ProofSystemError(Exception):
    pass


class UnsupportedShape(ProofSystemError):
    pass


class ShapeTooSmall(ProofSystemError):
    """A witness needs a larger tree depth than the circuit was set up for."""


class WitnessUnsatisfiable(ProofSystemError):
    pass


class InvalidPredecessor(ProofSystemError):
    pass


class BackendUnavailable(ProofSystemError):
    pass


class MalformedProof(ProofSystemError):
    pass


@dataclass(frozen=True)
class BackendParams:
    backend: str
    batch_capacity: int
    tree_depth: int
    parameter_digest: Digest
    details: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def circuit_shape(self) -> tuple[int, int]:
        return (self.batch_capacity, self.tree_depth)

    def to_json(self) -> dict:
        return {
            "backend": self.backend,
            "batch_capacity": self.batch_capacity,
            "tree_depth": self.tree_depth,
            "parameter_digest": self.parameter_digest.hex(),
        }


@dataclass(frozen=True)
class Proof:
    kind: str
    data: bytes
    public_inputs: tuple[int, ...]
    backend: str
    parameter_digest: Digest
    prove_time_s: float = field(default=0.0, compare=False)

    @property
    def statement(self) -> StepStatement:
        if self.kind != STEP:
            raise ValueError("only step proofs carry a step statement")
        return StepStatement.from_elements(self.public_inputs)

    @property
    def size_bytes(self) -> int:
        return len(self.data)

    def header(self) -> dict:
        return {
            "kind": self.kind,
            "backend": self.backend,
            "parameter_digest": self.parameter_digest.hex(),
            "public_inputs": list(self.public_inputs),
        }

    def to_bytes(self) -> bytes:
        """magic | u32 len | proof bytes | u32 len | canonical JSON header."""
        head = json.dumps(self.header(), separators=(",", ":"), sort_keys=True).encode()
        return MAGIC + struct.pack("<I", len(self.data)) + self.data + struct.pack("<I", len(head)) + head

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Proof":
        try:
            if raw[: len(MAGIC)] != MAGIC:
                raise MalformedProof("bad magic")
            off = len(MAGIC)
            (n,) = struct.unpack_from("<I", raw, off)
            off += 4
            data = raw[off : off + n]
            if len(data) != n:
                raise MalformedProof("truncated proof bytes")
            off += n
            (m,) = struct.unpack_from("<I", raw, off)
            off += 4
            if off + m != len(raw):
                raise MalformedProof("trailing or missing header bytes")
            head = json.loads(raw[off:])
            return cls(
                kind=head["kind"],
                data=bytes(data),
                public_inputs=tuple(int(x) for x in head["public_inputs"]),
                backend=head["backend"],
                parameter_digest=Digest.from_hex(head["parameter_digest"]),
            )
        except MalformedProof:
            raise
        except (struct.error, ValueError, KeyError, TypeError) as exc:
            raise MalformedProof(str(exc)) from exc

    def to_base64(self) -> str:
        return base64.b64encode(self.to_bytes()).decode()

    @classmethod
    def from_base64(cls, text: str) -> "Proof":
        try:
            raw = base64.b64decode(text, validate=True)
        except ValueError as exc:
            raise MalformedProof("proof is not base64") from exc
        return cls.from_bytes(raw)

    def write(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def read(cls, path) -> "Proof":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


class Backend(Protocol):
    name: str

    def setup(self, batch_capacity: int, tree_depth: int) -> BackendParams: ...

    def prove_base(self, params: BackendParams, batch: Batch, spec: QuerySpec) -> Proof: ...

    def prove_step(self, params: BackendParams, prev: Proof, batch: Batch, spec: QuerySpec) -> Proof: ...

    def prove_reduce(self, params: BackendParams, last_step: Proof, claim: Claim) -> Proof: ...

    def verify(self, params: BackendParams, proof: Proof, claim: Claim) -> bool: ...

    def verify_step(self, params: BackendParams, proof: Proof) -> bool: ...


def final_inputs(st: StepStatement) -> list[int]:
    """Public inputs the reduce step derives from the last step statement."""
    spec = list(st.spec)
    finalize = spec[-1]
    num = st.running_count if finalize == 2 else st.running_sum
    den = st.running_count if finalize == 0 else 1
    digest = hash_elements(spec, domain_tag("spec"))
    return list(st.roots_acc.elements) + [st.running_count, num, den] + list(digest.elements)


def check_reduce_target(last_step: "Proof", claim: Claim) -> None:
    """A reduce proof can only state what the steps established."""
    if final_inputs(last_step.statement) != claim.public_inputs():
        raise WitnessUnsatisfiable("claim differs from the state the step proofs establish")


def check_shape(batch_capacity: int, tree_depth: int) -> None:
    if batch_capacity < 1 or tree_depth < 1 or tree_depth > 32:
        raise UnsupportedShape(f"shape ({batch_capacity}, {tree_depth}) not supported")


def path_bits(leaf_index: int, siblings: Sequence[Optional[Digest]], depth: int) -> dict:
    """Fixed-depth encoding of an opening as the circuit consumes it."""
    n = len(siblings)
    if n > depth:
        raise ShapeTooSmall(f"opening has {n} levels, circuit supports {depth}")
    if leaf_index < 0 or leaf_index >> n:
        raise WitnessUnsatisfiable("leaf index has bits beyond the opening length")
    zero = [0, 0, 0, 0]
    return {
        "siblings": [list(s.elements) if (l < n and s is not None) else zero
                     for l, s in enumerate(list(siblings) + [None] * (depth - n))],
        "bits": [bool((leaf_index >> l) & 1) if l < n else False for l in range(depth)],
        "active": [l < n for l in range(depth)],
        "missing": [l < n and siblings[l] is None for l in range(depth)],
    }
