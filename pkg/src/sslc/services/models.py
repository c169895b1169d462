"""Wire schemas shared by the HTTP apps and the in-process transport."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field, field_validator


def _hex_of_len(value: str, n: int, what: str) -> str:
    if len(value) != n:
        raise ValueError(f"{what} must be {n} hex characters")
    int(value, 16)
    return value.lower()


class CountRequest(BaseModel):
    account: str
    payload_tag: Optional[int] = Field(default=None, ge=0, lt=2**32)

    @field_validator("account")
    @classmethod
    def _account(cls, v: str) -> str:
        return _hex_of_len(v, 64, "account")


class CountResponse(BaseModel):
    count: Optional[int] = None


class RootsRequest(BaseModel):
    indices: list[int]


class RootEntry(BaseModel):
    index: int
    digest: Optional[str] = None


class RootsResponse(BaseModel):
    roots: list[RootEntry]


class QueryRequest(BaseModel):
    predicate: str = "ACCOUNT_TOUCH"
    map_kind: str = "SUM_AMOUNT_AND_COUNT"
    reduce_kind: str = "FOLD_SUM_COUNT"
    finalize: str = "AVERAGE"
    account: str
    payload_tag: Optional[int] = None

    @field_validator("account")
    @classmethod
    def _account(cls, v: str) -> str:
        return _hex_of_len(v, 64, "account")


class ResultModel(BaseModel):
    numerator: int
    denominator: int
    k: int


class RootModel(BaseModel):
    index: int
    digest: str


class ChainViewModel(BaseModel):
    roots: list[RootModel]
    k: int


class QueryResponse(BaseModel):
    result: ResultModel
    chain_view: ChainViewModel
    proof: str
    parameter_digest: str


class ErrorResponse(BaseModel):
    error: str
    detail: str = ""
