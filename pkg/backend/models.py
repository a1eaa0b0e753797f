"""Pydantic models for API requests and responses."""
from pydantic import BaseModel, Field

from seriation.records import AttemptRecord, FitRecord, OracleRecord, VerifyRecord

__all__ = [
    "AttemptRecord", "FitRecord", "OracleRecord", "VerifyRecord",
    "MatrixPayload", "FitRequest", "VerifyRequest", "RunInfo", "HealthResponse",
]


class MatrixPayload(BaseModel):
    matrix: list[list[float]] = Field(..., description="Full square dissimilarity matrix")
    labels: list[str] | None = None


class FitRequest(MatrixPayload):
    search: str | None = None
    trace: bool = False
    fitted: bool = False
    cross_check: bool = False


class VerifyRequest(MatrixPayload):
    order: list[str]
    eps: float = Field(..., ge=0)


class RunInfo(BaseModel):
    id: int
    matrix_hash: str
    search_mode: str
    n: int
    permutation: list[int]
    labels: list[str] | None = None
    accepted_epsilon: float
    achieved_error: float
    attempts: int = 0
    modes_agree: bool | None = None
    source: str | None = None
    created_at: str | None = None


class HealthResponse(BaseModel):
    status: str
    runs: int
