"""Seriation API endpoints."""
import logging

from fastapi import APIRouter, HTTPException, Query

from backend.models import (
    FitRecord, FitRequest, HealthResponse, MatrixPayload, OracleRecord, RunInfo,
    VerifyRecord, VerifyRequest,
)
from config import API_MAX_N, DB_PATH, ORACLE_MAX_N, SEARCH_MODE, SYMMETRY_TOLERANCE
from seriation.core import Dissimilarity, FitResult, TotalOrder, compatibility_violation, fit_for_order
from seriation.matrix_io import default_labels
from seriation.oracle import exact_fit
from seriation.solver import SEARCH_MODES, compare_search_modes, fit
from seriation.store import RunStore

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/api")
store = RunStore(DB_PATH)


def _load(payload: MatrixPayload, limit: int = API_MAX_N) -> tuple[Dissimilarity, tuple[str, ...]]:
    n = len(payload.matrix)
    if n > limit:
        raise HTTPException(status_code=413, detail=f"matrix too large: n={n}, limit is {limit}")
    try:
        d = Dissimilarity.from_square(payload.matrix, tolerance=SYMMETRY_TOLERANCE)
    except ValueError as e:
        raise HTTPException(status_code=422, detail=str(e))
    labels = tuple(payload.labels) if payload.labels is not None else default_labels(n)
    if len(labels) != n or len(set(labels)) != n:
        raise HTTPException(status_code=422, detail="labels must be distinct, one per row")
    return d, labels


def _from_cache(d: Dissimilarity, run: dict) -> FitResult:
    cached = fit_for_order(d, TotalOrder(tuple(run["permutation"])))
    return FitResult(order=cached.order, fitted=cached.fitted,
                     achieved_error=run["achieved_error"],
                     accepted_epsilon=run["accepted_epsilon"],
                     search_mode=run["search_mode"], modes_agree=run["modes_agree"])


@router.post("/fit", response_model=FitRecord)
def fit_matrix(req: FitRequest):
    """Fit a Robinsonian dissimilarity; plain requests are served from the run store when possible."""
    d, labels = _load(req)
    search = req.search or SEARCH_MODE
    if search not in SEARCH_MODES:
        raise HTTPException(status_code=422, detail=f"unknown search mode {search!r}")

    cacheable = not (req.trace or req.cross_check)
    run = store.get_cached_run(d, search) if cacheable else None
    if run:
        logger.info("Cache hit for %s (%s)", run["matrix_hash"][:12], search)
        result = _from_cache(d, run)
    else:
        result = compare_search_modes(d) if req.cross_check else fit(d, search)
        if cacheable:
            store.record_run(d, result, labels, source="api")
    return FitRecord.from_result(result, labels, trace=req.trace, fitted=req.fitted)


@router.post("/verify", response_model=VerifyRecord)
def verify_order(req: VerifyRequest):
    """Check whether an order is eps-compatible with the matrix."""
    d, labels = _load(req)
    index = {label: k for k, label in enumerate(labels)}
    try:
        order = TotalOrder(tuple(index[label] for label in req.order))
    except (KeyError, ValueError) as e:
        raise HTTPException(status_code=422, detail=f"order is not a permutation of the labels: {e}")
    if len(order) != d.n:
        raise HTTPException(status_code=422, detail=f"order has {len(order)} labels, matrix has {d.n}")
    violation = compatibility_violation(d, order)
    return VerifyRecord(n=d.n, epsilon=req.eps, violation=violation, passed=violation <= req.eps)


@router.post("/oracle", response_model=OracleRecord)
def oracle(req: MatrixPayload):
    """Exact optimum by exhaustive search; small matrices only."""
    d, labels = _load(req, limit=ORACLE_MAX_N)
    result = exact_fit(d)
    return OracleRecord(n=d.n, epsilon_star=result.epsilon_star,
                        witness=[labels[x] for x in result.witness_order],
                        order=list(result.witness_order.perm))


@router.get("/runs", response_model=list[RunInfo])
async def runs(limit: int = Query(50, ge=1, le=500, description="Most recent runs to return")):
    """Recorded fit runs, newest first."""
    return store.list_runs(limit)


@router.get("/health", response_model=HealthResponse)
async def health():
    return HealthResponse(status="ok", runs=store.count_runs())
