"""SQLite store of fit runs, keyed by matrix content and search mode."""
import hashlib
import json
import logging
import sqlite3
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from seriation.core import Dissimilarity, FitResult

logger = logging.getLogger(__name__)

SCHEMA_SQL = """
CREATE TABLE IF NOT EXISTS fit_runs (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    matrix_hash TEXT NOT NULL,
    search_mode TEXT NOT NULL,
    n INTEGER NOT NULL,
    permutation TEXT NOT NULL,
    labels TEXT,
    accepted_epsilon REAL NOT NULL,
    achieved_error REAL NOT NULL,
    attempts INTEGER NOT NULL DEFAULT 0,
    modes_agree BOOLEAN,
    source TEXT,
    created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP,
    UNIQUE (matrix_hash, search_mode)
);

CREATE INDEX IF NOT EXISTS idx_fit_runs_created ON fit_runs(created_at);
"""

PRAGMAS = ("journal_mode=WAL", "synchronous=NORMAL")


class RunStore:
    """SQLite run store."""

    def __init__(self, db_path: Path):
        self.db_path = Path(db_path)
        self.db_path.parent.mkdir(parents=True, exist_ok=True)

    @contextmanager
    def connect(self):
        """Context manager for database connections."""
        conn = sqlite3.connect(str(self.db_path), timeout=30)
        conn.row_factory = sqlite3.Row
        for pragma in PRAGMAS:
            conn.execute(f"PRAGMA {pragma}")
        try:
            yield conn
            conn.commit()
        except Exception:
            conn.rollback()
            raise
        finally:
            conn.close()

    def initialize(self):
        with self.connect() as conn:
            conn.executescript(SCHEMA_SQL)
        logger.info("Run store initialized at %s", self.db_path)

    @staticmethod
    def compute_matrix_hash(d: Dissimilarity) -> str:
        """SHA256 of n and the upper-triangle values, stable across runs."""
        raw = repr((d.n, tuple(float(v) for v in np.asarray(d.values())))).encode("utf-8")
        return hashlib.sha256(raw).hexdigest()

    def record_run(self, d: Dissimilarity, result: FitResult, labels=None, source: str | None = None) -> str:
        matrix_hash = self.compute_matrix_hash(d)
        sql = """
            INSERT OR REPLACE INTO fit_runs
                (matrix_hash, search_mode, n, permutation, labels, accepted_epsilon,
                 achieved_error, attempts, modes_agree, source, created_at)
            VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, datetime('now'))
        """
        with self.connect() as conn:
            conn.execute(sql, (
                matrix_hash, result.search_mode, d.n, json.dumps(list(result.order.perm)),
                json.dumps(list(labels)) if labels is not None else None,
                result.accepted_epsilon, result.achieved_error, len(result.attempts),
                result.modes_agree, source,
            ))
        logger.debug("Recorded run %s (%s)", matrix_hash[:12], result.search_mode)
        return matrix_hash

    def get_cached_run(self, d: Dissimilarity, search_mode: str) -> dict | None:
        with self.connect() as conn:
            row = conn.execute(
                "SELECT * FROM fit_runs WHERE matrix_hash = ? AND search_mode = ?",
                (self.compute_matrix_hash(d), search_mode),
            ).fetchone()
            return _decode(row) if row else None

    def list_runs(self, limit: int = 50) -> list[dict]:
        with self.connect() as conn:
            rows = conn.execute(
                "SELECT * FROM fit_runs ORDER BY created_at DESC, id DESC LIMIT ?", (limit,)
            ).fetchall()
            return [_decode(r) for r in rows]

    def count_runs(self) -> int:
        with self.connect() as conn:
            return conn.execute("SELECT COUNT(*) AS total FROM fit_runs").fetchone()["total"]


def _decode(row: sqlite3.Row) -> dict:
    run = dict(row)
    run["permutation"] = json.loads(run["permutation"])
    run["labels"] = json.loads(run["labels"]) if run["labels"] else None
    if run["modes_agree"] is not None:
        run["modes_agree"] = bool(run["modes_agree"])
    return run
