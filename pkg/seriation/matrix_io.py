"""Plain-text matrix files and order sidecars.

A matrix file holds either a full square matrix or the strict lower
triangle (row k has k entries, k = 1..n-1). Entries are separated by
whitespace and/or commas, ``#`` starts a comment, and two directives are
understood:

    %labels a b c d      element labels, one per element
    %format square       or ``lower``; otherwise the layout is detected
"""
import logging
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from config import SYMMETRY_TOLERANCE
from seriation.core import Dissimilarity, TotalOrder

logger = logging.getLogger(__name__)

_SEPARATORS = re.compile(r"[,\s]+")
FORMATS = ("square", "lower")


class MatrixFormatError(ValueError):
    """Malformed matrix or order file."""


@dataclass(frozen=True)
class LabelledMatrix:
    d: Dissimilarity
    labels: tuple[str, ...]


def default_labels(n: int) -> tuple[str, ...]:
    return tuple(str(k) for k in range(n))


def _split(line: str) -> list[str]:
    return [tok for tok in _SEPARATORS.split(line.strip()) if tok]


def parse_matrix(text: str, tolerance: float = SYMMETRY_TOLERANCE) -> LabelledMatrix:
    labels: list[str] | None = None
    layout: str | None = None
    rows: list[list[float]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("%"):
            name, _, rest = line[1:].partition(" ")
            if name == "labels":
                labels = _split(rest)
            elif name == "format":
                layout = rest.strip()
                if layout not in FORMATS:
                    raise MatrixFormatError(f"line {lineno}: unknown format {layout!r}")
            else:
                raise MatrixFormatError(f"line {lineno}: unknown directive %{name}")
            continue
        try:
            rows.append([float(tok) for tok in _split(line)])
        except ValueError:
            raise MatrixFormatError(f"line {lineno}: non-numeric entry in {line!r}") from None

    lengths = [len(r) for r in rows]
    if layout is None:
        if rows and all(k == len(rows) for k in lengths):
            layout = "square"
        elif lengths == list(range(1, len(rows) + 1)) and (rows or labels):
            layout = "lower"
        else:
            raise MatrixFormatError(f"row lengths {lengths} fit neither a square nor a lower-triangle matrix")

    if layout == "square":
        n = len(rows)
        bad = [k + 1 for k, length in enumerate(lengths) if length != n]
        if n == 0 or bad:
            raise MatrixFormatError(f"square matrix needs {n} entries per row (bad rows: {bad})")
        square = np.array(rows, dtype=float)
    else:
        n = len(rows) + 1 if rows else len(labels or ())
        if lengths != list(range(1, n)):
            raise MatrixFormatError(f"lower triangle needs row lengths 1..{n - 1}, got {lengths}")
        square = np.zeros((n, n))
        for k, row in enumerate(rows, start=1):
            square[k, :k] = row
            square[:k, k] = row

    if labels is not None and len(labels) != n:
        raise MatrixFormatError(f"{len(labels)} labels for {n} elements")
    if np.any(square < 0):
        raise MatrixFormatError("dissimilarities must be nonnegative")
    try:
        d = Dissimilarity.from_square(square, tolerance=tolerance)
    except ValueError as e:
        raise MatrixFormatError(str(e)) from None
    return LabelledMatrix(d, tuple(labels) if labels else default_labels(n))


def read_matrix(path: str | Path) -> LabelledMatrix:
    return parse_matrix(Path(path).read_text())


def format_matrix(d: Dissimilarity, labels=None, layout: str = "square") -> str:
    if layout not in FORMATS:
        raise ValueError(f"unknown layout {layout!r}")
    lines = []
    if labels is not None and tuple(labels) != default_labels(d.n):
        lines.append("%labels " + " ".join(labels))
    sq = d.square
    if layout == "square":
        lines.extend(" ".join(repr(float(v)) for v in row) for row in sq)
    else:
        lines.append("%format lower")
        lines.extend(" ".join(repr(float(v)) for v in sq[k, :k]) for k in range(1, d.n))
    return "\n".join(lines) + "\n"


def write_matrix(path: str | Path, d: Dissimilarity, labels=None, layout: str = "square"):
    Path(path).write_text(format_matrix(d, labels, layout))


def parse_order(text: str, labels: tuple[str, ...]) -> TotalOrder:
    index = {label: k for k, label in enumerate(labels)}
    ids = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        token = raw.split("#", 1)[0].strip()
        if not token:
            continue
        if token not in index:
            raise MatrixFormatError(f"order line {lineno}: unknown label {token!r}")
        ids.append(index[token])
    if len(ids) != len(labels):
        raise MatrixFormatError(f"order lists {len(ids)} labels, matrix has {len(labels)}")
    try:
        return TotalOrder(tuple(ids))
    except ValueError as e:
        raise MatrixFormatError(f"order is not a permutation of the {len(labels)} labels") from e


def read_order(path: str | Path, labels: tuple[str, ...]) -> TotalOrder:
    return parse_order(Path(path).read_text(), labels)


def format_order(order: TotalOrder, labels: tuple[str, ...]) -> str:
    return "".join(f"{labels[x]}\n" for x in order)


def write_order(path: str | Path, order: TotalOrder, labels: tuple[str, ...]):
    Path(path).write_text(format_order(order, labels))
