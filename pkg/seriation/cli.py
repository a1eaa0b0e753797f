"""Command-line front end.

    python -m seriation fit MATRIX [--search linear] [--trace] [--emit-fitted] [--heatmap OUT.ppm]
    python -m seriation verify MATRIX ORDER EPS
    python -m seriation oracle MATRIX
    python -m seriation gen N [--profile envelope] --eta 0.1 --seed 7 --out inst.txt

Exit codes: 0 ok, 1 verification failed, 2 usage, parse error or oracle refusal.
"""
import argparse
import logging
import sys
from pathlib import Path

from config import DB_PATH, LOG_LEVEL, SEARCH_MODE
from seriation.core import compatibility_violation
from seriation.heatmap import emit_heatmap
from seriation.matrix_io import MatrixFormatError, read_matrix, read_order, write_matrix, write_order
from seriation.oracle import PROFILES, OracleLimitError, exact_fit, gen_robinson, perturb
from seriation.records import FitRecord, OracleRecord, VerifyRecord
from seriation.solver import SEARCH_MODES, compare_search_modes, fit
from seriation.store import RunStore

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2


def _emit(record, as_json: bool):
    sys.stdout.write(record.model_dump_json(indent=2) + "\n" if as_json else record.to_text())


def cmd_fit(args) -> int:
    matrix = read_matrix(args.matrix)
    if args.cross_check:
        result = compare_search_modes(matrix.d)
    else:
        result = fit(matrix.d, args.search, dump_dir=args.dump_dir)
    record = FitRecord.from_result(result, matrix.labels, trace=args.trace, fitted=args.emit_fitted)
    _emit(record, args.json)
    if args.heatmap:
        emit_heatmap(result.fitted if args.emit_fitted else matrix.d, result.order, args.heatmap)
        logger.info("Heatmap written to %s", args.heatmap)
    if args.store:
        store = RunStore(DB_PATH)
        store.initialize()
        store.record_run(matrix.d, result, matrix.labels, source=str(args.matrix))
    return EXIT_OK


def cmd_verify(args) -> int:
    matrix = read_matrix(args.matrix)
    order = read_order(args.order, matrix.labels)
    if len(order) != matrix.d.n:
        raise MatrixFormatError(f"order has {len(order)} labels, matrix has {matrix.d.n}")
    violation = compatibility_violation(matrix.d, order)
    record = VerifyRecord(n=matrix.d.n, epsilon=args.eps, violation=violation,
                          passed=violation <= args.eps)
    _emit(record, args.json)
    return EXIT_OK if record.passed else EXIT_VERIFY_FAILED


def cmd_oracle(args) -> int:
    matrix = read_matrix(args.matrix)
    result = exact_fit(matrix.d)
    record = OracleRecord(n=matrix.d.n, epsilon_star=result.epsilon_star,
                          witness=[matrix.labels[x] for x in result.witness_order],
                          order=list(result.witness_order.perm))
    _emit(record, args.json)
    return EXIT_OK


def cmd_gen(args) -> int:
    planted = gen_robinson(args.n, args.seed, profile=args.profile)
    d = perturb(planted.d, args.eta, None if args.seed is None else args.seed + 1)
    labels = tuple(str(k) for k in range(args.n))
    out = Path(args.out)
    sidecar = Path(f"{out}.order")
    write_matrix(out, d, labels)
    write_order(sidecar, planted.hidden_order, labels)
    sys.stdout.write(f"matrix: {out}\norder: {sidecar}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seriation",
                                     description="Robinsonian l∞ fitting of dissimilarity matrices")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a Robinsonian dissimilarity")
    p.add_argument("matrix", type=Path)
    p.add_argument("--search", choices=SEARCH_MODES, default=SEARCH_MODE)
    p.add_argument("--emit-fitted", action="store_true", help="print the fitted matrix")
    p.add_argument("--trace", action="store_true", help="print every epsilon attempt")
    p.add_argument("--heatmap", type=Path, help="write a PPM heatmap of the reordered matrix")
    p.add_argument("--cross-check", action="store_true", help="run both search modes and compare")
    p.add_argument("--store", action="store_true", help="record the run in the run store")
    p.add_argument("--dump-dir", type=Path, help="write graphs and 2-SAT formulas of the accepted epsilon")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("verify", help="check an order against an epsilon")
    p.add_argument("matrix", type=Path)
    p.add_argument("order", type=Path)
    p.add_argument("eps", type=float)
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("oracle", help="exact optimum by exhaustive search")
    p.add_argument("matrix", type=Path)
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=cmd_oracle)

    p = sub.add_parser("gen", help="generate a planted Robinsonian instance")
    p.add_argument("n", type=int)
    p.add_argument("--eta", type=float, default=0.0, help="uniform noise amplitude")
    p.add_argument("--profile", choices=PROFILES, default="line",
                   help="line: concave profile of line gaps; envelope: subinterval maximum of random integers")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=cmd_gen)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else LOG_LEVEL,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    )
    try:
        return args.handler(args)
    except (MatrixFormatError, OracleLimitError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
