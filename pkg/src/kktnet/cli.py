"""Command-line front end: gen, train, eval, solve, gradcheck.

Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from typing import List, Optional, Sequence

import numpy as np

from .errors import KKTNetError, ValidationError

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

_NUMBER_LIST = re.compile(r"^-?[\d.eE+\-]+(,-?[\d.eE+\-]+)*$")
_LIST_FLAGS = {"--a", "--b", "--c", "--alpha"}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _floats(text: str) -> List[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals or not all(np.isfinite(vals)):
        raise argparse.ArgumentTypeError(f"expected finite numbers, got {text!r}")
    return vals


def _ints(text: str) -> List[int]:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("sizes must be positive integers")
    return vals


def _join_negative_lists(argv: Sequence[str]) -> List[str]:
    # argparse reads "-1,-1" as an option; glue it to its flag instead.
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in _LIST_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-") \
                and _NUMBER_LIST.match(argv[i + 1]):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kktnet", description="Learn LP primal/dual solutions from KKT residual losses.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a labeled LP dataset (JSONL)")
    g.add_argument("--count", type=int, required=True, help="number of accepted examples")
    g.add_argument("--seed", type=int, required=True, help="generation seed")
    g.add_argument("--out", required=True, help="output JSONL path")
    g.add_argument("--entry-range", type=float, default=10.0,
                   help="half-width of the uniform entry distribution before normalization (default 10)")
    g.add_argument("--workers", type=int, default=1, help="worker processes (output is identical for any value)")
    g.add_argument("--strip-labels", action="store_true",
                   help="omit x_star/lambda_star from the output (for label-free KKT training)")

    t = sub.add_parser("train", help="train a network under one loss configuration")
    t.add_argument("--data", required=True, help="training JSONL")
    t.add_argument("--loss", required=True, choices=("kkt", "data", "combined"), help="loss configuration")
    t.add_argument("--alpha", type=_floats, default=None,
                   help="KKT weights a1,a2,a3,a4 (default 0.1,0.1,0.2,0.6; zeros for --loss data)")
    t.add_argument("--beta", type=float, default=None, help="data-loss weight (default 0 for kkt, else 1)")
    t.add_argument("--epochs", type=int, default=200, help="training epochs (default 200)")
    t.add_argument("--batch", type=int, default=1024, help="minibatch size (default 1024)")
    t.add_argument("--lr", type=float, default=1e-3, help="Adam learning rate (default 1e-3)")
    t.add_argument("--hidden", type=_ints, default=[64, 64], help="hidden layer sizes (default 64,64)")
    t.add_argument("--seed", type=int, default=0, help="initialization and shuffling seed (default 0)")
    t.add_argument("--model-out", required=True, help="model JSON output path")
    t.add_argument("--curve-out", required=True, help="per-epoch loss CSV output path")

    e = sub.add_parser("eval", help="RMSE table and squared-error CDFs on a test set")
    e.add_argument("--model", required=True, help="model JSON")
    e.add_argument("--data", required=True, help="labeled test JSONL")
    e.add_argument("--out-dir", required=True, help="directory for CSV (and SVG) outputs")
    e.add_argument("--svg", action="store_true", help="also render SVG plots")
    e.add_argument("--curve", default=None, help="training curve CSV to plot alongside (with --svg)")

    s = sub.add_parser("solve", help="solve min c'x s.t. Ax <= b exactly (2 variables)")
    s.add_argument("--a", type=_floats, required=True, help="A row-major, comma-separated (m x 2)")
    s.add_argument("--b", type=_floats, required=True, help="b, comma-separated (length m)")
    s.add_argument("--c", type=_floats, required=True, help="c, comma-separated (length 2)")

    gc = sub.add_parser("gradcheck", help="compare analytic gradients with finite differences")
    gc.add_argument("--seed", type=int, default=0, help="model/batch seed (default 0)")
    gc.add_argument("--loss", choices=("kkt", "data", "combined"), default="combined",
                    help="loss configuration (default combined)")
    gc.add_argument("--tol", type=float, default=1e-5, help="pass threshold (default 1e-5)")
    return p


def _compact(v: float):
    return int(v) if float(v).is_integer() and abs(v) < 2 ** 53 else float(v)


def _cmd_gen(args) -> int:
    from .dataset import GenConfig, generate, write_jsonl

    examples = generate(GenConfig(args.count, args.seed, args.entry_range), workers=args.workers)
    if args.strip_labels:
        examples = [ex.without_truth() for ex in examples]
    write_jsonl(examples, args.out)
    print(f"wrote {len(examples)} records to {args.out}")
    return EXIT_OK


def _cmd_train(args) -> int:
    from .dataset import read_jsonl
    from .problem import LossWeights
    from .trainer import TrainConfig, preset_weights, train

    preset = preset_weights(args.loss)
    alphas = preset.alphas if args.alpha is None else tuple(args.alpha)
    if len(alphas) != 4:
        raise ValidationError("--alpha needs exactly four values")
    beta = preset.beta if args.beta is None else args.beta
    cfg = TrainConfig(args.loss, LossWeights(*alphas, beta=beta), epochs=args.epochs,
                      batch_size=args.batch, lr=args.lr, hidden_dims=tuple(args.hidden), seed=args.seed,
                      model_path=args.model_out, curve_path=args.curve_out)
    data = read_jsonl(args.data)
    _, curve = train(data, cfg)
    last = [float(v) for v in curve.rows[-1]]
    print(f"trained {cfg.epochs} epochs on {len(data)} examples; final L_KKT={last[5]!r} "
          f"L_Data={last[6]!r} L_total={last[7]!r}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    from .dataset import read_jsonl
    from .evaluator import emit_cdf_csv, emit_summary_json, emit_svg_plots, evaluate
    from .neural import MlpModel
    from .trainer import TrainingCurve

    model = MlpModel.load(args.model)
    report = evaluate(model, read_jsonl(args.data))
    emit_cdf_csv(report, args.out_dir)
    emit_summary_json(report, args.out_dir)
    if args.svg:
        curve = TrainingCurve.read(args.curve) if args.curve else None
        emit_svg_plots(report, args.out_dir, curve)
    for name, v in zip(report.components, report.rmse):
        print(f"rmse {name} {float(v)!r}")
    return EXIT_OK


def _cmd_solve(args) -> int:
    from .oracle import solve_lp
    from .problem import ProblemInstance

    m = len(args.b)
    if len(args.c) != 2 or len(args.a) != 2 * m:
        raise ValidationError(f"need --c of length 2 and --a of length 2*len(b)={2 * m}")
    inst = ProblemInstance.lp(np.reshape(args.a, (m, 2)), args.b, args.c)
    out = solve_lp(inst)
    doc = {"status": out.status.value}
    if out.optimal:
        doc["x"] = [_compact(v) for v in out.point.x]
        doc["lambda"] = [_compact(v) for v in out.point.lam]
    print(json.dumps(doc, separators=(",", ":")))
    return EXIT_OK


def _cmd_gradcheck(args) -> int:
    from .neural import gradcheck
    from .trainer import preset_weights

    err = gradcheck(args.seed, preset_weights(args.loss))
    ok = err < args.tol
    print(f"max relative error {err!r} ({'pass' if ok else 'FAIL'} at tol {args.tol!r})")
    return EXIT_OK if ok else EXIT_INVALID


_COMMANDS = {"gen": _cmd_gen, "train": _cmd_train, "eval": _cmd_eval,
             "solve": _cmd_solve, "gradcheck": _cmd_gradcheck}


def run(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_join_negative_lists(argv))
    except _UsageError as exc:
        sys.stderr.write(str(exc))
        return EXIT_INVALID
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return _COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"kktnet {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (KKTNetError, OSError) as exc:
        print(f"kktnet {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(run())
