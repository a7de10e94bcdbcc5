"""Command-line pipeline: predict, trace, score, evaluate, select.

Each subcommand reads and writes only the on-disk formats (manifest JSON,
NNWB weights, TBIN tensors, CSV tables), so stages compose through files.
Exit codes: 0 success, 2 for bad invocations, 1 for everything that goes
wrong while processing well-formed ones.  Errors print one line to stderr,
``<category>: <message>``.

Outputs are deterministic: rerunning a command with the same flags and files
produces byte-identical output at any ``--threads`` value, and stochastic
scoring is governed entirely by ``--seed``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import engine, evaluation, formats, scoring
from .errors import PrioritizerError, UsageError
from .tensor import Tensor


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", required=True, help="model manifest JSON")
    p.add_argument("--weights", required=True, help="NNWB weights blob")
    p.add_argument("--inputs", required=True, help="TBIN batch of inputs [N, ...]")
    p.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prioritizer",
        description="Prioritize unlabeled test inputs for a trained network by sentiment scores.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", help="run the model over a batch of inputs")
    _add_model_flags(p)
    p.add_argument("--out", required=True, help="TBIN of model outputs [N, ...]")

    p = sub.add_parser("trace", help="capture activation traces at named layers")
    _add_model_flags(p)
    p.add_argument("--layers", required=True, help="comma-separated layer names")
    p.add_argument("--out", required=True, help="TBIN of traces [N, D]")
    p.add_argument("--classes", required=True, help="u32 TBIN of predicted classes [N]")

    p = sub.add_parser("score", help="score inputs by a sentiment method")
    p.add_argument("--method", required=True, choices=scoring.SCORE_METHODS)
    _add_model_flags(p)
    p.add_argument("--samples", type=int, default=None, help="stochastic passes (dropout only, default 10)")
    p.add_argument("--seed", type=int, default=None, help="stochastic seed (dropout only, default 42)")
    p.add_argument("--train-traces", default=None, help="TBIN of training traces (dsa only)")
    p.add_argument("--train-classes", default=None, help="u32 TBIN of training trace classes (dsa only)")
    p.add_argument("--layers", default=None, help="comma-separated trace layers (dsa only; default: layer feeding the softmax)")
    p.add_argument("--out", required=True, help="scores CSV")

    p = sub.add_parser("evaluate", help="rank by score and measure prioritization quality")
    p.add_argument("--scores", required=True, help="scores CSV")
    p.add_argument("--predictions", required=True, help="TBIN of model outputs")
    p.add_argument("--labels", required=True, help="ground-truth TBIN (u32 classes or f32 targets)")
    p.add_argument("--task", required=True, choices=("classification", "regression"))
    p.add_argument("--threshold", type=float, default=None,
                   help="regression error threshold on MAE (default 0.25)")
    p.add_argument("--out", required=True, help="curve CSV")
    p.add_argument("--report", default=None, help="JSON report path (default: curve path with .json)")

    p = sub.add_parser("select", help="export the top-priority input indices")
    p.add_argument("--scores", required=True, help="scores CSV")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--fraction", type=float, default=None, help="select ceil(fraction * n) inputs")
    group.add_argument("--k", type=int, default=None, help="select exactly k inputs")
    p.add_argument("--out", required=True, help="CSV of selected indices, priority order")

    return parser


def _parse_layers(arg: str) -> tuple[str, ...]:
    names = tuple(part for part in arg.split(","))
    if any(not name for name in names):
        raise UsageError("--layers must be a comma-separated list of non-empty layer names")
    return names


def _check_threads(threads: int) -> int:
    if threads < 1:
        raise UsageError(f"--threads must be >= 1, got {threads}")
    return threads


def _load_model(args) -> formats.ModelManifest:
    return formats.load_model(args.model, args.weights)


def _cmd_predict(args) -> int:
    threads = _check_threads(args.threads)
    model = _load_model(args)
    inputs = formats.load_tensor_file(args.inputs)
    outputs = engine.predict_batch(model, inputs, threads=threads)
    formats.save_tensor_file(Tensor(outputs), args.out)
    return 0


def _cmd_trace(args) -> int:
    threads = _check_threads(args.threads)
    model = _load_model(args)
    inputs = formats.load_tensor_file(args.inputs)
    traces = engine.capture_traces(model, inputs, _parse_layers(args.layers), threads=threads)
    formats.save_tensor_file(Tensor(traces.traces.astype("float32")), args.out)
    formats.save_index_file(traces.classes, args.classes)
    return 0


def _cmd_score(args) -> int:
    threads = _check_threads(args.threads)
    if args.method != "dropout":
        for flag, value in (("--samples", args.samples), ("--seed", args.seed)):
            if value is not None:
                raise UsageError(f"{flag} applies only to --method dropout")
    if args.method != "dsa":
        for flag, value in (("--train-traces", args.train_traces),
                            ("--train-classes", args.train_classes),
                            ("--layers", args.layers)):
            if value is not None:
                raise UsageError(f"{flag} applies only to --method dsa")

    model = _load_model(args)
    inputs = formats.load_tensor_file(args.inputs)

    if args.method == "softmax":
        values = scoring.score_softmax(model, inputs, threads=threads)
    elif args.method == "dropout":
        samples = 10 if args.samples is None else args.samples
        seed = 42 if args.seed is None else args.seed
        if samples < 1:
            raise UsageError(f"--samples must be >= 1, got {samples}")
        cfg = scoring.McConfig(samples=samples, seed=seed)
        values = scoring.score_dropout(model, inputs, cfg, threads=threads)
    else:
        if args.train_traces is None or args.train_classes is None:
            raise UsageError("--method dsa requires --train-traces and --train-classes")
        train_traces = formats.load_tensor_file(args.train_traces)
        train_classes = formats.load_index_file(args.train_classes)
        index = scoring.build_dsa_index(train_traces.array, train_classes)
        layers = (_parse_layers(args.layers) if args.layers is not None
                  else (engine.default_trace_layer(model),))
        values = scoring.score_dsa(model, inputs, layers, index, threads=threads)

    scoring.write_scores(scoring.records_for(args.method, values), args.out)
    return 0


def _cmd_evaluate(args) -> int:
    if args.task == "classification" and args.threshold is not None:
        raise UsageError("--threshold applies only to --task regression")
    records = scoring.read_scores(args.scores)
    predictions = formats.load_tensor_file(args.predictions).array
    n = predictions.shape[0]
    predictions = predictions.reshape(n, -1)

    if args.task == "classification":
        labels = formats.load_index_file(args.labels)
        correctness = evaluation.derive_correctness(predictions, labels, "classification")
    else:
        threshold = 0.25 if args.threshold is None else args.threshold
        labels = formats.load_tensor_file(args.labels).array
        correctness = evaluation.derive_correctness(predictions, labels, "regression",
                                                    threshold=threshold)

    report = evaluation.evaluate_prioritization(records, correctness)
    evaluation.write_curve(report, correctness, args.out)
    report_path = args.report if args.report is not None else str(Path(args.out).with_suffix(".json"))
    evaluation.write_report(report, report_path)
    print(f"apfd_percent={report.apfd_percent:.2f}")
    return 0


def _cmd_select(args) -> int:
    records = scoring.read_scores(args.scores)
    if args.fraction is not None and not (0.0 < args.fraction <= 1.0):
        raise UsageError(f"--fraction must be in (0, 1], got {args.fraction}")
    if args.k is not None and args.k < 1:
        raise UsageError(f"--k must be >= 1, got {args.k}")
    indices = evaluation.select_top(records, fraction=args.fraction, k=args.k)
    evaluation.write_indices(indices, args.out)
    return 0


_HANDLERS = {
    "predict": _cmd_predict,
    "trace": _cmd_trace,
    "score": _cmd_score,
    "evaluate": _cmd_evaluate,
    "select": _cmd_select,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except UsageError as exc:
        print(f"{exc.category}: {exc}", file=sys.stderr)
        return 2
    except PrioritizerError as exc:
        print(f"{exc.category}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
