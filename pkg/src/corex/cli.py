"""Command-line interface.

Commands: generate, fit, transform, score, export-graph. Exit codes:
0 success, 1 usage error, 2 data error, 3 unsupported configuration.
COREX_THREADS caps the numeric thread pools for the whole command. All
reported numbers are nats with six decimal places; model files keep full
precision so reloads behave identically.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .data import (
    BlockGaussianSpec,
    LatentTreeSpec,
    _atomic_write_text,
    generate,
    load_csv,
    write_csv,
)
from .errors import CorexError, DataError, UnsupportedConfigError
from .graph import build_graph, graph_to_dot
from .hierarchy import STOP_THRESHOLD, CorexHierarchy
from .layer import CorexLayer
from .serialize import load_model, save_model


class UsageError(CorexError):
    """Bad flags or arguments; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # noqa: A003 - argparse hook
        raise UsageError(message)


def _parse_layers(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise UsageError(f"--layers expects comma-separated integers, got {text!r}")
    if not sizes or any(m < 1 for m in sizes):
        raise UsageError("--layers entries must be positive integers")
    return sizes


def _fmt(value: float) -> str:
    value = float(value)
    if abs(value) < 5e-7:
        value = 0.0
    return f"{value:.6f}"


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="corex", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic benchmark CSV")
    gen_sub = gen.add_subparsers(dest="family", required=True)
    block = gen_sub.add_parser("block", help="block-structured Gaussian data")
    block.add_argument("--blocks", type=int, default=4)
    block.add_argument("--size", type=int, default=100, help="columns per block")
    block.add_argument("--noise", type=float, default=0.1)
    block.add_argument("--overlap", action="store_true",
                       help="drive the last block by the sum of the first two")
    block.add_argument("--samples", type=int, default=100)
    block.add_argument("--seed", type=int, default=0)
    block.add_argument("-o", "--output", default="data.csv")
    tree = gen_sub.add_parser("tree", help="latent tree with binary leaves")
    tree.add_argument("--depth", type=int, default=2)
    tree.add_argument("--branching", type=int, default=2)
    tree.add_argument("--leaves", type=int, default=100)
    tree.add_argument("--flip", type=float, default=0.1)
    tree.add_argument("--samples", type=int, default=100)
    tree.add_argument("--seed", type=int, default=0)
    tree.add_argument("-o", "--output", default="data.csv")

    fit = sub.add_parser("fit", help="fit a hierarchy and save the model")
    fit.add_argument("data", help="CSV data path")
    fit.add_argument("--layers", default="1", help="factor counts, e.g. 4,1")
    fit.add_argument("--cardinality", type=int, default=2)
    fit.add_argument("--alpha", choices=("tree", "unique"), default="tree")
    fit.add_argument("--restarts", type=int, default=1)
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--max-iter", type=int, default=100)
    fit.add_argument("--tol", type=float, default=1e-6)
    fit.add_argument("--stop-threshold", type=float, default=STOP_THRESHOLD)
    fit.add_argument("--upper-bound", action="store_true",
                     help="also report the discrete upper bound")
    fit.add_argument("--missing-token", default="NA")
    fit.add_argument("-o", "--output", default="model.json")

    tr = sub.add_parser("transform", help="hard labels for data under a model")
    tr.add_argument("model")
    tr.add_argument("data")
    tr.add_argument("--missing-token", default="NA")
    tr.add_argument("-o", "--output", default=None, help="default: stdout")

    sc = sub.add_parser("score", help="per-sample explained correlation")
    sc.add_argument("model")
    sc.add_argument("data")
    sc.add_argument("--missing-token", default="NA")
    sc.add_argument("-o", "--output", default=None, help="default: stdout")

    ex = sub.add_parser("export-graph", help="DOT and JSON structure graph")
    ex.add_argument("model")
    ex.add_argument("--edge-threshold", type=float, default=0.0)
    ex.add_argument("-o", "--output", default="graph",
                    help="basename for .dot and .json files")
    return parser


def cmd_generate(args) -> int:
    if args.family == "block":
        spec = BlockGaussianSpec(
            num_blocks=args.blocks,
            block_size=args.size,
            noise_sd=args.noise,
            dependency="summed_overlap" if args.overlap else "independent",
            n_samples=args.samples,
            seed=args.seed,
        )
    else:
        spec = LatentTreeSpec(
            depth=args.depth,
            branching=args.branching,
            leaf_count=args.leaves,
            flip_prob=args.flip,
            n_samples=args.samples,
            seed=args.seed,
        )
    data, truth = generate(spec)
    write_csv(data, args.output)
    truth_path = Path(args.output).with_suffix(".truth.json")
    _atomic_write_text(truth_path, json.dumps(truth.to_dict(), indent=1))
    print(f"wrote {data.n_samples} samples x {data.n_variables} columns "
          f"to {args.output}")
    print(f"wrote ground truth to {truth_path}")
    return 0


def _load_data(path: str, missing_token: str):
    return load_csv(path, missing_token=missing_token)


def cmd_fit(args) -> int:
    sizes = _parse_layers(args.layers)
    if args.cardinality < 2:
        raise UsageError("--cardinality must be at least 2")
    data = _load_data(args.data, args.missing_token)
    hier = CorexHierarchy(
        layer_factors=sizes,
        cardinality=args.cardinality,
        alpha_policy=args.alpha,
        max_iter=args.max_iter,
        tol=args.tol,
        restarts=args.restarts,
        seed=args.seed,
        stop_threshold=args.stop_threshold,
    )
    hier.fit(data)
    upper = hier.tc_upper_bound(data) if args.upper_bound else None
    save_model(hier, args.output)
    stem = Path(args.output)
    for k, layer in enumerate(hier.layers_, start=1):
        trace_path = stem.with_suffix(f".trace{k}.csv")
        lines = ["iteration,objective," + ",".join(
            f"factor_{j}" for j in range(int(layer.n_factors)))]
        for it, total in enumerate(layer.trace_):
            per = layer.trace_factors_[it]
            lines.append(
                f"{it},{_fmt(total)}," + ",".join(_fmt(v) for v in per)
            )
        _atomic_write_text(trace_path, "\n".join(lines) + "\n")
    print(f"model written to {args.output}")
    print(f"layers fitted: {hier.n_layers_}")
    print(f"lower bound: {_fmt(hier.lower_bound_)}")
    if upper is not None:
        print(f"upper bound: {_fmt(upper)}")
    for k, layer in enumerate(hier.layers_, start=1):
        contrib = " ".join(
            f"Y{k}_{j}={_fmt(v)}" for j, v in enumerate(layer.tc_per_factor_)
        )
        print(f"layer {k} contribution: {_fmt(layer.tc_)} ({contrib})")
    return 0


def _emit(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        _atomic_write_text(output, text)
        print(f"wrote {output}")


def cmd_transform(args) -> int:
    model = load_model(args.model)
    data = _load_data(args.data, args.missing_token)
    if isinstance(model, CorexHierarchy):
        per_layer = model.layer_labels(data)
    else:
        per_layer = [model.transform(data)]
    header: list[str] = []
    for k, hard in enumerate(per_layer, start=1):
        header.extend(f"Y{k}_{j}" for j in range(hard.shape[1]))
    stacked = np.hstack(per_layer)
    lines = [",".join(header)]
    lines.extend(",".join(str(int(v)) for v in row) for row in stacked)
    _emit("\n".join(lines) + "\n", args.output)
    return 0


def cmd_score(args) -> int:
    model = load_model(args.model)
    data = _load_data(args.data, args.missing_token)
    layer = model.layers_[0] if isinstance(model, CorexHierarchy) else model
    log_z = layer.score_factors(data)
    total = log_z.sum(axis=1)
    header = "sample,total," + ",".join(
        f"factor_{j}" for j in range(log_z.shape[1])
    )
    lines = [header]
    for idx in range(log_z.shape[0]):
        lines.append(
            f"{idx},{_fmt(total[idx])},"
            + ",".join(_fmt(v) for v in log_z[idx])
        )
    _emit("\n".join(lines) + "\n", args.output)
    return 0


def cmd_export_graph(args) -> int:
    model = load_model(args.model)
    if args.edge_threshold < 0:
        raise UsageError("--edge-threshold must be non-negative")
    graph = build_graph(model, edge_threshold=args.edge_threshold)
    base = Path(args.output)
    dot_path = base.with_suffix(".dot")
    json_path = base.with_suffix(".json")
    _atomic_write_text(dot_path, graph_to_dot(graph))
    _atomic_write_text(json_path, json.dumps(graph, indent=1, allow_nan=False))
    print(f"wrote {dot_path} and {json_path} "
          f"({len(graph['nodes'])} nodes, {len(graph['edges'])} edges)")
    return 0


_COMMANDS = {
    "generate": cmd_generate,
    "fit": cmd_fit,
    "transform": cmd_transform,
    "score": cmd_score,
    "export-graph": cmd_export_graph,
}


@contextlib.contextmanager
def _thread_cap():
    value = os.environ.get("COREX_THREADS")
    if value is None or value == "":
        yield
        return
    try:
        n = int(value)
    except ValueError:
        raise UsageError(f"COREX_THREADS must be an integer, got {value!r}")
    if n < 1:
        raise UsageError("COREX_THREADS must be positive")
    with threadpool_limits(limits=n):
        yield


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        with _thread_cap():
            return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except UnsupportedConfigError as exc:
        print(f"unsupported configuration: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
