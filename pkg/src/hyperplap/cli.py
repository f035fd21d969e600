"""Command-line entry point: ``hyperplap <subcommand> [flags]``.

Exit codes: 0 success, 2 invalid input or flags, 1 failure while running.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .energy import gamma_check, spike_index
from .geometry import EmptyInputError, LabelConstraints, ParseError, load_labels, load_point_cloud, sample_uniform_1d
from .hypergraph import WeightScheme, build_structure, parse_graph_spec
from .inpaint import (PatchConfig, inpaint, load_mask_csv, mean_fill, psnr, random_mask, read_pgm,
                      ssim, table_psnr, write_pgm)
from .prox import oracle_suite
from .solver import SaddleProblem, SolverConfig, run
from .ssl import accuracy, load_class_labels, one_vs_rest

DEFAULT_LABEL_SITES = (0.1, 0.25, 0.4, 0.55, 0.7, 0.9)
DEFAULT_LABEL_VALUES = (0.0, 1.0, 0.3, 0.8, 0.1, 0.6)

TEST_FUNCTIONS = {
    "x": (lambda x: x, lambda x: np.ones_like(x)),
    "const": (lambda x: np.zeros_like(x), lambda x: np.zeros_like(x)),
    "x2": (lambda x: x * x, lambda x: 2 * x),
    "sin": (lambda x: np.sin(2 * np.pi * x), lambda x: 2 * np.pi * np.cos(2 * np.pi * x)),
}

# bookkeeping keys left out of dumped configs
_NON_CONFIG = {"config", "dump_config", "func"}


class UsageError(ValueError):
    """Invalid flag combination, reported before any computation."""


def _point(text):
    n, sep, param = text.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected n:param, got {text!r}")
    try:
        return [int(n), float(param)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected n:param, got {text!r}") from None


def _graph(text):
    try:
        parse_graph_spec(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


def _weights(text):
    try:
        WeightScheme.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


def _solver_flags(sp, epochs):
    sp.add_argument("--epochs", type=int, default=epochs)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--step-ratio", type=float, default=None,
                    help="tau/sigma; default 1/number of edges")


def build_parser():
    parser = argparse.ArgumentParser(prog="hyperplap",
                                     description="Hypergraph p-Laplacian interpolation tools")
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--config", help="JSON file of flag values; explicit flags win")
    common.add_argument("--dump-config", help="write the effective configuration as JSON")
    common.add_argument("--out-dir", default=".", help="directory for relative output paths")
    common.add_argument("--threads", type=int, default=1)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("interp1d", parents=[common], help="1-d interpolation, GpL vs HpL")
    sp.add_argument("--n", type=int, default=1280)
    sp.add_argument("--labels", help="CSV of index,value; default six fixed sites")
    sp.add_argument("--graph", type=_graph, default="eps:0.048")
    sp.add_argument("--p", type=float, default=2.0)
    _solver_flags(sp, 300)
    sp.add_argument("--out", default="interp1d.csv")
    sp.add_argument("--metrics-out", default="interp1d.json")
    sp.set_defaults(func=cmd_interp1d)

    sp = sub.add_parser("gamma-check", parents=[common], help="discrete vs continuum energy")
    sp.add_argument("--function", choices=sorted(TEST_FUNCTIONS), default="x")
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--kind", choices=("eps", "knn"), default="eps")
    sp.add_argument("--point", type=_point, action="append", dest="points",
                    help="schedule row n:param (repeatable)")
    sp.add_argument("--repeats", type=int, default=1)
    sp.add_argument("--out", default="gamma.csv")
    sp.set_defaults(func=cmd_gamma_check)

    sp = sub.add_parser("ssl", parents=[common], help="one-vs-rest classification")
    sp.add_argument("--points", required=False)
    sp.add_argument("--labels", required=False, help="CSV of index,class")
    sp.add_argument("--truth", help="CSV of index,class for accuracy")
    sp.add_argument("--method", choices=("gpl", "hpl"), default="hpl")
    sp.add_argument("--graph", type=_graph, default="knn:10")
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--weights", type=_weights, default="homogeneous")
    _solver_flags(sp, 500)
    sp.add_argument("--out", default="predictions.csv")
    sp.add_argument("--metrics-out", default="ssl.json")
    sp.set_defaults(func=cmd_ssl)

    sp = sub.add_parser("inpaint", parents=[common], help="patch-based inpainting")
    sp.add_argument("--image")
    sp.add_argument("--mask", help="CSV of observed i,j")
    sp.add_argument("--sample-rate", type=float)
    sp.add_argument("--method", choices=("gpl", "hpl"), default="hpl")
    sp.add_argument("--s1", type=int, default=11)
    sp.add_argument("--s2", type=int, default=11)
    sp.add_argument("--lambda", dest="lam", type=float, default=10.0)
    sp.add_argument("--knn", type=int, default=10)
    sp.add_argument("--K", type=int, default=None)
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--weights", type=_weights, default=None)
    _solver_flags(sp, 200)
    sp.add_argument("--out", default="inpainted.pgm")
    sp.add_argument("--metrics-out", default="inpaint.json")
    sp.set_defaults(func=cmd_inpaint)

    sp = sub.add_parser("prox-test", parents=[common], help="prox self-test against a reference")
    sp.add_argument("--instances", type=int, default=1000)
    sp.add_argument("--out", default="prox_test.json")
    sp.set_defaults(func=cmd_prox_test)
    return parser


def _subparser(parser, name):
    for action in parser._subparsers._group_actions:
        if name in action.choices:
            return action.choices[name]
    raise KeyError(name)


def parse_args(argv=None):
    """Parse flags, folding in ``--config`` values as defaults."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config {args.config}: {exc}")
        if not isinstance(cfg, dict):
            parser.error("config must be a JSON object")
        if cfg.get("command", args.command) != args.command:
            parser.error(f"config is for {cfg['command']!r}, not {args.command!r}")
        sp = _subparser(parser, args.command)
        known = {a.dest for a in sp._actions}
        unknown = set(cfg) - known - {"command"}
        if unknown:
            parser.error(f"unknown config keys: {', '.join(sorted(unknown))}")
        sp.set_defaults(**{k: v for k, v in cfg.items() if k != "command"})
        args = parser.parse_args(argv)
    return args


def config_dict(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NON_CONFIG}


def _path(args, name):
    p = Path(name)
    return p if p.is_absolute() else Path(args.out_dir) / p


def _write_json(path, payload):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _finite(x):
    return x if math.isfinite(x) else None


def _solver_config(args):
    return SolverConfig(epochs=args.epochs, tol=args.tol, seed=args.seed,
                        step_ratio=args.step_ratio)


def _validate(args):
    def positive(name, value):
        if value is not None and not value > 0:
            raise UsageError(f"--{name.replace('_', '-')} must be positive")

    if args.threads < 1:
        raise UsageError("--threads must be at least 1")
    if hasattr(args, "p") and not args.p >= 1:
        raise UsageError("--p must be >= 1")
    if hasattr(args, "epochs"):
        positive("epochs", args.epochs)
        positive("tol", args.tol)
        positive("step_ratio", args.step_ratio)
    if args.command == "interp1d":
        if args.n < 2:
            raise UsageError("--n must be at least 2")
        kind, val = parse_graph_spec(args.graph)
        positive("graph", val)
    elif args.command == "gamma-check":
        if not args.points:
            raise UsageError("give at least one --point n:param")
        if args.repeats < 1:
            raise UsageError("--repeats must be at least 1")
        for n, param in args.points:
            if n < 2 or not param > 0:
                raise UsageError(f"bad schedule row {n}:{param}")
    elif args.command == "ssl":
        if not args.points or not args.labels:
            raise UsageError("ssl needs --points and --labels")
    elif args.command == "inpaint":
        if not args.image:
            raise UsageError("inpaint needs --image")
        if (args.mask is None) == (args.sample_rate is None):
            raise UsageError("give exactly one of --mask and --sample-rate")
        if args.sample_rate is not None and not 0 < args.sample_rate <= 1:
            raise UsageError("--sample-rate must lie in (0, 1]")
        if args.s1 < 1 or args.s2 < 1 or args.s1 % 2 == 0 or args.s2 % 2 == 0:
            raise UsageError("--s1 and --s2 must be odd positive integers")
        if args.lam < 0:
            raise UsageError("--lambda must be non-negative")
        if args.knn < 1:
            raise UsageError("--knn must be positive")
        if args.K is not None and args.K < 0:
            raise UsageError("--K must be non-negative")
    elif args.command == "prox-test":
        if args.instances < 1:
            raise UsageError("--instances must be positive")


# ---- subcommands -----------------------------------------------------------


def _build(cloud, method, graph, scheme, messages):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        hg = build_structure(cloud, method, graph, scheme)
    messages.extend(f"{method}: {w.message}" for w in caught)
    return hg


def cmd_interp1d(args):
    cloud = sample_uniform_1d(args.n, args.seed)
    x = cloud.points[:, 0]
    if args.labels:
        labels = load_labels(args.labels)
        labels.check_range(args.n)
    else:
        idx = [int(np.argmin(np.abs(x - t))) for t in DEFAULT_LABEL_SITES]
        if len(set(idx)) != len(idx):
            raise UsageError("--n too small for the default label sites")
        labels = LabelConstraints(idx, DEFAULT_LABEL_VALUES)
    kind, val = parse_graph_spec(args.graph)
    messages = []
    sols, spikes, diags = {}, {}, {}
    for method in ("gpl", "hpl"):
        hg = _build(cloud, method, (kind, val), WeightScheme(), messages)
        u, diag = run(SaddleProblem(hg, labels, args.p), _solver_config(args))
        sols[method] = u
        diags[method] = {"epochs_run": diag.epochs_run, "stop_reason": diag.stop_reason,
                         "final_objective": diag.final_objective}
        if kind == "eps":
            spikes[method] = spike_index(x, u, labels.indices, radius=2 * val)
        else:
            spikes[method] = spike_index(x, u, labels.indices, k=min(2 * val, args.n - 1))
    out = _path(args, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "u_gpl", "u_hpl"])
        for xi, a, b in zip(x, sols["gpl"], sols["hpl"]):
            w.writerow([repr(float(xi)), repr(float(a)), repr(float(b))])
    _write_json(_path(args, args.metrics_out), {
        "n": args.n, "graph": args.graph, "p": args.p, "seed": args.seed,
        "spike_index": spikes, "solver": diags, "warnings": messages,
    })
    return 0


def cmd_gamma_check(args):
    u_fn, grad_fn = TEST_FUNCTIONS[args.function]
    schedule = [(int(n), int(p) if args.kind == "knn" else p) for n, p in args.points]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report = gamma_check(u_fn, grad_fn, args.p, args.kind, schedule, args.seed, args.repeats)
    out = _path(args, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_csv())
    return 0


def cmd_ssl(args):
    cloud = load_point_cloud(args.points)
    labels = load_class_labels(args.labels)
    if labels.indices.max() >= cloud.size:
        raise UsageError(f"label index {int(labels.indices.max())} out of range")
    truth = load_class_labels(args.truth) if args.truth else None
    messages = []
    hg = _build(cloud, args.method, args.graph, WeightScheme.parse(args.weights), messages)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        pred = one_vs_rest(cloud, hg, labels, args.p, _solver_config(args))
    messages.extend(str(w.message) for w in caught)
    out = _path(args, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for i, c in enumerate(pred):
            w.writerow([i, c])
    metrics = {"n": cloud.size, "method": args.method, "graph": args.graph, "p": args.p,
               "weights": args.weights, "labelled": labels.indices.size, "warnings": messages}
    if truth is not None:
        idx = truth.indices
        if idx.max() >= cloud.size:
            raise UsageError("truth index out of range")
        t = np.array([truth.assignments[i] for i in idx], dtype=object)
        p = np.array([pred[i] for i in idx], dtype=object)
        unl = np.array([i not in labels.assignments for i in idx])
        metrics["accuracy"] = accuracy(p, t)
        if unl.any():
            metrics["accuracy_unlabelled"] = accuracy(p[unl], t[unl])
    _write_json(_path(args, args.metrics_out), metrics)
    return 0


def cmd_inpaint(args):
    image = read_pgm(args.image)
    if args.mask:
        mask = load_mask_csv(args.mask, image.shape)
    else:
        mask = random_mask(image.shape, args.sample_rate, args.seed)
    if args.s1 // 2 >= image.shape[0] or args.s2 // 2 >= image.shape[1]:
        raise UsageError("patch larger than the image allows")
    cfg = PatchConfig(args.s1, args.s2, args.lam, args.knn, args.K, args.method, args.p,
                      args.weights)
    observed = np.where(mask, image, 0.0)
    restored = inpaint(observed, mask, cfg, _solver_config(args))
    write_pgm(_path(args, args.out), restored)
    metrics = {"shape": list(image.shape), "observed": int(mask.sum()), "method": args.method,
               "iterations": cfg.iterations}
    for name, img in (("restored", restored), ("mean_fill", mean_fill(observed, mask))):
        val = psnr(img, image)
        metrics[f"psnr_{name}"] = _finite(val)
        metrics[f"psnr_{name}_table"] = table_psnr(val)
        if min(image.shape) >= 11:
            metrics[f"ssim_{name}"] = ssim(img, image)
    _write_json(_path(args, args.metrics_out), metrics)
    return 0


def cmd_prox_test(args):
    result = oracle_suite(args.instances, args.seed)
    _write_json(_path(args, args.out), result)
    return 0 if result["failures"] == 0 else 1


def _set_threads(n):
    import numba

    # the kernels are serial; this only caps any parallel numba code
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
        except ValueError:
            pass


def main(argv=None):
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _validate(args)
    except UsageError as exc:
        print(f"hyperplap {args.command}: error: {exc}", file=sys.stderr)
        return 2
    _set_threads(args.threads)
    if args.dump_config:
        _write_json(Path(args.dump_config), {"command": args.command, **config_dict(args)})
    try:
        return args.func(args)
    except (UsageError, ParseError, EmptyInputError, FileNotFoundError, IndexError) as exc:
        print(f"hyperplap {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"hyperplap {args.command}: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
