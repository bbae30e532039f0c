"""``fgwpred`` command-line interface.

Every option can also be set in a ``key = value`` config file (``--config``);
flags given on the command line win over the file, which wins over the
built-in defaults.  Exit codes: 0 ok, 2 usage, 3 data error, 4 numeric
failure.  CSV outputs carry a ``# config_hash=`` line computed from the
resolved options (output paths excluded), and contain no timings, so reruns
with the same seeds are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import experiments as ex
from .barycenter import solve_barycenter
from .errors import (
    DimMismatchError,
    EmptyCandidateSetError,
    GraphError,
    InsufficientTrainingDataError,
    NonFiniteCostError,
    NotPositiveDefiniteError,
    OutOfRangeError,
    ParseError,
    ShapeMismatchError,
    WeightError,
)
from .graph import bernoulli_sample, write_graph
from .io import config_hash, parse_vector, read_config, read_dataset, write_csv, write_dataset
from .krr import Kernel, fit, load_model, save_model, truncate_weights
from .neural import TrainConfig, build_model, load_checkpoint, save_checkpoint, train
from .synth import X_MAX, X_MIN, make_dataset, sample_graph

log = logging.getLogger("fgwpred")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


# --- option parsing ----------------------------------------------------------


def _int_list(text):
    return [int(t) for t in str(text).replace(",", " ").split()]


def _float_list(text):
    return [float(t) for t in str(text).replace(",", " ").split()]


def _bool(text):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# name -> (type, default); a default of ``REQUIRED`` must come from a flag or the config
REQUIRED = object()

COMMON = {"seed": (int, 0), "beta": (float, 0.5)}

OPTIONS = {
    "generate": {
        "out": (str, REQUIRED),
        "n_samples": (int, 50),
        "candidates": (int, 0),
        "one_hot": (_bool, False),
        "x_min": (float, float(X_MIN)),
        "x_max": (float, float(X_MAX)),
    },
    "train-neural": {
        "data": (str, REQUIRED),
        "out": (str, REQUIRED),
        "resume": (str, None),
        "loss_csv": (str, None),
        "epochs": (int, 200),
        "batch_size": (int, 8),
        "lr_weights": (float, 1e-3),
        "lr_templates": (float, 1e-2),
        "templates": (int, 10),
        "template_size": (int, 5),
        "template_init": (str, "random_uniform"),
        "hidden": (_int_list, [100, 100]),
        "n_out": (int, 40),
        "learn_templates": (_bool, True),
        "clamp_features": (_bool, False),
        "warm_start": (_bool, False),
        "max_outer": (int, 5),
        "fgw_max_iter": (int, 30),
        "loss_fgw_max_iter": (int, 100),
    },
    "fit-krr": {
        "data": (str, REQUIRED),
        "out": (str, REQUIRED),
        "grid_csv": (str, None),
        "kernel": (str, "gaussian"),
        "gamma_grid": (_float_list, list(np.logspace(-3, 2, 6))),
        "lambda_grid": (_float_list, list(np.logspace(-6, 2, 9))),
        "top_k": (int, 5),
    },
    "predict": {
        "model": (str, REQUIRED),
        "out": (str, REQUIRED),
        "inputs": (str, REQUIRED),
        "n_out": (_int_list, None),
        "top_k": (int, None),
        "samples": (int, 0),
        "alpha_grid": (_float_list, None),
    },
    "eval-topk": {
        "model": (str, REQUIRED),
        "data": (str, REQUIRED),
        "out": (str, REQUIRED),
        "ks": (_int_list, [1, 10, 20]),
        "top_k": (int, None),
    },
    "eval-interp": {
        "model": (str, REQUIRED),
        "data": (str, REQUIRED),
        "out": (str, REQUIRED),
        "d_min_grid": (_float_list, None),
        "top_k": (int, 10),
        "n_out": (int, None),
    },
    "eval-weights-sweep": {
        "model": (str, REQUIRED),
        "data": (str, REQUIRED),
        "out": (str, REQUIRED),
        "keeps": (_int_list, [1, 5, 10, 20]),
        "ks": (_int_list, [1, 10, 20]),
    },
}

HELP = {
    "generate": "sample the synthetic SBM dataset",
    "train-neural": "train the neural conditional barycenter model",
    "fit-krr": "fit the kernel ridge barycenter model with validation grid search",
    "predict": "predict relaxed graphs (and optional Bernoulli samples)",
    "eval-topk": "Top-k accuracy on a test set with candidate lists",
    "eval-interp": "d0-filtered interpolation curves",
    "eval-weights-sweep": "Top-k accuracy per number of kept weights",
}

PATH_KEYS = {"out", "loss_csv", "grid_csv", "config"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fgwpred", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, opts in OPTIONS.items():
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", default=None, help="key=value config file")
        for key in {**COMMON, **opts}:
            p.add_argument("--" + key.replace("_", "-"), dest=key, default=None)
    return parser


def resolve(command: str, args: argparse.Namespace) -> dict:
    """Merge flags over config over defaults and convert types."""
    cfg = {}
    if args.config:
        cfg = {k.replace("-", "_"): v for k, v in read_config(args.config).items()}
    spec = {**COMMON, **OPTIONS[command]}
    unknown = set(cfg) - set(spec)
    if unknown:
        raise UsageError(f"unknown config keys for {command}: {sorted(unknown)}")
    out = {}
    for key, (conv, default) in spec.items():
        raw = getattr(args, key)
        if raw is None:
            raw = cfg.get(key)
        if raw is None:
            if default is REQUIRED:
                raise UsageError(f"--{key.replace('_', '-')} is required")
            out[key] = default
            continue
        try:
            out[key] = conv(raw)
        except ValueError as exc:
            raise UsageError(f"bad value for {key}: {raw!r}") from exc
    return out


def _hash(opts: dict) -> str:
    return config_hash({k: v for k, v in opts.items() if k not in PATH_KEYS})


# --- model loading -----------------------------------------------------------


def load_any_model(path):
    """Return ``(model, kind, meta)`` for a KRR model file or a neural checkpoint."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"model file not found: {path}")
    try:
        kind = json.loads(path.read_text()).get("kind")
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not a model file") from exc
    if kind == "krr":
        model, meta = load_model(path)
        return model, "krr", meta
    if kind == "neural":
        model, config, _ = load_checkpoint(path)
        return model, "neural", {"beta": model.beta, "n": model.n}
    raise ParseError(f"{path}: unknown model kind {kind!r}")


def _model_beta(opts, meta, args):
    # an explicit --beta wins; otherwise use the value the model was built with
    return opts["beta"] if args.beta is not None else meta.get("beta", opts["beta"])


def _test_set(path):
    X, truths, candidates = read_dataset(path)
    if candidates is None:
        raise ParseError(f"{path}: test set has no candidates.tsv")
    return X, truths, candidates


# --- commands ----------------------------------------------------------------


def cmd_generate(opts, args):
    N = opts["n_samples"]
    if N < 1:
        raise UsageError("--n-samples must be >= 1")
    if opts["candidates"] < 0:
        raise UsageError("--candidates must be >= 0")
    X, graphs = make_dataset(N, opts["seed"], opts["one_hot"], (opts["x_min"], opts["x_max"]))
    candidates = None
    K = opts["candidates"]
    if K:
        # distractors use a stream independent of the dataset's
        rng = np.random.default_rng([opts["seed"], 1])
        candidates = []
        for truth in graphs:
            xs = rng.uniform(X_MIN, X_MAX, size=K - 1)
            cands = [sample_graph(float(x), rng, opts["one_hot"]) for x in xs]
            cands.insert(int(rng.integers(K)), truth)
            candidates.append(cands)
    write_dataset(opts["out"], X.reshape(N, -1), graphs, candidates)
    log.info("wrote %d samples to %s", N, opts["out"])


def cmd_train_neural(opts, args):
    X, Y, _ = read_dataset(opts["data"])
    if not Y:
        raise InsufficientTrainingDataError("training set is empty")
    if opts["resume"]:
        model, config, state = load_checkpoint(opts["resume"])
        if state is None:
            raise ParseError(f"{opts['resume']}: checkpoint has no optimizer state")
    else:
        config = TrainConfig(
            epochs=opts["epochs"], batch_size=opts["batch_size"], lr_weights=opts["lr_weights"],
            lr_templates=opts["lr_templates"], seed=opts["seed"],
            learn_templates=opts["learn_templates"], clamp_features=opts["clamp_features"],
            warm_start=opts["warm_start"], max_outer=opts["max_outer"],
            fgw_max_iter=opts["fgw_max_iter"], loss_fgw_max_iter=opts["loss_fgw_max_iter"])
        model = build_model(X.shape[1], opts["templates"], opts["template_size"], Y[0].d,
                            opts["n_out"], opts["beta"], tuple(opts["hidden"]),
                            opts["template_init"], opts["seed"], X, Y)
        state = None
    t0 = time.perf_counter()
    model, history, state = train(model, X, Y, config, state, epochs=opts["epochs"])
    log.info("trained %d epochs in %.1f s", opts["epochs"], time.perf_counter() - t0)
    save_checkpoint(opts["out"], model, config, state)
    loss_csv = opts["loss_csv"] or str(opts["out"]) + ".loss.csv"
    write_csv(loss_csv, ["epoch", "loss"], [(i + 1, h) for i, h in enumerate(history)],
              _hash(opts))


def cmd_fit_krr(opts, args):
    X, graphs, candidates = read_dataset(opts["data"])
    if len(graphs) < 2:
        raise InsufficientTrainingDataError("KRR validation needs at least two samples")
    if opts["kernel"] not in ("gaussian", "linear"):
        raise UsageError("--kernel must be gaussian or linear")
    sel = ex.select_krr(X, graphs, opts["kernel"], opts["lambda_grid"], opts["gamma_grid"],
                        opts["beta"], opts["top_k"], opts["seed"], candidates)
    model = fit(X, graphs, Kernel(opts["kernel"], sel.gamma), sel.lam)
    save_model(opts["out"], model, beta=opts["beta"], top_k=opts["top_k"], gamma=sel.gamma,
               lam=sel.lam, validation_top1=sel.top1)
    grid_csv = opts["grid_csv"] or str(opts["out"]) + ".grid.csv"
    rows = [(g, lam, acc, int(g == sel.gamma and lam == sel.lam)) for g, lam, acc in sel.table]
    write_csv(grid_csv, ["gamma", "lambda", "val_top1", "chosen"], rows, _hash(opts))
    log.info("chose gamma=%g lambda=%g (validation Top-1 %.3f)", sel.gamma, sel.lam, sel.top1)


def _parse_inputs(text):
    # inputs separated by ';', components by ',' or whitespace
    return [parse_vector(part.replace(",", " ")) for part in str(text).split(";") if part.strip()]


def cmd_predict(opts, args):
    model, kind, meta = load_any_model(opts["model"])
    beta = _model_beta(opts, meta, args)
    top_k = opts["top_k"] if opts["top_k"] is not None else meta.get("top_k")
    sizes = opts["n_out"] or [meta.get("n", 40)]
    inputs = _parse_inputs(opts["inputs"])
    if not inputs:
        raise UsageError("--inputs is empty")
    templates = ex.model_templates(model)
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(opts["seed"])
    alpha_rows = []
    for i, x in enumerate(inputs):
        alpha = ex.model_weights(model, x)
        alpha_rows.append((*x.tolist(), *alpha.tolist()))
        w = truncate_weights(alpha, min(top_k, alpha.size)) if top_k else alpha
        for n in sizes:
            if n < 1:
                raise UsageError("--n-out sizes must be >= 1")
            g = solve_barycenter(templates, w, n, beta).graph
            write_graph(out / f"pred_{i:04d}_n{n}.fgwg", g)
            for s in range(opts["samples"]):
                write_graph(out / f"pred_{i:04d}_n{n}_s{s:03d}.fgwg", bernoulli_sample(g, rng))
    d = inputs[0].size
    header = [f"x{c}" for c in range(d)] + [f"alpha{j}" for j in range(len(templates))]
    write_csv(out / "alpha.csv", header, alpha_rows, _hash(opts))
    if opts["alpha_grid"]:
        lo, hi, num = opts["alpha_grid"]
        grid = np.linspace(lo, hi, int(num))
        rows = [(float(x), *ex.model_weights(model, np.full(d, x)).tolist()) for x in grid]
        write_csv(out / "alpha_grid.csv", ["x"] + header[d:], rows, _hash(opts))


def cmd_eval_topk(opts, args):
    model, kind, meta = load_any_model(opts["model"])
    beta = _model_beta(opts, meta, args)
    top_k = opts["top_k"] if opts["top_k"] is not None else meta.get("top_k")
    X, truths, candidates = _test_set(opts["data"])
    report = ex.eval_topk(model, X, truths, candidates, opts["ks"], top_k, beta)
    write_csv(opts["out"], ["k", "accuracy", "n_test"],
              [(k, acc, report.n_test) for k, acc in report.rows()], _hash(opts))
    log.info("eval-topk %s in %.1f s", report.topk, report.runtime_s)


def cmd_eval_interp(opts, args):
    model, kind, meta = load_any_model(opts["model"])
    beta = _model_beta(opts, meta, args)
    X, truths, _ = read_dataset(opts["data"])
    points = ex.interpolation_points(model, X, truths, opts["top_k"], beta, opts["n_out"])
    grid = opts["d_min_grid"]
    if grid is None:
        d0 = np.array([p[0] for p in points])
        grid = [0.0] + [float(q) for q in np.quantile(d0, np.linspace(0.1, 0.9, 9))]
    rows = ex.interpolation_curve(points, grid)
    skipped = len(grid) - len(rows)
    if skipped:
        log.warning("%d d_min thresholds left no test point and were skipped", skipped)
    write_csv(opts["out"], ["d_min", "count", "mean_d0", "mean_fgw_pred"], rows, _hash(opts))


def cmd_eval_weights_sweep(opts, args):
    model, kind, meta = load_any_model(opts["model"])
    beta = _model_beta(opts, meta, args)
    X, truths, candidates = _test_set(opts["data"])
    table = ex.eval_weights_sweep(model, X, truths, candidates, opts["keeps"], opts["ks"], beta)
    rows = [(keep, k, acc) for keep, accs in table.items() for k, acc in accs.items()]
    write_csv(opts["out"], ["keep", "k", "accuracy"], rows, _hash(opts))


COMMANDS = {
    "generate": cmd_generate,
    "train-neural": cmd_train_neural,
    "fit-krr": cmd_fit_krr,
    "predict": cmd_predict,
    "eval-topk": cmd_eval_topk,
    "eval-interp": cmd_eval_interp,
    "eval-weights-sweep": cmd_eval_weights_sweep,
}

DATA_ERRORS = (OSError, ParseError, GraphError, DimMismatchError, ShapeMismatchError,
               EmptyCandidateSetError, InsufficientTrainingDataError, OutOfRangeError)
NUMERIC_ERRORS = (NotPositiveDefiniteError, WeightError, NonFiniteCostError, ArithmeticError,
                  np.linalg.LinAlgError)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        opts = resolve(args.command, args)
        COMMANDS[args.command](opts, args)
    except UsageError as exc:
        print(f"fgwpred {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        print(f"fgwpred {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DATA_ERRORS as exc:
        print(f"fgwpred {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        # remaining ValueErrors are invalid option values (learning rates, sizes, ...)
        print(f"fgwpred {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
