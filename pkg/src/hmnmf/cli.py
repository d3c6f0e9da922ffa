"""Command-line driver: train, transform, reconstruct, features, eval.

Settings come from an optional ``key = value`` config file (``--config``);
command-line flags override it. Exit codes: 0 success, 1 runtime or
numeric failure, 2 usage or configuration error.
"""
import argparse
import csv
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import io
from .evaluation import sweep
from .hierarchy import (
    JointConfig,
    LayerSpec,
    composite_features,
    joint_train,
    pretrain,
    reconstruct_x,
    transform,
)
from .nonlinearity import Nonlinearity
from .nsnmf import UnitConfig


class UsageError(Exception):
    """Bad configuration or missing input; exit code 2."""


def _int_list(text):
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


@dataclass
class RunConfig:
    data: str = None
    labels: str = None
    test_data: str = None
    test_labels: str = None
    model: str = None
    out: str = None
    layers: str = "80,20"
    theta: float = 0.0
    nonlinearity: str = "power:0.5"
    seed: int = 0
    max_iters: int = 500
    tol: float = 1e-6
    joint_max_iters: int = 300
    joint_tol: float = 1e-6
    derivative_at: str = "h"
    safeguard: bool = True
    fold_in: str = "joint"
    format: str = "csv"
    raw: bool = False
    top_words: str = None
    top_n: int = 10
    feature_counts: str = "5,10,20"
    hidden: str = "80"
    project_at: int = None

    @classmethod
    def from_sources(cls, args):
        """Defaults, then the config file, then flags given on the command line."""
        values = {}
        if getattr(args, "config", None):
            values.update(read_config(args.config))
        for f in fields(cls):
            given = getattr(args, f.name, None)
            if given is not None:
                values[f.name] = given
        known = {f.name: f for f in fields(cls)}
        for key in list(values):
            if key not in known:
                raise UsageError(f"unknown config key {key!r}")
            values[key] = _coerce(known[key], values[key])
        return cls(**values)

    def unit(self):
        return UnitConfig(k=1, theta=self.theta, max_iters=self.max_iters, tol=self.tol, seed=self.seed)

    def joint(self):
        return JointConfig(
            max_iters=self.joint_max_iters,
            tol=self.joint_tol,
            seed=self.seed,
            derivative_at=self.derivative_at,
            safeguard=self.safeguard,
        )

    def f(self):
        return Nonlinearity.parse(self.nonlinearity)


def _coerce(spec, value):
    if value is None or not isinstance(value, str):
        return value
    kind = spec.type if isinstance(spec.type, str) else spec.type.__name__
    try:
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
        if kind == "bool":
            if value.lower() not in ("1", "0", "true", "false", "yes", "no"):
                raise ValueError(value)
            return value.lower() in ("1", "true", "yes")
    except ValueError:
        raise UsageError(f"bad value {value!r} for {spec.name}") from None
    return value


def read_config(path):
    """``key = value`` lines; ``#`` starts a comment; dashes in keys become underscores."""
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    out = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _need(cfg, *names):
    for name in names:
        value = getattr(cfg, name)
        if value is None:
            raise UsageError(f"--{name.replace('_', '-')} is required")
        if name in ("data", "labels", "test_data", "test_labels", "top_words") and not Path(value).is_file():
            raise UsageError(f"input not found: {value}")
        if name == "model" and not Path(value).is_dir():
            raise UsageError(f"model directory not found: {value}")


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _matrix_path(out, stem, fmt):
    return Path(out) / f"{stem}.{'mtx' if fmt == 'mm' else 'csv'}"


def cmd_train(cfg):
    _need(cfg, "data", "out")
    specs = [LayerSpec(k, cfg.theta) for k in _int_list(cfg.layers)]
    if not specs:
        raise UsageError("--layers must name at least one layer")
    x = io.load_data(cfg.data, raw=cfg.raw)
    model, traces = pretrain(x, specs, cfg.unit(), cfg.f(), return_traces=True)
    model, joint_trace = joint_train(model, x, cfg.joint())
    out = Path(cfg.out)
    io.save_model(model, out)
    _write_rows(
        out / "trace_pretrain.csv",
        ["layer", "iteration", "cost"],
        [(l, i, repr(c)) for l, trace in enumerate(traces, start=1) for i, c in enumerate(trace, start=1)],
    )
    _write_rows(out / "trace_joint.csv", ["iteration", "cost"], [(i, repr(c)) for i, c in enumerate(joint_trace, start=1)])
    return 0


def cmd_transform(cfg):
    _need(cfg, "model", "data", "out")
    model = io.load_model(cfg.model)
    h = transform(model, io.load_data(cfg.data, raw=cfg.raw), cfg.joint(), method=cfg.fold_in)
    io.save_matrix(h, cfg.out, cfg.format)
    return 0


def cmd_reconstruct(cfg):
    _need(cfg, "model", "out")
    io.save_matrix(reconstruct_x(io.load_model(cfg.model)), cfg.out, cfg.format)
    return 0


def top_entries(w, vocab, n):
    """Per column of ``w``, the ``n`` largest-weight vocabulary entries."""
    rows = []
    for j in range(w.shape[1]):
        order = np.argsort(-w[:, j], kind="stable")[:n]
        rows.append([vocab[i] for i in order])
    return rows


def cmd_features(cfg):
    _need(cfg, "model", "out")
    model = io.load_model(cfg.model)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    partial = None
    composites = []
    for i, layer in enumerate(model.layers, start=1):
        io.save_matrix(layer.w, _matrix_path(out, f"W_{i}", cfg.format), cfg.format)
        partial = layer.w if partial is None else partial @ layer.w
        composites.append(partial)
    io.save_matrix(composite_features(model), _matrix_path(out, "W_composite", cfg.format), cfg.format)
    if cfg.top_words:
        _need(cfg, "top_words")
        vocab = Path(cfg.top_words).read_text().split()
        if len(vocab) != model.input_dim:
            raise UsageError(f"vocabulary has {len(vocab)} entries, model input has {model.input_dim}")
        rows = []
        for l, w in enumerate(composites, start=1):
            for j, words in enumerate(top_entries(w, vocab, cfg.top_n), start=1):
                rows.append([l, j, " ".join(words)])
        _write_rows(out / "top_words.csv", ["layer", "feature", "words"], rows)
    return 0


def cmd_eval(cfg):
    _need(cfg, "data", "labels", "out")
    x = io.load_data(cfg.data, raw=cfg.raw)
    y = io.load_labels(cfg.labels)
    x_test = y_test = None
    if cfg.test_data is not None:
        _need(cfg, "test_data", "test_labels")
        x_test, y_test = io.load_data(cfg.test_data, raw=cfg.raw), io.load_labels(cfg.test_labels)
    counts = _int_list(cfg.feature_counts)
    project_at = cfg.project_at if cfg.project_at is not None else (counts[0] if counts else None)
    report = sweep(
        x, y, counts, x_test, y_test,
        hidden=_int_list(cfg.hidden),
        theta=cfg.theta,
        nonlinearity=cfg.f(),
        unit=cfg.unit(),
        joint=cfg.joint(),
        project_at=project_at,
        fold_in=cfg.fold_in,
    )
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    report.to_csv(out / "report.csv")
    report.to_json(out / "report.json")
    rows = []
    for name, scores in report.projections.items():
        for j in range(scores.shape[1]):
            rows.append([name, j, int(y[j]), repr(float(scores[0, j])), repr(float(scores[1, j]))])
    _write_rows(out / "projection_2d.csv", ["model", "sample", "label", "pc1", "pc2"], rows)
    return 0


COMMANDS = {
    "train": (cmd_train, "pretrain and jointly fine-tune a model"),
    "transform": (cmd_transform, "top-layer representation of new data"),
    "reconstruct": (cmd_reconstruct, "input-space reconstruction of the training data"),
    "features": (cmd_features, "per-layer and composite feature matrices"),
    "eval": (cmd_eval, "shallow vs deep sweep over feature counts"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="hmnmf", description="Hierarchical multi-layer nsNMF.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, argument_default=None)
        p.add_argument("--config", help="key = value settings file; flags override it")
        p.add_argument("--out", help="output file or directory")
        p.add_argument("--seed", type=int)
        if name in ("train", "eval"):
            p.add_argument("--data", help="CSV, MatrixMarket or IDX image file (features x samples)")
            p.add_argument("--theta", type=float)
            p.add_argument("--nonlinearity", help="identity, log1p or power:<gamma>")
            p.add_argument("--max-iters", type=int, dest="max_iters")
            p.add_argument("--tol", type=float)
            p.add_argument("--joint-max-iters", type=int, dest="joint_max_iters")
            p.add_argument("--joint-tol", type=float, dest="joint_tol")
            p.add_argument("--derivative-at", choices=("h", "h_tilde"), dest="derivative_at")
            p.add_argument("--raw", action="store_const", const=True, help="keep IDX pixels in 0..255")
            p.add_argument("--no-safeguard", action="store_const", const=False, dest="safeguard",
                           help="take every joint update undamped")
        if name == "train":
            p.add_argument("--layers", help="feature counts bottom to top, e.g. 80,20")
        if name in ("transform", "reconstruct", "features"):
            p.add_argument("--model", help="model directory written by train")
            p.add_argument("--format", choices=io.FORMATS)
        if name == "transform":
            p.add_argument("--data")
            p.add_argument("--fold-in", choices=("layerwise", "joint"), dest="fold_in")
            p.add_argument("--joint-max-iters", type=int, dest="joint_max_iters")
        if name == "features":
            p.add_argument("--top-words", dest="top_words", help="vocabulary file, one entry per input row")
            p.add_argument("--top-n", type=int, dest="top_n")
        if name == "eval":
            p.add_argument("--labels")
            p.add_argument("--test-data", dest="test_data")
            p.add_argument("--test-labels", dest="test_labels")
            p.add_argument("--feature-counts", dest="feature_counts", help="e.g. 5,10,20")
            p.add_argument("--hidden", help="hidden layer sizes of the deep model, e.g. 80")
            p.add_argument("--project-at", type=int, dest="project_at")
            p.add_argument("--fold-in", choices=("layerwise", "joint"), dest="fold_in")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.from_sources(args)
        return COMMANDS[args.command][0](cfg)
    except UsageError as exc:
        print(f"hmnmf {args.command}: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, ArithmeticError) as exc:
        print(f"hmnmf {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
