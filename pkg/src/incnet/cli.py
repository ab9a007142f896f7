"""Command-line front end.

Every option can also come from an ``INCNET_<OPTION>`` environment variable
(e.g. ``INCNET_DIM=64``) or from a ``--config`` file of ``key = value``
lines, such as a manifest written by an earlier run. Precedence, highest
first: command-line flag, environment, config file, built-in default.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .evaluation import (
    HEURISTICS,
    build_pair_datasets,
    canonical_heuristic,
    canonical_operator,
    embedding_auc,
    heuristic_auc,
)
from .graph import load_attrs, load_edges, load_labels, save_attrs, save_edges
from .incomplete import KINDS, CorruptionSpec, corrupt, remove_edges_random
from .model import Trainer, TrainConfig, derive_seed, save_embeddings
from .walks import count_context_pairs, generate_walks

ENV_PREFIX = "INCNET_"
EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

logger = logging.getLogger("incnet")


class UsageError(Exception):
    pass


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off", ""):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional_float(text):
    if text is None or str(text).strip().lower() in ("", "none"):
        return None
    return float(text)


@dataclass(frozen=True)
class Option:
    flag: str
    type: Callable[[str], Any] = str
    default: Any = None
    help: str = ""
    choices: tuple | None = None

    @property
    def key(self) -> str:
        return self.flag.lstrip("-").replace("-", "_")

    @property
    def env(self) -> str:
        return ENV_PREFIX + self.key.upper()


_defaults = TrainConfig()
TRAIN_OPTIONS = [
    Option("--walk-len", int, _defaults.walk_len, "random walk length L"),
    Option("--walks-per-node", int, _defaults.walks_per_node, "walks started per node"),
    Option("--window", int, _defaults.window, "context window size t"),
    Option("--dim", int, _defaults.dim, "embedding dimension d"),
    Option("--negatives", int, _defaults.negatives, "negative samples K per step"),
    Option("--iters", int, _defaults.max_iters, "total SGD iterations I"),
    Option("--lr0", float, _defaults.lr0, "initial learning rate"),
    Option("--lr-period", int, _defaults.lr_update_period, "iterations between rate updates"),
    Option("--lr-floor", _optional_float, None, "minimum learning rate (default lr0 * 1e-4)"),
    Option("--structure-prob", float, _defaults.structure_prob,
           "probability of a structure step per iteration"),
    Option("--threads", int, 1, "SGD workers; more than 1 enables lock-free parallel mode"),
]
SEED = Option("--seed", int, 0, "master seed; every phase derives its own stream from it")
EDGES = Option("--edges", str, None, "edge list file")
ATTRS = Option("--attrs", str, None, "attribute file")
LABELS = Option("--labels", str, None, "label file")

COMMAND_OPTIONS: dict[str, list[Option]] = {
    "train": [
        EDGES, ATTRS, SEED, *TRAIN_OPTIONS,
        Option("--output", str, None, "embedding output file"),
        Option("--manifest", str, None, "manifest path (default: OUTPUT.manifest)"),
    ],
    "corrupt": [
        EDGES, ATTRS, LABELS, SEED,
        Option("--kind", str, None, "corruption kind", KINDS),
        Option("--fraction", float, None, "fraction of rows, columns or edges to drop"),
        Option("--output-prefix", str, None,
               "writes PREFIX.edges, PREFIX.attrs, PREFIX.removed and PREFIX.manifest"),
    ],
    "linkpred": [
        EDGES, ATTRS, LABELS, SEED, *TRAIN_OPTIONS,
        Option("--remove-fraction", float, 0.3, "fraction of edges held out"),
        Option("--operator", str, "hadamard",
               "average|hadamard|l1|l2|heuristic:<name>, or a comma-separated list"),
        Option("--attr-corruption", str, None, "optional attribute corruption applied "
               "after edge removal", tuple(k for k in KINDS if k != "edge_random")),
        Option("--attr-fraction", float, 0.5, "fraction for --attr-corruption"),
        Option("--subsample", float, None, "keep this fraction of train and test pairs"),
        Option("--csv", str, None, "also write results as CSV"),
        Option("--manifest", str, None, "manifest path"),
    ],
    "pairs": [
        EDGES, SEED,
        Option("--walk-len", int, _defaults.walk_len, "random walk length L"),
        Option("--walks-per-node", int, _defaults.walks_per_node, "walks started per node"),
        Option("--window", int, _defaults.window, "context window size t"),
        Option("--output", str, None, "output file (default: stdout)"),
    ],
}
REQUIRED = {
    "train": ("edges", "output"),
    "corrupt": ("edges", "kind", "fraction", "output_prefix"),
    "linkpred": ("edges",),
    "pairs": ("edges",),
}
# manifest bookkeeping keys that are not options
_MANIFEST_META = ("command", "version")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="incnet",
        description="Embeddings for attributed networks with missing links and attributes.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    helps = {
        "train": "learn node embeddings",
        "corrupt": "write a corrupted copy of a graph",
        "linkpred": "hold out edges, embed, and report link-prediction AUC",
        "pairs": "dump window co-occurrence counts",
    }
    for name, options in COMMAND_OPTIONS.items():
        p = sub.add_parser(name, help=helps[name], description=helps[name])
        p.add_argument("--config", help="key = value file (e.g. a previous manifest)")
        for opt in options:
            default_txt = "" if opt.default is None else f" [default: {opt.default}]"
            p.add_argument(
                opt.flag,
                type=opt.type,
                choices=opt.choices,
                default=argparse.SUPPRESS,
                help=opt.help + default_txt,
            )
    return parser


def read_config(path: str | os.PathLike) -> dict[str, str]:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def resolve_options(command: str, ns: argparse.Namespace, environ=None) -> dict[str, Any]:
    environ = os.environ if environ is None else environ
    options = COMMAND_OPTIONS[command]
    config: dict[str, str] = {}
    if getattr(ns, "config", None):
        if not Path(ns.config).is_file():
            raise UsageError(f"config file not found: {ns.config}")
        config = read_config(ns.config)
        known = {o.key for o in options}
        unknown = [
            k for k in config
            if k not in known and k not in _MANIFEST_META and not k.startswith("timing_")
        ]
        if unknown:
            raise UsageError(f"unknown keys in {ns.config}: {', '.join(sorted(unknown))}")
        if config.get("command", command) != command:
            raise UsageError(f"{ns.config} records a {config['command']!r} run, not {command!r}")

    resolved = {}
    for opt in options:
        if hasattr(ns, opt.key):
            value = getattr(ns, opt.key)
        else:
            raw, source = None, None
            if opt.env in environ:
                raw, source = environ[opt.env], opt.env
            elif opt.key in config:
                raw, source = config[opt.key], ns.config
            if source is None:
                value = opt.default
            else:
                try:
                    value = None if raw.strip().lower() == "none" else opt.type(raw)
                except ValueError as exc:
                    raise UsageError(f"invalid value for {opt.key} from {source}: {exc}") from None
                if opt.choices and value not in opt.choices:
                    raise UsageError(f"{opt.key} from {source} must be one of {opt.choices}")
        resolved[opt.key] = value
    for key in REQUIRED[command]:
        if resolved.get(key) is None:
            raise UsageError(f"missing required option --{key.replace('_', '-')}")
    for key in ("edges", "attrs", "labels"):
        path = resolved.get(key)
        if path is not None and not Path(path).is_file():
            raise UsageError(f"--{key}: no such file: {path}")
    return resolved


def train_config(opts: dict[str, Any], seed: int | None = None) -> TrainConfig:
    try:
        return TrainConfig(
            walk_len=opts["walk_len"],
            walks_per_node=opts["walks_per_node"],
            window=opts["window"],
            dim=opts["dim"],
            negatives=opts["negatives"],
            max_iters=opts["iters"],
            lr0=opts["lr0"],
            lr_update_period=opts["lr_period"],
            lr_floor=opts["lr_floor"],
            seed=opts["seed"] if seed is None else seed,
            structure_prob=opts["structure_prob"],
            deterministic=opts["threads"] == 1,
            threads=opts["threads"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def write_manifest(path, command: str, opts: dict[str, Any], timings: dict[str, float]) -> None:
    """Flat ``key = value`` record; feeding it back via ``--config`` replays the run."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"command = {command}\n")
        fh.write(f"version = {__version__}\n")
        for key, value in opts.items():
            if value is not None:
                if isinstance(value, str) and key in ("edges", "attrs", "labels"):
                    value = os.path.abspath(value)
                fh.write(f"{key} = {value}\n")
        for phase, seconds in timings.items():
            fh.write(f"timing_{phase} = {seconds:.6f}\n")


def _load_graph(opts):
    graph = load_edges(opts["edges"])
    if opts.get("attrs"):
        graph = load_attrs(graph, opts["attrs"])
    return graph


def _run_training(graph, cfg: TrainConfig):
    trainer = Trainer.prepare(graph, cfg)
    if cfg.threads > 1:
        _configure_threads(cfg.threads)
    trainer.run()
    if not trainer.model.is_finite():
        raise RuntimeError("training diverged: non-finite parameters")
    return trainer


def _configure_threads(n: int) -> None:
    import numba

    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def cmd_train(opts: dict[str, Any]) -> int:
    cfg = train_config(opts)
    t0 = time.perf_counter()
    graph = _load_graph(opts)
    timings = {"load": time.perf_counter() - t0}
    logger.info("loaded %r", graph)
    trainer = _run_training(graph, cfg)
    timings.update(trainer.timings)
    t0 = time.perf_counter()
    save_embeddings(trainer.model, graph, opts["output"])
    timings["write"] = time.perf_counter() - t0
    write_manifest(opts["manifest"] or opts["output"] + ".manifest", "train", opts, timings)
    return EXIT_OK


def cmd_corrupt(opts: dict[str, Any]) -> int:
    try:
        spec = CorruptionSpec(opts["kind"], opts["fraction"], derive_seed(opts["seed"], "corrupt"))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if spec.kind == "col_important" and not opts.get("labels"):
        raise UsageError("--labels is required for col_important")
    t0 = time.perf_counter()
    graph = _load_graph(opts)
    labels = load_labels(graph, opts["labels"]) if opts.get("labels") else None
    corrupted, removed = corrupt(graph, spec, labels)
    prefix = opts["output_prefix"]
    save_edges(corrupted, prefix + ".edges")
    save_attrs(corrupted, prefix + ".attrs")
    names = graph.node_vocab
    with open(prefix + ".removed", "w", encoding="utf-8") as fh:
        for i, j in removed:
            fh.write(f"{names.name(i)} {names.name(j)}\n")
    write_manifest(prefix + ".manifest", "corrupt", opts, {"total": time.perf_counter() - t0})
    return EXIT_OK


def cmd_linkpred(opts: dict[str, Any]) -> int:
    seed = opts["seed"]
    cfg = train_config(opts, seed=derive_seed(seed, "train"))
    requested = [s.strip() for s in opts["operator"].split(",") if s.strip()]
    operators = []
    try:
        for name in requested:
            if name.startswith("heuristic:"):
                operators.append(("heuristic", canonical_heuristic(name.split(":", 1)[1])))
            elif name == "heuristic":
                operators.extend(("heuristic", h) for h in HEURISTICS)
            else:
                operators.append(("embedding", canonical_operator(name)))
        if not 0 < opts["remove_fraction"] <= 1:
            raise ValueError("--remove-fraction must lie in (0, 1]")
        if opts["subsample"] is not None and not 0 < opts["subsample"] <= 1:
            raise ValueError("--subsample must lie in (0, 1]")
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not operators:
        raise UsageError("--operator is empty")
    if opts["attr_corruption"] == "col_important" and not opts.get("labels"):
        raise UsageError("--labels is required for col_important")

    timings = {}
    t0 = time.perf_counter()
    full = _load_graph(opts)
    remaining, removed = remove_edges_random(
        full, opts["remove_fraction"], derive_seed(seed, "remove_edges")
    )
    if opts["attr_corruption"]:
        labels = load_labels(full, opts["labels"]) if opts.get("labels") else None
        spec = CorruptionSpec(opts["attr_corruption"], opts["attr_fraction"],
                              derive_seed(seed, "attr_corruption"))
        remaining, _ = corrupt(remaining, spec, labels)
    train_ds, test_ds = build_pair_datasets(full, remaining, removed, derive_seed(seed, "pairs"))
    if opts["subsample"] is not None:
        train_ds = train_ds.subsample(opts["subsample"], derive_seed(seed, "subsample_train"))
        test_ds = test_ds.subsample(opts["subsample"], derive_seed(seed, "subsample_test"))
    timings["prepare"] = time.perf_counter() - t0

    rows = []
    embeddings = None
    method = "joint" if remaining.attr_values.sum() > 0 else "structure"
    for family, name in operators:
        if family == "heuristic":
            rows.append((f"heuristic:{name}", "heuristic", heuristic_auc(remaining, test_ds, name)))
            continue
        if embeddings is None:
            trainer = _run_training(remaining, cfg)
            timings.update(trainer.timings)
            embeddings = trainer.model.w_in
        rows.append((name, method, embedding_auc(train_ds, test_ds, embeddings, name)))

    for op, meth, value in rows:
        print(f"{op} {meth} {value:.4f}")
    if opts["csv"]:
        with open(opts["csv"], "w", encoding="utf-8") as fh:
            fh.write("operator,method,auc\n")
            for op, meth, value in rows:
                fh.write(f"{op},{meth},{value:.6f}\n")
    if opts["manifest"]:
        write_manifest(opts["manifest"], "linkpred", opts, timings)
    return EXIT_OK


def cmd_pairs(opts: dict[str, Any]) -> int:
    if min(opts["walk_len"], opts["walks_per_node"], opts["window"]) < 1:
        raise UsageError("--walk-len, --walks-per-node and --window must be >= 1")
    graph = load_edges(opts["edges"])
    walks = generate_walks(graph, opts["walk_len"], opts["walks_per_node"],
                           derive_seed(opts["seed"], "walks"))
    counts = count_context_pairs(walks, opts["window"], graph.node_count)
    names = graph.node_vocab
    out = open(opts["output"], "w", encoding="utf-8") if opts["output"] else sys.stdout
    try:
        for i, j, c in zip(counts.centers, counts.contexts, counts.counts):
            out.write(f"{names.name(i)} {names.name(j)} {c}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


COMMANDS = {"train": cmd_train, "corrupt": cmd_corrupt, "linkpred": cmd_linkpred, "pairs": cmd_pairs}


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if ns.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        opts = resolve_options(ns.command, ns)
        return COMMANDS[ns.command](opts)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"incnet {ns.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"incnet {ns.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
