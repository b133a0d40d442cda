"""``kgc`` command-line entry point.

    kgc prepare --config run.cfg [--output-dir DIR] [--seed N]
    kgc train   --config run.cfg [--output-dir DIR] [--seed N]
    kgc compare --config run.cfg [--output-dir DIR] [--seed N] [--repeat N]
    kgc inspect [PATH ...] [--config run.cfg]
    kgc synth   --out graph.tsv [--entities N ...]

Exit codes: 0 success, 2 usage/config/input error, 1 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .agent import TrainingLog, read_training_log
from .baselines import LINMODEL_HEADER, LinearModel
from .config import RunConfig, load_config
from .errors import KGCError
from .kg import build_graph, load_triples, write_triples
from .qnet import QNET_HEADER, load_checkpoint
from .synthetic import make_synthetic_graph

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("kgc")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kgc", description="Train and compare knowledge-graph integration policies.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def run_parser(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="key = value run configuration")
        p.add_argument("--output-dir", help="overrides output_dir")
        p.add_argument("--seed", type=_u64, help="overrides seed")
        return p

    run_parser("prepare", "split the dataset and generate evaluation contexts")
    run_parser("train", "train the DQN agent")
    cmp = run_parser("compare", "evaluate random, rule-based, supervised and DQN policies")
    cmp.add_argument("--repeat", type=int, help="timing repetitions (median reported)")

    ins = sub.add_parser("inspect", help="summarise artifacts")
    ins.add_argument("paths", nargs="*", type=Path)
    ins.add_argument("--config", help="inspect every artifact in the configured output directory")
    ins.add_argument("--output-dir")

    syn = sub.add_parser("synth", help="write a synthetic triple file")
    syn.add_argument("--out", required=True, type=Path)
    syn.add_argument("--entities", type=int, default=200)
    syn.add_argument("--relations", type=int, default=20)
    syn.add_argument("--triples", type=int, default=1000)
    syn.add_argument("--communities", type=int, default=40)
    syn.add_argument("--seed", type=_u64, default=0)
    return parser


def _load(args) -> RunConfig:
    overrides = {}
    if args.output_dir is not None:
        overrides["output_dir"] = args.output_dir
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = str(args.seed)
    if getattr(args, "repeat", None) is not None:
        overrides["eval.repeat"] = str(args.repeat)
    return load_config(args.config, overrides)


def cmd_prepare(args) -> int:
    cfg = _load(args)
    m = pipeline.prepare(cfg)
    print(f"train {m['train_triples']}  holdout {m['holdout_triples']} "
          f"(fit {m['fit_holdout']}, eval {m['eval_holdout']})  eval contexts {m['eval_contexts']}")
    print(f"wrote {cfg.output_dir}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load(args)
    _, training_log = pipeline.train_agent(cfg)
    window = min(pipeline.GREEDY_WINDOW, len(training_log)) or None
    acc = training_log.greedy_accuracy(window) if len(training_log) else float("nan")
    print(f"steps {len(training_log)}  d_state {cfg.encoder_config.d_state}  layers {cfg.layer_dims()}")
    print(f"final greedy accuracy (last {window or 0} decisions): {acc:.4f}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _load(args)
    _, text, _ = pipeline.compare(cfg)
    print(text, end="")
    return EXIT_OK


# -- inspect ----------------------------------------------------------------------

def _first_line(path: Path) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.readline().rstrip("\n")


def describe(path: Path) -> str:
    """Human-readable summary of one artifact; raises ``UsageError`` if unrecognised."""
    if not path.is_file():
        raise UsageError(f"{path}: not a file")
    head = _first_line(path)
    if head == QNET_HEADER:
        net = load_checkpoint(path)
        n = sum(w.size + b.size for w, b in zip(net.weights, net.biases))
        return f"{path}: Q-network checkpoint\n  layer_dims {net.layer_dims}\n  parameters {n}"
    if head == LINMODEL_HEADER:
        model = LinearModel.load(path)
        return f"{path}: linear model\n  d_state {model.d_state}  actions {model.n_actions}"
    if head == ",".join(TrainingLog.COLUMNS):
        tl = read_training_log(path)
        if not len(tl):
            return f"{path}: training log (empty)"
        last = dict(zip(TrainingLog.COLUMNS, list(tl.rows())[-1]))
        window = min(pipeline.GREEDY_WINDOW, len(tl))
        body = "  ".join(f"{k} {v}" for k, v in last.items())
        return (f"{path}: training log, {len(tl)} rows\n  last row: {body}\n"
                f"  greedy accuracy (last {window}): {tl.greedy_accuracy(window):.4f}")
    if head.startswith("policy,accuracy,"):
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
        lines = [f"{path}: comparison report, {len(rows)} policies"]
        for r in rows:
            lines.append(f"  {r['policy']:<12} accuracy {float(r['accuracy']):.4f}  "
                         f"quality {float(r['quality_index']):.4f}  seconds {float(r['wall_seconds']):.4f}")
        return "\n".join(lines)
    if head.startswith("{"):
        try:
            manifest = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: unrecognised artifact ({exc})") from None
        keys = [k for k in sorted(manifest) if not isinstance(manifest[k], dict)]
        return f"{path}: manifest\n" + "\n".join(f"  {k} {manifest[k]}" for k in keys)
    if head.count("\t") == 2:
        g = build_graph(load_triples(path))
        return (f"{path}: triple file\n  entities {g.n_entities}  relations {g.n_relations}  "
                f"triples {len(g)}  mean degree {g.mean_degree():.3f}")
    raise UsageError(f"{path}: unrecognised artifact format")


def cmd_inspect(args) -> int:
    paths = list(args.paths)
    if not paths:
        if not args.config:
            raise UsageError("inspect needs artifact paths or --config")
        cfg = _load(args)
        out = Path(cfg.output_dir)
        names = [pipeline.MANIFEST, pipeline.TRAIN_TSV, pipeline.QNET_CKPT, pipeline.TRAINING_LOG,
                 pipeline.LINMODEL_CKPT, pipeline.REPORT_CSV]
        paths = [out / n for n in names if (out / n).exists()]
        if not paths:
            raise UsageError(f"no artifacts in {out}")
    for p in paths:
        print(describe(p))
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        triples = make_synthetic_graph(args.entities, args.relations, args.triples, args.communities, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_triples(args.out, triples)
    print(f"wrote {len(triples)} triples to {args.out}")
    return EXIT_OK


COMMANDS = {
    "prepare": cmd_prepare,
    "train": cmd_train,
    "compare": cmd_compare,
    "inspect": cmd_inspect,
    "synth": cmd_synth,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"kgc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, KGCError, OSError, ValueError) as exc:
        print(f"kgc {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
