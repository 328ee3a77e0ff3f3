"""Command line: ``hmgnn {preprocess,train,eval,predict,gradcheck} --config FILE --set key=value``.

Exit status is 0 on success, 1 on usage or validation errors and 2 on runtime
failures.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from . import data_eval, graph
from .checkpoint import CheckpointError
from .data_eval import attach_parses, split_validation
from .features import LABELS, Example, build_vocab, load_embeddings, random_embeddings, tokenize
from .model import HybridGraphModel, ModelConfig
from .numerics import DomainError
from .training import TrainConfig, build_model, evaluate, gradient_check, train

SUBCOMMANDS = ("preprocess", "train", "eval", "predict", "gradcheck")


class ConfigError(ValueError):
    pass


class _UsageError(Exception):
    pass


@dataclass
class RunConfig:
    format: str = "semeval"
    train_path: str = ""
    test_path: str = ""
    train_parses: str = ""
    test_parses: str = ""
    embeddings: str = ""
    out_dir: str = "run"
    checkpoint: str = ""
    model_name: str = "HM-GNN"
    dataset_name: str = ""
    seed: int = 0
    hidden: int = 300
    gat_dim: int = 0
    gcn_layers: int = 2
    max_distance: int = 99
    word_dim: int = 300
    pos_dim: int = 100
    leaky_slope: float = 0.2
    normalize_adjacency: bool = False
    learning_rate: float = 0.001
    l2: float = 0.00001
    epochs: int = 30
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    clip_norm: float = 0.0
    val_fraction: float = 0.1
    skip_misaligned: bool = False

    def model_config(self) -> ModelConfig:
        return ModelConfig(self.hidden, self.gat_dim or None, self.gcn_layers, self.max_distance,
                           self.word_dim, self.pos_dim, self.leaky_slope, self.normalize_adjacency)

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.learning_rate, self.l2, self.epochs, self.seed, self.beta1,
                           self.beta2, self.epsilon, self.clip_norm or None)

    @property
    def checkpoint_path(self) -> Path:
        return Path(self.checkpoint) if self.checkpoint else Path(self.out_dir) / "model.ckpt"


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if kind == "bool":
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError
            return raw.lower() in ("true", "1", "yes")
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind}") from None
    return raw


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment line."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value")
        key, raw = line.split("=", 1)
        values[key.strip()] = _coerce(key.strip(), raw)
    return values


def load_run_config(path=None, overrides=(), base=None) -> RunConfig:
    """Build a RunConfig; precedence is ``base`` < config file < ``overrides``."""
    values = dict(base or {})
    if path:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {path} does not exist")
        values.update(parse_config_text(p.read_text(encoding="utf-8"), str(p)))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        values[key.strip()] = _coerce(key.strip(), raw)
    cfg = RunConfig(**values)
    if cfg.format not in ("semeval", "twitter"):
        raise ConfigError(f"format: expected semeval or twitter, got {cfg.format!r}")
    if not 0.0 <= cfg.val_fraction < 1.0:
        raise ConfigError("val_fraction: must lie in [0, 1)")
    try:
        cfg.model_config()
        cfg.train_config()
    except DomainError as err:
        raise ConfigError(str(err)) from None
    return cfg


def _require(cfg: RunConfig, *keys: str) -> None:
    for key in keys:
        value = getattr(cfg, key)
        if not value:
            raise ConfigError(f"{key}: required for this subcommand")
        if not Path(value).exists():
            raise ConfigError(f"{key}: path {value} does not exist")
    for key in ("embeddings", "train_parses", "test_parses"):
        value = getattr(cfg, key)
        if value and not Path(value).exists():
            raise ConfigError(f"{key}: path {value} does not exist")


def _load_split(cfg: RunConfig, which: str) -> list[Example]:
    path = getattr(cfg, f"{which}_path")
    if cfg.format == "semeval":
        examples = data_eval.load_semeval(path, cfg.skip_misaligned).examples
    else:
        examples = data_eval.load_twitter(path)
    parses = getattr(cfg, f"{which}_parses")
    if parses:
        examples = attach_parses(examples, graph.read_parses(parses))
    return examples


# ------------------------------------------------------------- results table

def emit_results_table(records) -> tuple[str, str]:
    """Aligned text table and CSV for ``(model, dataset, acc, f1)`` records, 2 decimals."""
    records = [tuple(r) for r in records]
    if not records:
        raise DomainError("no metrics records to tabulate")
    header = ("Model", "Dataset", "Acc", "F1")
    rows = [(str(m), str(d), f"{float(a):.2f}", f"{float(f):.2f}") for m, d, a, f in records]
    widths = [max(len(r[i]) for r in rows + [header]) for i in range(4)]
    lines = ["  ".join(cell.ljust(widths[i]) if i < 2 else cell.rjust(widths[i])
                       for i, cell in enumerate(row)).rstrip() for row in [header] + rows]
    text = "\n".join(lines) + "\n"
    csv = "model,dataset,acc,f1\n" + "".join(",".join(row) + "\n" for row in rows)
    return text, csv


# ------------------------------------------------------------- subcommands

def cmd_preprocess(cfg: RunConfig, args) -> int:
    _require(cfg, "train_path")
    train_set = _load_split(cfg, "train")
    test_set = _load_split(cfg, "test") if cfg.test_path else []
    vocab = build_vocab(train_set)

    def encode(ex):
        heads = ex.heads
        if heads is None:
            heads = graph.ParseTree(tuple(range(-1, len(ex.tokens) - 1))).heads
        return {"id": ex.id, "tokens": list(ex.tokens), "span": list(ex.span),
                "label": ex.label, "heads": list(heads)}

    bundle = {"vocab": vocab.itos, "vocab_hash": vocab.digest(),
              "train": [encode(ex) for ex in train_set], "test": [encode(ex) for ex in test_set]}
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "bundle.json").write_text(json.dumps(bundle, sort_keys=True) + "\n", encoding="utf-8")
    print(f"{len(train_set)} train / {len(test_set)} test examples, |V| = {len(vocab)}")
    return 0


def cmd_train(cfg: RunConfig, args) -> int:
    _require(cfg, "train_path")
    examples = _load_split(cfg, "train")
    train_set, val_set = split_validation(examples, cfg.val_fraction, cfg.seed)
    vocab = build_vocab(train_set)
    mcfg = cfg.model_config()
    if cfg.embeddings:
        table = load_embeddings(cfg.embeddings, vocab, mcfg.word_dim, cfg.seed)
        print(f"embedding coverage {table.coverage:.4f} ({table.found}/{len(vocab) - 2})")
    else:
        table = random_embeddings(vocab, mcfg.word_dim, cfg.seed)
    model = build_model(mcfg, vocab, table.vectors, cfg.seed)
    result = train(model, train_set, cfg.train_config(), val_set or None,
                   callback=lambda rec: print(rec.line(), flush=True))
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result.write(out / "train_log.tsv", out / "train_summary.json")
    cfg.checkpoint_path.parent.mkdir(parents=True, exist_ok=True)
    model.save(cfg.checkpoint_path)
    print(f"best epoch {result.best_epoch}; checkpoint {cfg.checkpoint_path}")
    return 0


def cmd_eval(cfg: RunConfig, args) -> int:
    _require(cfg, "test_path")
    if not cfg.checkpoint_path.is_file():
        raise ConfigError(f"checkpoint: {cfg.checkpoint_path} does not exist")
    model = HybridGraphModel.load(cfg.checkpoint_path)
    metrics = evaluate(model, _load_split(cfg, "test"))
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    body = (f"acc: {metrics['acc']:.6f}\nmacro_f1: {metrics['macro_f1']:.6f}\n"
            f"confusion: {json.dumps(metrics['confusion'])}\nn: {metrics['n']}\n")
    (out / "metrics.txt").write_text(body, encoding="utf-8")
    dataset = cfg.dataset_name or Path(cfg.test_path).stem
    text, csv = emit_results_table([(cfg.model_name, dataset,
                                     100 * metrics["acc"], 100 * metrics["macro_f1"])])
    (out / "results.csv").write_text(csv, encoding="utf-8")
    (out / "results.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(body + text)
    return 0


def _parse_predict_line(line: str, lineno: int) -> Example:
    parts = line.rstrip("\n").split("\t")
    if len(parts) not in (2, 3) or "$T$" not in parts[0]:
        raise ConfigError(f"input line {lineno}: expected 'sentence with $T$<TAB>aspect[<TAB>heads]'")
    left, right = parts[0].split("$T$", 1)
    aspect = tokenize(parts[1])
    if not aspect:
        raise ConfigError(f"input line {lineno}: empty aspect")
    lt = tokenize(left)
    tokens = lt + aspect + tokenize(right)
    heads = None
    if len(parts) == 3:
        try:
            heads = graph.parse_tree_from_heads(int(h) for h in parts[2].split()).heads
        except ValueError as err:
            raise ConfigError(f"input line {lineno}: bad heads ({err})") from None
    return Example(tokens, (len(lt), len(lt) + len(aspect)), 0, heads, id=str(lineno))


def cmd_predict(cfg: RunConfig, args) -> int:
    if not cfg.checkpoint_path.is_file():
        raise ConfigError(f"checkpoint: {cfg.checkpoint_path} does not exist")
    model = HybridGraphModel.load(cfg.checkpoint_path)
    stream = open(args.input, encoding="utf-8") if args.input else sys.stdin
    try:
        for lineno, line in enumerate(stream, start=1):
            if not line.strip():
                continue
            probs = model.forward(_parse_predict_line(line, lineno))
            label = LABELS[int(probs.argmax())]
            print(f"{label}\t{probs[0]:.6f}\t{probs[1]:.6f}\t{probs[2]:.6f}")
    finally:
        if stream is not sys.stdin:
            stream.close()
    return 0


GRADCHECK_EXAMPLE = Example(("the", "food", "was", "great"), (1, 2), 2, (1, -1, 1, 2), id="gradcheck")


def cmd_gradcheck(cfg: RunConfig, args) -> int:
    example = GRADCHECK_EXAMPLE
    vocab = build_vocab([example])
    mcfg = cfg.model_config()
    model = build_model(mcfg, vocab, random_embeddings(vocab, mcfg.word_dim, cfg.seed).vectors, cfg.seed)
    report = gradient_check(model, example, args.tolerance, max_coords=args.max_coords, seed=cfg.seed)
    text = "status\ttensor\tmax_rel_err\tcoords\n" + "\n".join(report.lines()) + "\n"
    text += f"overall: {'PASS' if report.passed else 'FAIL'}\n"
    sys.stdout.write(text)
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
    return 0 if report.passed else 2


COMMANDS = {"preprocess": cmd_preprocess, "train": cmd_train, "eval": cmd_eval,
            "predict": cmd_predict, "gradcheck": cmd_gradcheck}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hmgnn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config value (repeatable)")
        if name == "predict":
            p.add_argument("--input", help="tab-separated input (default: stdin)")
        if name == "gradcheck":
            p.add_argument("--tolerance", type=float, default=1e-4)
            p.add_argument("--max-coords", type=int, default=None,
                           help="sample this many coordinates per tensor")
            p.add_argument("--report", help="also write the report here")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        # gradcheck defaults to the small model; files and --set still win
        base = {"hidden": 3} if args.command == "gradcheck" else None
        cfg = load_run_config(args.config, args.set, base)
    except _UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    try:
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, data_eval.CorpusFormatError, data_eval.AlignmentError,
            graph.ParseFormatError, CheckpointError, DomainError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except Exception as err:  # noqa: BLE001 - any other failure is a runtime failure
        print(f"runtime failure: {type(err).__name__}: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
