"""Command-line entry point: ``relaudit <subcommand>``.

Every flag can also come from a JSON config file (``--config``, keys are the
flag names with dashes replaced by underscores) or from an environment
variable ``RELAUDIT_<NAME>``. Precedence: command line, environment, config
file, built-in default.

Exit codes: 0 success, 1 leak signature fired (``audit``/``run``), 2 error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import audit as audit_mod
from .catalog import CatalogError, build_catalog, catalog_diff, format_catalog_table, save_catalog
from .classifiers import ClassifierError, ClassifierSpec, Kind, save_ledger
from .dataset import SPLITS, Dataset, DatasetError, parse_dataset, write_dataset
from .io import atomic_write_text, read_jsonl, write_json
from .pipeline import (
    Mode,
    PipelineError,
    load_pipeline,
    load_predictions,
    precompute_partials,
    run_split,
    save_pipeline,
    save_predictions,
    train_pipeline,
)
from .scoring import ROUNDING_MODES, TRUNCATE, ScoringError, format_score_table, score_predictions
from . import reference, synth

LOGGER = logging.getLogger("relaudit")
ENV_PREFIX = "RELAUDIT_"

EXIT_OK, EXIT_LEAK, EXIT_ERROR = 0, 1, 2
_KNOWN_ERRORS = (
    DatasetError,
    CatalogError,
    ClassifierError,
    PipelineError,
    ScoringError,
    audit_mod.AuditError,
    FileNotFoundError,
)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    train: Optional[Path]
    dev: Optional[Path]
    test: Optional[Path]
    catalog_source: str
    mode: str
    binary_spec: ClassifierSpec
    semantic_spec: ClassifierSpec
    out: Path
    rounding: str
    seed: int
    workers: Optional[int]
    label_prefixes: Optional[tuple]

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        _require(args, "train", "out")
        if args.catalog_source == "test" or args.mode != "corrected":
            _require(args, "test")
        return cls(
            train=_existing(args.train),
            dev=_existing(getattr(args, "dev", None)),
            test=_existing(args.test),
            catalog_source=args.catalog_source,
            mode=args.mode,
            binary_spec=_spec(args.binary_kind, args.binary_ledger, args.seed),
            semantic_spec=_spec(args.semantic_kind, args.semantic_ledger, args.seed),
            out=Path(args.out),
            rounding=args.rounding,
            seed=args.seed,
            workers=args.workers,
            label_prefixes=_prefixes(args),
        )


def _existing(path) -> Optional[Path]:
    if path is None:
        return None
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    return path


def _require(args: argparse.Namespace, *names: str) -> None:
    missing = [n for n in names if getattr(args, n, None) in (None, [], "")]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise ConfigError(f"missing required option(s): {flags}")


def _spec(kind: str, ledger: Optional[str], seed: int) -> ClassifierSpec:
    kind = Kind(kind)
    if kind is Kind.SCRIPTED_ORACLE:
        if not ledger:
            raise ConfigError("scripted_oracle classifiers need a ledger file")
        return ClassifierSpec(kind, {"ledger_path": str(_existing(ledger))})
    if kind is Kind.FREQUENCY_PRIOR:
        return ClassifierSpec(kind, {"seed": seed})
    return ClassifierSpec(kind)


def _prefixes(args: argparse.Namespace):
    return None if getattr(args, "any_label", False) else ("org:", "per:")


def _load(path, split: str, args) -> Dataset:
    return parse_dataset(_existing(path), split, _prefixes(args))


def _print(text: str = "") -> None:
    sys.stdout.write(text + "\n")


# -- subcommands ----------------------------------------------------------------


def cmd_ingest(args: argparse.Namespace) -> int:
    present = [(split, getattr(args, split)) for split in SPLITS if getattr(args, split)]
    if not present:
        raise ConfigError("give at least one of --train, --dev, --test")
    summary = {}
    for split, path in present:
        data = _load(path, split, args)
        summary[split] = {
            "path": str(path),
            "samples": len(data),
            "labels": sorted(data.label_inventory),
            "positives": sum(1 for s in data if s.is_positive),
        }
    if args.json:
        _print(json.dumps(summary, indent=2, sort_keys=True))
    else:
        for split, info in summary.items():
            _print(f"{split}: {info['samples']} samples, {info['positives']} positive, "
                   f"{len(info['labels'])} labels ({info['path']})")
            _print("  " + ", ".join(info["labels"]))
    if args.out:
        write_json(Path(args.out) / "ingest.json", summary)
    return EXIT_OK


def cmd_decompose(args: argparse.Namespace) -> int:
    source = args.catalog_source
    _require(args, source)
    catalogs = {}
    for split in ("train", "test"):
        if getattr(args, split):
            data = _load(getattr(args, split), split, args)
            catalogs[split] = build_catalog(data, split)
    catalog = catalogs[source]
    result = {"source": source, "counts": catalog.kind_counts(), "counts_by_source": {
        s: c.kind_counts() for s, c in catalogs.items()}}
    diff = None
    if len(catalogs) == 2:
        diff = catalog_diff(catalogs["train"], catalogs["test"])
        result["diff"] = diff.to_record()
    if args.json:
        _print(json.dumps(result, indent=2, sort_keys=True))
    else:
        _print(format_catalog_table(catalog))
        if len(catalogs) == 2:
            for s, c in catalogs.items():
                _print(f"complicated pairs from {s}: {c.kind_counts()['complicated']}")
            if diff:
                _print(f"pairs differing between train and test catalogs: {len(diff.differences)}")
                for d in diff.differences:
                    rec = d.to_record()
                    _print(f"  {d.pair}: {rec['kind_a']} -> {rec['kind_b']}"
                           f" (+{rec['only_in_b']} -{rec['only_in_a']})")
    if args.out:
        out = Path(args.out)
        save_catalog(out / "catalog.jsonl", catalog)
        for s, c in catalogs.items():
            save_catalog(out / f"catalog_{s}.jsonl", c)
        write_json(out / "decompose.json", result)
    return EXIT_OK


def _train_from_config(config: RunConfig):
    train_data = parse_dataset(config.train, "train", config.label_prefixes)
    source_data = train_data
    if config.catalog_source == "test":
        source_data = parse_dataset(config.test, "test", config.label_prefixes)
    catalog = build_catalog(source_data, config.catalog_source)
    return train_data, train_pipeline(
        train_data, config.binary_spec, config.semantic_spec, catalog, config.workers
    )


def cmd_train(args: argparse.Namespace) -> int:
    _require(args, "model_dir")
    args.out = args.out or args.model_dir
    config = RunConfig.from_args(args)
    _, pipeline = _train_from_config(config)
    save_pipeline(args.model_dir, pipeline)
    counts = pipeline.catalog.kind_counts()
    _print(f"trained pipeline ({config.catalog_source} catalog): "
           + " ".join(f"{k}={v}" for k, v in counts.items()) + f" -> {args.model_dir}")
    return EXIT_OK


def _modes(mode: str) -> List[Mode]:
    return [Mode.LEAKY, Mode.CORRECTED] if mode == "both" else [Mode(mode)]


def _predict(pipeline, data, mode: str, out: Path, workers) -> Dict[Mode, list]:
    results = {}
    for m in _modes(mode):
        store = None
        if m is Mode.LEAKY:
            store = precompute_partials(pipeline, data, workers)
            store.save(out / "partials")
        results[m] = run_split(pipeline, data, m, store, workers)
        save_predictions(out / f"predictions_{m.value}.jsonl", results[m])
    return results


def cmd_predict(args: argparse.Namespace) -> int:
    _require(args, "model_dir", "test", "out")
    pipeline = load_pipeline(_existing(args.model_dir))
    data = _load(args.test, "test", args)
    results = _predict(pipeline, data, args.mode, Path(args.out), args.workers)
    for m, preds in results.items():
        _print(f"{m.value}: {len(preds)} predictions -> {Path(args.out) / f'predictions_{m.value}.jsonl'}")
    return EXIT_OK


def _score_rows(data, named_predictions):
    return [(name, score_predictions(data, preds)) for name, preds in named_predictions]


def _emit_scores(rows, out: Optional[Path], rounding: str, as_json: bool) -> dict:
    record = {name: report.to_record(rounding) for name, report in rows}
    if as_json:
        _print(json.dumps(record, indent=2, sort_keys=True))
    else:
        _print(format_score_table(rows, rounding))
    if out:
        write_json(out / "scores.json", record, sort_keys=False)
        atomic_write_text(out / "scores.txt", format_score_table(rows, rounding) + "\n")
    return record


def _read_label_file(path) -> List[tuple]:
    return [(r["id"], r["label"]) for r in read_jsonl(_existing(path))]


def cmd_score(args: argparse.Namespace) -> int:
    _require(args, "test", "predictions")
    data = _load(args.test, "test", args)
    names = args.names or [Path(p).stem for p in args.predictions]
    if len(names) != len(args.predictions):
        raise ConfigError("--names must match --predictions one to one")
    rows = _score_rows(data, [(n, _read_label_file(p)) for n, p in zip(names, args.predictions)])
    _emit_scores(rows, Path(args.out) if args.out else None, args.rounding, args.json)
    return EXIT_OK


def _signature_reports(data, catalog, named, min_negatives):
    return {name: audit_mod.detect_leak_signature(data, preds, catalog, min_negatives) for name, preds in named}


def _print_signatures(reports) -> None:
    for name, rep in reports.items():
        state = "FIRED" if rep.flagged else "clear"
        _print(f"leak signature [{name}]: {state}")
        for p in rep.pairs:
            if p.flagged:
                line = f"  {p.pair}: {p.negatives_kept}/{p.gold_negatives} gold negatives kept"
                _print(line + (f" ({p.caveat})" if p.caveat else ""))
    if reports:
        _print(f"note: {audit_mod.HEURISTIC_NOTE}")


def _write_audit(out: Path, report, signatures, rounding: str) -> None:
    record = report.to_record(rounding) if report is not None else {}
    record["leak_signature"] = {n: r.to_record() for n, r in signatures.items()}
    write_json(out / "audit.json", record)
    if report is not None:
        atomic_write_text(out / "rescued_ids.txt", "".join(i + "\n" for i in sorted(report.rescued_ids)))


def cmd_audit(args: argparse.Namespace) -> int:
    _require(args, "test")
    data = _load(args.test, "test", args)
    named = []
    report = None
    catalog = None
    if args.model_dir:
        pipeline = load_pipeline(_existing(args.model_dir))
        catalog = pipeline.catalog
    if args.leaky or args.corrected:
        _require(args, "leaky", "corrected", "model_dir")
        leaky = load_predictions(_existing(args.leaky))
        corrected = load_predictions(_existing(args.corrected))
        report = audit_mod.audit_modes(data, pipeline, leaky, corrected)
        named += [("leaky", leaky), ("corrected", corrected)]
    for path in args.predictions or []:
        named.append((Path(path).stem, _read_label_file(path)))
    if not named:
        raise ConfigError("give --leaky/--corrected or --predictions")
    signatures = _signature_reports(data, catalog, named, args.min_negatives)
    if report is not None:
        _print(format_score_table(
            [("leaky", report.leaky_scores), ("corrected", report.corrected_scores)], args.rounding))
        _print()
        _print(report.summary(args.rounding))
    _print_signatures(signatures)
    if args.out:
        _write_audit(Path(args.out), report, signatures, args.rounding)
    if report is not None and not report.consistent:
        return EXIT_ERROR
    return EXIT_LEAK if any(r.flagged for r in signatures.values()) else EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    config = RunConfig.from_args(args)
    out = config.out
    train_data, pipeline = _train_from_config(config)
    save_pipeline(out / "model", pipeline)
    test_data = parse_dataset(config.test, "test", config.label_prefixes)
    results = _predict(pipeline, test_data, config.mode, out, config.workers)

    names = {Mode.LEAKY: "leaky (original)", Mode.CORRECTED: "corrected"}
    rows = _score_rows(test_data, [(names[m], preds) for m, preds in results.items()])
    _emit_scores(rows, out, config.rounding, False)
    if config.mode != "both":
        return EXIT_OK

    diff = None
    if all(s.labeled for s in test_data):
        other = "test" if config.catalog_source == "train" else "train"
        other_data = test_data if other == "test" else train_data
        other_catalog = build_catalog(other_data, other)
        a, b = (pipeline.catalog, other_catalog) if other == "test" else (other_catalog, pipeline.catalog)
        diff = catalog_diff(a, b)
    report = audit_mod.audit_modes(test_data, pipeline, results[Mode.LEAKY], results[Mode.CORRECTED], diff)
    signatures = _signature_reports(
        test_data, pipeline.catalog, [(m.value, p) for m, p in results.items()], args.min_negatives
    )
    _print()
    _print(report.summary(config.rounding))
    _print_signatures(signatures)
    _write_audit(out, report, signatures, config.rounding)
    if not report.consistent:
        return EXIT_ERROR
    return EXIT_LEAK if signatures["leaky"].flagged else EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    _require(args, "out")
    out = Path(args.out)
    lines = []
    scores_path = out / "scores.json"
    if scores_path.exists():
        scores = json.loads(scores_path.read_text(encoding="utf-8"))
        lines.append("experiment results")
        lines.append(_record_table({k: v for k, v in scores.items()}))
    audit_path = out / "audit.json"
    if audit_path.exists():
        record = json.loads(audit_path.read_text(encoding="utf-8"))
        if "rescued_count" in record:
            lines.append("")
            lines.append(f"rescued samples: {record['rescued_count']}  fp delta: {record['fp_delta']}  "
                         f"F1 inflation: {record['inflation_display']}")
    if args.reference or not lines:
        lines.append("")
        lines.append("reference figures (SpanBERT through the pipeline)")
        lines.append(_record_table({
            "original": dict(reference.LEAKY_COUNTS.as_dict(), display=reference.LEAKY_DISPLAY),
            "with correction": dict(reference.CORRECTED_COUNTS.as_dict(), display=reference.CORRECTED_DISPLAY),
        }))
        lines.append(f"claimed F1: SpanBERT {reference.SPANBERT_CLAIMED_F1}, CGN {reference.CGN_CLAIMED_F1}; "
                     f"CGN after correction: {reference.CGN_CORRECTED_F1:g}")
    _print("\n".join(lines).strip("\n"))
    return EXIT_OK


def _record_table(records: Dict[str, dict]) -> str:
    w = max([10] + [len(n) for n in records])
    lines = [f"{'experiment':<{w}}  {'TP':>6}  {'FP':>6}  {'FN':>6}  {'P':>6}  {'R':>6}  {'F1':>6}"]
    for name, r in records.items():
        d = r["display"]
        lines.append(f"{name:<{w}}  {r['tp']:>6}  {r['fp']:>6}  {r['fn']:>6}  "
                     f"{d['precision']:>6}  {d['recall']:>6}  {d['f1']:>6}")
    return "\n".join(lines)


def cmd_synth(args: argparse.Namespace) -> int:
    _require(args, "out")
    out = Path(args.out)
    if args.kind == "fixture":
        corpus = synth.make_fixture_corpus(args.seed)
        splits = {"train": corpus.train, "dev": corpus.dev, "test": corpus.test}
    else:
        corpus = synth.make_replay_corpus(seed=args.seed)
        splits = {"train": corpus.train, "test": corpus.test}
    for split, data in splits.items():
        write_dataset(out / f"synth_{split}.jsonl", data)
    save_ledger(out / "binary_ledger.jsonl", corpus.binary_ledger)
    save_ledger(out / "semantic_ledger.jsonl", corpus.semantic_ledger)
    write_json(out / "manifest.json", corpus.manifest)
    _print(f"wrote {args.kind} corpus to {out}: "
           + ", ".join(f"{s}={len(d)}" for s, d in splits.items()))
    return EXIT_OK


# -- parser -----------------------------------------------------------------------


def _add_data(p, *splits):
    for split in splits:
        p.add_argument(f"--{split}", help=f"{split} split (TACRED layout, JSONL or JSON array)")
    p.add_argument("--any-label", action="store_true",
                   help="accept relation names without the org:/per: prefix")


def _add_classifiers(p):
    kinds = [k.value for k in Kind]
    p.add_argument("--catalog-source", choices=("train", "test"), default="train",
                   help="split used to build the subset catalog (test reproduces the leaky setup)")
    p.add_argument("--binary-kind", choices=kinds, default=Kind.NEAREST_NEIGHBOR_BOW.value)
    p.add_argument("--binary-ledger", help="oracle ledger for --binary-kind scripted_oracle")
    p.add_argument("--semantic-kind", choices=kinds, default=Kind.NEAREST_NEIGHBOR_BOW.value)
    p.add_argument("--semantic-ledger", help="oracle ledger for --semantic-kind scripted_oracle")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None, help="threads for per-subset work")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relaudit", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file of option defaults")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--out", help="output directory")
        p.add_argument("--json", action="store_true", help="print machine-readable output")
        p.add_argument("--rounding", choices=ROUNDING_MODES, default=TRUNCATE)
        return p

    p = add("ingest", cmd_ingest, "parse and validate data splits")
    _add_data(p, "train", "dev", "test")

    p = add("decompose", cmd_decompose, "build the type-pair subset catalog")
    _add_data(p, "train", "test")
    p.add_argument("--catalog-source", choices=("train", "test"), default="train")

    p = add("train", cmd_train, "train the binary and semantic classifiers")
    _add_data(p, "train", "test")
    _add_classifiers(p)
    p.add_argument("--model-dir")
    p.set_defaults(mode="corrected")

    p = add("predict", cmd_predict, "run the three-step workflow")
    _add_data(p, "test")
    p.add_argument("--model-dir")
    p.add_argument("--mode", choices=("leaky", "corrected", "both"), default="both")
    p.add_argument("--workers", type=int, default=None)

    p = add("score", cmd_score, "micro P/R/F1 of prediction files")
    _add_data(p, "test")
    p.add_argument("--predictions", nargs="+")
    p.add_argument("--names", nargs="+")

    p = add("audit", cmd_audit, "reconcile leaky and corrected runs; check for the leak signature")
    _add_data(p, "test")
    p.add_argument("--model-dir")
    p.add_argument("--leaky")
    p.add_argument("--corrected")
    p.add_argument("--predictions", nargs="+", help="prediction files without provenance")
    p.add_argument("--min-negatives", type=int, default=3)

    p = add("run", cmd_run, "train, predict, score and (with --mode both) audit")
    _add_data(p, "train", "dev", "test")
    _add_classifiers(p)
    p.add_argument("--mode", choices=("leaky", "corrected", "both"), default="both")
    p.add_argument("--min-negatives", type=int, default=3)

    p = add("report", cmd_report, "print tables from an output directory")
    p.add_argument("--reference", action="store_true", help="include the reference figures")

    p = add("synth", cmd_synth, "write a synthetic corpus with oracle ledgers")
    p.add_argument("--kind", choices=("fixture", "replay"), default="fixture")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _apply_overrides(parser: argparse.ArgumentParser, argv: Sequence[str]) -> None:
    """Feed config-file and environment values in as argparse defaults."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=os.environ.get(ENV_PREFIX + "CONFIG"))
    known, _ = pre.parse_known_args(argv)
    config = {}
    if known.config:
        path = Path(known.config)
        if not path.is_file():
            raise FileNotFoundError(f"no such config file: {path}")
        config = json.loads(path.read_text(encoding="utf-8"))
        if not isinstance(config, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for p in [parser] + list(subparsers.choices.values()):
        for action in p._actions:
            if not action.option_strings or action.dest in ("help", "config"):
                continue
            env = os.environ.get(ENV_PREFIX + action.dest.upper())
            if env is not None:
                if isinstance(action, argparse._StoreTrueAction):
                    action.default = env.strip().lower() in ("1", "true", "yes", "on")
                elif action.nargs in ("+", "*"):
                    action.default = env.split()
                else:
                    action.default = env
            elif action.dest in config:
                action.default = config[action.dest]


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_overrides(parser, argv)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"relaudit: error [config]: {exc}\n")
        return EXIT_ERROR
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"relaudit {args.command}: error [config]: {exc}\n")
    except _KNOWN_ERRORS as exc:
        module = "file" if isinstance(exc, FileNotFoundError) else type(exc).__module__.rsplit(".", 1)[-1]
        sys.stderr.write(f"relaudit {args.command}: error [{module}]: {exc}\n")
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
