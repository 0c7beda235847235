"""Command-line front end.

Exit codes: 0 success, 1 run completed with failed chunks (or the provider
was unreachable), 2 usage or configuration errors. The last line written to
standard output is always a JSON summary.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, PipelineConfig, default_config, validate_config
from .evalcore import consistency, set_metrics
from .ingest import (
    GroundTruthKind,
    IngestError,
    SourceDocument,
    load_corpus,
    load_csv_records,
    load_ground_truth,
    load_text_document,
)
from .pipeline import CorpusFailure, read_run, run_task, write_run
from .provider import LiveAdapter, RecordingAdapter, ReplayAdapter
from .tasks import TASKS, get_task
from .tasks.hta import compare_runs, consistency_csv
from .tasks.kickstarter import (
    NaicsError,
    agreement_csv,
    batch_to_document,
    load_ratings,
    pairwise_agreement,
    ratings_from_result,
)
from .tasks.seedlist import score_page
from .tasks.species import SpeciesName, UnparseableName, classify_name_diff, format_species_name

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2

TRUTH_KIND = {
    "seedlist": GroundTruthKind.SPECIES_SET,
    "hta": GroundTruthKind.HTA_RECORD,
    "kickstarter": GroundTruthKind.NAICS_LABEL,
}


class UsageError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"rdpipe: {msg}", file=sys.stderr)


def _summary(**fields) -> None:
    print(json.dumps(fields, sort_keys=True, ensure_ascii=False))


def _load_config(path: str | None) -> PipelineConfig:
    return PipelineConfig.load(path) if path else default_config()


def _load_documents(task_name: str, corpus: Path) -> list[SourceDocument]:
    if task_name == "kickstarter":
        files = [corpus] if corpus.is_file() else sorted(corpus.glob("*.csv"))
        return [batch_to_document(load_csv_records(f)) for f in files]
    if corpus.is_file():
        return [load_text_document(corpus)]
    return load_corpus(corpus)


def _build_adapter(config: PipelineConfig, mode: str, cassettes: Path):
    if mode == "replay":
        return ReplayAdapter(cassettes)
    ep = config.endpoint
    live = LiveAdapter(ep.url, api_key_env=ep.api_key_env, auth_header=ep.auth_header,
                       extra_headers=ep.headers, timeout=ep.timeout)
    if mode == "record":
        return RecordingAdapter(live, cassettes)
    return live


def cmd_run(args) -> int:
    try:
        config = _load_config(args.config)
    except ConfigError as exc:
        for d in exc.diagnostics:
            _err(d)
        _summary(command="run", exit=EXIT_USAGE, error="config")
        return EXIT_USAGE
    if args.mode:
        config.mode = args.mode
    if args.cassettes:
        config.cassette_dir = str(Path(args.cassettes).resolve())
    diags = validate_config(config)
    if diags:
        for d in diags:
            _err(d)
        _summary(command="run", exit=EXIT_USAGE, error="config")
        return EXIT_USAGE
    cassettes = config.resolve(config.cassette_dir)
    if config.mode == "replay" and not cassettes.is_dir():
        _err(f"replay mode needs a cassette directory; {cassettes} does not exist")
        _summary(command="run", exit=EXIT_USAGE, error="missing-cassettes")
        return EXIT_USAGE
    corpus_path = Path(args.corpus)
    if not corpus_path.exists():
        _err(f"corpus not found: {corpus_path}")
        _summary(command="run", exit=EXIT_USAGE, error="missing-corpus")
        return EXIT_USAGE
    try:
        task = get_task(args.task, config.templates, config.base_dir)
        documents = _load_documents(args.task, corpus_path)
    except (IngestError, OSError, ValueError) as exc:
        _err(str(exc))
        _summary(command="run", exit=EXIT_USAGE, error="input")
        return EXIT_USAGE

    adapter = _build_adapter(config, config.mode, cassettes)
    runs = []
    failures = 0
    for _ in range(args.runs):
        try:
            result, manifest = run_task(documents, task, adapter, config)
        except CorpusFailure as exc:
            _err(str(exc))
            _summary(command="run", exit=EXIT_PARTIAL, error="provider-unreachable",
                     run_dirs=[str(r) for r in runs])
            return EXIT_PARTIAL
        out = write_run(result, manifest, args.out)
        runs.append(out)
        failures += len(result.failures)
        print(f"{out}: {len(result.records)} records, {len(result.failures)} failed chunks")
    code = EXIT_PARTIAL if failures else EXIT_OK
    _summary(command="run", exit=code, task=args.task, mode=config.mode,
             run_dirs=[str(r) for r in runs], failures=failures)
    return code


def _eval_dir(run_dir: Path) -> Path:
    d = run_dir / "eval"
    d.mkdir(exist_ok=True)
    return d


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_eval_accuracy(args) -> int:
    run_dir = Path(args.run_dir)
    result, manifest = read_run(run_dir)
    task = manifest.task_name
    truth = load_ground_truth(args.truth, TRUTH_KIND[task]).payload
    rows = []
    if task == "seedlist":
        for doc_id, names in truth.items():
            m = score_page(result.records_for(doc_id), names)
            rows.append({"key": doc_id, **m.to_dict()})
    elif task == "kickstarter":
        predicted = [(r["data"]["project_id"], r["data"]["naics_code"]) for r in result.records]
        m = set_metrics(predicted, sorted(truth.items()))
        rows.append({"key": "all", **m.to_dict()})
    else:
        for doc_id, expected in truth.items():
            got = result.records_for(doc_id)
            got = got[0] if got else {}
            matched = sum(got.get(f) == v for f, v in expected.items())
            rows.append({"key": doc_id, "matched": matched, "fields": len(expected),
                         "accuracy": matched / len(expected)})
    out = _eval_dir(run_dir)
    (out / "accuracy.json").write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
    _write_csv(out / "accuracy.csv", list(rows[0]) if rows else ["key"],
               [list(r.values()) for r in rows])
    for r in rows:
        print(json.dumps(r, sort_keys=True))
    _summary(command="eval-accuracy", exit=EXIT_OK, report=str(out / "accuracy.json"))
    return EXIT_OK


def _record_key(task: str, rec: dict):
    if task == "kickstarter":
        return (rec["data"]["project_id"],)
    if task == "hta":
        return (rec["doc_id"],)
    return (rec["doc_id"], rec["chunk"], rec["position"])


def cmd_eval_consistency(args) -> int:
    if len(args.run_dirs) < 2:
        raise UsageError("eval-consistency needs at least two run directories")
    runs = [read_run(Path(d)) for d in args.run_dirs]
    tasks = {m.task_name for _, m in runs}
    if len(tasks) != 1:
        raise UsageError(f"runs come from different tasks: {sorted(tasks)}")
    task = tasks.pop()
    keyed = []
    for result, _ in runs:
        keyed.append({_record_key(task, r): r["data"] for r in result.records})
    keys = sorted(set().union(*keyed))
    reports = [consistency([k.get(key) for k in keyed], key=list(key)) for key in keys]
    out = _eval_dir(Path(args.run_dirs[0]))
    (out / "consistency.json").write_text(
        json.dumps([r.to_dict() for r in reports], indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    _write_csv(out / "consistency.csv", ["key", "agreement", "tie"],
               [["/".join(map(str, r.key)), f"{r.agreement:.4f}", r.tie] for r in reports])
    if task == "hta":
        by_doc = {}
        for key in keys:
            values = [k.get(key) for k in keyed]
            if all(v is not None for v in values):
                by_doc[key[0]] = compare_runs(values)
        (out / "hta_fields.csv").write_text(consistency_csv(by_doc), encoding="utf-8")
    full = sum(r.agreement == 1.0 for r in reports)
    print(f"{full}/{len(reports)} records identical across {len(runs)} runs")
    _summary(command="eval-consistency", exit=EXIT_OK, records=len(reports), identical=full,
             report=str(out / "consistency.json"))
    return EXIT_OK


def _label(data) -> str:
    if data is None:
        return ""
    return format_species_name(SpeciesName.from_dict(data))


def cmd_diff_seedlist(args) -> int:
    runs = [read_run(Path(d)) for d in args.run_dirs]
    if any(m.task_name != "seedlist" for _, m in runs):
        raise UsageError("diff-seedlist only accepts seedlist runs")
    truth = load_ground_truth(args.truth, GroundTruthKind.SPECIES_SET).payload if args.truth else None
    sources: dict[str, str] = {}
    if args.ocr:
        ocr = Path(args.ocr)
        if ocr.is_dir():
            sources = {d.id: d.text for d in load_corpus(ocr)}
        else:
            sources = {"*": ocr.read_text(encoding="utf-8")}
    doc_ids = sorted({r["doc_id"] for res, _ in runs for r in res.records} | set(truth or {}))
    n = len(runs)
    header = ["doc_id", "row", "reference"] + [f"run{i + 1}" for i in range(n)] + \
        [f"class{i + 1}" for i in range(n)]
    rows = []
    counts: dict[str, int] = {}
    for doc_id in doc_ids:
        per_run = [res.records_for(doc_id) for res, _ in runs]
        if truth is not None:
            refs = [format_species_name(x) for x in truth.get(doc_id, ())]
        else:
            depth = max(map(len, per_run), default=0)
            refs = [consistency([_label(p[i]) if i < len(p) else "" for p in per_run]).majority
                    for i in range(depth)]
        depth = max([len(refs)] + [len(p) for p in per_run])
        source = sources.get(doc_id, sources.get("*"))
        for i in range(depth):
            ref = refs[i] if i < len(refs) else ""
            cells = [_label(p[i]) if i < len(p) else "" for p in per_run]
            classes = []
            for cell in cells:
                if not ref or not cell:
                    cls = "erroneous/exclusion" if ref else "erroneous/inclusion"
                else:
                    try:
                        d = classify_name_diff(cell, ref, source)
                        cls = d.category.value + (f"/{d.sub.value}" if d.sub else "")
                    except UnparseableName:
                        cls = "erroneous/substitution"
                classes.append(cls)
                counts[cls] = counts.get(cls, 0) + 1
            rows.append([doc_id, i + 1, ref, *cells, *classes])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    out = _eval_dir(Path(args.run_dirs[0]))
    (out / "seedlist_diff.csv").write_text(buf.getvalue(), encoding="utf-8")
    sys.stdout.write(buf.getvalue())
    _summary(command="diff-seedlist", exit=EXIT_OK, cells=sum(counts.values()), classes=counts,
             report=str(out / "seedlist_diff.csv"))
    return EXIT_OK


def cmd_agree(args) -> int:
    ratings = load_ratings(args.ratings)
    for run_dir in args.run or ():
        result, _ = read_run(Path(run_dir))
        ratings += ratings_from_result(r["data"] for r in result.records)
    report = pairwise_agreement(ratings)
    text = agreement_csv(report, sector=args.sector)
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    _summary(command="agree", exit=EXIT_OK, pairs=len(report),
             fractions={f"{a},{b}": round(p.fraction, 3) for (a, b), p in report.items()})
    return EXIT_OK


def cmd_validate_config(args) -> int:
    try:
        config = PipelineConfig.load(args.config)
        diags = validate_config(config)
    except ConfigError as exc:
        diags = exc.diagnostics
    for d in diags:
        _err(d)
    code = EXIT_USAGE if diags else EXIT_OK
    if not diags:
        print(f"{args.config}: ok")
    _summary(command="validate-config", exit=code, diagnostics=diags)
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rdpipe", description="LLM research data-processing pipeline")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a task over a corpus")
    r.add_argument("task", choices=sorted(TASKS))
    r.add_argument("corpus", help="corpus directory, text file, or CSV (kickstarter)")
    r.add_argument("--config", help="JSON config file (default: shipped defaults)")
    r.add_argument("--runs", type=_positive, default=1, help="number of repeated runs")
    r.add_argument("--mode", choices=("live", "replay", "record"))
    r.add_argument("--cassettes", help="cassette directory (overrides config)")
    r.add_argument("--out", default="runs", help="output root for run directories")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("eval-accuracy", help="score a run against ground truth")
    a.add_argument("run_dir")
    a.add_argument("truth")
    a.set_defaults(func=cmd_eval_accuracy)

    c = sub.add_parser("eval-consistency", help="agreement of records across repeated runs")
    c.add_argument("run_dirs", nargs="+")
    c.set_defaults(func=cmd_eval_consistency)

    d = sub.add_parser("diff-seedlist", help="classify species-name divergences across runs")
    d.add_argument("run_dirs", nargs="+")
    d.add_argument("--ocr", help="OCR source text file or corpus directory")
    d.add_argument("--truth", help="species-set ground truth (default: majority of runs)")
    d.set_defaults(func=cmd_diff_seedlist)

    g = sub.add_parser("agree", help="pairwise interrater agreement")
    g.add_argument("ratings", help="CSV with project_id,rater_id,code")
    g.add_argument("--run", action="append", help="add GenAI ratings from a kickstarter run dir")
    g.add_argument("--out", help="also write the report CSV here")
    g.add_argument("--sector", action="store_true", help="add a 2-digit sector match column")
    g.set_defaults(func=cmd_agree)

    v = sub.add_parser("validate-config", help="check a config file")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate_config)
    return p


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code:
            _summary(command=None, exit=EXIT_USAGE, error="usage")
            return EXIT_USAGE
        return EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, IngestError, NaicsError, ConfigError, FileNotFoundError, KeyError) as exc:
        _err(str(exc))
        _summary(command=args.command, exit=EXIT_USAGE, error=type(exc).__name__)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
