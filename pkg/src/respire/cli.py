"""Command-line entry point: ``respire synth | extract | rank``.

Exit status is 0 on success.  Failures print one JSON object
(``{"error": <class>, "message": ..., "details": ...}``) to stderr and exit
with status 1 for pipeline errors or 3 for anything unexpected.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import report
from .audio_io import read_wav
from .config import load_config
from .errors import IngestError, RespireError
from .evaluation import rank_from_cells, run_grid, worker_count
from .synth import SynthSpec, generate_corpus
from .vectorizer import (
    LabeledDataset,
    build_feature_vector,
    concat_bc,
    layout_for,
    load_manifest,
    read_dataset,
    write_dataset,
)

log = logging.getLogger("respire")

MAX_FAILURE_SHARE = 0.5


def _extract_one(args):
    record, settings = args
    vectors, failures = {}, []
    for kind, path in (("B", record.breath_path), ("C", record.cough_path)):
        try:
            vectors[kind] = build_feature_vector(read_wav(path), settings, kind, record.participant_id)
        except (RespireError, OSError) as exc:
            failures.append({"participant_id": record.participant_id, "path": str(path),
                             "error": type(exc).__name__, "message": str(exc)})
    return record, vectors, failures


def cmd_extract(manifest, config, out):
    """Build the B, C and BC dataset CSVs for a manifest.

    A participant whose breath or cough file cannot be processed is left
    out of all three datasets and logged.  More than half of the files
    failing aborts with :class:`IngestError`.
    """
    records = load_manifest(manifest)
    settings = config.extraction()
    tasks = [(r, settings) for r in records]
    workers = worker_count(config.workers)
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_extract_one, tasks))
    else:
        results = [_extract_one(t) for t in tasks]

    failures = [f for _, _, fs in results for f in fs]
    n_files = 2 * len(records)
    for f in failures:
        log.warning("skipped %s (%s): %s", f["path"], f["error"], f["message"])
    if n_files and len(failures) > MAX_FAILURE_SHARE * n_files:
        raise IngestError(f"{len(failures)} of {n_files} files failed to ingest",
                          [f["path"] for f in failures])

    kept = [(r, v) for r, v, fs in results if not fs]
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    pids = [r.participant_id for r, _ in kept]
    labels = [r.label for r, _ in kept]
    paths = {}
    for st in ("B", "C", "BC"):
        if st == "BC":
            rows = [concat_bc(v["B"], v["C"]) for _, v in kept]
        else:
            rows = [v[st].values for _, v in kept]
        ds = LabeledDataset(rows, labels, st, pids, layout_for(st))
        paths[st] = out / f"{st}.csv"
        write_dataset(paths[st], ds)
    summary = {"participants": len(records), "kept": len(kept), "skipped_files": len(failures),
               "skips": failures, "config": config.to_dict()}
    (out / "extract_log.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    log.info("extracted %d of %d participants, %d files skipped", len(kept), len(records), len(failures))
    return paths


def cmd_synth(spec, out):
    """Generate a synthetic corpus and its manifest; returns the manifest path."""
    manifest = generate_corpus(spec, out)
    log.info("wrote %d participants to %s", 2 * spec.n_per_class, manifest)
    return manifest


def cmd_rank(datasets, config, out):
    """Evaluate every (sample type, model, subset) cell and write the report files.

    ``datasets`` is a directory holding ``B.csv``, ``C.csv`` and ``BC.csv``
    (only the requested sample types need to exist).
    """
    datasets = Path(datasets)
    loaded = {st: read_dataset(datasets / f"{st}.csv") for st in config.sample_types}
    hp = config.model_hyperparams()
    keys, tasks = [], []
    for st in config.sample_types:
        for m in config.models:
            for s in config.subsets:
                keys.append((st, m, s))
                tasks.append((loaded[st], m, s, config.n_folds, config.seed, hp[m], config.threshold))
    results = run_grid(tasks, worker_count(config.workers))
    rankings = {}
    for st in config.sample_types:
        cells = {(m, s): r for (t, m, s), r in zip(keys, results) if t == st}
        rankings[st] = rank_from_cells(cells, config.models, config.subsets)

    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    doc = report.build_report(results, rankings, config.to_dict(),
                              extra={"datasets": {st: len(ds) for st, ds in loaded.items()}})
    report.write_report(doc, out / "report.json")
    lines = [report.grid_table(results, "roc_auc"), ""]
    for st, rk in rankings.items():
        lines.append(f"{st} ranking (cross-model mean ROC-AUC): "
                     + ", ".join(f"{s} {100 * v:.2f}" for s, v in rk.overall))
    (out / "table.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    report.write_curves(results, out / "curves")
    if config.plots:
        report.write_plots(results, out / "plots")
    log.info("ranked %d cells into %s", len(results), out)
    return doc


def _parser():
    p = argparse.ArgumentParser(prog="respire", description="Respiratory audio feature ranking toolkit.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic corpus and manifest")
    s.add_argument("--out", required=True)
    s.add_argument("--spec", help="JSON file with SynthSpec fields")
    s.add_argument("--seed", type=int)
    s.add_argument("--n-per-class", type=int)
    s.add_argument("--covid", help="recipe for covid clips, e.g. tonal:200-400")
    s.add_argument("--healthy", help="recipe for healthy clips, e.g. noise:1000-4000")

    e = sub.add_parser("extract", help="extract B, C and BC dataset CSVs from a manifest")
    e.add_argument("--manifest", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--config")
    e.add_argument("--seed", type=int)

    r = sub.add_parser("rank", help="cross-validate the model x subset grid and write a report")
    r.add_argument("--datasets", required=True, help="directory with B.csv, C.csv, BC.csv")
    r.add_argument("--out", required=True)
    r.add_argument("--config")
    r.add_argument("--seed", type=int)
    r.add_argument("--models", help="comma list, e.g. svm,rf")
    r.add_argument("--subsets", help="comma list of categories, features or 'all'")
    r.add_argument("--sample-types", help="comma list of B, C, BC")
    r.add_argument("--folds", type=int)
    r.add_argument("--plots", action="store_true", default=None)
    return p


def _run(args):
    if args.command == "synth":
        spec = SynthSpec.from_json(args.spec) if args.spec else SynthSpec()
        recipes = dict(spec.recipes)
        if args.covid:
            recipes["covid"] = args.covid
        if args.healthy:
            recipes["healthy"] = args.healthy
        spec = SynthSpec(args.n_per_class or spec.n_per_class, recipes,
                         spec.seed if args.seed is None else args.seed, spec.sample_rate_hz,
                         spec.min_duration_s, spec.max_duration_s)
        cmd_synth(spec, args.out)
    elif args.command == "extract":
        cmd_extract(args.manifest, load_config(args.config, {"seed": args.seed}), args.out)
    else:
        overrides = {"seed": args.seed, "models": args.models, "subsets": args.subsets,
                     "sample_types": args.sample_types, "n_folds": args.folds, "plots": args.plots}
        cmd_rank(args.datasets, load_config(args.config, overrides), args.out)


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        _run(args)
    except RespireError as exc:
        details = getattr(exc, "rows", None) or getattr(exc, "source_id", None)
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "details": details}),
              file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - last-resort machine-readable report
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "details": None}), file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
