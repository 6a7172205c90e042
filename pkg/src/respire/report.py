"""Report emission for ranking runs: JSON, text table, curve CSVs and SVG panels."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import DegenerateVarianceError, SchemaError
from .evaluation import rm_anova_table

ROC_GRID = np.linspace(0.0, 1.0, 101)


def format_cell(mean, std):
    """``0.8768, 0.0006`` -> ``"87.68(.06)"``: mean in percent, std in percentage points."""
    std_txt = f"{100.0 * std:.2f}"
    if std_txt.startswith("0."):
        std_txt = std_txt[1:]
    return f"{100.0 * mean:.2f}({std_txt})"


def grid_table(results, metric="roc_auc"):
    """Text table with one row per (sample type, subset) and one column per model."""
    models = sorted({r.model for r in results})
    rows = []
    seen = set()
    for r in results:
        key = (r.sample_type, r.subset)
        if key not in seen:
            seen.add(key)
            rows.append(key)
    lookup = {(r.sample_type, r.subset, r.model): r for r in results}
    header = ["Sample", "Subset", *models]
    body = []
    for st, subset in rows:
        cells = []
        for m in models:
            r = lookup.get((st, subset, m))
            cells.append(format_cell(r.mean(metric), r.std(metric)) if r else "-")
        body.append([st, subset, *cells])
    widths = [max(len(str(row[i])) for row in [header, *body]) for i in range(len(header))]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(row, widths)).rstrip() for row in [header, *body]]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def anova_summary(matrix, conditions, factor):
    """ANOVA over a folds x conditions matrix as a JSON-ready dict; degenerate input records an error."""
    out = {"factor": factor, "conditions": list(conditions)}
    try:
        t = rm_anova_table(matrix)
    except (DegenerateVarianceError, SchemaError) as exc:
        out["error"] = str(exc)
        return out
    out.update({"F": t.f, "p": t.p, "df": [t.df_conditions, t.df_error],
                "ss": {"conditions": t.ss_conditions, "subjects": t.ss_subjects, "error": t.ss_error}})
    return out


def anova_block(results, metric="roc_auc"):
    """Subset effect per (sample type, model) and sample-type effect per (model, subset)."""
    lookup = {(r.sample_type, r.model, r.subset): r for r in results}
    sample_types = list(dict.fromkeys(r.sample_type for r in results))
    model_kinds = list(dict.fromkeys(r.model for r in results))
    subsets = list(dict.fromkeys(r.subset for r in results))
    out = {"subset_effect": [], "sample_type_effect": []}
    if len(subsets) >= 2:
        for st in sample_types:
            for m in model_kinds:
                mat = np.column_stack([lookup[(st, m, s)].values(metric) for s in subsets])
                out["subset_effect"].append({"sample_type": st, "model": m,
                                             **anova_summary(mat, subsets, "subset")})
    if len(sample_types) >= 2:
        for m in model_kinds:
            for s in subsets:
                mat = np.column_stack([lookup[(st, m, s)].values(metric) for st in sample_types])
                out["sample_type_effect"].append({"model": m, "subset": s,
                                                  **anova_summary(mat, sample_types, "sample_type")})
    return out


def mean_roc(result):
    """Vertical average of the per-fold ROC curves on a fixed FPR grid."""
    tprs = [np.interp(ROC_GRID, f.roc.x, f.roc.y) for f in result.folds]
    return ROC_GRID, np.mean(tprs, axis=0)


def mean_pr(result):
    """Per-fold precision interpolated on a fixed recall grid and averaged."""
    precs = []
    for f in result.folds:
        order = np.argsort(f.pr.x, kind="stable")
        precs.append(np.interp(ROC_GRID, f.pr.x[order], f.pr.y[order]))
    return ROC_GRID, np.mean(precs, axis=0)


def write_curves(results, out_dir):
    """One CSV per cell and fold: ``kind,x,y`` rows for the ROC and PR curves."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for r in results:
        for k, f in enumerate(r.folds):
            path = out_dir / f"{r.sample_type}_{r.model}_{r.subset}_fold{k}.csv"
            with path.open("w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(("curve", "x", "y", "threshold"))
                for name, curve in (("roc", f.roc), ("pr", f.pr)):
                    for x, y, t in zip(curve.x, curve.y, curve.thresholds):
                        w.writerow((name, repr(float(x)), repr(float(y)), repr(float(t))))
            paths.append(path)
    return paths


def write_plots(results, out_dir):
    """SVG ROC and PR panels, one file per (sample type, subset), every model overlaid."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # fixed id salt and no date keep the SVG bytes stable across runs
    plt.rcParams["svg.hashsalt"] = "respire"

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    groups = {}
    for r in results:
        groups.setdefault((r.sample_type, r.subset), []).append(r)
    paths = []
    for (st, subset), group in groups.items():
        fig, (ax_roc, ax_pr) = plt.subplots(1, 2, figsize=(10, 4.5))
        base = float(np.mean([f.base_rate for f in group[0].folds]))
        for r in sorted(group, key=lambda r: r.model):
            fx, ty = mean_roc(r)
            ax_roc.plot(fx, ty, label=f"{r.model} {format_cell(r.mean('roc_auc'), r.std('roc_auc'))}")
            rx, py = mean_pr(r)
            ax_pr.plot(rx, py, label=f"{r.model} {format_cell(r.mean('ap'), r.std('ap'))}")
        ax_roc.plot([0, 1], [0, 1], "k--", lw=0.8, label="no skill")
        ax_pr.axhline(base, color="k", ls="--", lw=0.8, label="no skill")
        ax_roc.set(xlabel="False positive rate", ylabel="True positive rate", title=f"ROC {st} {subset}")
        ax_pr.set(xlabel="Recall", ylabel="Precision", title=f"PR {st} {subset}", ylim=(0, 1.02))
        ax_roc.legend(fontsize=7, loc="lower right")
        ax_pr.legend(fontsize=7, loc="lower left")
        fig.tight_layout()
        path = out_dir / f"{st}_{subset}.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        paths.append(path)
    return paths


def build_report(results, rankings, config, extra=None):
    """JSON-ready report: config, every cell's fold metrics, rankings and ANOVA."""
    doc = {
        "format": "respire-report",
        "version": 1,
        "config": config,
        "cells": [r.to_dict() for r in results],
        "rankings": {
            st: {"per_model": rk.per_model, "overall": [{"subset": s, "mean_roc_auc": v} for s, v in rk.overall]}
            for st, rk in rankings.items()
        },
        "anova": anova_block(results),
    }
    if extra:
        doc.update(extra)
    return doc


def write_report(doc, path):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n", encoding="utf-8")
