import csv
import json

import numpy as np
import pytest

from respire import report
from respire.evaluation import CvResult, FoldResult, pr_ap, rank_from_cells, roc_auc


def fake_fold(seed, shift=0.0):
    rng = np.random.default_rng(seed)
    y = np.repeat([1, 0], 10)
    s = rng.uniform(size=20) + shift * y
    roc, auc = roc_auc(s, y)
    pr, ap = pr_ap(s, y)
    return FoldResult(auc, ap, 0.5, 0.5, True, roc, pr, 0.5)


def fake_cell(st, model, subset, shift=0.0, seed=0):
    return CvResult(model, subset, st, [fake_fold(seed * 10 + k, shift) for k in range(5)])


@pytest.fixture
def grid():
    cells = []
    for i, st in enumerate(("B", "C")):
        for j, m in enumerate(("LR", "SVM")):
            for k, s in enumerate(("time", "tonal")):
                cells.append(fake_cell(st, m, s, shift=0.3 * k, seed=100 * i + 10 * j + k))
    return cells


@pytest.mark.parametrize("mean,std,text", [(0.8768, 0.0006, "87.68(.06)"), (0.5, 0.0123, "50.00(1.23)"),
                                           (1.0, 0.0, "100.00(.00)"), (0.07, 0.11, "7.00(11.00)")])
def test_format_cell(mean, std, text):
    assert report.format_cell(mean, std) == text


def test_grid_table(grid):
    lines = report.grid_table(grid).splitlines()
    assert lines[0].split() == ["Sample", "Subset", "LR", "SVM"]
    assert len(lines) == 2 + 4
    cell = grid[0]
    assert report.format_cell(cell.mean(), cell.std()) in lines[2]


def test_anova_summary_records_degenerate():
    const = np.tile([[0.7, 0.7]], (5, 1))
    assert report.anova_summary(const, ["a", "b"], "subset")["p"] == 1.0
    offsets = np.array([[0.1], [0.2], [0.3]]) + np.array([[0.0, 0.05]])
    out = report.anova_summary(offsets, ["a", "b"], "subset")
    assert "error" in out and "F" not in out


def test_anova_block_shapes(grid):
    block = report.anova_block(grid)
    assert len(block["subset_effect"]) == 4  # 2 sample types x 2 models
    assert len(block["sample_type_effect"]) == 4  # 2 models x 2 subsets
    for entry in block["subset_effect"]:
        assert entry["df"] == [1, 4]


def test_mean_curves_bounds(grid):
    x, y = report.mean_roc(grid[0])
    assert x[0] == 0 and x[-1] == 1 and np.all((y >= 0) & (y <= 1)) and np.all(np.diff(y) >= -1e-12)
    _, p = report.mean_pr(grid[0])
    assert np.all((p >= 0) & (p <= 1))


def test_write_curves(grid, tmp_path):
    paths = report.write_curves(grid[:1], tmp_path)
    assert [p.name for p in paths] == [f"B_LR_time_fold{k}.csv" for k in range(5)]
    with paths[0].open() as fh:
        rows = list(csv.DictReader(fh))
    assert {r["curve"] for r in rows} == {"roc", "pr"}
    roc = [(float(r["x"]), float(r["y"])) for r in rows if r["curve"] == "roc"]
    assert roc[0] == (0.0, 0.0) and roc[-1] == (1.0, 1.0)


def test_build_report_round_trip(grid, tmp_path):
    rankings = {st: rank_from_cells({(c.model, c.subset): c for c in grid if c.sample_type == st},
                                    ["LR", "SVM"], ["time", "tonal"]) for st in ("B", "C")}
    doc = report.build_report(grid, rankings, {"seed": 0}, extra={"datasets": {"B": 20}})
    path = tmp_path / "report.json"
    report.write_report(doc, path)
    loaded = json.loads(path.read_text())
    assert loaded["format"] == "respire-report" and loaded["config"] == {"seed": 0}
    assert len(loaded["cells"]) == 8 and loaded["datasets"] == {"B": 20}
    assert [e["subset"] for e in loaded["rankings"]["B"]["overall"]] == [s for s, _ in rankings["B"].overall]


def test_write_plots_deterministic(grid, tmp_path):
    pytest.importorskip("matplotlib")
    a = report.write_plots(grid, tmp_path / "a")
    b = report.write_plots(grid, tmp_path / "b")
    assert sorted(p.name for p in a) == ["B_time.svg", "B_tonal.svg", "C_time.svg", "C_tonal.svg"]
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()
        assert pa.read_text().lstrip().startswith("<?xml")
