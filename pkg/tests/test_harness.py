from __future__ import annotations

import csv
import hashlib
import json

import numpy as np
import pytest

from moograd.harness import (
    ConfigError,
    ResultTable,
    emit_plot_data,
    from_dict,
    load_config,
    read_csv,
    run_cell,
    run_experiment,
    write_csv,
)
from moograd.harness.runner import columns
from moograd.metrics import MetricConfig, all_metrics
from moograd.problems import get_problem, pareto_front_samples


def solve_cfg(out, solvers=("epo",), seeds=(0,), **solve):
    sec = {"solvers": list(solvers), "K": 10, "iters": 150, **solve}
    return from_dict({"experiment": {"kind": "solve", "seeds": list(seeds), "out": str(out)}, "solve": sec})


def digest(root):
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def test_defaults_and_cells(tmp_path):
    cfg = solve_cfg(tmp_path, ["epo", "agg-tche"])
    assert cfg.kind == "solve" and cfg.cells == ["epo", "agg-tche"]
    assert cfg.section["optimizer"] == "adam" and cfg.metrics["ref_point"] == [1.2, 1.2]


@pytest.mark.parametrize("doc", [
    {"experiment": {"kind": "solve", "colour": 1}},
    {"experiment": {"kind": "solve"}, "solve": {"solverz": ["epo"]}},
    {"experiment": {"kind": "solve"}, "plot": {}},
    {"experiment": {"kind": "train"}},
    {"experiment": {"kind": "solve"}, "psl": {}},
    {"experiment": {"kind": "solve", "problem": "dtlz2"}},
    {"experiment": {"kind": "solve", "seeds": []}},
    {"experiment": {"kind": "solve", "seeds": [0.5]}},
    {"experiment": {"kind": "solve", "workers": 0}},
    {"experiment": {"kind": "solve"}, "solve": {"solvers": ["sgd"]}},
    {"experiment": {"kind": "psl"}, "psl": {"weight_sources": ["mgda"]}},
    {"experiment": {"kind": "mobo"}, "mobo": {"algos": ["nsga2"]}},
    {"experiment": {"kind": "solve"}, "metrics": {"table": ["hv", "gd"]}},
])
def test_invalid_configs_rejected(doc):
    with pytest.raises(ConfigError):
        from_dict(doc)


def test_load_config_file(tmp_path):
    path = tmp_path / "e.cfg"
    path.write_text('[experiment]\nkind = "psl"\nseeds = [1, 2]\n[psl]\nweight_sources = ["agg-ls", "epo"]\n')
    cfg = load_config(path)
    assert cfg.kind == "psl" and cfg.seeds == [1, 2] and cfg.cells == ["agg-ls", "epo"]
    path.write_text("[experiment\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_repro_config_is_valid():
    from pathlib import Path

    cfg = load_config(Path(__file__).parents[1] / "repro" / "vlmop2.cfg")
    assert len(cfg.cells) == 12 and cfg.seeds == [0, 1, 2, 3, 4]


def test_csv_roundtrip_format(tmp_path):
    path = tmp_path / "a.csv"
    write_csv(path, ["i", "v"], [[1, 1 / 3], [2, 1e-12]])
    assert path.read_text() == "i,v\n1,0.333333333\n2,1e-12\n"
    header, data = read_csv(path)
    assert header == ["i", "v"] and data.shape == (2, 2)


def test_one_solver_one_seed_table(tmp_path):
    table = run_experiment(solve_cfg(tmp_path))
    assert not table.failed
    with open(tmp_path / "table.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "method" and len(rows) == 2
    assert rows[0][1:] == list(table.metrics)
    assert json.loads((tmp_path / "table.json").read_text())["cells"]["epo"]["hv"]["n"] == 1
    assert (tmp_path / "epo" / "seed0.csv").is_file()


def test_identical_configs_give_identical_artifacts(tmp_path):
    run_experiment(solve_cfg(tmp_path / "a", ["epo", "moosvgd"], [0, 1]))
    run_experiment(solve_cfg(tmp_path / "b", ["epo", "moosvgd"], [0, 1]))
    assert digest(tmp_path / "a" / "epo") == digest(tmp_path / "b" / "epo")
    assert (tmp_path / "a" / "table.csv").read_bytes() == (tmp_path / "b" / "table.csv").read_bytes()


def test_parallel_run_matches_serial(tmp_path):
    run_experiment(solve_cfg(tmp_path / "s", ["epo", "mgda"], [0, 1]))
    cfg = solve_cfg(tmp_path / "p", ["epo", "mgda"], [0, 1])
    cfg.workers = 2
    run_experiment(cfg)
    assert (tmp_path / "s" / "table.csv").read_bytes() == (tmp_path / "p" / "table.csv").read_bytes()


def test_aggregation_matches_recomputation_from_run_files(tmp_path):
    seeds = [0, 1, 2]
    cfg = solve_cfg(tmp_path, ["agg-tche"], seeds)
    table = run_experiment(cfg)
    problem = get_problem("vlmop2")
    mc = MetricConfig(ref_point=(1.2, 1.2), h=10.0, reference_set=pareto_front_samples(problem, 1000))
    per_seed = []
    for s in seeds:
        header, data = read_csv(tmp_path / "agg-tche" / f"seed{s}.csv")
        per_seed.append(all_metrics(columns(header, data, "f_"), columns(header, data, "pref_"), mc))
    for metric in table.metrics:
        v = np.array([r[metric] for r in per_seed])
        assert table.mean("agg-tche", metric) == pytest.approx(v.mean(), rel=1e-12, abs=1e-15)
        assert table.std("agg-tche", metric) == pytest.approx(v.std(), rel=1e-9, abs=1e-12)


def test_failed_cell_is_recorded_not_fatal(tmp_path, monkeypatch):
    from moograd.harness import runner

    real = runner.descend

    def flaky(problem, solver, cfg):
        if solver == "mgda" and cfg.seed == 1:
            raise runner.RunAborted("boom")
        return real(problem, solver, cfg=cfg)

    monkeypatch.setattr(runner, "descend", flaky)
    table = run_experiment(solve_cfg(tmp_path, ["epo", "mgda"], [0, 1]))
    assert table.failures == {("mgda", 1): "boom"}
    assert len(table.values[("mgda", "hv")]) == 1 and len(table.values[("epo", "hv")]) == 2
    assert "failed cells: mgda seed 1" in table.format()
    assert json.loads((tmp_path / "table.json").read_text())["failures"][0]["cell"] == "mgda"


def test_missing_cell_text():
    t = ResultTable(["a"], ["hv"], [0])
    assert t.cell_text("a", "hv") == "missing"
    t.values[("a", "hv")] = [0.5, 0.7]
    assert t.cell_text("a", "hv") == "0.600 (0.100)"


def test_psl_cell(tmp_path):
    cfg = from_dict({"experiment": {"kind": "psl", "out": str(tmp_path)},
                     "psl": {"weight_sources": ["tche"], "steps": 50, "hidden": [8], "grid": 7}})
    res = run_cell(cfg, "tche", 0)
    assert "metrics" in res
    header, data = read_csv(tmp_path / "tche" / "seed0.csv")
    assert data.shape[0] == 7 and (tmp_path / "tche" / "seed0.psm").is_file()


def test_mobo_experiment_and_hv_curve(tmp_path):
    cfg = from_dict({"experiment": {"kind": "mobo", "problem": "zdt1", "n": 2, "out": str(tmp_path)},
                     "mobo": {"algos": ["dirhv_ego"], "budget": 26, "restarts": 32}})
    table = run_experiment(cfg)
    assert table.cells == ["dirhv_ego", "random"] and not table.failed
    assert np.isnan(table.mean("dirhv_ego", "cross_angle"))
    files = emit_plot_data(tmp_path)
    curve = [p for p in files if p.name == "seed0.hv.csv"]
    assert len(curve) == 2
    header, data = read_csv(curve[0])
    assert header == ["eval", "hv"] and len(data) == 26


def test_plot_data_scatter(tmp_path):
    run_experiment(solve_cfg(tmp_path))
    files = emit_plot_data(tmp_path)
    scatter = tmp_path / "epo" / "seed0.scatter.csv"
    assert scatter in files and (tmp_path / "epo" / "seed0.svg") in files
    header, data = read_csv(scatter)
    assert header == ["f_1", "f_2", "ray_1", "ray_2"] and len(data) == 10
    # rays point along the preferences
    _, run = read_csv(tmp_path / "epo" / "seed0.csv")
    rays = data[:, 2:]
    np.testing.assert_allclose(rays[:, 0] * run[:, 2], rays[:, 1] * run[:, 1], atol=1e-6)
    # rerunning does not pick up the derived files
    assert sorted(emit_plot_data(tmp_path, svg=False)) == sorted(p for p in files if p.suffix == ".csv")


def test_plot_data_svg_is_deterministic(tmp_path):
    run_experiment(solve_cfg(tmp_path))
    emit_plot_data(tmp_path)
    first = (tmp_path / "epo" / "seed0.svg").read_bytes()
    emit_plot_data(tmp_path)
    assert (tmp_path / "epo" / "seed0.svg").read_bytes() == first


def test_plot_data_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        emit_plot_data(tmp_path)
    (tmp_path / "manifest.json").write_text(json.dumps({"kind": "solve", "cells": {"epo": "epo"}}))
    with pytest.raises(FileNotFoundError):
        emit_plot_data(tmp_path)
