# -*- coding: utf-8 -*-
import csv
import logging
import os

import orjson
import pytest

import config
from cli import log_level, main, parse_points
from config import ConfigError
from reports import read_json, strip_timestamp


def _run(*argv):
    return main([str(a) for a in argv])


def test_catalog(capsys):
    assert _run("catalog") == 0
    out = capsys.readouterr().out
    assert "kinked_composite" in out
    assert "broken_crossover" in out


def test_verify_difference_oracle(out_dir):
    assert _run("verify", "--oracle", "cobb_douglas", "--trials", 100, "--workers", 2,
                "--output-dir", out_dir) == 0
    for name in ("consistency", "crossover", "second_consistency", "continuity", "monotonicity"):
        doc = read_json(os.path.join(out_dir, "verify_{}.json".format(name)))
        assert doc['report']['verdict'] == "pass"
        assert doc['meta']['config']['oracle'] == "cobb_douglas"
        assert doc['meta']['oracle']['name'] == "cobb_douglas"


def test_verify_broken_crossover(out_dir):
    assert _run("verify", "--oracle", "broken_crossover", "--trials", 100,
                "--output-dir", out_dir) == 1
    doc = read_json(os.path.join(out_dir, "verify_crossover.json"))
    assert doc['report']['verdict'] == "fail"
    assert doc['report']['violations']
    assert read_json(os.path.join(out_dir, "verify_consistency.json"))['report']['verdict'] == "pass"


def test_verify_is_reproducible(out_dir):
    docs = []
    for workers in (1, 3):
        assert _run("verify", "--oracle", "broken_crossover", "--trials", 60, "--seed", 4,
                    "--workers", workers, "--output-dir", out_dir) == 1
        doc = strip_timestamp(read_json(os.path.join(out_dir, "verify_crossover.json")))
        doc['meta']['config'].pop('workers')
        docs.append(doc)
    assert docs[0] == docs[1]


def test_usage_errors(out_dir, tmp_path):
    assert _run("verify", "--output-dir", out_dir) == 2
    assert _run("verify", "--oracle", "no_such_oracle", "--output-dir", out_dir) == 2
    assert _run("verify", "--oracle", "linear", "--trials", 0) == 2
    assert _run("verify", "--config", tmp_path / "missing.json") == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert _run("verify", "--config", bad) == 2
    unknown = tmp_path / "unknown.json"
    unknown.write_bytes(orjson.dumps({"oracle": "linear", "colour": "red"}))
    assert _run("verify", "--config", unknown) == 2
    assert _run("alep", "--oracle", "identity", "--output-dir", out_dir) == 2
    with pytest.raises(SystemExit):
        _run("frobnicate")


def test_config_file_and_flag_override(out_dir, tmp_path):
    path = tmp_path / "run.json"
    path.write_bytes(orjson.dumps({"oracle": "linear", "trials": 40, "seed": 9, "output_dir": out_dir}))
    assert _run("verify", "--config", path, "--trials", 30) == 0
    doc = read_json(os.path.join(out_dir, "verify_consistency.json"))
    assert doc['meta']['config']['seed'] == 9
    assert doc['report']['trials'] == 30


def test_expression_oracle(out_dir, tmp_path):
    path = tmp_path / "cd.json"
    path.write_bytes(orjson.dumps({
        "name": "custom_cd",
        "dimension": 2,
        "expression": ["sqrt", ["*", ["x", 0], ["x", 1]]],
        "domain": {"lower": [0.5, 0.5], "upper": [4, 4]},
        "concavity": "concave",
    }))
    assert _run("concavity", "--expression", path, "--trials", 200, "--output-dir", out_dir) == 0
    doc = read_json(os.path.join(out_dir, "concavity.json"))
    assert doc['meta']['oracle']['name'] == "custom_cd"


def test_reconstruct_linear(out_dir, capsys):
    assert _run("reconstruct", "--oracle", "linear", "--depth", 8, "--trials", 200, "--grid", 5,
                "--second-anchors", "1,1;2,2", "--output-dir", out_dir) == 0
    assert "Affine fit residual" in capsys.readouterr().out
    doc = read_json(os.path.join(out_dir, "reconstruction.json"))['reconstruction']
    assert doc['representation']['violation_count'] == 0
    assert doc['affine_fit']['positive']
    with open(os.path.join(out_dir, "reconstruction.csv"), newline='') as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["x1", "x2", "value", "extrapolated"]
    assert len(rows) == 1 + 25


def test_reconstruct_non_monotone(out_dir):
    assert _run("reconstruct", "--oracle", "decreasing", "--depth", 2, "--trials", 10,
                "--output-dir", out_dir) == 1
    assert _run("reconstruct", "--oracle", "neg_quadratic", "--depth", 6, "--trials", 100,
                "--segment", "0;1", "--output-dir", out_dir) == 0


def test_concavity(out_dir):
    assert _run("concavity", "--oracle", "exp1d", "--trials", 300, "--output-dir", out_dir) == 1
    doc = read_json(os.path.join(out_dir, "concavity.json"))
    assert doc['concavity']['ggfl']['law'] == "fails"
    assert doc['concavity']['ggfl']['witnesses']
    assert _run("concavity", "--oracle", "linear", "--strict", "--trials", 300,
                "--output-dir", out_dir) == 0
    assert _run("concavity", "--oracle", "cobb_douglas", "--roundtrip", "--trials", 200,
                "--depth", 6, "--output-dir", out_dir) == 0
    assert read_json(os.path.join(out_dir, "concavity.json"))['concavity']['roundtrip']['agree']


def test_smoothness_kinked_composite(out_dir, capsys):
    assert _run("smoothness", "--oracle", "kinked_composite", "--b", 1, "--trials", 20,
                "--output-dir", out_dir) == 1
    assert "Line smoothness limit" in capsys.readouterr().out
    doc = read_json(os.path.join(out_dir, "smoothness.json"))['smoothness']
    assert doc['line']['estimate'] == pytest.approx(0.25, abs=1e-3)
    assert doc['line']['verdict'] == "not-line-smooth"
    with open(os.path.join(out_dir, "smoothness.csv"), newline='') as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["a", "f", "quotient"]


def test_alep_cobb_douglas(out_dir):
    assert _run("alep", "--oracle", "cobb_douglas", "--grid", 3, "--output-dir", out_dir) == 0
    with open(os.path.join(out_dir, "alep.csv"), newline='') as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 9
    assert {r['label'] for r in rows} == {"complement"}


def test_parse_points():
    assert parse_points("1,1;2,2") == [[1.0, 1.0], [2.0, 2.0]]
    assert parse_points(None) is None
    with pytest.raises(ConfigError):
        parse_points("1,a")


def test_alep_on_reconstruction(out_dir):
    assert _run("alep", "--oracle", "cobb_douglas", "--reconstructed", "--grid", 3,
                "--output-dir", out_dir) == 0
    with open(os.path.join(out_dir, "alep.csv"), newline='') as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 9
    assert {r['label'] for r in rows} == {"complement"}
    items = read_json(os.path.join(out_dir, "alep.json"))['alep']
    assert all(item['h'] > 1e-3 for item in items)


def test_concavity_full_sweep(out_dir):
    assert _run("concavity", "--oracle", "cobb_douglas", "--roundtrip", "--full", "--dyadic-depth", 3,
                "--trials", 100, "--depth", 6, "--output-dir", out_dir) == 0
    doc = read_json(os.path.join(out_dir, "concavity.json"))['concavity']
    assert doc['roundtrip']['midpoint']['dyadic_depth'] == 3
    assert doc['roundtrip']['agree']


def test_smoothness_schedule_and_tolerance(out_dir):
    noise = {}
    for tol_t in ("1e-7", "1e-10"):
        assert _run("smoothness", "--oracle", "cobb_douglas", "--schedule",
                    "0.1,0.05,0.025,0.0125,0.00625", "--tol-t", tol_t, "--trials", 20,
                    "--output-dir", out_dir) == 0
        doc = read_json(os.path.join(out_dir, "smoothness.json"))
        assert len(doc['smoothness']['line']['rows']) == 5
        assert doc['meta']['config']['schedule'] == [0.1, 0.05, 0.025, 0.0125, 0.00625]
        noise[tol_t] = doc['smoothness']['line']['rows'][0]['noise']
    assert noise["1e-10"] < noise["1e-7"]
    assert _run("smoothness", "--oracle", "cobb_douglas", "--schedule", "0.1,0.2",
                "--output-dir", out_dir) == 2
    assert _run("smoothness", "--oracle", "cobb_douglas", "--schedule", "0.1,x",
                "--output-dir", out_dir) == 2


def test_log_level(monkeypatch):
    monkeypatch.setattr(config, "DEBUG", False)
    monkeypatch.setattr(config, "LOG_LEVEL", "ERROR")
    assert log_level() == logging.ERROR
    assert log_level("warning") == logging.WARNING
    monkeypatch.setattr(config, "DEBUG", True)
    assert log_level() == logging.DEBUG
    assert log_level("info") == logging.INFO
