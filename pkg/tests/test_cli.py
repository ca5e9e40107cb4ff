import csv
import io
import json

import pytest

from orik.analysis import read_pgm
from orik.bench import CSV_HEADER, BenchReport, runtime_grid, run_bench
from orik.cli import main


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out)
    return code, out.getvalue()


def test_verify_conv_ok():
    code, text = run("verify", "--suite", "conv", "--seed", "7")
    assert code == 0 and "FAIL" not in text


def test_verify_bogus_suite(capsys):
    code, _ = run("verify", "--suite", "bogus")
    assert code == 2
    assert "usage" in capsys.readouterr().err


def test_verify_json_and_deterministic():
    code, text = run("verify", "--suite", "all", "--json", "--seed", "3")
    assert code == 0
    rows = [json.loads(line) for line in text.splitlines()]
    assert rows and all(set(r) == {"suite", "name", "pass", "metric"} for r in rows)
    assert {r["suite"] for r in rows} == {"conv", "grad", "decomp", "gauss", "plan"}
    _, again = run("verify", "--suite", "all", "--json", "--seed", "3")
    assert again == text


def test_madcount():
    assert run("madcount", "--op", "dsc1d", "--k", "31", "--cprime", "512") == (0, "543\n")
    assert run("madcount", "--op", "dw2d", "--k", "7") == (0, "49\n")
    assert run("madcount", "--op", "dsc1d", "--k", "31")[0] == 2


def test_offsets():
    assert run("offsets", "--k", "3", "--pad", "1", "--angle", "45") == (0, "0 0 -1\n1 0 0\n2 -1 0\n")
    code, text = run("offsets", "--k", "3", "--angle", "30", "--disc", "bilinear")
    assert code == 0 and all(len(line.split()) == 5 for line in text.splitlines())
    assert run("offsets", "--k", "3", "--angle", "90", "--param", "shear-x")[0] == 2


def test_erf(tmp_path):
    cfg = tmp_path / "tiny1d.json"
    cfg.write_text(json.dumps({"c0": 8, "channels": [8, 8, 16, 16], "blocks": [1, 1, 1, 1],
                               "k": [7, 7, 7, 7], "d": 4, "layerwise_shift_deg": 90,
                               "block_kind": "1d", "stem_kind": "depthwise-1d"}))
    out = tmp_path / "m.pgm"
    code, _ = run("erf", "--config", str(cfg), "--samples", "2", "--size", "32", "--out", str(out))
    assert code == 0
    data, maxval = read_pgm(out)
    assert maxval == 255 and data.shape == (32, 32) and data.max() == 255
    assert run("erf", "--config", str(tmp_path / "missing.json"), "--out", str(out))[0] == 2


def test_bench_csv(tmp_path):
    p = tmp_path / "b.csv"
    for _ in range(2):
        code, text = run("bench", "--op", "dw1d", "--n", "1", "--c", "8", "--h", "14", "--k", "7",
                         "--reps", "3", "--warmup", "1", "--threads", "2", "--csv", str(p))
        assert code == 0 and "ms" in text
    rows = list(csv.reader(p.open()))
    assert rows[0] == CSV_HEADER and len(rows) == 3
    assert rows[1][0] == "dw1d" and rows[1][CSV_HEADER.index("threads")] == "2"
    assert float(rows[1][CSV_HEADER.index("mean_ns")]) > 0


def test_bench_usage_errors():
    assert run("bench", "--reps", "0")[0] == 2
    assert run("bench", "--op", "conv9d")[0] == 2


def test_bench_threads_env(monkeypatch):
    monkeypatch.setenv("ORIK_THREADS", "3")
    r = run_bench("dw1d", 1, 4, 8, 8, 3, reps=2, warmup=0)
    assert r.threads == 3


def test_bench_defaults_and_report():
    import inspect
    sig = inspect.signature(run_bench)
    assert sig.parameters["reps"].default == 100 and sig.parameters["warmup"].default == 10
    for op in ("dw1d", "dw1d-train", "dw1d-ref", "dw2d"):
        r = run_bench(op, 1, 4, 8, 8, 3, reps=3, warmup=1)
        assert r.mean_ns > 0 and r.std_ns >= 0 and r.reps == 3
    with pytest.raises(ValueError):
        BenchReport("dw1d", 1, 1, 1, 1, 1, 0.0, 1, 1, "float32", 1, 0, 0, 1.0, 0.0, 1)


def test_runtime_grid_rows():
    rows = runtime_grid()
    assert len(rows) == 96
    assert {r["N"] for r in rows} == {64} and {r["C"] for r in rows} == {512}
    assert len({(r["K"], r["H"], r["op"], r["angle"]) for r in rows}) == 96
