import csv
import json

import numpy as np
import pytest

from markovkey.cli import main


def write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def pair_doc(p):
    edges = [{"from": "0", "to": "1", "prob": p}]
    if p < 1:
        edges.append({"from": "0", "to": "0", "prob": 1 - p})
    return {"nodes": ["0", "1"], "edges": edges, "terminals": ["1"]}


def and_doc(p=0.5):
    """Two pairs in parallel, w counting the steps pair 1 waits for pair 2."""
    q = 1 - p
    edges = [
        {"from": "00", "to": "00", "prob": q * q},
        {"from": "00", "to": "10", "prob": p * q},
        {"from": "00", "to": "01", "prob": q * p},
        {"from": "00", "to": "11", "prob": p * p},
        {"from": "10", "to": "10", "prob": q, "counters": {"w": 1}},
        {"from": "10", "to": "11", "prob": p, "counters": {"w": 1}},
        {"from": "01", "to": "01", "prob": q},
        {"from": "01", "to": "11", "prob": p},
    ]
    return {"nodes": ["00", "10", "01", "11"], "edges": edges, "terminals": ["11"]}


def seq_doc():
    edges = [
        {"from": "a", "to": "a", "prob": 0.5},
        {"from": "a", "to": "b", "prob": 0.5},
        {"from": "b", "to": "c", "prob": 1.0},
        {"from": "c", "to": "c", "prob": 0.5},
        {"from": "c", "to": "d", "prob": 0.5},
    ]
    return {"nodes": ["a", "b", "c", "d"], "edges": edges, "terminals": ["d"]}


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_pmf_geometric(tmp_path):
    cfg = write(tmp_path, "pair.json", pair_doc(0.5))
    out = str(tmp_path / "pmf.csv")
    assert main(["pmf", "--config", cfg, "--t-max", "4", "--out", out]) == 0
    got = [float(r["p_t"]) for r in rows(out)]
    assert got == pytest.approx([0.0, 0.5, 0.25, 0.125, 0.0625], abs=1e-15)
    manifest = json.loads((tmp_path / "pmf.csv.manifest.json").read_text())
    assert manifest["command"] == "pmf"
    assert manifest["params"]["t_max"] == 4
    assert len(manifest["sha256"]) == 64


def test_pmf_methods_agree(tmp_path):
    cfg = write(tmp_path, "and.json", and_doc(0.3))
    tables = {}
    for method in ("power", "residue", "auto"):
        out = str(tmp_path / f"{method}.csv")
        assert main(["pmf", "--config", cfg, "--t-max", "60", "--method", method, "--out", out]) == 0
        tables[method] = np.array([[float(r["p_t"]), float(r["cdf"])] for r in rows(out)])
    np.testing.assert_allclose(tables["power"], tables["residue"], atol=1e-9)
    np.testing.assert_allclose(tables["power"], tables["auto"], atol=1e-9)


def test_double_pole_exit_code(tmp_path):
    cfg = write(tmp_path, "seq.json", seq_doc())
    assert main(["pmf", "--config", cfg, "--t-max", "10", "--method", "residue"]) == 3
    out = str(tmp_path / "auto.csv")
    assert main(["pmf", "--config", cfg, "--t-max", "10", "--out", out]) == 0
    assert float(rows(out)[3]["p_t"]) == pytest.approx(0.25)


def test_input_errors(tmp_path, capsys):
    no_term = pair_doc(0.5)
    no_term["terminals"] = []
    cfg = write(tmp_path, "bad.json", no_term)
    assert main(["pmf", "--config", cfg, "--t-max", "3"]) == 2
    broken = tmp_path / "broken.json"
    broken.write_text("{nodes")
    assert main(["moments", "--config", str(broken)]) == 2
    assert main(["moments", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["pmf", "--config", cfg]) == 2
    assert "error" in capsys.readouterr().err


def test_moments(tmp_path, capsys):
    assert main(["moments", "--config", write(tmp_path, "a.json", pair_doc(0.25))]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["mean"] == pytest.approx(4.0)
    assert doc["variance"] == pytest.approx(12.0)
    assert doc["cdf_99"] == 17
    assert main(["moments", "--config", write(tmp_path, "b.json", pair_doc(1.0))]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["mean"] == pytest.approx(1.0)
    assert doc["variance"] == 0.0


def test_moments_against_walks(tmp_path, capsys):
    p = 0.3
    assert main(["moments", "--config", write(tmp_path, "and.json", and_doc(p))]) == 0
    doc = json.loads(capsys.readouterr().out)
    rng = np.random.default_rng(0)
    n = 1_000_000
    t = np.maximum(rng.geometric(p, n), rng.geometric(p, n))
    assert abs(doc["mean"] - t.mean()) <= 3 * t.std() / np.sqrt(n)


def test_errors_command(tmp_path, capsys):
    cfg = write(tmp_path, "and.json", and_doc())
    out = str(tmp_path / "err.csv")
    assert main(["errors", "--config", cfg, "--t", "2", "--eps", "0.5", "--out", out]) == 0
    table = rows(out)
    assert float(table[0]["p_k_given_t"]) == pytest.approx(0.6)
    assert float(table[1]["p_k_given_t"]) == pytest.approx(0.4)
    manifest = json.loads((tmp_path / "err.csv.manifest.json").read_text())
    assert manifest["summary"]["nonheralded_error"] == pytest.approx(0.2)

    assert main(["errors", "--config", cfg, "--t", "2", "--eps", "0"]) == 0
    assert "nonheralded_error=0\n" in capsys.readouterr().err


def test_errors_without_counter(tmp_path):
    assert main(["errors", "--config", write(tmp_path, "p.json", pair_doc(0.5)), "--t", "2"]) == 2
    cfg = write(tmp_path, "and.json", and_doc())
    assert main(["errors", "--config", cfg, "--t", "2", "--counter", "nope"]) == 2


def test_innsbruck_sweep(tmp_path):
    out = str(tmp_path / "k.csv")
    args = ["innsbruck", "sweep", "--q0", "2,4", "--p", "0.1", "--eps-w", "1e-4", "--samples", "20000", "--out", out]
    assert main(args) == 0
    table = rows(out)
    assert [int(r["q0"]) for r in table] == [2, 4]
    for r in table:
        assert float(r["K"]) >= float(r["K_simplified"])


def test_innsbruck_rejects_zero_samples():
    assert main(["innsbruck", "--q0", "2", "--p", "0.5", "--eps-w", "1e-3", "--samples", "0"]) == 2


def test_innsbruck_low_sample_warning(tmp_path):
    out = tmp_path / "few.csv"
    args = ["innsbruck", "--q0", "2", "--p", "0.3", "--eps-w", "1e-3", "--samples", "5", "--out", str(out)]
    assert main(args) == 4
    assert out.exists()


def test_seeded_outputs_identical(tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        args = ["innsbruck", "--q0", "4", "--p", "0.3", "--eps-w", "1e-3", "--samples", "5000", "--seed", "11", "--out", str(out)]
        assert main(args) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_thresholds(tmp_path):
    out = str(tmp_path / "tau.csv")
    args = ["thresholds", "--sections", "2", "--f-init", "0.95", "--eps-l", "1e-3", "--p-grid", "0.2:0.8:4", "--out", out]
    assert main(args) == 0
    table = rows(out)
    assert [r["mode"] for r in table] == ["statistical"] * 4
    taus = [float(r["tau_seconds"]) for r in table]
    assert all(np.isfinite(taus)) and taus == sorted(taus, reverse=True)


def test_thresholds_never_secure(tmp_path, capsys):
    args = ["thresholds", "--sections", "8", "--f-init", "0.9", "--p-grid", "0.5:0.5:1", "--no-statistical"]
    assert main(args) == 0
    assert "0.5,inf,non-statistical" in capsys.readouterr().out
