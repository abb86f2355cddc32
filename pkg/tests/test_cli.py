import json

import numpy as np
import pytest

from mhmmr import cli, data_io
from mhmmr.evaluation import channel_subset, evaluate


@pytest.fixture(scope="module")
def sep_data(tmp_path_factory):
    root = tmp_path_factory.mktemp("sep")
    assert cli.main(["simulate", "--preset", "separated", "--seed", "2", "--out", str(root / "data.csv"),
                     "--truth-model", str(root / "truth.json")]) == 0
    return root


def run(*args):
    return cli.main([str(a) for a in args])


def test_simulate_activity_preset(tmp_path, capsys):
    assert run("simulate", "--preset", "paper-shaped", "--seed", 7, "--out", tmp_path / "a.csv") == 0
    s = data_io.load_csv(tmp_path / "a.csv")
    assert s.d == 9 and len(set(s.labels.tolist())) == 12
    assert "d=9 K=12" in capsys.readouterr().out
    assert run("simulate", "--preset", "paper-shaped", "--seed", 7, "--out", tmp_path / "b.csv") == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_simulate_bad_spec(tmp_path, capsys):
    spec = tmp_path / "spec.json"
    spec.write_text('{"K": 2,\n "p": 1,\n "d": }\n')
    assert run("simulate", "--spec", spec, "--out", tmp_path / "x.csv") == 1
    err = capsys.readouterr().err
    assert "InvalidSpec" in err and "line 3" in err


def test_simulate_from_spec_with_seed_override(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"K": 2, "p": 1, "d": 2, "n": 300, "seed": 1}))
    run("simulate", "--spec", spec, "--out", tmp_path / "a.csv")
    run("simulate", "--spec", spec, "--seed", 2, "--out", tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() != (tmp_path / "b.csv").read_bytes()


@pytest.mark.parametrize("argv", [
    ["fit", "--data", "x.csv", "--k", "0", "--out", "m.json"],
    ["fit", "--data", "x.csv", "--k", "3", "--p", "-1", "--out", "m.json"],
    ["fit", "--data", "x.csv", "--out", "m.json"],
    ["simulate", "--preset", "paper-shaped"],
    ["unknown"],
    [],
])
def test_usage_errors_exit_2(argv):
    assert cli.main(argv) == 2


def test_fit_decode_eval_pipeline(sep_data, tmp_path, capsys):
    data = sep_data / "data.csv"
    assert run("fit", "--data", data, "--k", 3, "--p", 1, "--out", tmp_path / "m.json",
               "--trace", tmp_path / "trace.csv") == 0
    trace = np.loadtxt(tmp_path / "trace.csv", delimiter=",", skiprows=1)
    assert np.all(np.diff(np.atleast_2d(trace)[:, 1]) >= -1e-8)
    assert run("decode", "--data", data, "--model", tmp_path / "m.json", "--out", tmp_path / "seg.csv",
               "--posteriors", tmp_path / "post.csv") == 0
    assert run("eval", "--pred", tmp_path / "seg.csv", "--truth", data, "--out", tmp_path / "r.json") == 0
    report = json.loads((tmp_path / "r.json").read_text())
    assert report["accuracy"] >= 0.98
    _, tau, _ = data_io.read_posteriors(tmp_path / "post.csv")
    assert tau.shape[1] == 3


def test_decode_with_truth_model(sep_data, tmp_path):
    data = sep_data / "data.csv"
    truth = data_io.load_csv(data)
    for method in ("viterbi", "map"):
        out = tmp_path / f"{method}.csv"
        assert run("decode", "--data", data, "--model", sep_data / "truth.json", "--out", out,
                   "--method", method) == 0
        _, states = data_io.read_states(out)
        assert evaluate(states, truth.labels).accuracy >= 0.98


def test_iteration_cap_exit_code(sep_data, tmp_path):
    assert run("fit", "--data", sep_data / "data.csv", "--k", 3, "--p", 1, "--max-iter", 1,
               "--out", tmp_path / "m.json") == 3
    assert (tmp_path / "m.json").exists()


def test_order_zero_fit_matches_gaussian_hmm(sep_data, tmp_path):
    from mhmmr.baselines import hmm_gaussian_fit
    assert run("fit", "--data", sep_data / "data.csv", "--k", 3, "--p", 0, "--out", tmp_path / "m.json") == 0
    ref = hmm_gaussian_fit(data_io.load_csv(sep_data / "data.csv"), 3)
    assert (tmp_path / "m.json").read_text() == data_io.dumps_model(ref.params)


def test_dimension_mismatch(tmp_path, capsys):
    run("simulate", "--preset", "paper-shaped", "--seed", 1, "--out", tmp_path / "d.csv",
        "--truth-model", tmp_path / "t.json")
    code = run("decode", "--data", tmp_path / "d.csv", "--channels", "chest,ankle",
               "--model", tmp_path / "t.json", "--out", tmp_path / "s.csv")
    assert code == 1
    assert "DimensionMismatch" in capsys.readouterr().err


def test_eval_self_and_missing_labels(sep_data, tmp_path, capsys):
    data = sep_data / "data.csv"
    assert run("eval", "--pred", data, "--pred-column", "label", "--truth", data) == 0
    assert "accuracy: 100.00%" in capsys.readouterr().out
    s = data_io.load_csv(data)
    data_io.write_csv(s.with_labels(None), tmp_path / "nolab.csv")
    assert run("eval", "--pred", data, "--pred-column", "label", "--truth", tmp_path / "nolab.csv") == 1
    assert "MissingLabels" in capsys.readouterr().err


def test_missing_file_is_runtime_error(tmp_path):
    assert run("fit", "--data", tmp_path / "none.csv", "--k", 2, "--out", tmp_path / "m.json") == 1


def test_compare_table(sep_data, tmp_path, capsys):
    assert run("compare", "--data", sep_data / "data.csv", "--k", 3, "--p", 1,
               "--methods", "kmeans,gmm,hmm_p0,mhmmr", "--out", tmp_path / "c.json") == 0
    out = capsys.readouterr().out
    rows = [ln.split()[0] for ln in out.splitlines() if ln.split()]
    assert [r for r in rows if r in ("kmeans", "gmm", "hmm_p0", "mhmmr")] == ["kmeans", "gmm", "hmm_p0", "mhmmr"]
    doc = json.loads((tmp_path / "c.json").read_text())
    acc = {m: v["accuracy_mean"] for m, v in doc["methods"].items()}
    assert acc["mhmmr"] == max(acc.values())
    assert run("compare", "--data", sep_data / "data.csv", "--k", 3, "--methods", "svm") == 2


def test_compare_on_channel_subset(tmp_path):
    run("simulate", "--preset", "paper-shaped", "--seed", 2, "--out", tmp_path / "d.csv")
    assert run("compare", "--data", tmp_path / "d.csv", "--k", 12, "--methods", "kmeans",
               "--channels", "chest", "--out", tmp_path / "c.json") == 0
    doc = json.loads((tmp_path / "c.json").read_text())
    full = data_io.load_csv(tmp_path / "d.csv")
    assert channel_subset(full, ["chest"]).d == 3
    assert list(doc["methods"]) == ["kmeans"]
