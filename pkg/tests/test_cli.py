import shlex

import numpy as np
import pytest

from nnlim import dataset as D
from nnlim import mlp
from nnlim.cli import EXIT_IO, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main, parse_token_command


def rerun_from_header(path):
    line = open(path).readline()
    assert line.startswith("# command: nnlim ")
    return main(shlex.split(line[len("# command: nnlim "):]))


def report(path):
    rows = {}
    for line in open(path).read().splitlines()[2:]:
        k, v = line.split(",", 1)
        if k == "step":
            break
        rows[k] = v
    return rows


def test_simulate_gaussian(tmp_path, capsys):
    out = tmp_path / "r.csv"
    code = main(["simulate", "--eq", "advection1d", "--ic", "gaussian1d", "--n", "40", "--order", "3",
                 "--limiter", "none", "--out", str(out)])
    assert code == EXIT_OK
    err = float(report(out)["l1_error_u0"])
    assert 1.53e-4 / 3 < err < 3 * 1.53e-4
    snap = (tmp_path / "r.snapshot.csv").read_text().splitlines()
    assert snap[1].startswith("# t=1.0 n=40 order=3 limiter=none")


def test_simulate_header_reruns_identically(tmp_path):
    out = tmp_path / "r.csv"
    main(["simulate", "--eq", "advection1d", "--ic", "square1d", "--n", "16", "--order", "2",
          "--limiter", "minmod", "--out", str(out), "--tend", "0.1"])
    first = out.read_bytes()
    assert rerun_from_header(out) == EXIT_OK
    assert out.read_bytes() == first


def test_simulate_failure_exit(tmp_path):
    out = tmp_path / "b.csv"
    code = main(["simulate", "--eq", "euler1d", "--ic", "blast", "--n", "100", "--order", "2",
                 "--limiter", "none", "--out", str(out)])
    assert code == EXIT_NUMERIC
    assert report(out)["status"] == "failed"


@pytest.mark.parametrize("argv", [
    ["bogus"],
    ["simulate", "--eq", "advection1d"],
    ["simulate", "--eq", "advection1d", "--ic", "nope", "--n", "8", "--order", "2", "--limiter", "none"],
    ["simulate", "--eq", "advection1d", "--ic", "gaussian1d", "--n", "8", "--order", "2", "--limiter", "nn"],
    ["train", "--data", "x.csv", "--out", "m.txt", "--arch", "12:ab"],
])
def test_usage_errors(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == EXIT_USAGE


def test_missing_file_exit(tmp_path):
    assert main(["eval", "--data", str(tmp_path / "none.csv"), "--model", "m.txt"]) == EXIT_IO


def test_help_exit_zero(capsys):
    assert main(["train", "--help"]) == EXIT_OK
    assert "256:128:64:64:32" in capsys.readouterr().out


def test_dataset_train_eval_pipeline(tmp_path, capsys):
    data = tmp_path / "d.csv"
    assert main(["gen-dataset", "--dim", "1", "--out", str(data), "--runs",
                 "square1d:1.0:16:2;sine1d:-1.0:16:3"]) == EXIT_OK
    ds = D.load_csv(data)
    assert parse_token_command(ds.provenance["cmd"])[0] == "gen-dataset"
    again = tmp_path / "d2.csv"
    argv = parse_token_command(ds.provenance["cmd"])
    argv[argv.index("--out") + 1] = str(again)
    assert main(argv) == EXIT_OK
    # only the header differs (it records the output path)
    assert again.read_text().splitlines()[1:] == data.read_text().splitlines()[1:]

    model = tmp_path / "m.txt"
    assert main(["train", "--data", str(data), "--arch", "8:4", "--loss", "wce", "--omega", "5",
                 "--batch", "32", "--epochs", "2", "--out", str(model)]) == EXIT_OK
    hist = (tmp_path / "m.history.csv").read_text().splitlines()
    assert "--loss wce --omega 5.0" in hist[0] and hist[2].startswith("index,batch")
    net = mlp.load_model(model)
    assert [L.W.shape[0] for L in net.layers] == [8, 4, 1]
    capsys.readouterr()
    assert main(["eval", "--data", str(data), "--model", str(model), "--invariant"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("accuracy=")


def test_eval_constant_zero_model(tmp_path, capsys):
    rng = np.random.default_rng(0)
    y = np.zeros(100, int)
    y[:10] = 1
    data = tmp_path / "d.csv"
    D.save_csv(D.Dataset("f1d_v1", rng.normal(size=(100, 11)), y), data)
    net = mlp.init((4,), 11, 0)
    for L in net.layers:
        L.W[:] = 0.0
    net.layers[-1].b[:] = -10.0
    model = tmp_path / "z.txt"
    mlp.save_model(net, model)
    assert main(["eval", "--data", str(data), "--model", str(model)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "accuracy=0.9000" in out and "recall=0.0000" in out


def test_rd_and_transfer(tmp_path, capsys):
    src, tgt = tmp_path / "s.csv", tmp_path / "t.csv"
    assert main(["gen-rd-dataset", "--mesh", "cartesian", "--n", "300", "--out", str(src)]) == EXIT_OK
    assert main(["gen-rd-dataset", "--mesh", "triangular", "--n", "300", "--out", str(tgt)]) == EXIT_OK
    assert D.load_csv(tgt).provenance["mesh"] == "triangular"
    model = tmp_path / "m.txt"
    mlp.save_model(mlp.init((8,), 23, 0, "f2d_v1"), model)
    out = tmp_path / "a.txt"
    assert main(["transfer", "--model", str(model), "--source", str(src), "--target", str(tgt),
                 "--lambda", "0.5", "--epochs", "2", "--batch", "32", "--out", str(out)]) == EXIT_OK
    rows = (tmp_path / "a.metrics.csv").read_text().splitlines()
    assert rows[1] == "stage,domain,metric,value" and len(rows) == 2 + 12


def test_convergence_parallel_matches_serial(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    base = ["convergence", "--eq", "advection1d", "--ic", "gaussian1d", "--orders", "2",
            "--grids", "10,20", "--limiters", "none,minmod"]
    assert main(base + ["--out", str(a)]) == EXIT_OK
    assert main(base + ["--out", str(b), "--jobs", "2"]) == EXIT_OK
    la, lb = a.read_text().splitlines(), b.read_text().splitlines()
    assert la[1:] == lb[1:]
    assert "order=2 limiter=minmod" in a.read_text()
