import json

import pytest

from qtsvd.cli import main
from qtsvd.tensor import Tensor3, save_tensor

import numpy as np


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_classical_json(capsys, tmp_path):
    path = tmp_path / "t.json"
    save_tensor(Tensor3(np.arange(8, dtype=float).reshape(2, 2, 2)), path)
    code, out, _ = _run(capsys, "classical", str(path), "--tau", "1.0")
    assert code == 0
    data = json.loads(out)
    assert data["dims"] == [2, 2, 2] and "delta" in data and "d" in data
    assert data["truncation_error"] >= 0


def test_sve_table(capsys):
    code, out, _ = _run(capsys, "sve", "random:2x2x2", "--np", "5", "--d", "3")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# d=3 n_p=5") and len(lines) == 2 + 4


def test_truncate_and_out_dir(capsys, tmp_path):
    code, out, _ = _run(capsys, "--out", str(tmp_path), "truncate", "random:2x2x2", "--tau", "0", "--np", "3")
    assert code == 0
    data = json.loads(out)
    assert data["success_probability"] == pytest.approx(1.0)
    assert (tmp_path / "truncate.json").exists()


def test_truncate_requires_precision(capsys):
    code, _, err = _run(capsys, "truncate", "random:2x2x2", "--tau", "0")
    assert code == 2 and "epsilon" in err


def test_recommend_prints_pair(capsys):
    code, out, _ = _run(capsys, "--seed", "4", "recommend", "random:2x2x2", "--row", "1", "--tau", "0", "--np", "3")
    assert code == 0
    j, k = map(int, out.split())
    assert 0 <= j < 2 and 0 <= k < 2


def test_variational_dump_state(capsys, tmp_path):
    code, out, _ = _run(
        capsys, "--out", str(tmp_path), "--dump-state", "variational", "random:2x2x2", "--T", "1", "--iters", "3"
    )
    assert code == 0
    assert json.loads(out)["T"] == 1
    assert (tmp_path / "variational_state_i0.json").exists()


def test_bad_inputs(capsys, tmp_path):
    assert _run(capsys, "classical", str(tmp_path / "missing.json"))[0] == 2
    assert _run(capsys, "classical", "random:3x2x2")[0] == 2
    with pytest.raises(SystemExit):
        main(["fig-threshold-sweep", "--np-list", "a,b"])


def test_fig_command(capsys, tmp_path):
    code, out, _ = _run(
        capsys, "--out", str(tmp_path), "fig-err-vs-cost", "--draws", "3", "--T", "1", "--layers", "1", "--dims", "2x2x2"
    )
    assert code == 0 and "csv:" in out
    assert (tmp_path / "fig-err-vs-cost.csv").exists()


def test_truncate_output_reloads_as_tensor(capsys, tmp_path):
    from qtsvd.tensor import load_tensor

    assert main(["--out", str(tmp_path), "truncate", "random:2x2x2", "--tau", "0", "--np", "3"]) == 0
    capsys.readouterr()
    t = load_tensor(tmp_path / "truncate.json")
    assert t.dims == (2, 2, 2)
