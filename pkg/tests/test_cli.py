from __future__ import annotations

import json

import numpy as np
import pytest

from eklc.cli import main
from eklc.tensor_io import TensorValue, read_tensor, write_tensor
from eklc.types import F64

GOOD = """
kernel scale(in x: f64[4], in j: index<4>[4], out y: f64[4]) {
  let y[i] = x[j[i]] * 2;
}
"""

BAD = """
kernel broken(in x: f64[4], out y: f64[4]) {
  let y[i] = x[i + 1];
}
"""

SUMFACT = """
kernel sumfact(
  in S: rational[4, 4],
  in u: rational[4, 4, 4],
  out t: rational[4, 4, 4]
) {
  let t[i, j, k] =+ (l, m, n) S[l, i] * S[m, j] * S[n, k] * u[l, m, n];
}
"""


@pytest.fixture
def good(tmp_path):
    path = tmp_path / "good.ekl"
    path.write_text(GOOD)
    return str(path)


@pytest.fixture
def bad(tmp_path):
    path = tmp_path / "bad.ekl"
    path.write_text(BAD)
    return str(path)


def test_check_accepts_valid_source(good, capsys):
    assert main(["check", good]) == 0
    assert capsys.readouterr().err == ""


def test_check_reports_diagnostics_on_stderr(bad, capsys):
    assert main(["check", bad]) == 1
    err = capsys.readouterr().err
    assert "error" in err and "bound" in err


def test_missing_file_is_an_io_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["check", "/no/such/file.ekl"])
    assert exc.value.code == 3


def test_bad_binding_syntax_is_a_usage_error(good, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", good, "--in", "nonsense"])
    assert exc.value.code == 2


def test_dump_is_byte_stable(good, capsys):
    assert main(["dump", good, "--stage", "optimized"]) == 0
    first = capsys.readouterr().out
    assert main(["dump", good, "--stage", "optimized"]) == 0
    assert capsys.readouterr().out == first
    assert "ekl." in first


def test_dump_rejects_unknown_stage(good):
    with pytest.raises(SystemExit) as exc:
        main(["dump", good, "--stage", "nonsense"])
    assert exc.value.code == 2


def test_run_with_bound_inputs_writes_outputs(good, tmp_path, capsys):
    x = tmp_path / "x.eklt"
    y = tmp_path / "y.eklt"
    write_tensor(x, TensorValue(F64, (4,), np.array([1.0, 2.0, 3.0, 4.0])))
    # Bind only x; let j come from the seed so the index stays in range.
    code = main(
        ["run", good, "--in", f"x={x}", "--out", f"y={y}", "--seed", "7"]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "multiplies" in out and "random inputs: j" in out
    result = read_tensor(y)
    assert result.kind == F64 and result.shape == (4,)


def test_run_seed_makes_results_reproducible(good, tmp_path):
    a = tmp_path / "a.eklt"
    b = tmp_path / "b.eklt"
    assert main(["run", good, "--out", f"y={a}", "--seed", "5"]) == 0
    assert main(["run", good, "--out", f"y={b}", "--seed", "5"]) == 0
    np.testing.assert_array_equal(read_tensor(a).data, read_tensor(b).data)


def test_run_json_report_is_valid(good, capsys):
    assert main(["run", good, "--json", "--seed", "1"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["kernels"][0]["name"] == "scale"
    counters = report["kernels"][0]["counters"]
    assert set(counters) == {
        "multiplies",
        "adds",
        "comparisons",
        "gather_reads",
        "intermediate_elements",
    }


def test_run_dtype_mismatch_is_reported(good, tmp_path, capsys):
    x = tmp_path / "x.eklt"
    write_tensor(
        x, TensorValue(F64, (3,), np.zeros(3))
    )  # wrong extent for x: f64[4]
    assert main(["run", good, "--in", f"x={x}"]) == 1
    assert "dtype-mismatch" in capsys.readouterr().err


def test_no_lift_does_not_change_results(tmp_path):
    src = tmp_path / "sf.ekl"
    src.write_text(SUMFACT)
    a = tmp_path / "a.eklt"
    b = tmp_path / "b.eklt"
    assert main(["run", str(src), "--out", f"t={a}", "--seed", "3"]) == 0
    assert (
        main(["run", str(src), "--no-lift", "--out", f"t={b}", "--seed", "3"])
        == 0
    )
    assert (read_tensor(a).data == read_tensor(b).data).all()


def test_stats_reports_lifting_ratio(tmp_path, capsys):
    src = tmp_path / "sf.ekl"
    src.write_text(SUMFACT)
    assert main(["stats", str(src), "--json"]) == 0
    report = json.loads(capsys.readouterr().out)
    entry = report["kernels"][0]
    assert entry["naive"]["multiplies"] == 12288
    assert entry["lifted"]["multiplies"] == 768
    assert entry["multiply_ratio"] == 16.0
    assert set(report["stages"]) == {
        "typed",
        "simplified",
        "explicit",
        "generators",
        "optimized",
    }
