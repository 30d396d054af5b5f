import json

import pytest

from bilaplace.cli import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, VERIFY_IDS, main


def _run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_green_rows_cover_the_lattice(capsys):
    code, out, err = _run(["green", "--M", "8", "--y", "4,4"], capsys)
    assert code == EXIT_OK
    lines = out.strip().splitlines()
    assert lines[0] == "ix,iy,value" and len(lines) == 1 + 81
    summary = json.loads(err)
    assert summary["config"]["M"] == 8


def test_boundary_source_gives_zero_column(capsys):
    code, out, _ = _run(["green", "--M", "6", "--y", "0,3"], capsys)
    assert code == EXIT_OK
    assert all(float(line.split(",")[-1]) == 0 for line in out.strip().splitlines()[1:])


@pytest.mark.parametrize("argv", [
    ["green", "--M", "8", "--y", "99,99"],
    ["green", "--M", "8", "--y", "1,2,3"],
    ["verify", "--id", "nope"],
    ["sample", "--N", "-1"],
    ["green", "--M", "8", "--y", "4,4", "--derivatives"],
    ["solve", "--M", "8", "--n", "5"],
])
def test_usage_errors(argv, capsys):
    code, _, err = _run(argv, capsys)
    assert code == EXIT_USAGE and err


def test_unknown_id_lists_valid_ones(capsys):
    _, _, err = _run(["verify", "--id", "nope"], capsys)
    assert all(i in err for i in VERIFY_IDS)


def test_argparse_errors_return_code(capsys):
    assert main(["solve"]) == EXIT_USAGE


def test_nonconvergence_exit_code(capsys):
    code, _, _ = _run(["solve", "--M", "16", "--y", "8,8", "--tol", "1e-14", "--maxiter", "2"], capsys)
    assert code == EXIT_NUMERIC


def test_sample_is_byte_identical_for_a_seed(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["sample", "--N", "2", "--samples", "50", "--seed", "5", "--out", str(a)]) == EXIT_OK
    assert main(["sample", "--N", "2", "--samples", "50", "--seed", "5", "--out", str(b)]) == EXIT_OK
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    data = json.loads((tmp_path / "a.json").read_text())
    assert data["size"] == 25 and len(data["exact_variance"]) == 25


def test_verify_json_structure(tmp_path):
    prefix = tmp_path / "v"
    assert main(["verify", "--id", "caccioppoli", "--M", "16", "--trials", "4", "--out", str(prefix)]) == 0
    data = json.loads((tmp_path / "v.json").read_text())
    rep = data["reports"][0]
    assert data["config"]["id"] == "caccioppoli"
    for key in ("estimate_id", "n", "grids", "constant_per_grid", "global_constant", "witness", "verdict"):
        assert key in rep
    assert (tmp_path / "v.csv").read_text().startswith("estimate_id,")


def test_green_derivatives_file(tmp_path):
    prefix = tmp_path / "g"
    assert main(["green", "--M", "6", "--y", "3,3", "--derivatives", "--out", str(prefix)]) == 0
    assert (tmp_path / "g.derivatives.csv").stat().st_size > 0


def test_repulsion_summary(capsys):
    code, out, err = _run(["repulsion", "--N", "1,2", "--samples", "2000"], capsys)
    assert code == EXIT_OK
    assert out.splitlines()[0].startswith("N,samples,hits")
    assert "monotone" in json.loads(err)
