from __future__ import annotations

import json
from collections.abc import Callable
from pathlib import Path

import numpy as np
import pytest

from epslens.adapters.persistence import read_definition, read_report
from epslens.cli import main
from epslens.contracts import Command, GlueDefinitionDocument
from epslens.stability import half_graph, random_grid_structure

CsvWriter = Callable[..., Path]


def _run(argv: list[str], out: Path) -> tuple[int, dict]:
    code = main([*argv, "--output", str(out)])
    payload = json.loads(out.read_text()) if out.exists() else {}
    return code, payload


@pytest.fixture
def h3_csv(write_matrix: CsvWriter) -> Path:
    return write_matrix("h3.csv", half_graph(3).data)


@pytest.fixture
def h4_csv(write_matrix: CsvWriter) -> Path:
    return write_matrix("h4.csv", half_graph(4).data)


def _fixture_json(tmp_path: Path, table: Path, m_rows: list[str], m_cols: list[str]) -> Path:
    path = tmp_path / "fixture.json"
    path.write_text(json.dumps({"table": table.name, "m_rows": m_rows, "m_cols": m_cols}))
    return path


def test_detect_writes_a_verifiable_report(h3_csv: Path, tmp_path: Path) -> None:
    out = tmp_path / "detect.json"
    code, payload = _run(["detect", "--matrix", str(h3_csv), "--epsilon", "1", "--k", "2"], out)
    assert code == 0
    assert payload["command"] == "detect"
    assert payload["results"]["found"] is True
    assert payload["results"]["chain"]["rows"] == ["a0", "a1", "a2"]
    assert [c["kind"] for c in payload["certificates"]] == ["chain"]
    assert payload["payload_digest"].startswith("sha256:")

    verified = tmp_path / "verified.json"
    code, check = _run(["verify", "--report", str(out)], verified)
    assert code == 0
    assert check["results"]["digest_matches"] is True
    assert check["results"]["passed"] == 1


def test_tampered_reports_fail_verification(h3_csv: Path, tmp_path: Path) -> None:
    out = tmp_path / "detect.json"
    _run(["detect", "--matrix", str(h3_csv), "--epsilon", "1", "--k", "1"], out)
    raw = json.loads(out.read_text())

    raw["results"]["found"] = False
    edited = tmp_path / "edited.json"
    edited.write_text(json.dumps(raw))
    code, check = _run(["verify", "--report", str(edited)], tmp_path / "v1.json")
    assert code == 1
    assert check["results"]["digest_matches"] is False

    raw = json.loads(out.read_text())
    raw["certificates"][0]["epsilon"] = 5.0
    forged = tmp_path / "forged.json"
    forged.write_text(json.dumps(raw))
    code, check = _run(["verify", "--report", str(forged)], tmp_path / "v2.json")
    assert code == 1
    assert check["results"]["checks"][0]["passed"] is False


def test_profile_to_stdout_and_csv(write_matrix: CsvWriter, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    constant = write_matrix("flat.csv", np.full((3, 3), 0.4))
    csv_path = tmp_path / "profile.csv"
    assert main(["profile", "--matrix", str(constant), "--kmax", "2", "--profile-csv", str(csv_path)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["results"]["epsilon"] == {"1": 0.0, "2": 0.0}
    assert payload["results"]["certified"] is True
    assert payload["certificates"] == []
    assert csv_path.read_text().splitlines()[0] == "k,epsilon,certified,diameter"


def test_size_guard_exits_with_two(write_matrix: CsvWriter, capsys: pytest.CaptureFixture[str]) -> None:
    big = write_matrix("big.csv", random_grid_structure(21, 20, seed=1).data)
    assert main(["detect", "--matrix", str(big), "--epsilon", "0.5", "--k", "1"]) == 2
    assert "refused" in capsys.readouterr().err


@pytest.mark.parametrize(
    "extra",
    [
        ["--epsilon", "-1", "--k", "1"],
        ["--epsilon", "1", "--k", "0"],
        ["--epsilon", "1", "--gamma", "0.1", "--delta", "0.2"],
        ["--k", "1"],
    ],
)
def test_bad_parameters_exit_with_one(h3_csv: Path, extra: list[str]) -> None:
    assert main(["detect", "--matrix", str(h3_csv), *extra]) == 1


def test_missing_input_exits_with_one(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["detect", "--epsilon", "1", "--k", "1"]) == 1
    assert "--matrix is required" in capsys.readouterr().err
    assert main(["detect", "--matrix", str(tmp_path / "absent.csv"), "--epsilon", "1", "--k", "1"]) == 1


def test_define_exports_a_glued_definition(h4_csv: Path, tmp_path: Path) -> None:
    definition_path = tmp_path / "def.json"
    code, payload = _run(
        [
            "define", "--matrix", str(h4_csv), "--row", "a2",
            "--epsilon", "0.25", "--gamma", "0.2", "--delta", "0.1",
            "--definition-out", str(definition_path),
        ],
        tmp_path / "define.json",
    )
    assert code == 0
    results = payload["results"]
    assert results["outcome"] == "definition"
    assert results["witness_rows"] == ["a2"]
    assert results["sup_error"] == 0.0
    assert results["definition_id"].startswith("def_")
    assert [c["kind"] for c in payload["certificates"]] == ["witness_set", "glue_definition"]
    assert isinstance(read_definition(definition_path), GlueDefinitionDocument)
    assert main(["verify", "--report", str(tmp_path / "define.json")]) == 0


def test_define_with_the_median_strategy(h3_csv: Path, write_csv: CsvWriter, tmp_path: Path) -> None:
    column = write_csv("p.csv", [["b0", "0.5"], ["b1", "0.5"], ["b2", "0.5"]])
    code, payload = _run(
        ["define", "--matrix", str(h3_csv), "--type-column", str(column), "--epsilon", "0.5", "--strategy", "median"],
        tmp_path / "median.json",
    )
    assert code == 0
    assert payload["results"]["rows"] == ["a0"]
    assert payload["results"]["sup_error"] == 0.5


def test_define_needs_a_type(h3_csv: Path) -> None:
    assert main(["define", "--matrix", str(h3_csv), "--epsilon", "0.5", "--gamma", "0.2", "--delta", "0.1"]) == 1


def test_audit_seminorm_passes_on_the_half_graph(h3_csv: Path, tmp_path: Path) -> None:
    code, payload = _run(["audit-seminorm", "--matrix", str(h3_csv), "--k", "1"], tmp_path / "audit.json")
    assert code == 0
    assert payload["results"]["passed"] is True
    assert payload["results"]["finite_stability"]["status"] == "passed"


def test_cover_command(write_csv: CsvWriter, tmp_path: Path) -> None:
    points = write_csv("points.csv", [["0"], ["3"], ["6"], ["9"]])
    code, payload = _run(["cover", "--matrix", str(points), "--epsilon", "1.5"], tmp_path / "cover.json")
    assert code == 0
    assert payload["results"]["parts"] == [["a0", "a1"], ["a2", "a3"]]
    assert payload["results"]["optimal"] is True
    code, payload = _run(
        ["cover", "--matrix", str(points), "--epsilon", "1.5", "--cover-method", "greedy"], tmp_path / "greedy.json"
    )
    assert payload["results"]["count"] == 4


def test_cb_command_on_a_space_document(tmp_path: Path) -> None:
    metric = np.abs(np.subtract.outer(np.arange(4.0), np.arange(4.0))).tolist()
    doc = {"points": ["p0", "p1", "p2", "p3"], "metric": metric, "closed_generators": [["p0"], ["p0", "p1"], ["p0", "p1", "p2"]]}
    space = tmp_path / "space.json"
    space.write_text(json.dumps(doc))
    code, payload = _run(["cb", "--space", str(space), "--epsilon", "0.5"], tmp_path / "cb.json")
    assert code == 0
    assert payload["results"]["ranks"] == {"p0": 3, "p1": 2, "p2": 1, "p3": 0}
    assert payload["results"]["analyzable"] is True

    bare = tmp_path / "bare.json"
    bare.write_text(json.dumps({"points": doc["points"], "metric": metric}))
    assert main(["cb", "--space", str(bare), "--epsilon", "0.5"]) == 1
    code, payload = _run(["cb", "--space", str(bare), "--epsilon", "0.5", "--force"], tmp_path / "forced.json")
    assert code == 0
    assert set(payload["results"]["ranks"].values()) == {0}


def test_cb_command_on_a_row_space(write_csv: CsvWriter, tmp_path: Path) -> None:
    rows = write_csv("rows.csv", [["0"], ["1"], ["5"]])
    code, payload = _run(["cb", "--matrix", str(rows), "--epsilon", "0.5", "--radius", "2"], tmp_path / "rows.json")
    assert code == 0
    assert payload["results"]["kernel"] == ["a0", "a1"]
    assert main(["cb", "--matrix", str(rows), "--epsilon", "0.5"]) == 1


def test_embed_command(write_csv: CsvWriter, tmp_path: Path) -> None:
    metric = write_csv("path.csv", [["0", "1", "2"], ["1", "0", "1"], ["2", "1", "0"]])
    code, payload = _run(["embed", "--metric", str(metric), "--base", "1"], tmp_path / "embed.json")
    assert code == 0
    assert payload["results"]["distortion"] == 0.0
    assert payload["results"]["images"][1] == [0.0, 0.0, 0.0]
    assert main(["verify", "--report", str(tmp_path / "embed.json")]) == 0


def test_eval_command(tmp_path: Path) -> None:
    labels = ["a", "b", "c"]
    table = {f"{x},{y}": float(i <= j) for i, x in enumerate(labels) for j, y in enumerate(labels)}
    structure = {
        "sorts": {"S": labels},
        "predicates": {"d": {"sorts": ["S", "S"], "envelope": [[0.0, 1.0]], "table": table}},
    }
    path = tmp_path / "structure.json"
    path.write_text(json.dumps(structure))
    out = tmp_path / "eval.json"
    code, payload = _run(
        ["eval", "--structure", str(path), "--formula", "d(x, y)", "--x", "x", "--y", "y", "--kmax", "2"], out
    )
    assert code == 0
    results = payload["results"]
    assert results["diameter"] == 1.0
    assert results["profile"] == {"1": 1.0, "2": 1.0}
    assert results["values"][0] == [[1.0], [1.0], [1.0]]
    assert payload["certificates"][0]["kind"] == "measurement"
    assert main(["verify", "--report", str(out)]) == 0
    assert main(["eval", "--structure", str(path), "--formula", "d(x,", "--x", "x", "--y", "y"]) == 1


def test_fs_level_reports_a_measured_extension(write_matrix: CsvWriter, tmp_path: Path) -> None:
    table = write_matrix("h4.csv", half_graph(4).data)
    fixture = _fixture_json(tmp_path, table, ["a0", "a1", "a2", "a3"], ["b0", "b2"])
    out = tmp_path / "fs.json"
    code, payload = _run(
        ["fs-level", "--fixture", str(fixture), "--row", "a2", "--epsilon", "0.25", "--gamma", "0.2", "--delta", "0.1"],
        out,
    )
    assert code == 0
    results = payload["results"]
    assert results["level"] == 0.0
    assert results["extension"]["n_error"] == 1.0
    assert results["extension"]["bound_holds"] is False
    assert main(["verify", "--report", str(out)]) == 0


def test_symmetry_command(write_matrix: CsvWriter, tmp_path: Path) -> None:
    table = write_matrix("h4.csv", half_graph(4).data)
    fixture = _fixture_json(tmp_path, table, ["a0", "a1", "a2", "a3"], ["b0", "b1", "b2", "b3"])
    out = tmp_path / "sym.json"
    code, payload = _run(
        [
            "symmetry", "--fixture", str(fixture), "--p-row", "a1", "--q-col", "b2",
            "--epsilon", "0.25", "--gamma", "0.2", "--delta", "0.1",
        ],
        out,
    )
    assert code == 0
    assert payload["results"]["realized_in_m"] is True
    assert payload["results"]["distance"] == 0.0
    assert read_report(out).command is Command.SYMMETRY
    assert main(["verify", "--report", str(out)]) == 0
