import json
from pathlib import Path

import numpy as np
import pytest
from rdlab import fileformats
from rdlab.enums import StructuralForm
from rdlab.errors import (
    InconsistentMarginalsError,
    MalformedFileError,
    MissingDimsError,
    RankDeficientError,
    ShapeMismatchError,
)
from rdlab.experiments import TwoQubitScenario
from rdlab.operators import IDENTITY_2, PAULI_Y, Operator, projector


def write(path: Path, payload: object) -> str:
    path.write_text(json.dumps(payload))
    return str(path)


def test_matrix_payload() -> None:
    payload = fileformats.matrix_to_dict(Operator(PAULI_Y, (2,)))
    assert payload["dims"] == [2]
    assert payload["re"] == [[0.0, 0.0], [0.0, 0.0]]
    assert payload["im"] == [[0.0, -1.0], [1.0, 0.0]]
    assert np.allclose(fileformats.matrix_from_dict(payload).mat, PAULI_Y)

    real_only = fileformats.matrix_from_dict({"dims": [2, 1], "re": [[1, 0], [0, 0]]})
    assert real_only.dims == (2, 1)
    assert np.allclose(real_only.mat, projector(2, 0))


def test_matrix_payload_errors() -> None:
    with pytest.raises(MissingDimsError):
        fileformats.matrix_from_dict({"re": [[1.0]]})
    with pytest.raises(ShapeMismatchError):
        fileformats.matrix_from_dict({"dims": [3], "re": [[1, 0], [0, 1]]})
    with pytest.raises(ShapeMismatchError):
        fileformats.matrix_from_dict({"dims": [2], "re": [[1, 0], [0, 1]], "im": [[0]]})
    with pytest.raises(MalformedFileError):
        fileformats.matrix_from_dict({"dims": [2], "re": "identity"})
    with pytest.raises(MalformedFileError):
        fileformats.matrix_from_dict({"dims": [2]})


def test_qmap_payload() -> None:
    qmap = TwoQubitScenario(0.1).assignment().core
    again = fileformats.qmap_from_dict(json.loads(json.dumps(fileformats.qmap_to_dict(qmap))))
    assert again.d_in == 2
    assert again.d_out_dims == (2, 2)
    assert np.allclose(again.transfer, qmap.transfer)

    with pytest.raises(MalformedFileError):
        fileformats.qmap_from_dict({"d_in": 2, "d_out_dims": [2]})


def test_parse_grid() -> None:
    assert fileformats.parse_grid("0.0:1.0:3") == (0.0, 0.5, 1.0)
    assert fileformats.parse_grid(" 0.5:0.5:1 ") == (0.5,)
    assert fileformats.parse_grid({"start": 0.0, "stop": 2.0, "count": 5}) == (
        0.0,
        0.5,
        1.0,
        1.5,
        2.0,
    )
    with pytest.raises(MalformedFileError):
        fileformats.parse_grid("0.0-1.0-3")
    with pytest.raises(MalformedFileError):
        fileformats.parse_grid("0.0:1.0:0")
    with pytest.raises(MalformedFileError):
        fileformats.parse_grid({"start": 0.0, "count": 5})


def test_load_scenario_toml(tmp_path: Path) -> None:
    path = tmp_path / "scenario.toml"
    path.write_text(
        "a = 0.25\n"
        "alphas = [0.3, 0.3, 0.3]\n"
        "seed = 7\n"
        "\n"
        "[theta_grid]\n"
        "start = 0.0\n"
        "stop = 1.0\n"
        "count = 11\n"
    )
    scenario = fileformats.load_scenario(path)
    assert scenario.a == 0.25
    assert scenario.alphas == (0.3, 0.3, 0.3)
    assert scenario.seed == 7
    assert len(scenario.theta_grid) == 11


def test_load_scenario_json(tmp_path: Path) -> None:
    path = write(tmp_path / "scenario.json", {"a": 0.1, "theta_grid": "0.0:3.0:4"})
    scenario = fileformats.load_scenario(path)
    assert scenario.alphas == TwoQubitScenario(0.1).alphas
    assert scenario.theta_grid == (0.0, 1.0, 2.0, 3.0)

    with pytest.raises(MalformedFileError):
        fileformats.load_scenario(write(tmp_path / "missing.json", {"alphas": [0.1]}))


def test_read_paired_basis(tmp_path: Path) -> None:
    pb = TwoQubitScenario(0.2).paired_basis()
    path = write(tmp_path / "basis.json", fileformats.paired_basis_to_dict(pb))
    loaded = fileformats.read_paired_basis(path)
    assert loaded.label == "basis"
    assert loaded.m == 4
    for a, b in zip(loaded.joint_states, pb.joint_states):
        assert np.allclose(a.mat, b.mat)


def test_read_paired_basis_names_inconsistent_pair(tmp_path: Path) -> None:
    payload = {
        "system": [
            fileformats.matrix_to_dict(IDENTITY_2 / 2),
            fileformats.matrix_to_dict(projector(2, 0)),
        ],
        "joint": [
            fileformats.matrix_to_dict(np.eye(4) / 4, dims=(2, 2)),
            fileformats.matrix_to_dict(np.kron(projector(2, 1), projector(2, 0)), dims=(2, 2)),
        ],
    }
    with pytest.raises(InconsistentMarginalsError) as excinfo:
        fileformats.read_paired_basis(write(tmp_path / "bad.json", payload))
    assert excinfo.value.index == 1


def test_read_subspace(tmp_path: Path) -> None:
    element = fileformats.matrix_to_dict(np.eye(4) / 4, dims=(2, 2))
    other = fileformats.matrix_to_dict(np.kron(projector(2, 0), IDENTITY_2 / 2), dims=(2, 2))
    subspace = fileformats.read_subspace(write(tmp_path / "v.json", {"basis": [element, other]}))
    assert subspace.rank == 2
    assert subspace.dims == (2, 2)

    with pytest.raises(RankDeficientError):
        fileformats.read_subspace(write(tmp_path / "dup.json", {"basis": [element, element]}))
    with pytest.raises(MalformedFileError):
        fileformats.read_subspace(write(tmp_path / "empty.json", {"basis": []}))


def test_read_reference(tmp_path: Path) -> None:
    ref = TwoQubitScenario(0.1).reference()
    path = write(tmp_path / "omega.json", fileformats.reference_to_dict(ref))
    loaded = fileformats.read_reference(path)
    assert loaded.m == 4
    assert loaded.dims == (4, 2, 2)
    assert loaded.provenance == "omega"
    assert np.allclose(loaded.state.mat, ref.state.mat)


def test_verdict_payload(tmp_path: Path) -> None:
    payload = {"is_markov": False, "cmi": 0.2, "structural_form": "None", "witness": "w"}
    verdict = fileformats.read_verdict(write(tmp_path / "verdict.json", payload))
    assert verdict.structural_form is StructuralForm.NONE
    assert verdict.to_dict() == payload

    by_name = fileformats.verdict_from_dict({**payload, "structural_form": "NONE"})
    assert by_name.structural_form is StructuralForm.NONE
    markov = fileformats.verdict_from_dict(
        {"is_markov": True, "cmi": 0.0, "structural_form": "ProductR_SE"}
    )
    assert markov.structural_form is StructuralForm.ProductR_SE
    assert markov.witness is None

    with pytest.raises(MalformedFileError):
        fileformats.verdict_from_dict({**payload, "structural_form": "Diagonal"})
    with pytest.raises(MalformedFileError):
        fileformats.verdict_from_dict({**payload, "is_markov": "no"})
    with pytest.raises(MalformedFileError):
        fileformats.verdict_from_dict({"is_markov": True, "cmi": 0.0})


def test_write_json(tmp_path: Path) -> None:
    path = tmp_path / "out.json"
    fileformats.write_json(path, {"is_markov": True})
    assert fileformats.read_json(path) == {"is_markov": True}
