"""Readers and writers for the JSON and TOML files used by the command line.

Every matrix travels as ``{"dims": [...], "re": [[...]], "im": [[...]]}`` in
row-major order; ``im`` may be omitted for real matrices.
"""
import json
import logging
import math
import tomllib
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from parse import Result, parse
from rdlab.assignment import OperatorSubspace, PairedBasis
from rdlab.constants import (
    BASIS,
    D_IN,
    D_OUT_DIMS,
    DEFAULT_SEED,
    DIMS,
    GRID_FORMAT,
    IM,
    JOINT,
    RE,
    SYSTEM,
    TRANSFER,
)
from rdlab.enums import StructuralForm
from rdlab.errors import MalformedFileError, MissingDimsError, ShapeMismatchError
from rdlab.experiments import TwoQubitScenario
from rdlab.operators import ComplexMatrix, DensityMatrix, Operand, Operator, as_array
from rdlab.qmaps import QMap
from rdlab.reference import MarkovVerdict, ReferenceState

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def read_json(path: PathLike) -> Any:
    with open(path) as f:
        return json.load(f)


def write_json(path: PathLike, payload: Any) -> None:
    with open(path, "w") as f:
        f.write(json.dumps(payload, indent=2))
    logger.info(f"Data successfully written to {path}")


def _require(payload: Mapping[str, Any], key: str, what: str) -> Any:
    if not isinstance(payload, Mapping) or key not in payload:
        raise MalformedFileError(f"{what} is missing the '{key}' key")
    return payload[key]


def _int_list(value: Any, what: str) -> Tuple[int, ...]:
    if isinstance(value, (str, bytes, Mapping)) or not isinstance(value, Sequence):
        raise MalformedFileError(f"{what} must be a list of integers, got {value!r}")
    if not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        raise MalformedFileError(f"{what} must be a list of integers, got {value!r}")
    return tuple(value)


def _float_list(value: Any, what: str) -> Tuple[float, ...]:
    if isinstance(value, (str, bytes, Mapping)) or not isinstance(value, Sequence):
        raise MalformedFileError(f"{what} must be a list of numbers, got {value!r}")
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise MalformedFileError(f"{what} must be a list of numbers, got {value!r}")
    return tuple(float(v) for v in value)


def _number(value: Any, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MalformedFileError(f"{what} must be a number, got {value!r}")
    return float(value)


def matrix_to_dict(op: Operand, dims: Optional[Sequence[int]] = None) -> Dict[str, Any]:
    mat = as_array(op)
    op_dims = op.dims if isinstance(op, Operator) else None
    out_dims = list(dims) if dims is not None else op_dims
    return {
        DIMS: list(out_dims) if out_dims is not None else [mat.shape[0]],
        RE: mat.real.tolist(),
        IM: mat.imag.tolist(),
    }


def matrix_from_dict(payload: Mapping[str, Any]) -> Operator:
    if isinstance(payload, Mapping) and DIMS not in payload:
        raise MissingDimsError("matrix payload has no 'dims'")
    dims = _int_list(_require(payload, DIMS, "matrix payload"), "matrix dims")
    try:
        real = np.asarray(_require(payload, RE, "matrix payload"), dtype=np.float64)
        imag = np.asarray(payload.get(IM, np.zeros_like(real)), dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise MalformedFileError(f"matrix entries are not numeric arrays: {e}") from e
    if real.shape != imag.shape:
        raise ShapeMismatchError(f"re {real.shape} and im {imag.shape} differ in shape")
    if real.ndim == 2 and math.prod(dims) != real.shape[0]:
        raise ShapeMismatchError(f"dims {dims} do not match a matrix of order {real.shape[0]}")
    return Operator(real + 1j * imag, dims)


def read_matrix(path: PathLike) -> Operator:
    return matrix_from_dict(read_json(path))


def read_unitary(path: PathLike) -> ComplexMatrix:
    return read_matrix(path).mat


def qmap_to_dict(qmap: QMap) -> Dict[str, Any]:
    return {
        D_IN: qmap.d_in,
        D_OUT_DIMS: list(qmap.d_out_dims),
        TRANSFER: {
            RE: qmap.transfer.real.tolist(),
            IM: qmap.transfer.imag.tolist(),
        },
    }


def qmap_from_dict(payload: Mapping[str, Any]) -> QMap:
    d_in = int(_number(_require(payload, D_IN, "map file"), D_IN))
    d_out_dims = _int_list(_require(payload, D_OUT_DIMS, "map file"), D_OUT_DIMS)
    transfer = _require(payload, TRANSFER, "map file")
    real = np.asarray(_require(transfer, RE, "transfer payload"), dtype=np.float64)
    imag = np.asarray(transfer.get(IM, np.zeros_like(real)), dtype=np.float64)
    return QMap(d_in, d_out_dims, real + 1j * imag)


def read_qmap(path: PathLike) -> QMap:
    return qmap_from_dict(read_json(path))


def paired_basis_to_dict(pb: PairedBasis) -> Dict[str, Any]:
    return {
        SYSTEM: [matrix_to_dict(s) for s in pb.sys_states],
        JOINT: [matrix_to_dict(j) for j in pb.joint_states],
    }


def paired_basis_from_dict(payload: Mapping[str, Any], label: str = "paired-basis") -> PairedBasis:
    """Marginal consistency is checked here; a mismatch names the offending index."""
    system = [matrix_from_dict(s) for s in _require(payload, SYSTEM, "paired basis")]
    joint = [matrix_from_dict(j) for j in _require(payload, JOINT, "paired basis")]
    return PairedBasis(
        tuple(DensityMatrix.from_operator(s) for s in system),
        tuple(DensityMatrix.from_operator(j) for j in joint),
        label,
    )


def read_paired_basis(path: PathLike) -> PairedBasis:
    return paired_basis_from_dict(read_json(path), label=Path(path).stem)


def subspace_from_dict(payload: Mapping[str, Any]) -> OperatorSubspace:
    operators = [matrix_from_dict(b) for b in _require(payload, BASIS, "subspace file")]
    if not operators:
        raise MalformedFileError("subspace basis is empty")
    dims = operators[0].dims
    assert dims is not None
    return OperatorSubspace(tuple(op.mat for op in operators), dims)


def read_subspace(path: PathLike) -> OperatorSubspace:
    return subspace_from_dict(read_json(path))


def read_reference(path: PathLike) -> ReferenceState:
    """A reference state file holds one matrix with dims (m, d_S[, d_E])."""
    op = matrix_from_dict(read_json(path))
    state = DensityMatrix.from_operator(op)
    return ReferenceState(state, state.factor_dims[0], Path(path).stem)


def reference_to_dict(ref: ReferenceState) -> Dict[str, Any]:
    return matrix_to_dict(ref.state)


def verdict_from_dict(payload: Mapping[str, Any]) -> MarkovVerdict:
    """Reads back what ``markov-test -o`` writes; the form may be given by value or name."""
    is_markov = _require(payload, "is_markov", "verdict")
    if not isinstance(is_markov, bool):
        raise MalformedFileError(f"verdict is_markov must be a boolean, got {is_markov!r}")
    form_name = str(_require(payload, "structural_form", "verdict"))
    try:
        form = StructuralForm.from_str(form_name)
    except ValueError as e:
        raise MalformedFileError(f"unknown structural form: {e}") from e
    return MarkovVerdict(
        is_markov,
        _number(_require(payload, "cmi", "verdict"), "verdict cmi"),
        form,
        payload.get("witness"),
        dict(payload.get("tolerances", {})),
    )


def read_verdict(path: PathLike) -> MarkovVerdict:
    return verdict_from_dict(read_json(path))


def parse_grid(grid: Union[str, Mapping[str, Any]]) -> Tuple[float, ...]:
    """Uniform grid from ``"start:stop:count"`` or ``{start, stop, count}``."""
    if isinstance(grid, str):
        parsed = parse(GRID_FORMAT, grid.strip())
        if not parsed:
            raise MalformedFileError(f"grid '{grid}' is not of the form start:stop:count")
        assert isinstance(parsed, Result)
        params = parsed.named
    elif isinstance(grid, Mapping):
        params = {key: _require(grid, key, "grid table") for key in ("start", "stop", "count")}
        _number(params["start"], "grid start")
        _number(params["stop"], "grid stop")
        if not isinstance(params["count"], int) or isinstance(params["count"], bool):
            raise MalformedFileError(f"grid count must be an integer, not {params['count']!r}")
    else:
        raise MalformedFileError(f"grid must be a start:stop:count string or table, not {grid!r}")
    count = int(params["count"])
    if count < 1:
        raise MalformedFileError(f"grid count must be positive, got {count}")
    return tuple(float(x) for x in np.linspace(float(params["start"]), float(params["stop"]), count))


def scenario_from_dict(payload: Mapping[str, Any]) -> TwoQubitScenario:
    a = _number(_require(payload, "a", "scenario"), "scenario a")
    alphas = payload.get("alphas")
    seed = payload.get("seed", DEFAULT_SEED)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise MalformedFileError(f"scenario seed must be an integer, got {seed!r}")
    kwargs: Dict[str, Any] = {
        "a": a,
        "alphas": _float_list(alphas, "scenario alphas") if alphas is not None else None,
        "seed": seed,
    }
    if "theta_grid" in payload:
        kwargs["theta_grid"] = parse_grid(payload["theta_grid"])
    return TwoQubitScenario(**kwargs)


def load_scenario(path: PathLike) -> TwoQubitScenario:
    """Scenario files are TOML when the suffix is ``.toml``, JSON otherwise."""
    if Path(path).suffix == ".toml":
        with open(path, "rb") as f:
            payload: Dict[str, Any] = tomllib.load(f)
    else:
        payload = read_json(path)
    logger.debug(f"loaded scenario from {path}")
    return scenario_from_dict(payload)


def operator_list_to_dict(ops: Sequence[Operand]) -> List[Dict[str, Any]]:
    return [matrix_to_dict(op) for op in ops]
