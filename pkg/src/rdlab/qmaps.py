"""Linear maps between operator spaces.

A ``QMap`` stores its transfer matrix T acting on column-stacked operators,
vec(map(X)) = T vec(X). With this convention X -> A X B^dagger has transfer
conj(B) (x) A. The Choi matrix is C = sum_ij E_ij (x) map(E_ij) with the input
factor first.
"""
import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from rdlab.constants import (
    ETA_HERM,
    ETA_PSD,
    ETA_RANK,
    ETA_RECON,
    ETA_TP,
)
from rdlab.errors import (
    DimMismatchError,
    NotHermitianPreservingError,
    RankDeficientError,
    ShapeMismatchError,
)
from rdlab.operators import (
    ComplexMatrix,
    Dims,
    Operand,
    Operator,
    as_array,
    check_unitary,
    gram_matrix,
    is_hermitian,
    matrix_unit,
    min_eigenvalue,
)

logger = logging.getLogger(__name__)


def vec(x: Operand) -> ComplexMatrix:
    """Column-stacking vectorization."""
    return np.asarray(as_array(x).reshape(-1, order="F"), dtype=np.complex128)


def unvec(v: ComplexMatrix, shape: Tuple[int, int]) -> ComplexMatrix:
    return np.asarray(np.asarray(v).reshape(shape, order="F"), dtype=np.complex128)


@dataclass(frozen=True)
class QMap:
    """A linear map L(C^d_in) -> L(C^d_out) given by its transfer matrix."""

    d_in: int
    d_out_dims: Dims
    transfer: ComplexMatrix

    def __post_init__(self) -> None:
        transfer = np.array(self.transfer, dtype=np.complex128)
        d_out_dims = tuple(int(d) for d in self.d_out_dims)
        expected = (math.prod(d_out_dims) ** 2, self.d_in**2)
        if transfer.shape != expected:
            raise ShapeMismatchError(
                f"transfer has shape {transfer.shape}, expected {expected}"
            )
        transfer.flags.writeable = False
        object.__setattr__(self, "transfer", transfer)
        object.__setattr__(self, "d_out_dims", d_out_dims)

    @property
    def d_out(self) -> int:
        return math.prod(self.d_out_dims)

    def apply(self, x: Operand) -> Operator:
        mat = as_array(x)
        if mat.shape != (self.d_in, self.d_in):
            raise DimMismatchError(
                f"map on {self.d_in}x{self.d_in} operators got shape {mat.shape}"
            )
        out = unvec(self.transfer @ vec(mat), (self.d_out, self.d_out))
        return Operator(out, self.d_out_dims)

    def __call__(self, x: Operand) -> Operator:
        return self.apply(x)


@dataclass(frozen=True)
class ChoiMatrix:
    mat: ComplexMatrix
    d_in: int
    d_out_dims: Dims

    def is_hermitian(self, tol: float = ETA_HERM) -> bool:
        return is_hermitian(self.mat, tol=tol)

    def min_eigenvalue(self) -> float:
        return min_eigenvalue(self.mat)


@dataclass(frozen=True)
class OperatorSum:
    """Signed operator-sum form map(X) = sum_k e_k K_k X K_k^dagger, e_k = +-1."""

    coeffs: Tuple[float, ...]
    kraus: Tuple[ComplexMatrix, ...]
    d_in: int
    d_out_dims: Dims

    def to_qmap(self) -> QMap:
        d_out = math.prod(self.d_out_dims)
        transfer = np.zeros((d_out**2, self.d_in**2), dtype=np.complex128)
        for e, k in zip(self.coeffs, self.kraus):
            transfer += e * np.kron(k.conj(), k)
        return QMap(self.d_in, self.d_out_dims, transfer)

    def residual(self, source: QMap) -> float:
        """Largest entry of the difference between reconstructed and source
        transfer matrices.
        """
        return float(np.max(np.abs(self.to_qmap().transfer - source.transfer)))

    def tp_residual(self) -> float:
        """max |sum_k e_k K_k^dagger K_k - I|."""
        total = np.zeros((self.d_in, self.d_in), dtype=np.complex128)
        for e, k in zip(self.coeffs, self.kraus):
            total += e * (k.conj().T @ k)
        return float(np.max(np.abs(total - np.eye(self.d_in))))

    @property
    def is_all_positive(self) -> bool:
        return all(e > 0 for e in self.coeffs)


@dataclass(frozen=True)
class MapClassification:
    hermitian_preserving: bool
    trace_preserving: bool
    cp: Optional[bool]
    min_choi_eigenvalue: Optional[float]

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def qmap_from_action(
    pairs: Sequence[Tuple[Operand, Operand]],
    d_in: int,
    d_out_dims: Sequence[int],
    restricted: bool = False,
) -> QMap:
    """Build the transfer matrix that sends each input to its paired output.

    With ``restricted=False`` the inputs must span all of L(C^d_in). With
    ``restricted=True`` they only need to be linearly independent; the map is then
    extended by zero on the Hilbert-Schmidt orthocomplement of their span, i.e.
    T = Y (X^dagger X)^-1 X^dagger.
    """
    dims = tuple(d_out_dims)
    d_out = math.prod(dims)
    if not pairs:
        raise RankDeficientError("at least one input/output pair is required")

    inputs = [as_array(x) for x, _ in pairs]
    outputs = [as_array(y) for _, y in pairs]
    for x, y in zip(inputs, outputs):
        if x.shape != (d_in, d_in) or y.shape != (d_out, d_out):
            raise DimMismatchError(
                f"pair of shapes {x.shape} -> {y.shape} does not fit "
                f"{d_in} -> {dims}"
            )

    gram = gram_matrix(inputs)
    min_gram = float(np.linalg.eigvalsh(gram)[0])
    if min_gram <= ETA_RANK:
        raise RankDeficientError(
            f"inputs are linearly dependent (min Gram eigenvalue {min_gram:.3e})"
        )
    if not restricted and len(inputs) != d_in**2:
        raise RankDeficientError(
            f"{len(inputs)} inputs cannot span the {d_in**2}-dimensional domain"
        )

    x_cols = np.stack([vec(x) for x in inputs], axis=1)
    y_cols = np.stack([vec(y) for y in outputs], axis=1)
    transfer = y_cols @ np.linalg.solve(gram, x_cols.conj().T)

    residual = float(np.max(np.abs(transfer @ x_cols - y_cols)))
    logger.debug(f"qmap_from_action: {len(inputs)} pairs, residual {residual:.3e}")
    if residual > ETA_RECON * max(1.0, float(np.max(np.abs(y_cols)))):
        raise RankDeficientError(
            f"inputs too ill-conditioned to reproduce outputs (residual {residual:.3e})"
        )
    return QMap(d_in, dims, transfer)


def qmap_from_choi(choi: Operand, d_in: int, d_out_dims: Sequence[int]) -> QMap:
    """Inverse of ``choi_of``: block (i, j) of the Choi matrix is map(E_ij)."""
    dims = tuple(d_out_dims)
    d_out = math.prod(dims)
    mat = as_array(choi)
    if mat.shape != (d_in * d_out, d_in * d_out):
        raise ShapeMismatchError(
            f"Choi matrix of shape {mat.shape} does not fit {d_in} -> {dims}"
        )
    transfer = np.zeros((d_out**2, d_in**2), dtype=np.complex128)
    for i in range(d_in):
        for j in range(d_in):
            block = mat[i * d_out : (i + 1) * d_out, j * d_out : (j + 1) * d_out]
            transfer[:, i + j * d_in] = vec(block)
    return QMap(d_in, dims, transfer)


def choi_of(qmap: QMap) -> ChoiMatrix:
    d_in, d_out = qmap.d_in, qmap.d_out
    mat = np.zeros((d_in * d_out, d_in * d_out), dtype=np.complex128)
    for i in range(d_in):
        for j in range(d_in):
            image = unvec(qmap.transfer[:, i + j * d_in], (d_out, d_out))
            mat += np.kron(matrix_unit(d_in, i, j), image)
    return ChoiMatrix(mat, d_in, qmap.d_out_dims)


def is_hermitian_preserving(qmap: QMap, tol: float = ETA_HERM) -> bool:
    return choi_of(qmap).is_hermitian(tol=tol)


def is_cp(qmap: QMap, tol: float = ETA_PSD) -> Tuple[bool, float]:
    """CP verdict and the smallest Choi eigenvalue as witness."""
    choi = choi_of(qmap)
    if not choi.is_hermitian():
        raise NotHermitianPreservingError("CP test needs a Hermitian-preserving map")
    witness = choi.min_eigenvalue()
    return witness >= -tol, witness


def is_trace_preserving(qmap: QMap, tol: float = ETA_TP) -> bool:
    """Tr(map(E_ij)) == delta_ij for every matrix unit."""
    d_in, d_out = qmap.d_in, qmap.d_out
    traces = vec(np.eye(d_out)) @ qmap.transfer
    return bool(np.max(np.abs(traces - vec(np.eye(d_in)))) <= tol)


def operator_sum(qmap: QMap, rank_tol: float = ETA_RANK) -> OperatorSum:
    """Signed operator-sum form from the Choi eigendecomposition.

    Each eigenpair (l, v) with |l| > rank_tol contributes e = sign(l) and
    K = sqrt(|l|) unvec(v).
    """
    choi = choi_of(qmap)
    if not choi.is_hermitian():
        raise NotHermitianPreservingError(
            "operator-sum form needs a Hermitian-preserving map"
        )
    eigenvalues, eigenvectors = np.linalg.eigh((choi.mat + choi.mat.conj().T) / 2)
    order = np.argsort(eigenvalues)[::-1]

    coeffs: List[float] = []
    kraus: List[ComplexMatrix] = []
    for k in order:
        eigenvalue = float(eigenvalues[k])
        if abs(eigenvalue) <= rank_tol:
            continue
        coeffs.append(1.0 if eigenvalue > 0 else -1.0)
        kraus.append(
            np.sqrt(abs(eigenvalue))
            * unvec(eigenvectors[:, k], (qmap.d_out, qmap.d_in))
        )
    return OperatorSum(tuple(coeffs), tuple(kraus), qmap.d_in, qmap.d_out_dims)


def compose(f: QMap, g: QMap) -> QMap:
    """f after g."""
    if g.d_out != f.d_in:
        raise DimMismatchError(
            f"cannot compose: inner map outputs {g.d_out_dims}, outer takes {f.d_in}"
        )
    return QMap(g.d_in, f.d_out_dims, f.transfer @ g.transfer)


def classify(qmap: QMap, tol_psd: float = ETA_PSD) -> MapClassification:
    hermitian = is_hermitian_preserving(qmap)
    cp: Optional[bool] = None
    witness: Optional[float] = None
    if hermitian:
        cp, witness = is_cp(qmap, tol=tol_psd)
    return MapClassification(
        hermitian_preserving=hermitian,
        trace_preserving=is_trace_preserving(qmap),
        cp=cp,
        min_choi_eigenvalue=witness,
    )


def identity_map(d: int) -> QMap:
    return QMap(d, (d,), np.eye(d * d, dtype=np.complex128))


def transpose_map(d: int) -> QMap:
    pairs = [
        (matrix_unit(d, i, j), matrix_unit(d, j, i))
        for j in range(d)
        for i in range(d)
    ]
    return qmap_from_action(pairs, d, (d,))


def unitary_map(u: Operand, dims: Optional[Sequence[int]] = None) -> QMap:
    """Ad_U as a QMap; ``dims`` labels the tensor factors it acts on."""
    u_mat = check_unitary(u)
    d = u_mat.shape[0]
    factor_dims = tuple(dims) if dims is not None else (d,)
    if math.prod(factor_dims) != d:
        raise DimMismatchError(f"dims {factor_dims} do not match unitary of order {d}")
    return QMap(d, factor_dims, np.kron(u_mat.conj(), u_mat))


def partial_trace_map(dims: Sequence[int], keep: Sequence[int]) -> QMap:
    """Tr over every factor not in ``keep``, as a QMap."""
    factor_dims = tuple(dims)
    kept = sorted(set(keep))
    d_in = math.prod(factor_dims)
    kept_dims = tuple(factor_dims[i] for i in kept)
    d_out = math.prod(kept_dims)

    # vec(Tr_E X) picks entries of X; build the selection matrix column by column
    transfer = np.zeros((d_out**2, d_in**2), dtype=np.complex128)
    n = len(factor_dims)
    for col in range(d_in):
        col_index = np.unravel_index(col, factor_dims)
        for row in range(d_in):
            row_index = np.unravel_index(row, factor_dims)
            if any(row_index[i] != col_index[i] for i in range(n) if i not in kept):
                continue
            out_row = int(np.ravel_multi_index([row_index[i] for i in kept], kept_dims))
            out_col = int(np.ravel_multi_index([col_index[i] for i in kept], kept_dims))
            transfer[out_row + out_col * d_out, row + col * d_in] = 1.0
    return QMap(d_in, kept_dims, transfer)
