"""Dense operator algebra shared by every other module.

Operators are plain complex numpy arrays. When the tensor-factor structure matters
(partial traces, marginals) they travel as an ``Operator``: an immutable pair of
the matrix and its factor dimensions, listed in the fixed order R, S, E. A
``DensityMatrix`` is an ``Operator`` that has been checked to be a state.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt
from rdlab.constants import (
    ETA_HERM,
    ETA_ORTH,
    ETA_PSD,
    ETA_RANK,
    ETA_TR,
    ETA_UNIT,
    MAX_DIMENSION,
)
from rdlab.errors import (
    InvalidStateError,
    MissingDimsError,
    NotHermitianError,
    NotUnitaryError,
    ShapeMismatchError,
)

logger = logging.getLogger(__name__)

ComplexMatrix = npt.NDArray[np.complex128]
RealVector = npt.NDArray[np.float64]
Dims = Tuple[int, ...]


@dataclass(frozen=True)
class Operator:
    """A dense complex matrix with optional tensor-factor metadata."""

    mat: ComplexMatrix
    dims: Optional[Dims] = None

    def __post_init__(self) -> None:
        mat = np.array(self.mat, dtype=np.complex128)
        if mat.ndim != 2:
            raise ShapeMismatchError(f"expected a matrix, got shape {mat.shape}")
        if max(mat.shape) > MAX_DIMENSION:
            raise ShapeMismatchError(
                f"matrix order {max(mat.shape)} exceeds {MAX_DIMENSION}"
            )
        mat.flags.writeable = False
        object.__setattr__(self, "mat", mat)

        if self.dims is not None:
            dims = tuple(int(d) for d in self.dims)
            if any(d < 1 for d in dims):
                raise ShapeMismatchError(f"factor dimensions must be positive: {dims}")
            if mat.shape[0] != mat.shape[1] or math.prod(dims) != mat.shape[0]:
                raise ShapeMismatchError(
                    f"dims {dims} do not match matrix of shape {mat.shape}"
                )
            object.__setattr__(self, "dims", dims)

    @property
    def shape(self) -> Tuple[int, int]:
        rows, cols = self.mat.shape
        return rows, cols

    def dagger(self) -> "Operator":
        return Operator(self.mat.conj().T, self.dims)

    def is_hermitian(self, tol: float = ETA_HERM) -> bool:
        return is_hermitian(self.mat, tol=tol)


@dataclass(frozen=True)
class DensityMatrix(Operator):
    """A validated quantum state: Hermitian, unit trace and positive semidefinite."""

    def __post_init__(self) -> None:
        if self.dims is None:
            object.__setattr__(self, "dims", (np.asarray(self.mat).shape[0],))
        super().__post_init__()

        if not is_hermitian(self.mat):
            raise InvalidStateError("density matrix is not Hermitian")
        trace = np.trace(self.mat)
        if abs(trace - 1.0) > ETA_TR:
            raise InvalidStateError(f"density matrix has trace {trace.real:.12g}")
        min_eig = float(np.linalg.eigvalsh(_hermitian_part(self.mat))[0])
        if min_eig < -ETA_PSD:
            raise InvalidStateError(
                f"density matrix has negative eigenvalue {min_eig:.3e}"
            )

    @property
    def factor_dims(self) -> Dims:
        assert self.dims is not None
        return self.dims

    @classmethod
    def from_operator(cls, op: "Operand", dims: Optional[Dims] = None) -> "DensityMatrix":
        mat, op_dims = _unpack(op)
        return cls(mat, dims if dims is not None else op_dims)


Operand = Union[Operator, ComplexMatrix]


def _unpack(op: Operand) -> Tuple[ComplexMatrix, Optional[Dims]]:
    if isinstance(op, Operator):
        return op.mat, op.dims
    return np.asarray(op, dtype=np.complex128), None


def as_array(op: Operand) -> ComplexMatrix:
    return _unpack(op)[0]


def _hermitian_part(mat: ComplexMatrix) -> ComplexMatrix:
    return np.asarray((mat + mat.conj().T) / 2, dtype=np.complex128)


def is_hermitian(op: Operand, tol: float = ETA_HERM) -> bool:
    mat = as_array(op)
    if mat.shape[0] != mat.shape[1]:
        return False
    return bool(np.max(np.abs(mat - mat.conj().T), initial=0.0) <= tol)


def is_unitary(u: Operand, tol: float = ETA_UNIT) -> bool:
    mat = as_array(u)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        return False
    residual = mat.conj().T @ mat - np.eye(mat.shape[0])
    return bool(np.max(np.abs(residual)) <= tol)


def has_orthonormal_columns(v: Operand, tol: float = ETA_ORTH) -> bool:
    """V^dagger V = I for a possibly rectangular V."""
    mat = as_array(v)
    if mat.ndim != 2:
        return False
    residual = mat.conj().T @ mat - np.eye(mat.shape[1])
    return bool(np.max(np.abs(residual), initial=0.0) <= tol)


def check_unitary(u: Operand, tol: float = ETA_UNIT) -> ComplexMatrix:
    """Return the matrix of ``u`` or raise ``NotUnitaryError``."""
    mat = as_array(u)
    if not is_unitary(mat, tol=tol):
        raise NotUnitaryError(f"operator of shape {mat.shape} is not unitary")
    return mat


def kron(a: Operand, b: Operand) -> Operator:
    """Kronecker product; factor dims are concatenated when both sides carry them."""
    a_mat, a_dims = _unpack(a)
    b_mat, b_dims = _unpack(b)
    dims = a_dims + b_dims if a_dims is not None and b_dims is not None else None
    return Operator(np.kron(a_mat, b_mat), dims)


def partial_trace(
    m: Operand, keep: Iterable[int], dims: Optional[Sequence[int]] = None
) -> Operator:
    """Trace out every factor not listed in ``keep``.

    Factor dims come from ``dims`` or, failing that, from the operator itself.
    """
    mat, op_dims = _unpack(m)
    factor_dims = tuple(dims) if dims is not None else op_dims
    if factor_dims is None:
        raise MissingDimsError("partial_trace needs tensor-factor dimensions")
    if math.prod(factor_dims) != mat.shape[0] or mat.shape[0] != mat.shape[1]:
        raise ShapeMismatchError(
            f"dims {factor_dims} do not match matrix of shape {mat.shape}"
        )

    kept = sorted(set(keep))
    n = len(factor_dims)
    if not kept or any(not 0 <= k < n for k in kept):
        raise ValueError(f"keep={kept} is not a non-empty subset of range({n})")

    tensor = mat.reshape(factor_dims + factor_dims)
    for axis in reversed([i for i in range(n) if i not in kept]):
        tensor = np.trace(tensor, axis1=axis, axis2=axis + tensor.ndim // 2)

    kept_dims = tuple(factor_dims[i] for i in kept)
    d = math.prod(kept_dims)
    return Operator(tensor.reshape(d, d), kept_dims)


def conjugate_by_unitary(u: Operand, rho: Operand) -> Operator:
    """Ad_U(rho) = U rho U^dagger. States stay states."""
    u_mat = check_unitary(u)
    mat, dims = _unpack(rho)
    if u_mat.shape[0] != mat.shape[0]:
        raise ShapeMismatchError(
            f"unitary of order {u_mat.shape[0]} cannot act on order {mat.shape[0]}"
        )
    out = u_mat @ mat @ u_mat.conj().T
    if isinstance(rho, DensityMatrix):
        return DensityMatrix(_hermitian_part(out), dims)
    return Operator(out, dims)


def eig_hermitian(m: Operand) -> Tuple[RealVector, ComplexMatrix]:
    """Eigenvalues in descending order and the matching orthonormal eigenvectors
    as columns.
    """
    mat = as_array(m)
    if not is_hermitian(mat):
        raise NotHermitianError("eig_hermitian needs a Hermitian matrix")
    eigenvalues, eigenvectors = np.linalg.eigh(_hermitian_part(mat))
    assert has_orthonormal_columns(eigenvectors)
    order = np.argsort(eigenvalues)[::-1]
    return eigenvalues[order], eigenvectors[:, order]


def min_eigenvalue(m: Operand) -> float:
    """Smallest eigenvalue of the Hermitian part."""
    return float(np.linalg.eigvalsh(_hermitian_part(as_array(m)))[0])


def von_neumann_entropy(rho: Operand) -> float:
    """S(rho) = -sum(l ln l) in nats.

    Negative eigenvalues within ETA_PSD are roundoff and clipped to zero; anything
    more negative is not a state.
    """
    eigenvalues = np.linalg.eigvalsh(_hermitian_part(as_array(rho)))
    if eigenvalues[0] < -ETA_PSD:
        raise InvalidStateError(
            f"entropy of an operator with eigenvalue {eigenvalues[0]:.3e}"
        )
    p = np.clip(eigenvalues, 0.0, None)
    p = p[p > 0.0]
    return float(-np.sum(p * np.log(p)))


def hs_inner(a: Operand, b: Operand) -> complex:
    """Hilbert-Schmidt inner product Tr(a^dagger b)."""
    a_mat = as_array(a)
    b_mat = as_array(b)
    if a_mat.shape != b_mat.shape:
        raise ShapeMismatchError(f"shapes {a_mat.shape} and {b_mat.shape} differ")
    return complex(np.vdot(a_mat, b_mat))


def gram_matrix(ops: Sequence[Operand]) -> ComplexMatrix:
    vecs = np.stack([as_array(op).ravel() for op in ops], axis=1)
    return np.asarray(vecs.conj().T @ vecs, dtype=np.complex128)


def is_linearly_independent(ops: Sequence[Operand], tol: float = ETA_RANK) -> bool:
    """Gram-matrix test: the smallest Gram eigenvalue must exceed ``tol``."""
    if not ops:
        return True
    return bool(np.linalg.eigvalsh(gram_matrix(ops))[0] > tol)


def operator_rank(ops: Sequence[Operand], tol: float = ETA_RANK) -> int:
    """Dimension of the complex span of ``ops``."""
    if not ops:
        return 0
    return int(np.sum(np.linalg.eigvalsh(gram_matrix(ops)) > tol))


def trace_norm(m: Operand) -> float:
    return float(np.sum(np.linalg.svd(as_array(m), compute_uv=False)))


def commutator_norm(a: Operand, b: Operand) -> float:
    """Frobenius norm of [a, b]."""
    a_mat = as_array(a)
    b_mat = as_array(b)
    return float(np.linalg.norm(a_mat @ b_mat - b_mat @ a_mat))


def spectral_function(
    h: Operand, f: Callable[[RealVector], npt.NDArray[np.complex128]]
) -> ComplexMatrix:
    """f(H) = V f(diag) V^dagger for Hermitian H."""
    eigenvalues, eigenvectors = eig_hermitian(h)
    return np.asarray(
        (eigenvectors * f(eigenvalues)) @ eigenvectors.conj().T, dtype=np.complex128
    )


def matrix_unit(d: int, i: int, j: int) -> ComplexMatrix:
    unit = np.zeros((d, d), dtype=np.complex128)
    unit[i, j] = 1.0
    return unit


def projector(d: int, index: int) -> ComplexMatrix:
    return matrix_unit(d, index, index)


PAULI_X: ComplexMatrix = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y: ComplexMatrix = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z: ComplexMatrix = np.array([[1, 0], [0, -1]], dtype=np.complex128)
IDENTITY_2: ComplexMatrix = np.eye(2, dtype=np.complex128)


def pauli_matrices() -> Tuple[ComplexMatrix, ComplexMatrix, ComplexMatrix]:
    return PAULI_X, PAULI_Y, PAULI_Z


def sigma_dot_sigma() -> ComplexMatrix:
    """sum_i sigma_i (x) sigma_i on two qubits (equal to 2 SWAP - I)."""
    return np.asarray(
        sum(np.kron(s, s) for s in pauli_matrices()), dtype=np.complex128
    )


def bloch_state(alpha: Sequence[float]) -> DensityMatrix:
    """Qubit state (I + alpha . sigma) / 2."""
    a = np.asarray(alpha, dtype=np.float64)
    if a.shape != (3,):
        raise ShapeMismatchError(f"a Bloch vector has three components, got {a.shape}")
    if np.linalg.norm(a) > 1.0 + ETA_PSD:
        raise InvalidStateError(f"|alpha| = {np.linalg.norm(a):.6g} exceeds 1")
    mat = IDENTITY_2 + sum(c * s for c, s in zip(a, pauli_matrices()))
    return DensityMatrix(mat / 2, (2,))


def bloch_vector(rho: Operand) -> RealVector:
    mat = as_array(rho)
    if mat.shape != (2, 2):
        raise ShapeMismatchError(f"Bloch vectors describe qubits, got {mat.shape}")
    return np.array([np.trace(s @ mat).real for s in pauli_matrices()])


def haar_unitary(d: int, rng: np.random.Generator) -> ComplexMatrix:
    """Haar-random unitary from the QR decomposition of a complex Ginibre matrix."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diagonal = np.diag(r)
    return np.asarray(q * (diagonal / np.abs(diagonal)), dtype=np.complex128)


def random_density_matrix(
    d: int, rng: np.random.Generator, rank: Optional[int] = None
) -> ComplexMatrix:
    """G G^dagger / Tr for a d x rank complex Ginibre matrix G."""
    k = d if rank is None else rank
    g = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    rho = g @ g.conj().T
    return np.asarray(_hermitian_part(rho / np.trace(rho).real), dtype=np.complex128)


def random_hermitian(d: int, rng: np.random.Generator) -> ComplexMatrix:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return _hermitian_part(g)
