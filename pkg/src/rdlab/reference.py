"""Reference states, steering, evolution and the Markov test.

A reference state flags each member of a set of initial states with an orthonormal
vector on an auxiliary system R:

    omega_RS  = sum_l (1/m) |l><l| (x) rho_S^(l)
    omega_RSE = sum_l (1/m) |l><l| (x) rho_SE^(l)

Measuring R steers S(E) into convex mixtures of the members. "Markov" here is a
static property of omega_RSE (R and E are conditionally independent given S); it
says nothing about memory effects in a master equation.
"""
import itertools
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from rdlab.assignment import AssignmentMap, PairedBasis
from rdlab.constants import (
    COMMUTATOR_TOL,
    ETA_CMI,
    ETA_PROB,
    ETA_PSD,
    STRUCTURE_TOL,
)
from rdlab.enums import StructuralForm
from rdlab.errors import (
    DimMismatchError,
    NotPSDError,
    RankDeficientError,
    ZeroProbabilityError,
)
from rdlab.operators import (
    ComplexMatrix,
    DensityMatrix,
    Operand,
    Operator,
    as_array,
    bloch_vector,
    commutator_norm,
    conjugate_by_unitary,
    eig_hermitian,
    is_hermitian,
    kron,
    matrix_unit,
    min_eigenvalue,
    operator_rank,
    partial_trace,
    pauli_matrices,
    projector,
    trace_norm,
    von_neumann_entropy,
)
from rdlab.qmaps import QMap, compose, is_cp, partial_trace_map, qmap_from_action, unitary_map

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReferenceState:
    """Flag-block state on R (x) S (x) E, or R (x) S when bipartite."""

    state: DensityMatrix
    m: int
    provenance: str = "unknown"

    def __post_init__(self) -> None:
        dims = self.state.factor_dims
        if len(dims) not in (2, 3):
            raise DimMismatchError(f"reference states have dims (m, d_S[, d_E]), got {dims}")
        if dims[0] != self.m:
            raise DimMismatchError(f"flag dimension {dims[0]} does not match m={self.m}")

    @property
    def dims(self) -> Tuple[int, ...]:
        return self.state.factor_dims

    @property
    def is_tripartite(self) -> bool:
        return len(self.dims) == 3

    @property
    def d_s(self) -> int:
        return self.dims[1]

    @property
    def member_dims(self) -> Tuple[int, ...]:
        return self.dims[1:]

    def flag_block(self, index: int) -> Operator:
        """m <l|omega|l>, the l-th member of the encoded set."""
        return generalized_steer(self, self.m * projector(self.m, index))

    def marginal(self) -> "ReferenceState":
        """omega_RS = Tr_E(omega_RSE)."""
        if not self.is_tripartite:
            raise DimMismatchError("marginal() needs a tripartite reference state")
        reduced = partial_trace(self.state, [0, 1])
        return ReferenceState(
            DensityMatrix.from_operator(reduced), self.m, self.provenance
        )


@dataclass(frozen=True)
class SteeredSet:
    reference: ReferenceState
    members: Tuple[DensityMatrix, ...] = ()

    def steer(self, p_r: Operand) -> "SteeredSet":
        return SteeredSet(self.reference, self.members + (steer(self.reference, p_r),))

    @classmethod
    def from_requests(
        cls, reference: ReferenceState, requests: Sequence[Operand]
    ) -> "SteeredSet":
        return cls(reference, tuple(steer(reference, p) for p in requests))


@dataclass(frozen=True)
class MarkovVerdict:
    is_markov: bool
    cmi: float
    structural_form: StructuralForm = StructuralForm.NONE
    witness: Optional[str] = None
    tolerances: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "is_markov": self.is_markov,
            "cmi": self.cmi,
            "structural_form": self.structural_form.value,
            "witness": self.witness,
        }
        if self.tolerances:
            out["tolerances"] = dict(self.tolerances)
        return out


def _flag_sum(members: Sequence[Operand], member_dims: Tuple[int, ...]) -> ComplexMatrix:
    m = len(members)
    order = m * int(np.prod(member_dims))
    mat = np.zeros((order, order), dtype=np.complex128)
    for index, member in enumerate(members):
        mat += np.kron(projector(m, index), as_array(member)) / m
    return mat


def build_reference_bipartite(pb: PairedBasis) -> ReferenceState:
    mat = _flag_sum(pb.sys_states, (pb.d_s,))
    return ReferenceState(DensityMatrix(mat, (pb.m, pb.d_s)), pb.m, pb.label)


def build_reference_tripartite(pb: PairedBasis) -> ReferenceState:
    mat = _flag_sum(pb.joint_states, (pb.d_s, pb.d_e))
    return ReferenceState(DensityMatrix(mat, (pb.m, pb.d_s, pb.d_e)), pb.m, pb.label)


def _check_flag_operator(ref: ReferenceState, op: Operand) -> ComplexMatrix:
    mat = as_array(op)
    if mat.shape != (ref.m, ref.m):
        raise DimMismatchError(
            f"operator on R must be {ref.m}x{ref.m}, got shape {mat.shape}"
        )
    return mat


def generalized_steer(ref: ReferenceState, a_r: Operand) -> Operator:
    """Tr_R[(A_R (x) I) omega] for any operator A_R, left unnormalized."""
    a_mat = _check_flag_operator(ref, a_r)
    rest = int(np.prod(ref.member_dims))
    weighted = np.kron(a_mat, np.eye(rest)) @ ref.state.mat
    keep = range(1, len(ref.dims))
    return partial_trace(weighted, keep, dims=ref.dims)


def steer(ref: ReferenceState, p_r: Operand, tol_prob: float = ETA_PROB) -> DensityMatrix:
    """Conditional state after the outcome described by the positive operator P_R."""
    p_mat = _check_flag_operator(ref, p_r)
    if not is_hermitian(p_mat) or min_eigenvalue(p_mat) < -ETA_PSD:
        raise NotPSDError("steering needs a positive semidefinite operator on R")

    unnormalized = generalized_steer(ref, p_mat)
    probability = float(np.trace(unnormalized.mat).real)
    if probability <= tol_prob:
        raise ZeroProbabilityError(f"steering outcome has probability {probability:.3e}")
    mat = unnormalized.mat / probability
    return DensityMatrix((mat + mat.conj().T) / 2, unnormalized.dims)


def generalized_steered_span(ref: ReferenceState) -> int:
    """Dimension of the span of Tr_R[(A_R (x) I) omega] over all A_R."""
    outputs = [
        generalized_steer(ref, matrix_unit(ref.m, i, j)).mat
        for i in range(ref.m)
        for j in range(ref.m)
    ]
    return operator_rank(outputs)


def evolve_reference(ref: ReferenceState, u: Operand) -> ReferenceState:
    """(I_R (x) U) omega (I_R (x) U)^dagger for U on S (x) E."""
    if not ref.is_tripartite:
        raise DimMismatchError("evolve_reference needs a tripartite reference state")
    u_mat = as_array(u)
    order = int(np.prod(ref.member_dims))
    if u_mat.shape != (order, order):
        raise DimMismatchError(f"unitary must act on S (x) E of order {order}")
    evolved = conjugate_by_unitary(np.kron(np.eye(ref.m), u_mat), ref.state)
    assert isinstance(evolved, DensityMatrix)
    return ReferenceState(evolved, ref.m, ref.provenance)


def evolve_reference_bipartite(ref: ReferenceState, e_s: QMap) -> ReferenceState:
    """id_R (x) E_S, applied to every (l, l') block of omega_RS."""
    if ref.is_tripartite:
        raise DimMismatchError("evolve_reference_bipartite needs a bipartite reference")
    d_s = ref.d_s
    if e_s.d_in != d_s or e_s.d_out != d_s:
        raise DimMismatchError(
            f"map {e_s.d_in} -> {e_s.d_out_dims} does not act on the {d_s}-dim system"
        )
    blocks = ref.state.mat.reshape(ref.m, d_s, ref.m, d_s)
    out = np.zeros_like(blocks)
    for row, col in itertools.product(range(ref.m), repeat=2):
        out[row, :, col, :] = e_s.apply(blocks[row, :, col, :]).mat
    mat = out.reshape(ref.m * d_s, ref.m * d_s)
    return ReferenceState(
        DensityMatrix((mat + mat.conj().T) / 2, ref.dims), ref.m, ref.provenance
    )


def reduced_dynamics(lambda_s: AssignmentMap, u: Operand) -> QMap:
    """E_S = Tr_E o Ad_U o Lambda_S."""
    dims = (lambda_s.d_s, lambda_s.d_e)
    u_mat = as_array(u)
    if u_mat.shape != (dims[0] * dims[1],) * 2:
        raise DimMismatchError(f"unitary of shape {u_mat.shape} does not act on S (x) E {dims}")
    evolve = unitary_map(u_mat, dims)
    return compose(partial_trace_map(dims, [0]), compose(evolve, lambda_s.core))


def conditional_mutual_information(ref: ReferenceState) -> float:
    """I(R;E|S) = S(RS) + S(SE) - S(S) - S(RSE), in nats."""
    omega = ref.state
    return (
        von_neumann_entropy(partial_trace(omega, [0, 1]))
        + von_neumann_entropy(partial_trace(omega, [1, 2]))
        - von_neumann_entropy(partial_trace(omega, [1]))
        - von_neumann_entropy(omega)
    )


def _is_product(omega: Operand, dims: Sequence[int], left: Sequence[int]) -> bool:
    """Whether omega equals the product of its marginals on ``left`` and the rest."""
    right = [i for i in range(len(dims)) if i not in left]
    product = kron(partial_trace(omega, left, dims=dims), partial_trace(omega, right, dims=dims))
    return trace_norm(as_array(omega) - product.mat) <= STRUCTURE_TOL


def _qubit_axis_basis(tensor: ComplexMatrix) -> ComplexMatrix:
    """Orthonormal S basis in which every S-slice of omega could be diagonal.

    Slices are t[r, :, e, r', :, e']; their Hermitian and anti-Hermitian parts
    must all be diagonal in one basis, fixed by the longest Bloch vector.
    """
    m, _, d_e = tensor.shape[:3]
    best = np.zeros(3)
    for r, e, r2, e2 in itertools.product(range(m), range(d_e), range(m), range(d_e)):
        piece = tensor[r, :, e, r2, :, e2]
        for part in ((piece + piece.conj().T) / 2, (piece - piece.conj().T) / 2j):
            axis = bloch_vector(part)
            if np.linalg.norm(axis) > np.linalg.norm(best):
                best = axis
    if np.linalg.norm(best) <= COMMUTATOR_TOL:
        return np.eye(2, dtype=np.complex128)
    unit = best / np.linalg.norm(best)
    generator = sum(c * s for c, s in zip(unit, pauli_matrices()))
    _, vectors = eig_hermitian(generator)
    return vectors


def _is_qubit_direct_sum(ref: ReferenceState) -> bool:
    m, d_s, d_e = ref.dims
    tensor = ref.state.mat.reshape(m, d_s, d_e, m, d_s, d_e)
    basis = _qubit_axis_basis(tensor)
    rotation = np.kron(np.kron(np.eye(m), basis.conj().T), np.eye(d_e))
    rotated = (rotation @ ref.state.mat @ rotation.conj().T).reshape(m, d_s, d_e, m, d_s, d_e)

    off_diagonal = rotated[:, 0, :, :, 1, :].reshape(m * d_e, m * d_e)
    if trace_norm(off_diagonal) > STRUCTURE_TOL:
        return False
    for s in range(d_s):
        block = rotated[:, s, :, :, s, :].reshape(m * d_e, m * d_e)
        weight = float(np.trace(block).real)
        if weight <= ETA_PROB:
            continue
        if not _is_product(block / weight, (m, d_e), [0]):
            return False
    return True


def _commutation_witness(ref: ReferenceState) -> Optional[str]:
    """Names the first pair of flag blocks whose S-marginals fail to commute."""
    marginals = [partial_trace(ref.flag_block(index), [0]).mat for index in range(ref.m)]
    for i, j in itertools.combinations(range(ref.m), 2):
        norm = commutator_norm(marginals[i], marginals[j])
        if norm > COMMUTATOR_TOL:
            return (
                "all rho_S^(l) must commute with each other for a direct-sum form; "
                f"flag blocks {i} and {j} do not (commutator norm {norm:.3e})"
            )
    return None


def structural_form(ref: ReferenceState) -> StructuralForm:
    """The Markov-state structure matched by omega_RSE, if any.

    Product forms are tried for every system dimension; the two-term direct sum
    only for a qubit system, where the three forms are exhaustive.
    """
    if _is_product(ref.state, ref.dims, [0, 1]):
        return StructuralForm.ProductRS_E
    if _is_product(ref.state, ref.dims, [0]):
        return StructuralForm.ProductR_SE
    if ref.d_s == 2 and _is_qubit_direct_sum(ref):
        return StructuralForm.DirectSumQubit
    return StructuralForm.NONE


def markov_test(ref: ReferenceState, tol_cmi: float = ETA_CMI) -> MarkovVerdict:
    """Decide whether omega_RSE is a quantum Markov state.

    The conditional mutual information decides; the structural form is reported
    alongside as an explanation.
    """
    if not ref.is_tripartite:
        raise DimMismatchError("markov_test needs a tripartite reference state")

    cmi = conditional_mutual_information(ref)
    if cmi < -ETA_PSD:
        logger.warning(f"conditional mutual information {cmi:.3e} is negative")
    is_markov = cmi <= tol_cmi

    form = structural_form(ref) if is_markov else StructuralForm.NONE
    witness: Optional[str] = None
    if not is_markov:
        if ref.d_s == 2:
            witness = _commutation_witness(ref)
        if witness is None:
            witness = f"conditional mutual information {cmi:.3e} exceeds {tol_cmi:.1e}"
    elif form is StructuralForm.NONE:
        witness = "no product or qubit direct-sum structure matched"

    logger.debug(f"markov_test: cmi={cmi:.3e}, form={form}")
    return MarkovVerdict(is_markov, cmi, form, witness)


def cp_certificate(
    ref0: ReferenceState, ref_t: ReferenceState, tol_psd: float = ETA_PSD
) -> Tuple[bool, float]:
    """CP verdict for the unique map sending each flag block of ref0 to that of ref_t.

    Refuses unless the blocks of ref0 span all system operators.
    """
    for ref in (ref0, ref_t):
        if ref.is_tripartite:
            raise DimMismatchError("cp_certificate needs bipartite reference states")
    if ref0.m != ref_t.m or ref0.d_s != ref_t.d_s:
        raise DimMismatchError(
            f"references differ: m={ref0.m}/{ref_t.m}, d_S={ref0.d_s}/{ref_t.d_s}"
        )
    d_s = ref0.d_s
    if ref0.m != d_s**2:
        raise RankDeficientError(
            f"{ref0.m} flag blocks cannot span the {d_s**2}-dimensional system operators"
        )
    pairs: List[Tuple[Operand, Operand]] = [
        (ref0.flag_block(index), ref_t.flag_block(index)) for index in range(ref0.m)
    ]
    dynamics = qmap_from_action(pairs, d_s, (d_s,))
    return is_cp(dynamics, tol=tol_psd)
