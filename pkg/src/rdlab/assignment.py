"""Assignment maps and the subspaces they act between.

An assignment map sends system states rho_S^(j) to joint states rho_SE^(j) with
Tr_E(rho_SE^(j)) = rho_S^(j), extended linearly over the span V_S of the system
states. Its image V' sits inside V, the span of the joint states; the part of V
that the partial trace annihilates is V0, and V = V' (+) V0.

The map is only defined on V_S. To classify it with Choi-matrix tools it is
extended by zero on the Hilbert-Schmidt orthocomplement of V_S
(``ExtensionPolicy.PseudoInverseZero``). A non-CP extension therefore does *not*
show that no CP assignment exists; the Markov test on the reference state is the
test that decides that.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from rdlab.constants import (
    CONSISTENCY_TOL,
    ETA_RANK,
    MARGINAL_TOL,
    TRACELESS_TOL,
)
from rdlab.enums import ExtensionPolicy
from rdlab.errors import (
    DimMismatchError,
    InconsistentMarginalsError,
    NotInSubspaceError,
    NotTracelessError,
    RankDeficientError,
)
from rdlab.operators import (
    ComplexMatrix,
    DensityMatrix,
    Dims,
    Operand,
    Operator,
    as_array,
    check_unitary,
    is_linearly_independent,
    kron,
    partial_trace,
)
from rdlab.qmaps import QMap, compose, is_cp, partial_trace_map, qmap_from_action, vec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OperatorSubspace:
    """A linearly independent list of operators spanning a subspace."""

    basis: Tuple[ComplexMatrix, ...]
    dims: Dims

    def __post_init__(self) -> None:
        basis = tuple(as_array(b) for b in self.basis)
        for b in basis:
            Operator(b, self.dims)
        if not is_linearly_independent(basis):
            raise RankDeficientError("subspace basis is linearly dependent")
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "dims", tuple(self.dims))

    @property
    def rank(self) -> int:
        return len(self.basis)

    @classmethod
    def from_operators(
        cls, ops: Sequence[Operand], dims: Sequence[int]
    ) -> "OperatorSubspace":
        """Greedy selection in declaration order: keep each operator that is
        independent of those already kept.
        """
        kept: List[ComplexMatrix] = []
        for op in ops:
            candidate = kept + [as_array(op)]
            if is_linearly_independent(candidate):
                kept = candidate
        return cls(tuple(kept), tuple(dims))

    def contains(self, x: Operand, tol: float = TRACELESS_TOL) -> bool:
        """Whether ``x`` lies in the span, up to a residual of ``tol``."""
        if not self.basis:
            return bool(np.max(np.abs(as_array(x)), initial=0.0) <= tol)
        cols = np.stack([b.ravel() for b in self.basis], axis=1)
        target = as_array(x).ravel()
        coeffs, *_ = np.linalg.lstsq(cols, target, rcond=None)
        return bool(np.max(np.abs(cols @ coeffs - target)) <= tol)


@dataclass(frozen=True)
class PairedBasis:
    """System states paired with joint states that reduce to them."""

    sys_states: Tuple[DensityMatrix, ...]
    joint_states: Tuple[DensityMatrix, ...]
    label: str = "paired-basis"

    def __post_init__(self) -> None:
        sys_states = tuple(self.sys_states)
        joint_states = tuple(self.joint_states)
        if not sys_states or len(sys_states) != len(joint_states):
            raise DimMismatchError(
                f"{len(sys_states)} system states paired with "
                f"{len(joint_states)} joint states"
            )
        d_s = sys_states[0].shape[0]
        for j, (rho_s, rho_se) in enumerate(zip(sys_states, joint_states)):
            if rho_s.shape[0] != d_s or rho_se.dims is None or len(rho_se.dims) != 2:
                raise DimMismatchError(f"pair {j} does not have dims (d_S, d_E)")
            if rho_se.dims[0] != d_s:
                raise DimMismatchError(
                    f"joint state {j} has system factor {rho_se.dims[0]}, expected {d_s}"
                )
            marginal = partial_trace(rho_se, [0]).mat
            deviation = float(np.max(np.abs(marginal - rho_s.mat)))
            if deviation > MARGINAL_TOL:
                raise InconsistentMarginalsError(j, deviation)
        if len(sys_states) > d_s**2 or not is_linearly_independent(sys_states):
            raise RankDeficientError("system states are linearly dependent")

        object.__setattr__(self, "sys_states", sys_states)
        object.__setattr__(self, "joint_states", joint_states)

    @property
    def m(self) -> int:
        return len(self.sys_states)

    @property
    def d_s(self) -> int:
        return self.sys_states[0].shape[0]

    @property
    def d_e(self) -> int:
        dims = self.joint_states[0].dims
        assert dims is not None
        return dims[1]

    @classmethod
    def from_joint_states(
        cls, joint_states: Sequence[DensityMatrix], label: str = "paired-basis"
    ) -> "PairedBasis":
        sys_states = tuple(
            DensityMatrix.from_operator(partial_trace(rho, [0])) for rho in joint_states
        )
        return cls(sys_states, tuple(joint_states), label)

    @classmethod
    def product(
        cls,
        sys_states: Sequence[DensityMatrix],
        env_state: DensityMatrix,
        label: str = "product-basis",
    ) -> "PairedBasis":
        """Pairs rho_S^(j) -> rho_S^(j) (x) rho_E with one fixed environment state."""
        joint = tuple(DensityMatrix.from_operator(kron(s, env_state)) for s in sys_states)
        return cls(tuple(sys_states), joint, label)


@dataclass(frozen=True)
class AssignmentMap:
    core: QMap
    domain: OperatorSubspace
    extension_policy: ExtensionPolicy = field(default=ExtensionPolicy.PseudoInverseZero)
    image: Optional[OperatorSubspace] = None

    @property
    def d_s(self) -> int:
        return self.core.d_in

    @property
    def d_e(self) -> int:
        return self.core.d_out_dims[1]

    def apply(self, x: Operand) -> Operator:
        return self.core.apply(x)

    def __call__(self, x: Operand) -> Operator:
        return self.apply(x)

    def subspace(self) -> OperatorSubspace:
        """V, the span of the images of the domain basis."""
        if self.image is not None:
            return self.image
        return OperatorSubspace.from_operators(
            [self.core.apply(b).mat for b in self.domain.basis], self.core.d_out_dims
        )

    def is_cp(self) -> Tuple[bool, float]:
        """CP test of the extended map. A False here is not a proof that no CP
        assignment exists.
        """
        return is_cp(self.core)


def build_assignment(pb: PairedBasis) -> AssignmentMap:
    pairs = [(s.mat, j.mat) for s, j in zip(pb.sys_states, pb.joint_states)]
    core = qmap_from_action(pairs, pb.d_s, (pb.d_s, pb.d_e), restricted=True)
    domain = OperatorSubspace(tuple(s.mat for s in pb.sys_states), (pb.d_s,))
    image = OperatorSubspace(tuple(j.mat for j in pb.joint_states), (pb.d_s, pb.d_e))
    logger.debug(f"built assignment map from {pb.m} pairs ({pb.label})")
    return AssignmentMap(core, domain, ExtensionPolicy.PseudoInverseZero, image)


def general_assignment(
    base: AssignmentMap, y: Operand, v_zero: Optional[OperatorSubspace] = None
) -> AssignmentMap:
    """Lambda~(X) = Lambda(X) + Tr(X) y for a Tr_E-traceless y.

    When ``v_zero`` is given, y must also lie in it.
    """
    y_mat = as_array(y)
    dims = base.core.d_out_dims
    marginal = partial_trace(y_mat, [0], dims=dims).mat
    if np.max(np.abs(marginal)) > TRACELESS_TOL:
        raise NotTracelessError("offset must have vanishing environment marginal")
    if v_zero is not None and not v_zero.contains(y_mat):
        raise NotInSubspaceError("offset is not in the kernel part of the subspace")

    offset = np.outer(vec(y_mat), vec(np.eye(base.d_s)))
    core = QMap(base.d_s, dims, base.core.transfer + offset)
    return AssignmentMap(core, base.domain, base.extension_policy)


def _marginals(v: OperatorSubspace) -> List[ComplexMatrix]:
    return [partial_trace(b, [0], dims=v.dims).mat for b in v.basis]


def decompose_subspace(
    v: OperatorSubspace,
) -> Tuple[OperatorSubspace, OperatorSubspace]:
    """Split V into (V', V0) with Tr_E(V0) = 0 and dim V' = dim Tr_E(V).

    V' keeps, in order, those basis elements whose marginals raise the rank of
    the ones kept so far, so it stays spanned by states when V's basis is. V0 is
    the null space of Tr_E restricted to V, returned with unit Hilbert-Schmidt
    norm. Both parts use the same singular-value cutoff on the stacked marginals.
    """
    if not v.basis:
        return OperatorSubspace((), v.dims), OperatorSubspace((), v.dims)

    trace_cols = np.stack([vec(x) for x in _marginals(v)], axis=1)
    _, singular_values, vh = np.linalg.svd(trace_cols)
    rank = int(np.sum(singular_values > ETA_RANK))

    prime: List[ComplexMatrix] = []
    kept: List[int] = []
    for j, b in enumerate(v.basis):
        if len(prime) == rank:
            break
        candidate = trace_cols[:, kept + [j]]
        if np.linalg.matrix_rank(candidate, tol=ETA_RANK) > len(kept):
            prime.append(b)
            kept.append(j)

    basis_stack = np.stack(v.basis, axis=0)
    zero: List[ComplexMatrix] = []
    for coeffs in vh[rank:].conj():
        element = np.tensordot(coeffs, basis_stack, axes=1)
        zero.append(element / np.linalg.norm(element))

    if len(prime) + len(zero) != v.rank:
        raise RankDeficientError(
            f"decomposition lost dimensions: {len(prime)} + {len(zero)} != {v.rank}"
        )
    logger.debug(f"decompose_subspace: dim V'={len(prime)}, dim V0={len(zero)}")
    return OperatorSubspace(tuple(prime), v.dims), OperatorSubspace(tuple(zero), v.dims)


def is_u_consistent_all(v: OperatorSubspace) -> bool:
    """One-to-one marginal correspondence: dim Tr_E(V) == dim V."""
    _, v_zero = decompose_subspace(v)
    return v_zero.rank == 0


def check_u_consistency_for(
    v: OperatorSubspace, u: Operand, tol: float = CONSISTENCY_TOL
) -> bool:
    """Equal marginals stay equal under U: Tr_E(U Y U^dagger) = 0 for Y in V0."""
    u_mat = check_unitary(u)
    _, v_zero = decompose_subspace(v)
    for y in v_zero.basis:
        evolved = u_mat @ y @ u_mat.conj().T
        if np.max(np.abs(partial_trace(evolved, [0], dims=v.dims).mat)) > tol:
            return False
    return True


def environment_trace_map(d_s: int, d_e: int) -> QMap:
    return partial_trace_map((d_s, d_e), [0])


def marginal_residual(assignment: AssignmentMap) -> float:
    """max |Tr_E(Lambda(b)) - b| over the domain basis."""
    restored = compose(environment_trace_map(assignment.d_s, assignment.d_e), assignment.core)
    return max(
        float(np.max(np.abs(restored.apply(b).mat - b))) for b in assignment.domain.basis
    )
