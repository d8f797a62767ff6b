import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from rdlab import qmaps
from rdlab.errors import (
    DimMismatchError,
    NotHermitianPreservingError,
    RankDeficientError,
    ShapeMismatchError,
)
from rdlab.experiments import TwoQubitScenario, tau_se
from rdlab.operators import (
    IDENTITY_2,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    haar_unitary,
    matrix_unit,
    partial_trace,
    random_density_matrix,
    random_hermitian,
    sigma_dot_sigma,
)
from rdlab.qmaps import QMap

seeds = st.integers(min_value=0, max_value=2**32 - 1)

SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128
)


def product_map() -> QMap:
    pairs = [(b, np.kron(b, IDENTITY_2 / 2)) for b in (IDENTITY_2, PAULI_X, PAULI_Y, PAULI_Z)]
    return qmaps.qmap_from_action(pairs, 2, (2, 2))


def worked_example_map(a: float) -> QMap:
    """Lambda_S(x) = x (x) I/2 + Tr(x) (a/4) sum sigma (x) sigma, from the Pauli basis."""
    pairs = [(p, np.kron(p, IDENTITY_2 / 2)) for p in (PAULI_X, PAULI_Y, PAULI_Z)]
    pairs.append((IDENTITY_2, np.kron(IDENTITY_2, IDENTITY_2) / 2 + a / 2 * sigma_dot_sigma()))
    return qmaps.qmap_from_action(pairs, 2, (2, 2))


def random_hermitian_preserving_tp_map(d: int, rng: np.random.Generator) -> QMap:
    """A Hermitian Choi matrix shifted so that Tr_out C = I_in."""
    choi = random_hermitian(d * d, rng)
    partial = np.trace(choi.reshape(d, d, d, d), axis1=1, axis2=3)
    correction = np.kron(np.eye(d) - partial, np.eye(d) / d)
    return qmaps.qmap_from_choi(choi + correction, d, (d,))


def test_vec_is_column_stacking() -> None:
    x = np.array([[1, 2], [3, 4]])
    assert list(qmaps.vec(x)) == [1, 3, 2, 4]
    assert np.allclose(qmaps.unvec(qmaps.vec(x), (2, 2)), x)


def test_sandwich_transfer_convention(rng: np.random.Generator) -> None:
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    b = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    x = rng.standard_normal((3, 3))
    transfer = np.kron(b.conj(), a)
    assert np.allclose(transfer @ qmaps.vec(x), qmaps.vec(a @ x @ b.conj().T))


def test_qmap_from_action_identity_and_transpose() -> None:
    units = [(matrix_unit(2, i, j), matrix_unit(2, i, j)) for i in range(2) for j in range(2)]
    identity = qmaps.qmap_from_action(units, 2, (2,))
    assert np.allclose(identity.transfer, np.eye(4))

    transpose = qmaps.transpose_map(2)
    x = np.array([[1, 2j], [3, 4]])
    assert np.allclose(transpose(x).mat, x.T)


def test_qmap_from_action_worked_example() -> None:
    a = 0.1
    lam = worked_example_map(a)
    for alpha in ([0.3, 0.0, 0.0], [0.1, -0.2, 0.4], [0.0, 0.0, 0.0]):
        rho = (IDENTITY_2 + sum(c * s for c, s in zip(alpha, (PAULI_X, PAULI_Y, PAULI_Z)))) / 2
        assert np.allclose(lam(rho).mat, tau_se(a, alpha).mat, atol=1e-12)


def test_qmap_from_action_errors() -> None:
    with pytest.raises(RankDeficientError):
        qmaps.qmap_from_action([(PAULI_X, PAULI_X), (2 * PAULI_X, PAULI_X)], 2, (2,))
    with pytest.raises(RankDeficientError):
        qmaps.qmap_from_action([(PAULI_X, PAULI_X)], 2, (2,))
    with pytest.raises(DimMismatchError):
        qmaps.qmap_from_action([(PAULI_X, np.eye(3))], 2, (2,), restricted=True)
    with pytest.raises(RankDeficientError):
        qmaps.qmap_from_action([], 2, (2,))


def test_restricted_action_is_zero_off_domain() -> None:
    qmap = qmaps.qmap_from_action([(IDENTITY_2 / 2, np.eye(4) / 4)], 2, (2, 2), restricted=True)
    assert np.allclose(qmap(IDENTITY_2 / 2).mat, np.eye(4) / 4)
    assert np.allclose(qmap(PAULI_Z).mat, 0)


def test_qmap_shape_validation() -> None:
    with pytest.raises(ShapeMismatchError):
        QMap(2, (2,), np.eye(3))
    with pytest.raises(DimMismatchError):
        qmaps.identity_map(2).apply(np.eye(3))


def test_choi_of() -> None:
    choi = qmaps.choi_of(qmaps.identity_map(2))
    values = np.linalg.eigvalsh(choi.mat)
    assert np.allclose(values, [0, 0, 0, 2])

    assert np.allclose(qmaps.choi_of(qmaps.transpose_map(2)).mat, SWAP)
    assert qmaps.choi_of(product_map()).min_eigenvalue() >= -1e-9


def test_choi_round_trip(rng: np.random.Generator) -> None:
    qmap = random_hermitian_preserving_tp_map(3, rng)
    again = qmaps.qmap_from_choi(qmaps.choi_of(qmap).mat, 3, (3,))
    assert np.allclose(again.transfer, qmap.transfer)


def test_is_hermitian_preserving() -> None:
    assert qmaps.is_hermitian_preserving(qmaps.identity_map(2))
    times_i = QMap(2, (2,), 1j * np.eye(4))
    assert not qmaps.is_hermitian_preserving(times_i)
    for a in (-0.5, 0.0, 0.2):
        assert qmaps.is_hermitian_preserving(worked_example_map(a))


def test_is_cp() -> None:
    cp, witness = qmaps.is_cp(qmaps.transpose_map(2))
    assert not cp
    assert witness == pytest.approx(-1.0)

    cp, witness = qmaps.is_cp(product_map())
    assert cp
    assert witness >= -1e-9

    cp, witness = qmaps.is_cp(worked_example_map(0.2))
    assert not cp
    assert witness < 0

    with pytest.raises(NotHermitianPreservingError):
        qmaps.is_cp(QMap(2, (2,), 1j * np.eye(4)))


def test_is_trace_preserving() -> None:
    assert qmaps.is_trace_preserving(qmaps.identity_map(2))
    assert not qmaps.is_trace_preserving(QMap(2, (2,), 2 * np.eye(4)))
    assert qmaps.is_trace_preserving(worked_example_map(0.2))


def test_operator_sum() -> None:
    identity = qmaps.operator_sum(qmaps.identity_map(2))
    assert identity.coeffs == (1.0,)
    kraus = identity.kraus[0]
    phase = kraus[0, 0] / abs(kraus[0, 0])
    assert np.allclose(kraus / phase, np.eye(2))

    transpose = qmaps.operator_sum(qmaps.transpose_map(2))
    assert sorted(transpose.coeffs, reverse=True) == [1.0, 1.0, 1.0, -1.0]
    assert transpose.residual(qmaps.transpose_map(2)) <= 1e-9

    worked = qmaps.operator_sum(worked_example_map(0.2))
    assert -1.0 in worked.coeffs
    assert not worked.is_all_positive


@given(seeds, st.integers(min_value=1, max_value=3))
def test_operator_sum_fidelity(seed: int, d: int) -> None:
    rng = np.random.default_rng(seed)
    qmap = random_hermitian_preserving_tp_map(d, rng)
    assert qmaps.is_trace_preserving(qmap)
    decomposition = qmaps.operator_sum(qmap)
    assert decomposition.residual(qmap) <= 1e-9
    assert decomposition.tp_residual() <= 1e-9

    x = random_density_matrix(d, rng)
    action = sum(
        e * k @ x @ k.conj().T for e, k in zip(decomposition.coeffs, decomposition.kraus)
    )
    assert np.max(np.abs(action - qmap(x).mat)) <= 1e-9


def test_operator_sum_fidelity_batch() -> None:
    rng = np.random.default_rng(6)
    for k in range(100):
        qmap = random_hermitian_preserving_tp_map(1 + k % 3, rng)
        decomposition = qmaps.operator_sum(qmap)
        assert decomposition.residual(qmap) <= 1e-9
        assert decomposition.tp_residual() <= 1e-9


@given(seeds)
def test_cp_matches_operator_sum_signs(seed: int) -> None:
    rng = np.random.default_rng(seed)
    qmap = random_hermitian_preserving_tp_map(2, rng)
    eigenvalues = np.linalg.eigvalsh(qmaps.choi_of(qmap).mat)
    if np.min(np.abs(eigenvalues)) <= 1e-10:
        return
    cp, _ = qmaps.is_cp(qmap)
    assert cp == qmaps.operator_sum(qmap).is_all_positive


@given(seeds, st.integers(min_value=1, max_value=4))
def test_unitary_maps_are_channels(seed: int, d: int) -> None:
    rng = np.random.default_rng(seed)
    qmap = qmaps.unitary_map(haar_unitary(d, rng))
    cp, _ = qmaps.is_cp(qmap)
    assert cp
    assert qmaps.is_trace_preserving(qmap)


def test_compose() -> None:
    g = worked_example_map(0.1)
    assert np.allclose(qmaps.compose(qmaps.identity_map(4), g).transfer, g.transfer)

    trace_e = qmaps.partial_trace_map((2, 2), [0])
    restored = qmaps.compose(trace_e, worked_example_map(0.1))
    assert np.allclose(restored.transfer, np.eye(4))

    swapped = qmaps.compose(trace_e, qmaps.compose(qmaps.unitary_map(SWAP, (2, 2)), product_map()))
    x = np.array([[0.3, 0.1 + 0.2j], [0.5, 0.7]])
    assert np.allclose(swapped(x).mat, np.trace(x) * IDENTITY_2 / 2)

    with pytest.raises(DimMismatchError):
        qmaps.compose(qmaps.identity_map(3), g)


def test_choi_of_composition(rng: np.random.Generator) -> None:
    f = random_hermitian_preserving_tp_map(2, rng)
    g = qmaps.unitary_map(haar_unitary(2, rng))
    composed = qmaps.compose(f, g)
    rebuilt = qmaps.qmap_from_choi(qmaps.choi_of(composed).mat, 2, (2,))
    assert np.max(np.abs(rebuilt.transfer - f.transfer @ g.transfer)) <= 1e-9


def test_partial_trace_map_matches_partial_trace(rng: np.random.Generator) -> None:
    rho = random_density_matrix(12, rng)
    for keep in ([0], [1], [2], [0, 2]):
        qmap = qmaps.partial_trace_map((2, 3, 2), keep)
        expected = partial_trace(rho, keep, dims=(2, 3, 2)).mat
        assert np.allclose(qmap(rho).mat, expected)


def test_classify() -> None:
    transpose = qmaps.classify(qmaps.transpose_map(2))
    assert transpose.hermitian_preserving
    assert transpose.trace_preserving
    assert transpose.cp is False
    assert transpose.min_choi_eigenvalue == pytest.approx(-1.0)

    not_hermitian = qmaps.classify(QMap(2, (2,), 1j * np.eye(4)))
    assert not_hermitian.cp is None
    assert not_hermitian.to_dict()["min_choi_eigenvalue"] is None


def test_scenario_assignment_matches_pauli_construction() -> None:
    a = 0.15
    scenario = TwoQubitScenario(a)
    assignment = scenario.assignment()
    assert np.allclose(assignment.core.transfer, worked_example_map(a).transfer, atol=1e-10)
