"""Scripted two-qubit reproductions and randomized property campaigns.

The worked example couples a qubit system S to a qubit environment E through the
assignment

    Lambda_S(x) = x (x) I_E / 2 + Tr(x) (a / 4) sum_i sigma_i (x) sigma_i

which sends the Bloch state (I + alpha . sigma) / 2 to

    tau_SE = (I + alpha . sigma (x) I + a sum_i sigma_i (x) sigma_i) / 4.

For a != 0 this map is not CP, yet it is a valid assignment on the positivity
domain of tau_SE. The sweeps below look for unitaries under which the induced
reduced dynamics is not CP either.
"""
import itertools
import logging
import math
import multiprocessing as mp
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from rdlab.assignment import AssignmentMap, PairedBasis, build_assignment
from rdlab.constants import (
    COMMUTATOR_NORM,
    COMMUTATOR_TOL,
    DEFAULT_ALPHA_FRACTION,
    DEFAULT_CAMPAIGN_UNITARIES,
    DEFAULT_SEED,
    DEFAULT_THETA_COUNT,
    DEFAULT_THETA_START,
    DEFAULT_THETA_STOP,
    ETA_CMI,
    ETA_PSD,
    IS_CP,
    MIN_EIG,
    NON_CP_WITNESS_THRESHOLD,
    THETA,
    T,
)
from rdlab.errors import OutOfDomainError
from rdlab.operators import (
    IDENTITY_2,
    ComplexMatrix,
    DensityMatrix,
    Operator,
    commutator_norm,
    haar_unitary,
    pauli_matrices,
    random_density_matrix,
    sigma_dot_sigma,
    spectral_function,
)
from rdlab.qmaps import QMap, is_cp
from rdlab.reference import (
    ReferenceState,
    build_reference_tripartite,
    markov_test,
    reduced_dynamics,
)

logger = logging.getLogger(__name__)

CMI = "cmi"
IS_MARKOV = "is_markov"
INSTANCE = "instance"
PART = "part"
VIOLATIONS = "cp_violations"
WITNESS_FOUND = "witness_found"
D_S = "d_s"
D_E = "d_e"

MARKOV_PART = "markov"
NON_MARKOV_PART = "non_markov"
WORKED_EXAMPLE_PART = "worked_example"
WORKED_EXAMPLE_A = 0.2


def positivity_bound(a: float) -> float:
    """Largest |alpha| for which tau_SE(a, alpha) is positive semidefinite."""
    if not -1.0 < a < 1.0 / 3.0:
        raise OutOfDomainError(f"a={a} is outside the positivity domain (-1, 1/3)")
    if a >= 0:
        return math.sqrt((1 + a) * (1 - 3 * a))
    return 1 + a


def default_alphas(a: float) -> Tuple[float, float, float]:
    alpha = DEFAULT_ALPHA_FRACTION * positivity_bound(a)
    return alpha, alpha, alpha


def default_theta_grid() -> Tuple[float, ...]:
    return tuple(
        np.linspace(DEFAULT_THETA_START, DEFAULT_THETA_STOP, DEFAULT_THETA_COUNT)
    )


def tau_se(a: float, alpha: Sequence[float]) -> Operator:
    """The joint operator assigned to the Bloch state with vector ``alpha``.

    Not validated as a state: outside the positivity domain it has negative
    eigenvalues.
    """
    local = sum(c * np.kron(s, IDENTITY_2) for c, s in zip(alpha, pauli_matrices()))
    mat = (np.eye(4) + local + a * sigma_dot_sigma()) / 4
    return Operator(mat, (2, 2))


def build_u_theta(theta: float) -> ComplexMatrix:
    """Rotation by theta in the span of |01> and |10>."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array(
        [[1, 0, 0, 0], [0, c, s, 0], [0, -s, c, 0], [0, 0, 0, 1]],
        dtype=np.complex128,
    )


def commuting_unitary(t: float) -> ComplexMatrix:
    """exp(-i t sum_i sigma_i (x) sigma_i), through the spectral decomposition."""
    return spectral_function(sigma_dot_sigma(), lambda eigs: np.exp(-1j * t * eigs))


@dataclass
class TwoQubitScenario:
    a: float
    alphas: Optional[Tuple[float, float, float]] = None
    theta_grid: Tuple[float, ...] = field(default_factory=default_theta_grid)
    seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        bound = positivity_bound(self.a)
        if self.alphas is None:
            self.alphas = default_alphas(self.a)
        self.alphas = tuple(float(x) for x in self.alphas)  # type: ignore[assignment]
        if len(self.alphas) != 3:
            raise ValueError(f"expected three alphas, got {len(self.alphas)}")
        for alpha in self.alphas:
            if not 0 < abs(alpha) <= bound:
                raise OutOfDomainError(
                    f"|alpha|={abs(alpha)} must lie in (0, {bound:.6g}] for a={self.a}"
                )
        self.theta_grid = tuple(float(x) for x in self.theta_grid)
        if not self.theta_grid:
            raise ValueError("theta_grid must not be empty")

    def paired_basis(self) -> PairedBasis:
        """Three axis states (I + alpha_l sigma_l) / 2 and I / 2, paired with tau_SE."""
        assert self.alphas is not None
        sys_states: List[DensityMatrix] = []
        joint_states: List[DensityMatrix] = []
        for axis, alpha in enumerate(self.alphas):
            vector = [0.0, 0.0, 0.0]
            vector[axis] = alpha
            sys_states.append(
                DensityMatrix((IDENTITY_2 + alpha * pauli_matrices()[axis]) / 2)
            )
            joint_states.append(DensityMatrix.from_operator(tau_se(self.a, vector)))
        sys_states.append(DensityMatrix(IDENTITY_2 / 2))
        joint_states.append(DensityMatrix.from_operator(tau_se(self.a, [0, 0, 0])))
        return PairedBasis(tuple(sys_states), tuple(joint_states), f"two-qubit a={self.a}")

    def assignment(self) -> AssignmentMap:
        return build_assignment(self.paired_basis())

    def reference(self) -> ReferenceState:
        return build_reference_tripartite(self.paired_basis())


@dataclass
class SweepReport:
    """Per-parameter CP classification rows, sorted by the parameter."""

    rows: pd.DataFrame
    parameter: str = THETA

    @property
    def any_non_cp(self) -> bool:
        return bool((~self.rows[IS_CP]).any())

    @property
    def worst_eigenvalue(self) -> float:
        return float(self.rows[MIN_EIG].min())

    @property
    def worst_theta(self) -> float:
        return float(self.rows.loc[self.rows[MIN_EIG].idxmin(), self.parameter])

    def summary(self) -> Dict[str, Any]:
        return {
            "any_non_cp": self.any_non_cp,
            f"worst_{self.parameter}": self.worst_theta,
            "worst_eigenvalue": self.worst_eigenvalue,
            "rows": int(self.rows.shape[0]),
        }

    def to_csv(self, path: Union[str, Path]) -> None:
        self.rows.to_csv(path, index=False)
        logger.info(f"Data successfully written to {path}")


def _classify_row(
    assignment: AssignmentMap,
    parameter: str,
    value: float,
    u: ComplexMatrix,
    tol_psd: float,
) -> Dict[str, Any]:
    cp, witness = is_cp(reduced_dynamics(assignment, u), tol=tol_psd)
    logger.debug(f"{parameter}={value:.6f}: min Choi eigenvalue {witness:.3e}")
    return {parameter: value, MIN_EIG: witness, IS_CP: cp}


def _run_rows(
    tasks: List[Tuple[AssignmentMap, str, float, ComplexMatrix, float]],
    processes: Optional[int],
) -> List[Dict[str, Any]]:
    if processes is not None and processes > 1:
        with mp.Pool(processes) as pool:
            return pool.starmap(_classify_row, tasks)
    return list(itertools.starmap(_classify_row, tasks))


def run_theta_sweep(
    sc: TwoQubitScenario, tol_psd: float = ETA_PSD, processes: Optional[int] = None
) -> SweepReport:
    assignment = sc.assignment()
    tasks = [
        (assignment, THETA, theta, build_u_theta(theta), tol_psd)
        for theta in sc.theta_grid
    ]
    rows = pd.DataFrame(_run_rows(tasks, processes), columns=[THETA, MIN_EIG, IS_CP])
    report = SweepReport(rows.sort_values(THETA).reset_index(drop=True), THETA)
    logger.info(
        f"theta sweep a={sc.a}: {len(rows)} rows, worst eigenvalue "
        f"{report.worst_eigenvalue:.4e} at theta={report.worst_theta:.4f}"
    )
    return report


def run_commuting_family(
    sc: TwoQubitScenario,
    t_grid: Sequence[float],
    tol_psd: float = ETA_PSD,
    processes: Optional[int] = None,
) -> SweepReport:
    """Reduced dynamics under unitaries that commute with sum_i sigma_i (x) sigma_i."""
    if not len(t_grid):
        raise ValueError("t_grid must not be empty")
    assignment = sc.assignment()
    generator = sigma_dot_sigma()
    unitaries = [commuting_unitary(t) for t in t_grid]
    tasks = [(assignment, T, float(t), u, tol_psd) for t, u in zip(t_grid, unitaries)]
    rows = pd.DataFrame(_run_rows(tasks, processes), columns=[T, MIN_EIG, IS_CP])
    rows[COMMUTATOR_NORM] = [commutator_norm(u, generator) for u in unitaries]

    too_large = rows[rows[COMMUTATOR_NORM] > COMMUTATOR_TOL]
    if not too_large.empty:
        logger.warning(f"{len(too_large)} unitaries fail to commute with the generator")
    return SweepReport(rows.sort_values(T).reset_index(drop=True), T)


@dataclass(frozen=True)
class WitnessSearch:
    found: bool
    min_eigenvalue: float
    source: str


def search_non_cp_witness(
    assignment: AssignmentMap,
    rng: np.random.Generator,
    n_unitaries: int = DEFAULT_CAMPAIGN_UNITARIES,
    theta_grid: Optional[Sequence[float]] = None,
    threshold: float = NON_CP_WITNESS_THRESHOLD,
) -> WitnessSearch:
    """Look for a unitary whose reduced dynamics has a Choi eigenvalue below
    ``threshold``. The theta family is tried first when S and E are qubits.
    """
    candidates: List[Tuple[str, ComplexMatrix]] = []
    if assignment.d_s == 2 and assignment.d_e == 2:
        grid = default_theta_grid() if theta_grid is None else theta_grid
        candidates += [(f"theta={theta:.6g}", build_u_theta(theta)) for theta in grid]
    order = assignment.d_s * assignment.d_e
    candidates += [(f"haar[{k}]", haar_unitary(order, rng)) for k in range(n_unitaries)]

    best = WitnessSearch(False, math.inf, "none")
    for source, u in candidates:
        dynamics: QMap = reduced_dynamics(assignment, u)
        _, witness = is_cp(dynamics)
        if witness < best.min_eigenvalue:
            best = WitnessSearch(witness < threshold, witness, source)
    return best


@dataclass
class CampaignReport:
    rows: pd.DataFrame
    seed: int

    @property
    def violations(self) -> int:
        markov = self.rows[self.rows[PART] == MARKOV_PART]
        return int(markov[VIOLATIONS].sum())

    @property
    def witness_rate(self) -> Optional[float]:
        searched = self.rows[self.rows[PART] != MARKOV_PART]
        if searched.empty:
            return None
        return float(searched[WITNESS_FOUND].mean())

    def summary(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "instances": int(self.rows.shape[0]),
            "cp_violations": self.violations,
            "witness_rate": self.witness_rate,
        }

    def to_csv(self, path: Union[str, Path]) -> None:
        self.rows.to_csv(path, index=False)
        logger.info(f"Data successfully written to {path}")


CAMPAIGN_COLUMNS = [INSTANCE, PART, D_S, D_E, CMI, IS_MARKOV, MIN_EIG, VIOLATIONS, WITNESS_FOUND]


def _random_product_basis(d_s: int, d_e: int, rng: np.random.Generator) -> PairedBasis:
    sys_states = [DensityMatrix(random_density_matrix(d_s, rng)) for _ in range(d_s**2)]
    env_state = DensityMatrix(random_density_matrix(d_e, rng))
    return PairedBasis.product(sys_states, env_state)


def _random_correlated_basis(d_s: int, d_e: int, rng: np.random.Generator) -> PairedBasis:
    joint = [
        DensityMatrix(random_density_matrix(d_s * d_e, rng), (d_s, d_e))
        for _ in range(d_s**2)
    ]
    return PairedBasis.from_joint_states(joint, "correlated-basis")


def _markov_instance(
    index: int,
    d_s: int,
    d_e: int,
    rng: np.random.Generator,
    n_unitaries: int,
    tol_psd: float,
    tol_cmi: float,
) -> Dict[str, Any]:
    pb = _random_product_basis(d_s, d_e, rng)
    assignment = build_assignment(pb)
    verdict = markov_test(build_reference_tripartite(pb), tol_cmi=tol_cmi)
    worst = math.inf
    violations = 0
    for _ in range(n_unitaries):
        cp, witness = is_cp(
            reduced_dynamics(assignment, haar_unitary(d_s * d_e, rng)), tol=tol_psd
        )
        worst = min(worst, witness)
        violations += 0 if cp else 1
    return {
        INSTANCE: index,
        PART: MARKOV_PART,
        D_S: d_s,
        D_E: d_e,
        CMI: verdict.cmi,
        IS_MARKOV: verdict.is_markov,
        MIN_EIG: worst,
        VIOLATIONS: violations,
        WITNESS_FOUND: False,
    }


def _witness_instance(
    index: int,
    part: str,
    pb: PairedBasis,
    rng: np.random.Generator,
    n_unitaries: int,
    tol_cmi: float,
) -> Dict[str, Any]:
    assignment = build_assignment(pb)
    verdict = markov_test(build_reference_tripartite(pb), tol_cmi=tol_cmi)
    search = search_non_cp_witness(assignment, rng, n_unitaries=n_unitaries)
    logger.debug(f"{part} instance {index}: witness {search.min_eigenvalue:.3e} ({search.source})")
    return {
        INSTANCE: index,
        PART: part,
        D_S: pb.d_s,
        D_E: pb.d_e,
        CMI: verdict.cmi,
        IS_MARKOV: verdict.is_markov,
        MIN_EIG: search.min_eigenvalue,
        VIOLATIONS: 0,
        WITNESS_FOUND: search.found,
    }


def markov_campaign(
    seed: int,
    n_instances: int,
    dims: Tuple[int, int] = (2, 2),
    n_unitaries: int = DEFAULT_CAMPAIGN_UNITARIES,
    include_worked_example: bool = False,
    tol_psd: float = ETA_PSD,
    tol_cmi: float = ETA_CMI,
) -> CampaignReport:
    """Markov references must give CP dynamics for every unitary tried; non-Markov
    ones are searched for a unitary with non-CP dynamics.

    Each of the ``n_instances`` draws one product-form (Markov) reference and one
    correlated reference.
    """
    d_s, d_e = dims
    if not (1 < d_s <= 3 and 1 <= d_e <= 3):
        raise ValueError(f"campaign dims must satisfy 2 <= d_S <= 3, d_E <= 3, got {dims}")
    rng = np.random.default_rng(seed)

    rows: List[Dict[str, Any]] = []
    for index in range(n_instances):
        rows.append(_markov_instance(index, d_s, d_e, rng, n_unitaries, tol_psd, tol_cmi))
    for index in range(n_instances):
        pb = _random_correlated_basis(d_s, d_e, rng)
        rows.append(_witness_instance(index, NON_MARKOV_PART, pb, rng, n_unitaries, tol_cmi))
    if include_worked_example:
        pb = TwoQubitScenario(WORKED_EXAMPLE_A).paired_basis()
        rows.append(
            _witness_instance(0, WORKED_EXAMPLE_PART, pb, rng, n_unitaries, tol_cmi)
        )

    report = CampaignReport(pd.DataFrame(rows, columns=CAMPAIGN_COLUMNS), seed)
    logger.info(
        f"campaign seed={seed}: {report.violations} CP violations, "
        f"witness rate {report.witness_rate}"
    )
    return report
