from rdlab.assignment import (
    AssignmentMap,
    OperatorSubspace,
    PairedBasis,
    build_assignment,
    check_u_consistency_for,
    decompose_subspace,
    general_assignment,
    is_u_consistent_all,
)
from rdlab.enums import ExtensionPolicy, StructuralForm
from rdlab.experiments import (
    TwoQubitScenario,
    build_u_theta,
    markov_campaign,
    positivity_bound,
    run_commuting_family,
    run_theta_sweep,
)
from rdlab.operators import DensityMatrix, Operator, kron, partial_trace
from rdlab.qmaps import QMap, choi_of, is_cp, operator_sum, qmap_from_action
from rdlab.reference import (
    MarkovVerdict,
    ReferenceState,
    build_reference_bipartite,
    build_reference_tripartite,
    cp_certificate,
    markov_test,
    reduced_dynamics,
    steer,
)

__all__ = [
    "AssignmentMap",
    "DensityMatrix",
    "ExtensionPolicy",
    "MarkovVerdict",
    "Operator",
    "OperatorSubspace",
    "PairedBasis",
    "QMap",
    "ReferenceState",
    "StructuralForm",
    "TwoQubitScenario",
    "build_assignment",
    "build_reference_bipartite",
    "build_reference_tripartite",
    "build_u_theta",
    "check_u_consistency_for",
    "choi_of",
    "cp_certificate",
    "decompose_subspace",
    "general_assignment",
    "is_cp",
    "is_u_consistent_all",
    "kron",
    "markov_campaign",
    "markov_test",
    "operator_sum",
    "partial_trace",
    "positivity_bound",
    "qmap_from_action",
    "reduced_dynamics",
    "run_commuting_family",
    "run_theta_sweep",
    "steer",
]
