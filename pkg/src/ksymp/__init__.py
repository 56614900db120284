"""ksymp - k-symplectic field theory from a Lagrangian.

Given a first-order Lagrangian L(qⁱ, vⁱ_A) this package derives the geometric
structures and field equations on T¹ₖQ and (T¹ₖ)*Q, runs the unified
formalism on their Whitney sum (including the constraint algorithm for
singular Lagrangians), builds and checks the field operator 𝒦, and integrates
integral sections to check the Lagrangian and Hamiltonian pictures against
each other.

Example:
    >>> from ksymp import FieldModel, LagPoint, Grid, equivalence_report
    >>> m = FieldModel.from_text(2, 1, "0.5*(v1_1^2 + v1_2^2) - q1^2", name="harmonic")
    >>> report = equivalence_report(m, LagPoint([0.0], [[1.0, 1.0]]), Grid.parse("t1=0:1:0.01,t2=0:1:0.01"))
    >>> report.passed
    True

    >>> from ksymp import constraint_algorithm, graph_samples
    >>> singular = FieldModel.from_text(2, 1, "0.5*v1_1^2")
    >>> constraint_algorithm(singular, graph_samples(singular, 10)).stabilized
    True
"""

from ._errors import (
    ConstraintViolationError,
    DimensionMismatchError,
    EvaluationDomainError,
    EvaluationError,
    ExpressionError,
    ExpressionSyntaxError,
    KSympError,
    MissingDerivativeError,
    ModelError,
    ModelFileError,
    NonConvergenceError,
    NotSopdeError,
    NotTangentError,
    SingularHessianError,
    UnboundVariableError,
    UnknownFunctionError,
    ValidationError,
    WrongPathwayError,
)
from ._expr import (
    Expr,
    as_expr,
    compile_expr,
    diff,
    evaluate,
    free_variables,
    parse,
    simplify,
    substitute,
    to_string,
)
from ._geometry import (
    RegularityReport,
    TwoFormFamily,
    canonical_two_forms,
    energy,
    energy_expression,
    hessian,
    is_regular,
    kernel_intersection_dimension,
    lagrangian_two_forms,
    legendre,
    legendre_jacobian,
    pullback_check,
    unified_two_forms,
)
from ._hamside import (
    ImplicitHamiltonian,
    ham_geoeq_residual,
    hamiltonian_kvector_field,
    hdw_residual,
    invert_legendre,
    pushforward_field,
    pushforward_XH,
    restricted_ham_residual,
)
from ._integrate import (
    Grid,
    Section,
    integral_section_residual,
    integrate_field,
    integrate_section,
    path_independence,
    project_configuration,
    pushforward_section,
    reference_section,
    write_section_csv,
    write_section_json,
)
from ._koperator import (
    FieldOperatorK,
    KVerification,
    default_k,
    k_from_hamiltonian,
    k_from_sopde,
    k_integral_residual,
    verify_k,
)
from ._kvector import (
    KVectorField,
    bracket_numeric,
    contract,
    is_sopde,
    liouville_fields,
    max_bracket,
    sopde_residual,
    tangent_structures,
)
from ._lagside import (
    el_residual,
    lag_geoeq_residual,
    lag_geoeq_solutions,
    sopde_field,
    sopde_solve,
    symmetric_ansatz,
    uniform_ansatz,
    weighted_ansatz,
)
from ._modelfile import ModelDocument, load_model, parse_model
from ._options import ToolkitOptions
from ._types import FieldModel, HamPoint, LagPoint, UnifiedPoint
from ._unified import (
    ConstraintLevel,
    ConstraintReport,
    coupling,
    constraint_algorithm,
    graph_point,
    graph_pullback_residual,
    graph_samples,
    lift_from_lagrangian,
    omega_kernel_basis,
    project_to_lagrangian,
    sr_solve,
    tangency_residual,
    unified_hamiltonian,
    unified_residual,
)
from ._verify import EquivalenceReport, Stage, equivalence_report, singular_report

__version__ = "0.1.0"

__all__ = [
    # Models and points
    "FieldModel",
    "LagPoint",
    "HamPoint",
    "UnifiedPoint",
    "ToolkitOptions",
    "ModelDocument",
    "load_model",
    "parse_model",
    # Expressions
    "Expr",
    "parse",
    "as_expr",
    "to_string",
    "evaluate",
    "diff",
    "simplify",
    "substitute",
    "free_variables",
    "compile_expr",
    # Geometry
    "legendre",
    "legendre_jacobian",
    "hessian",
    "is_regular",
    "RegularityReport",
    "energy",
    "energy_expression",
    "TwoFormFamily",
    "canonical_two_forms",
    "lagrangian_two_forms",
    "unified_two_forms",
    "kernel_intersection_dimension",
    "pullback_check",
    # k-vector fields
    "KVectorField",
    "is_sopde",
    "sopde_residual",
    "liouville_fields",
    "tangent_structures",
    "contract",
    "bracket_numeric",
    "max_bracket",
    # Lagrangian side
    "el_residual",
    "lag_geoeq_residual",
    "lag_geoeq_solutions",
    "sopde_solve",
    "sopde_field",
    "symmetric_ansatz",
    "uniform_ansatz",
    "weighted_ansatz",
    # Hamiltonian side
    "hdw_residual",
    "ham_geoeq_residual",
    "hamiltonian_kvector_field",
    "invert_legendre",
    "ImplicitHamiltonian",
    "pushforward_XH",
    "pushforward_field",
    "restricted_ham_residual",
    # Unified formalism
    "coupling",
    "unified_hamiltonian",
    "graph_point",
    "graph_samples",
    "unified_residual",
    "tangency_residual",
    "sr_solve",
    "omega_kernel_basis",
    "graph_pullback_residual",
    "project_to_lagrangian",
    "lift_from_lagrangian",
    "constraint_algorithm",
    "ConstraintLevel",
    "ConstraintReport",
    # Field operator
    "FieldOperatorK",
    "KVerification",
    "default_k",
    "k_from_sopde",
    "k_from_hamiltonian",
    "verify_k",
    "k_integral_residual",
    # Integration
    "Grid",
    "Section",
    "integrate_field",
    "integrate_section",
    "path_independence",
    "project_configuration",
    "pushforward_section",
    "integral_section_residual",
    "reference_section",
    "write_section_csv",
    "write_section_json",
    # Reports
    "Stage",
    "EquivalenceReport",
    "equivalence_report",
    "singular_report",
    # Errors
    "KSympError",
    "ExpressionError",
    "ExpressionSyntaxError",
    "UnknownFunctionError",
    "EvaluationError",
    "UnboundVariableError",
    "EvaluationDomainError",
    "ModelError",
    "DimensionMismatchError",
    "ModelFileError",
    "ValidationError",
    "MissingDerivativeError",
    "NonConvergenceError",
    "SingularHessianError",
    "ConstraintViolationError",
    "NotSopdeError",
    "NotTangentError",
    "WrongPathwayError",
]
