"""Default constants for ksymp."""

from __future__ import annotations

# Threshold on |det H| below which a Lagrangian counts as singular at a point
DEFAULT_REGULARITY_TOL = 1e-9

# Relative cutoff for rank-revealing least-squares and nullspace computations
DEFAULT_PIVOT_TOL = 1e-10

# Absolute singular-value cutoff for constraint-Jacobian rank checks
DEFAULT_SUBMANIFOLD_TOL = 1e-8

# Pointwise algebraic residuals (contractions, tangency, field operator conditions)
DEFAULT_RESIDUAL_TOL = 1e-9

# Residuals that go through grid integration or finite differences
DEFAULT_INTEGRATION_TOL = 1e-5

# Magnitude below which a numeric bracket counts as vanishing
DEFAULT_BRACKET_TOL = 1e-6

# State-space step for finite-difference brackets
DEFAULT_BRACKET_STEP = 1e-4

# Legendre inversion
DEFAULT_NEWTON_TOL = 1e-12
DEFAULT_NEWTON_MAX_ITER = 50
DEFAULT_NEWTON_DAMPING = 0.5
DEFAULT_NEWTON_MAX_HALVINGS = 30

# Step for gradients of implicitly defined Hamiltonians
DEFAULT_GRADIENT_STEP = 1e-6

# Integration sweeps stop on lines whose state exceeds this sup-norm
DEFAULT_BLOWUP_THRESHOLD = 1e12

# Accuracy order of finite-difference derivatives on sections (2 or 4)
DEFAULT_FD_ORDER = 4

# Constraint algorithm
DEFAULT_MAX_LEVELS = 8
DEFAULT_PROJECTION_MAX_ITER = 25

# Random sample generation
DEFAULT_SAMPLES = 20
DEFAULT_SEED = 0
DEFAULT_SAMPLE_SCALE = 1.0

# Grid nodes used by pointwise stages of the equivalence report
DEFAULT_REPORT_NODES = 25

# Environment variable capping the worker-thread count
THREADS_ENV_VAR = "KSYMP_THREADS"

# JSON and CSV output
JSON_INDENT = 2
FLOAT_DIGITS = 17

# Unary functions accepted by the expression grammar
FUNCTIONS: tuple[str, ...] = ("sin", "cos", "exp", "log", "sqrt")
