"""Numerical lab for operator-Lipschitz estimates on Schatten classes."""

from schatten_lab.linalg import (
    ConvergenceError,
    SpectralDecomposition,
    as_hermitian,
    as_matrix,
    hermitian_eig,
    random_hermitian,
    schatten_norm,
    singular_values,
)
from schatten_lab.funcalc import (
    DegenerateSpectrumError,
    ScalarFunction,
    apply_function,
    divided_difference_symbol,
    split_monotone,
    stock_functions,
    strictify,
)
from schatten_lab.schur import (
    EstimatorConfig,
    NormEstimate,
    apply_multiplier,
    estimate_norm,
    exact_norm_p2,
    oscillatory_symbol,
    restrict_symbol,
)
from schatten_lab.kernel import (
    KernelG,
    build_kernel,
    evaluate_representation,
    kernel_moment,
    profile_h,
    smooth_step,
    weighted_moment,
)

__version__ = "0.1.0"
