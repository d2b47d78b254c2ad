"""Normal-form operators, the resonant split and the partial-sum solver."""

from .decomposition import N1_split, class_sums, full_part, nonresonant_part, resonant_parts
from .operators import BoxSequence, Q1, Q1_tilde, R1_kernel, RJ_tree, T1, kernel_sum, trilinear_kernel
from .solver import (
    ContractionFailure,
    NormalFormConfig,
    cutoff_nonlinearity_probe,
    evolution_residual,
    fixed_point_solve,
    gamma_apply,
    remainder_N2,
    select_params,
)
