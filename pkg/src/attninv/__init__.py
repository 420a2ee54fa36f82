"""Recover the input of a softmax-attention layer from its weights and
output, with analytically certified first and second derivatives."""

from .analysis import (
    BoundCheck,
    BoundReport,
    PsdReport,
    bound_suite,
    choose_gamma,
    effective_bound_constant,
    lipschitz_probe,
    psd_floor,
)
from .generate import SplitMix64, make_instance, perturbed_start
from .gradient import GradEntryTerms, dc_entry, grad_L, grad_c, grad_f_direction
from .hessian import (
    HessCase,
    HessianBlocks,
    assemble_hessian_c,
    block_case1,
    block_case2,
    block_case3,
    block_case4,
    block_case5,
    classify_case,
    d2c_entry,
    hessian_L,
    hessian_c,
)
from .model import (
    ForwardCache,
    NumericalRangeError,
    ProblemSpec,
    attention_forward,
    dense_cap,
    flatten_input,
    forward_cache,
    loss,
    loss_frobenius,
    synthesize_target,
    unflatten_input,
)
from .oracle import CheckReport, FdConfig, check, fd_grad, fd_hessian, fd_jacobian
from .solver import (
    CONVERGED,
    MAX_ITER,
    NUMERICAL_FAILURE,
    NewtonConfig,
    RunRecord,
    gd_solve,
    newton_solve,
)

__all__ = [name for name in dir() if not name.startswith("_")]
