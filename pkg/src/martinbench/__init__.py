"""martinbench: group extensions of Gibbs-Markov maps, Green/Martin operators,
and a numerical laboratory for boundary and potential-theory experiments."""

__version__ = "0.1.0"

from .base import BaseSystem, CylinderWord, bernoulli_base, dalpha_seminorm
from .extension import (
    DivergenceError,
    ExtensionSystem,
    GreenResult,
    TruncatedOperator,
    branch_green_estimate,
    build_truncated_operator,
    distortion_scan,
    erho_witness,
    green_apply,
    green_row,
    hr_apply,
    reversibility_check,
    rho_estimate,
    transfer_iterate,
)
from .groups import (
    Ball,
    BoundaryRay,
    FreeGroup,
    FreeProduct,
    GroupElement,
    PresentedGroup,
    delta_estimate,
    geodesics,
    gromov_product,
    growth_rate,
    tree_approximation,
    triangle_group,
    visual_r,
)

__all__ = [name for name in dir() if not name.startswith("_")]
