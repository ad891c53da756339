"""Transfer-operator numerics for expanding circle maps under skew-product
random perturbations: invariant densities, their stability as the noise
level shrinks, and upper bounds on correlation decay rates."""

from ._kernels import KERNEL_BACKEND
from .bases import (
    PiecewiseLinearBase,
    RandomObservable,
    RotationBase,
    ShiftBase,
    base_apply,
    base_from_json_dict,
    base_lift_transfer,
    base_transfer,
    kp_defect,
)
from .correlations import (
    backward_corr,
    backward_corr_all,
    deterministic_corr,
    fit_decay_rate,
    fit_envelope,
    integrated_corr,
    max_ratio,
)
from .experiments import (
    ExperimentConfig,
    StabilityReport,
    run_deterministic_baseline,
    run_stability_sweep,
    write_report,
)
from .fiber import FiberFunction
from .maps import (
    BranchLimitError,
    CircleMap,
    ComposedMap,
    NewtonConvergenceError,
    compose,
    expanding_constant,
    expanding_constant_profile,
)
from .skew import (
    DensityError,
    RandomMapFamily,
    SkewOperator,
    fiber_compose_n,
    skew_apply,
    skew_apply_n_direct,
    skew_fixed_density,
)
from .spectral import (
    ConvergenceError,
    cesaro_projection,
    decay_rate_upper,
    leading_pair,
    subdominant_radius,
)
from .transfer import (
    GridDensity,
    OperatorMatrix,
    assemble_fourier,
    assemble_ulam,
    c1_norm_bound_estimate,
    duality_residual,
    transfer_apply_exact,
)

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "BranchLimitError",
    "CircleMap",
    "ComposedMap",
    "ConvergenceError",
    "DensityError",
    "ExperimentConfig",
    "FiberFunction",
    "GridDensity",
    "NewtonConvergenceError",
    "OperatorMatrix",
    "PiecewiseLinearBase",
    "RandomMapFamily",
    "RandomObservable",
    "RotationBase",
    "ShiftBase",
    "SkewOperator",
    "StabilityReport",
    "assemble_fourier",
    "assemble_ulam",
    "backward_corr",
    "backward_corr_all",
    "base_apply",
    "base_from_json_dict",
    "base_lift_transfer",
    "base_transfer",
    "c1_norm_bound_estimate",
    "cesaro_projection",
    "compose",
    "decay_rate_upper",
    "deterministic_corr",
    "duality_residual",
    "expanding_constant",
    "expanding_constant_profile",
    "fiber_compose_n",
    "fit_decay_rate",
    "fit_envelope",
    "integrated_corr",
    "kp_defect",
    "leading_pair",
    "max_ratio",
    "run_deterministic_baseline",
    "run_stability_sweep",
    "skew_apply",
    "skew_apply_n_direct",
    "skew_fixed_density",
    "subdominant_radius",
    "transfer_apply_exact",
    "write_report",
]
