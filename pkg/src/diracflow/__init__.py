"""Numerical laboratory for spectral flow of Dirac-type operators with local
boundary conditions on the cylinder, with heat-trace cross-checks."""

from .linalg import (
    DimensionMismatchError,
    EigendecompositionError,
    SelfAdjointOp,
    Spectrum,
    UnitaryOp,
    commutator,
    conjugate,
    eigh,
    eigvalsh,
    heat_weighted_trace,
    hermitian_part,
)
from .flow import (
    Crossing,
    FlowSegment,
    OperatorPath,
    PinnedZeroError,
    SpectralFlowResult,
    conjugation_path,
    homotopy_check,
    resolvent_distance,
    spectral_flow,
)
from .getzler import GetzlerEstimate, eps_sweep, getzler_estimate, shifted_estimate
from .circle import (
    BoundarySplitting,
    CircleGrid,
    CircleOperator,
    GaugeMap,
    analytic_gauge_commutator,
    boundary_sf,
    boundary_splitting_from_F,
    build_boundary_dirac,
    fourier_diff_matrix,
    load_gauge_json,
    restrict_gauge,
    split_by_F,
    winding_number,
)
from .cylinder import (
    CylinderBVP,
    CylinderGauge,
    IntervalGrid,
    assemble,
    cylinder_sf,
    gamma_deformation_check,
    gauge_commutator_2d,
    mode_matrix,
    mode_oracle,
    path_spectral_floor,
)
from .halfline import (
    CutoffPair,
    FactorizedBoundaryTerm,
    HalfCylModel,
    ImageHeatKernel,
    factorized_boundary_term,
    half_trace_integral,
    image_kernel_semigroup_defect,
    verify_U_identities,
    verify_mixed_domain,
)
from .runner import RunRecord, Scenario, emit, run, run_suite

__version__ = "0.1.0"
