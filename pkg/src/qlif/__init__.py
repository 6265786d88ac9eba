"""Quantum states over superposed classical spacetimes.

The package builds discretized superpositions of (mass configuration,
metric, relative wavefunction) branches, transforms them to the Quantum
Locally Inertial Frame of a probe particle (flat metric at the origin in
every branch, unitarily), integrates branch-wise geodesics, runs the
flat-space translated-superposition stationarity demo, and evaluates the
rival collapse-time estimate t = hbar / E_Delta for comparison.
"""

from .collapse import (
    CONVENTION,
    Gaussian,
    UniformSphere,
    collapse_time,
    delta_self_energy,
    delta_self_energy_monte_carlo,
    separation_sweep,
)
from .dynamics import (
    BranchTrajectory,
    GeodesicState,
    Trajectory,
    Wavepacket1D,
    branch_centroid,
    evolve_free,
    gaussian_wavepacket,
    geodesic_superposition,
    integrate_geodesic,
    local_frame_velocity,
    normalize_samples,
    packet_norm,
    packet_overlap,
    packet_width,
    timelike_velocity,
    translate_packet,
    translation_covariance_check,
    velocity_norm,
)
from .errors import (
    DegenerateMetric,
    GridMismatch,
    InfiniteLifetime,
    MissingTetradRecord,
    OffGridTranslation,
    QlifError,
    QuadratureNonConvergence,
    SingularRegion,
    StepTooLarge,
    WrongFrame,
    ZeroNorm,
)
from .qrf import (
    BranchTransformRecord,
    QlifMetricRow,
    QrfTransformReport,
    check_qlif_metric,
    from_qlif,
    to_qlif,
)
from .qstate import (
    Branch,
    Frame,
    GridSpec,
    QlifRecords,
    SuperposedState,
    gaussian_psi,
    inner_product,
    load_state,
    make_state,
    save_state,
    state_norm,
    translate_state,
)
from .spacetime import (
    ETA,
    FdConfig,
    FourVector,
    MetricField,
    Minkowski,
    Schwarzschild,
    UnitSystem,
    WeakFieldPointMass,
    christoffel,
    metric_det_sqrt,
    metric_eval,
    metric_from_dict,
    metric_inverse,
)
from .tetrad import Tetrad, build_tetrad, frame_residual, from_local, tetrad_arrays, to_local

__version__ = "0.1.0"
