"""Lagrangian particle solver for incompressible flow.

Incompressibility is enforced by a penalization force: every step solves
a semi-discrete optimal transport problem whose Laguerre cells tile the
domain with equal areas, and each particle is pulled toward its cell
barycenter with stiffness 1/epsilon^2.  A symplectic Euler integrator
advances the system; diagnostics track the discrete Hamiltonian and the
modulated energy against reference solutions.
"""

from .diagnostics import (
    CSV_COLUMNS,
    DiagnosticsRecord,
    DiagnosticsWriter,
    RecordStream,
    StudyRow,
    convergence_study,
    decay_violation,
    hamiltonian,
    hamiltonian_envelope,
    make_record,
    modulated_energy,
    toy_integrator_check,
    toy_modulated_energy,
    toy_trajectory,
    velocity_error,
    write_study_csv,
)
from .dynamics import (
    ParticleState,
    SchemeParams,
    init_state,
    kick_drift,
    run,
    step,
    toy_geodesic_reference,
)
from .errors import (
    ConfigInvalid,
    DegenerateCell,
    DegenerateProblem,
    DuplicateSites,
    EmptyInput,
    IoFailure,
    MaxIterationsExceeded,
    NewtonStalled,
    NotPeriodic,
    NotRectangular,
    OTFluidError,
    PositionCollision,
    SingularSystem,
)
from .geometry import (
    CellMoments,
    Domain,
    PowerDiagram,
    build_power_diagram,
    clip_halfplane,
    compute_moments,
    polygon_area,
    rectangle,
    replicate_periodic,
)
from .ot import (
    OTProblem,
    OTSolution,
    assemble_hessian,
    linear_solve,
    projection_gradient,
    projection_quantities,
    residual,
    solve,
    uniform_targets,
)
from .snapshots import (
    Snapshot,
    SnapshotWriter,
    config_hash,
    read_snapshot,
    write_partition,
    write_snapshot,
)
from .tessellation import Partition, grid_partition, lloyd_partition
from .testcases import (
    PRESETS,
    SimConfig,
    beltrami_velocity,
    build_testcase,
    grid_dimensions,
    make_interface_density,
    preset,
    scale_config,
    shear_velocity,
    testcase_domain,
)

__version__ = "0.1.0"

__all__ = [
    "CSV_COLUMNS",
    "CellMoments",
    "ConfigInvalid",
    "DegenerateCell",
    "DegenerateProblem",
    "DiagnosticsRecord",
    "DiagnosticsWriter",
    "Domain",
    "DuplicateSites",
    "EmptyInput",
    "IoFailure",
    "MaxIterationsExceeded",
    "NewtonStalled",
    "NotPeriodic",
    "NotRectangular",
    "OTFluidError",
    "OTProblem",
    "OTSolution",
    "Partition",
    "ParticleState",
    "PositionCollision",
    "PowerDiagram",
    "PRESETS",
    "RecordStream",
    "SchemeParams",
    "SimConfig",
    "SingularSystem",
    "Snapshot",
    "SnapshotWriter",
    "StudyRow",
    "assemble_hessian",
    "beltrami_velocity",
    "build_power_diagram",
    "build_testcase",
    "clip_halfplane",
    "compute_moments",
    "config_hash",
    "convergence_study",
    "decay_violation",
    "grid_dimensions",
    "grid_partition",
    "hamiltonian",
    "hamiltonian_envelope",
    "init_state",
    "kick_drift",
    "linear_solve",
    "lloyd_partition",
    "make_interface_density",
    "make_record",
    "modulated_energy",
    "polygon_area",
    "preset",
    "projection_gradient",
    "projection_quantities",
    "read_snapshot",
    "rectangle",
    "replicate_periodic",
    "residual",
    "run",
    "scale_config",
    "shear_velocity",
    "solve",
    "step",
    "testcase_domain",
    "toy_geodesic_reference",
    "toy_integrator_check",
    "toy_modulated_energy",
    "toy_trajectory",
    "uniform_targets",
    "velocity_error",
    "write_partition",
    "write_snapshot",
    "write_study_csv",
]
