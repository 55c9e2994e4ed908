"""Energy functionals, per-step diagnostics, and validation studies.

The central quantities are the discrete Hamiltonian

    H = (1/2) ||V||_M^2 + dist_sq / (2 epsilon^2)

with ||V||_M^2 the area-weighted velocity norm (mass area(domain)/N per
particle), and the modulated energy, the same expression with the
velocity recentered at a reference field.  A one-line CSV record per
step makes long runs machine-checkable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import dynamics, ot, testcases
from .errors import ConfigInvalid, OTFluidError

CSV_COLUMNS = (
    "step",
    "time",
    "kinetic",
    "penalty",
    "hamiltonian",
    "modulated_energy",
    "l2_velocity_error",
    "min_cell_area",
    "newton_iterations",
)


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One step's energies and solver health indicators."""

    step: int
    time: float
    hamiltonian: float
    kinetic: float
    penalty: float
    modulated_energy: Optional[float]
    l2_velocity_error: Optional[float]
    min_cell_area: float
    newton_iterations: int


def _mass(solution: ot.OTSolution) -> float:
    diagram = solution.diagram
    return diagram.domain.area / diagram.n_sites


def hamiltonian(state, solution: ot.OTSolution, params) -> tuple[float, float, float]:
    """Kinetic, penalty, and total energy of a state.

    `solution` must be the transport solve at state.positions; the
    penalty is its squared transport distance over 2 epsilon^2.
    """
    mass = _mass(solution)
    v = state.velocities
    kinetic = 0.5 * mass * float((v * v).sum())
    penalty = solution.dist_sq / (2.0 * params.epsilon**2)
    return kinetic, penalty, kinetic + penalty


def velocity_error(state, reference) -> np.ndarray:
    """Pointwise V - reference(t, M)."""
    return state.velocities - np.ascontiguousarray(
        reference(state.time, state.positions), dtype=float
    )


def modulated_energy(state, solution: ot.OTSolution, reference, params) -> float:
    """Hamiltonian with the kinetic term recentered at the reference field."""
    mass = _mass(solution)
    d = velocity_error(state, reference)
    penalty = solution.dist_sq / (2.0 * params.epsilon**2)
    return 0.5 * mass * float((d * d).sum()) + penalty


def make_record(state, solution: ot.OTSolution, params, reference=None) -> DiagnosticsRecord:
    kinetic, penalty, total = hamiltonian(state, solution, params)
    modulated = None
    l2_error = None
    if reference is not None:
        d = velocity_error(state, reference)
        l2_sq = _mass(solution) * float((d * d).sum())
        l2_error = float(np.sqrt(l2_sq))
        modulated = 0.5 * l2_sq + penalty
    return DiagnosticsRecord(
        step=state.step,
        time=state.time,
        hamiltonian=total,
        kinetic=kinetic,
        penalty=penalty,
        modulated_energy=modulated,
        l2_velocity_error=l2_error,
        min_cell_area=float(solution.areas.min()),
        newton_iterations=solution.newton_iterations,
    )


class RecordStream:
    """Observer that pairs each transport solve with the state it was solved at.

    The stepper solves transport at the pre-move positions, so an
    observer call carries the new state together with the previous
    state's solution.  This class keeps the previous state and emits one
    DiagnosticsRecord per *solved* state; call finalize with a solve at
    the final positions to record the last state too.
    """

    def __init__(self, initial_state, params, reference=None):
        self._prev = initial_state
        self._params = params
        self._reference = reference
        self.records: list[DiagnosticsRecord] = []

    def __call__(self, step_index, time, new_state, solution):
        self.records.append(
            make_record(self._prev, solution, self._params, self._reference)
        )
        self._prev = new_state

    def finalize(self, final_solution: Optional[ot.OTSolution] = None):
        if final_solution is not None:
            self.records.append(
                make_record(self._prev, final_solution, self._params, self._reference)
            )
        return self.records

    @property
    def hamiltonians(self) -> np.ndarray:
        return np.array([r.hamiltonian for r in self.records])

    @property
    def modulated_energies(self) -> np.ndarray:
        return np.array(
            [np.nan if r.modulated_energy is None else r.modulated_energy for r in self.records]
        )


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


class DiagnosticsWriter(RecordStream):
    """RecordStream that also appends CSV rows to a file as it observes."""

    def __init__(self, path_or_file, initial_state, params, reference=None):
        super().__init__(initial_state, params, reference)
        if hasattr(path_or_file, "write"):
            self._file = path_or_file
            self._owns = False
        else:
            self._file = open(path_or_file, "w", newline="")
            self._owns = True
        self._writer = csv.writer(self._file, lineterminator="\n")
        self._writer.writerow(CSV_COLUMNS)

    def _emit(self, record: DiagnosticsRecord):
        self._writer.writerow(
            [
                _format(record.step),
                _format(record.time),
                _format(record.kinetic),
                _format(record.penalty),
                _format(record.hamiltonian),
                _format(record.modulated_energy),
                _format(record.l2_velocity_error),
                _format(record.min_cell_area),
                _format(record.newton_iterations),
            ]
        )

    def __call__(self, step_index, time, new_state, solution):
        super().__call__(step_index, time, new_state, solution)
        self._emit(self.records[-1])

    def finalize(self, final_solution: Optional[ot.OTSolution] = None):
        before = len(self.records)
        super().finalize(final_solution)
        for record in self.records[before:]:
            self._emit(record)
        if self._owns:
            self._file.close()
        return self.records


def decay_violation(hamiltonians, params, h0: Optional[float] = None) -> float:
    """Largest violation of the one-step decay inequality, in energy units.

    Checks (1 - tau^2/epsilon^2) H[n+1] <= H[n] + 1e-9 H[0] for every
    consecutive pair; a non-positive return means the whole stream
    satisfies the inequality.
    """
    H = np.asarray(hamiltonians, dtype=float)
    if H.shape[0] < 2:
        return -np.inf
    r = (params.tau / params.epsilon) ** 2
    base = H[0] if h0 is None else h0
    return float(np.max((1.0 - r) * H[1:] - H[:-1] - 1e-9 * base))


def hamiltonian_envelope(initial_state, solution0, h: float, params, domain) -> float:
    """Global energy bound exp(T tau / eps^2) (||V0||^2/2 + h^2/(2 eps^2)).

    `solution0` provides the particle mass normalization; h is the mesh
    size of the initial partition.
    """
    mass = _mass(solution0)
    v = initial_state.velocities
    v0_sq = mass * float((v * v).sum())
    growth = np.exp(params.horizon * params.tau / params.epsilon**2)
    return float(growth * (0.5 * v0_sq + h * h / (2.0 * params.epsilon**2)))


@dataclass(frozen=True)
class StudyRow:
    """One convergence-study configuration and its outcome."""

    n_particles: int
    h: float
    epsilon: float
    tau: float
    max_modulated_energy: Optional[float]
    error: Optional[str] = None


def convergence_study(ladder, reference=None, horizon: float = 0.5) -> list[StudyRow]:
    """Run the vortex-array case over a (N, epsilon, tau) ladder.

    Each row reports the sup over steps of the modulated energy against
    the stationary reference field.  Rows violating the stability bound
    tau <= epsilon^2/2 are rejected with a validation error; failures in
    one row do not stop the others.
    """
    rows: list[StudyRow] = []
    for entry in ladder:
        n, epsilon, tau = int(entry[0]), float(entry[1]), float(entry[2])
        try:
            config = testcases.SimConfig(
                testcase="beltrami",
                n_particles=n,
                epsilon=epsilon,
                tau=tau,
                horizon=horizon,
                partition="grid",
            )
        except ConfigInvalid as exc:
            rows.append(StudyRow(n, float("nan"), epsilon, tau, None, str(exc)))
            continue
        try:
            domain, part, state, params, ref = testcases.build_testcase(config)
            if reference is not None:
                ref = reference
            stream = RecordStream(state, params, ref)
            final = dynamics.run(state, params, domain, observers=[stream])
            final_solution = ot.solve(
                ot.OTProblem(
                    final.positions,
                    ot.uniform_targets(domain, final.n_particles),
                    domain,
                ),
                final.weights_warm,
            )
            stream.finalize(final_solution)
            max_energy = float(np.max(stream.modulated_energies))
            rows.append(StudyRow(n, part.h, epsilon, tau, max_energy))
        except OTFluidError as exc:
            rows.append(StudyRow(n, float("nan"), epsilon, tau, None, str(exc)))
    return rows


def write_study_csv(rows, path_or_file) -> None:
    """Machine-readable study table: one CSV row per configuration."""
    if hasattr(path_or_file, "write"):
        file, owns = path_or_file, False
    else:
        file, owns = open(path_or_file, "w", newline=""), True
    try:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(
            ["n_particles", "h", "epsilon", "tau", "max_modulated_energy", "error"]
        )
        for row in rows:
            writer.writerow(
                [
                    str(row.n_particles),
                    _format(row.h),
                    _format(row.epsilon),
                    _format(row.tau),
                    _format(row.max_modulated_energy),
                    row.error or "",
                ]
            )
    finally:
        if owns:
            file.close()


def toy_trajectory(h0: float, h1: float, epsilon: float, tau: float, horizon: float):
    """Integrate the planar toy system with the shared kick-drift stepper.

    The anchor is the projection onto the horizontal axis (drop the
    second coordinate).  Returns (times, positions, velocities) arrays
    including the initial condition.
    """
    num_steps = int(np.floor(horizon / tau + 1e-9))
    z = np.array([[0.0, h0]])
    v = np.array([[1.0, h1]])
    times = np.zeros(num_steps + 1)
    positions = np.zeros((num_steps + 1, 2))
    velocities = np.zeros((num_steps + 1, 2))
    positions[0], velocities[0] = z[0], v[0]
    t = 0.0
    for k in range(num_steps):
        anchor = np.column_stack([z[:, 0], np.zeros(1)])
        z, v = dynamics.kick_drift(z, v, anchor, tau, epsilon)
        t += tau
        times[k + 1] = t
        positions[k + 1] = z[0]
        velocities[k + 1] = v[0]
    return times, positions, velocities


def toy_integrator_check(
    h0: float, h1: float, epsilon: float, tau: float, horizon: float
) -> float:
    """Sup-norm deviation of the discrete toy trajectory from the closed form."""
    if tau > 0.5 * epsilon**2 * (1.0 + 1e-12):
        raise ConfigInvalid(
            f"tau: {tau:g} exceeds the stability bound epsilon^2/2 = "
            f"{0.5 * epsilon**2:g}"
        )
    times, positions, _ = toy_trajectory(h0, h1, epsilon, tau, horizon)
    reference = dynamics.toy_geodesic_reference(h0, h1, epsilon, times)
    return float(np.max(np.abs(positions - reference)))


def toy_modulated_energy(position, velocity, epsilon: float) -> float:
    """Modulated energy of a toy-system sample against the axis geodesic.

    Convention without the 1/2 factors: |v - (1, 0)|^2 + z2^2/epsilon^2.
    Along the closed-form trajectory this is the constant
    h0^2/epsilon^2 + h1^2.
    """
    z = np.asarray(position, dtype=float)
    v = np.asarray(velocity, dtype=float)
    dv = v - np.array([1.0, 0.0])
    out = (dv * dv).sum(axis=-1) + z[..., 1] ** 2 / epsilon**2
    return out if out.ndim else float(out)


def toy_geodesic_velocity(h0: float, h1: float, epsilon: float, t):
    """Time derivative of the closed-form toy trajectory."""
    tt = np.asarray(t, dtype=float)
    second = -(h0 / epsilon) * np.sin(tt / epsilon) + h1 * np.cos(tt / epsilon)
    return np.stack([np.ones_like(tt), second], axis=-1)
