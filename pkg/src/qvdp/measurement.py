"""Repeated ideal heterodyne measurements on a trajectory ensemble.

An ideal heterodyne detection projects the oscillator onto a coherent
state. On the ensemble this is realized by sampling one trajectory
amplitude (the measurement outcome, drawn from the ensemble's empirical
phase-space distribution) and restarting every trajectory in a
coherent-width Gaussian cloud around it. All trajectories share the
sampled center: one physical outcome per ensemble, so the post-measurement
ensemble represents the coherent state the detector reported.

Measurement times k*delta_t are rounded to the nearest integration step;
a schedule finer than the step raises :class:`~qvdp.errors.ScheduleError`.
At instants where a snapshot and a measurement coincide, the snapshot and
the running statistics are taken *before* the collapse, so recorded
distributions show the freely evolved state at that time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from qvdp.errors import DomainError, ScheduleError, StateError
from qvdp.noise import protocol_uniform
from qvdp.sde_core import (
    IntegratorConfig,
    OscillatorParams,
    StatsSeries,
    TrajectoryEnsemble,
    evolve,
    init_coherent,
)

__all__ = [
    "MeasurementSchedule",
    "CollapseRecord",
    "MeasuredRun",
    "heterodyne_collapse",
    "run_measured_evolution",
]


@dataclass(frozen=True)
class MeasurementSchedule:
    """Evenly spaced measurements: interval ``delta_t`` over ``total_time``.

    ``delta_t = math.inf`` means no measurements. ``n`` is the number of
    measurements performed, at times k*delta_t for k = 1..n.
    """

    delta_t: float
    total_time: float

    def __post_init__(self):
        if not self.delta_t > 0:
            raise DomainError(f"delta_t must be > 0, got {self.delta_t}")
        if self.total_time < 0:
            raise DomainError(f"total_time must be >= 0, got {self.total_time}")

    @property
    def n(self) -> int:
        if math.isinf(self.delta_t):
            return 0
        return int(math.floor(self.total_time / self.delta_t + 1e-9))

    def measurement_steps(self, dt: float) -> list[int]:
        """Step indices of the measurements, rounded to the grid."""
        if math.isinf(self.delta_t):
            return []
        if self.delta_t < dt * (1.0 - 1e-9):
            raise ScheduleError(
                f"measurement interval delta_t={self.delta_t} is finer than "
                f"the integration step dt={dt}"
            )
        n_total = int(round(self.total_time / dt))
        steps = []
        for k in range(1, self.n + 1):
            s = int(round(k * self.delta_t / dt))
            if 0 < s <= n_total and (not steps or s != steps[-1]):
                steps.append(s)
        return steps


@dataclass(frozen=True)
class CollapseRecord:
    """One heterodyne collapse: when, onto what, sampled from which trajectory."""

    time: float
    sampled_center: complex
    sampled_index: int


@dataclass
class MeasuredRun:
    """Output of a measured evolution."""

    stats: StatsSeries
    collapses: list[CollapseRecord]
    snapshots: dict[float, np.ndarray]


def heterodyne_collapse(ens: TrajectoryEnsemble, rng=None) -> CollapseRecord:
    """Collapse the ensemble onto one of its own amplitudes (in place).

    An index is drawn uniformly over trajectories (sampling the empirical
    phase-space distribution); every trajectory restarts at the sampled
    amplitude plus an independent complex Gaussian with E|Z|^2 = 0.5, the
    same convention as :func:`~qvdp.sde_core.init_coherent`.

    ``rng`` may be a ``numpy.random.Generator`` to override the ensemble's
    own protocol stream (useful in tests); by default the index sequence
    is a pure function of the ensemble seed and the number of collapses
    performed so far.
    """
    if ens.n_traj < 1:
        raise StateError("cannot collapse an empty ensemble")
    if rng is None:
        u = protocol_uniform(ens.pkey, ens.protocol_count)
        ens.protocol_count += 1
        k = min(int(u * ens.n_traj), ens.n_traj - 1)
    else:
        k = int(rng.integers(ens.n_traj))
    center = complex(ens.states[k])
    z = ens.draw_normals(1)
    ens.states[:] = center + 0.5 * (z[:, 0] + 1j * z[:, 1])
    return CollapseRecord(time=ens.time, sampled_center=center, sampled_index=k)


def run_measured_evolution(params: OscillatorParams, schedule: MeasurementSchedule,
                           cfg: IntegratorConfig, init_center: complex,
                           n_traj: int, snapshot_times=()) -> MeasuredRun:
    """Alternate free evolution segments with heterodyne collapses.

    Returns the stitched statistics series covering the full duration at
    ``record_stride`` resolution, the collapse records, and ensemble
    snapshots (state copies) at the requested times. Snapshot times are
    rounded to the step grid; where they coincide with a measurement the
    snapshot precedes the collapse.
    """
    dt = cfg.dt
    n_total = int(round(schedule.total_time / dt))
    meas_steps = set(schedule.measurement_steps(dt))
    snap_steps = {}
    for t in snapshot_times:
        s = int(round(t / dt))
        if 0 <= s <= n_total:
            snap_steps.setdefault(s, t)

    ens = init_coherent(init_center, n_traj, cfg.seed)
    collapses: list[CollapseRecord] = []
    snapshots: dict[float, np.ndarray] = {}
    if 0 in snap_steps:
        snapshots[snap_steps[0]] = ens.copy_states()

    boundaries = sorted(set(meas_steps) | set(snap_steps) | {n_total})
    segments: list[StatsSeries] = []
    done = 0
    for b in boundaries:
        if b == 0:
            continue
        _, seg = evolve(ens, params, cfg, (b - done) * dt,
                        record_initial=(not segments))
        segments.append(seg)
        done = b
        if b in snap_steps:
            snapshots[snap_steps[b]] = ens.copy_states()
        if b in meas_steps:
            collapses.append(heterodyne_collapse(ens))
    if not segments:  # zero-duration run
        _, series = evolve(ens, params, cfg, 0.0)
    else:
        series = StatsSeries.concatenate(segments)
    return MeasuredRun(stats=series, collapses=collapses, snapshots=snapshots)
