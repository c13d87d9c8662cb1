"""Quantum van der Pol oscillators under repeated measurements.

Simulation and analysis toolkit for self-sustained quantum oscillators:
semiclassical Langevin trajectory ensembles, repeated heterodyne collapses
(quantum Zeno-type phase-diffusion suppression), an exact truncated
Fock-space branch with a dichotomic coherent-state POVM, and
measurement-enhanced synchronization of two coupled oscillators.
"""

from qvdp.errors import (
    ConfigError,
    DomainError,
    QvdpError,
    ScheduleError,
    StateError,
    TraceDriftError,
    TruncationError,
)
from qvdp.sde_core import (
    EnsembleStats,
    IntegratorConfig,
    OscillatorParams,
    StatsSeries,
    TrajectoryEnsemble,
    drift,
    evolve,
    init_coherent,
    limit_cycle_radius,
    noise_amplitude,
    step,
)
from qvdp.measurement import (
    CollapseRecord,
    MeasurementSchedule,
    heterodyne_collapse,
    run_measured_evolution,
)
from qvdp.phase_space import (
    PhaseDistribution,
    WignerHistogram,
    circular_spread,
    normalized,
    phase_distribution,
    wigner_histogram,
)
from qvdp.spectral import (
    SpectralSeries,
    critical_interval,
    fourier_q,
    peak_normalized,
    threshold_ratio,
)

__version__ = "0.1.0"
