"""Semiclassical Langevin dynamics of a quantum van der Pol oscillator.

A single oscillator with linear gain ``kappa1`` and two-excitation loss
``kappa2`` follows, in the semiclassical regime kappa2/kappa1 << 1, the
complex Langevin equation

    d(alpha)/dt = (-i*omega_m + kappa1)*alpha
                  - 2*kappa2*(|alpha|^2 - 1)*alpha
                  + sqrt(3*kappa1 + 2*kappa2) * xi(t),

with circular Gaussian vacuum noise, <xi*(t) xi(t')> = delta(t - t').
The noise-free attractor is a circle of radius r/2 in alpha, i.e. radius
r = 2*sqrt(kappa1/(2*kappa2) + 1) in the quadratures Q = 2 Re alpha,
P = 2 Im alpha.

Integration uses an Euler-Maruyama step with the rotation applied as an
exact phase factor: gain and nonlinear loss are advanced by an explicit
Euler increment (so the limit-cycle radius is a fixed point of the
discrete map at any dt), the state is then rotated by exp(-i*omega_m*dt),
and the additive Gaussian increment is added. A plain Euler treatment of
the rotation would inflate the stationary radius by O(omega_m^2 * dt),
visibly biasing the limit cycle at usable step sizes.

Ensembles are advanced by numba-parallelized kernels drawing their noise
from the counter-addressable streams of :mod:`qvdp.noise`; results are
bit-exact for any worker/thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from numba import njit, prange

from qvdp.errors import ConfigError, DomainError
from qvdp.noise import derive_keys, normal_block, normal_pair, protocol_key

__all__ = [
    "OscillatorParams",
    "IntegratorConfig",
    "TrajectoryEnsemble",
    "EnsembleStats",
    "StatsSeries",
    "limit_cycle_radius",
    "noise_amplitude",
    "drift",
    "init_coherent",
    "step",
    "evolve",
    "set_workers",
]

#: Hard accuracy guard on the dimensionless step size.
MAX_OMEGA_DT = 0.05


@dataclass(frozen=True)
class OscillatorParams:
    """Rates of one van der Pol oscillator.

    Attributes
    ----------
    omega_m : float
        Angular frequency; sets the time unit (dimensionless runs use 1).
    kappa1 : float
        Linear gain rate, same unit as ``omega_m``.
    kappa2 : float
        Two-excitation nonlinear loss rate; must be positive.
    """

    omega_m: float = 1.0
    kappa1: float = 0.1
    kappa2: float = 0.005

    def __post_init__(self):
        if not self.omega_m > 0:
            raise DomainError(f"omega_m must be > 0, got {self.omega_m}")
        if self.kappa1 < 0:
            raise DomainError(f"kappa1 must be >= 0, got {self.kappa1}")
        if not self.kappa2 > 0:
            raise DomainError(f"kappa2 must be > 0, got {self.kappa2}")


@dataclass(frozen=True)
class IntegratorConfig:
    """Time step, recording stride and master seed for ensemble evolution.

    ``noise=False`` disables the stochastic increment; it exists for
    deterministic checks (limit-cycle convergence, locking) and leaves
    the stream counters untouched.
    """

    dt: float = 0.005
    record_stride: int = 1
    seed: int = 0
    noise: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if self.record_stride < 1:
            raise ConfigError(f"record_stride must be >= 1, got {self.record_stride}")


class TrajectoryEnsemble:
    """N complex trajectory amplitudes with per-trajectory noise streams.

    The ensemble carries the stream keys and a single pair counter; every
    trajectory consumes the same number of normal pairs at every event
    (one per step, one per heterodyne reset), so the counter is shared.
    """

    __slots__ = ("states", "time", "seed", "keys", "pkey", "noise_count", "protocol_count")

    def __init__(self, states: np.ndarray, time: float, seed: int,
                 keys: np.ndarray | None = None, noise_count: int = 0,
                 protocol_count: int = 0):
        self.states = np.asarray(states, dtype=np.complex128)
        self.time = float(time)
        self.seed = int(seed)
        self.keys = derive_keys(seed, len(self.states)) if keys is None else keys
        self.pkey = protocol_key(seed)
        self.noise_count = int(noise_count)
        self.protocol_count = int(protocol_count)

    @property
    def n_traj(self) -> int:
        return len(self.states)

    def draw_normals(self, n_pairs: int) -> np.ndarray:
        """Consume ``n_pairs`` normal pairs per trajectory, shape (N, 2*n_pairs)."""
        out = normal_block(self.keys, self.noise_count, n_pairs)
        self.noise_count += n_pairs
        return out

    def copy_states(self) -> np.ndarray:
        return self.states.copy()


@dataclass(frozen=True)
class EnsembleStats:
    """Ensemble moments at one instant."""

    time: float
    mean_amp: complex
    var_amp: complex
    mean_q: float
    mean_p: float


class StatsSeries:
    """Columnar time series of :class:`EnsembleStats` records."""

    def __init__(self, n_records: int):
        self.times = np.empty(n_records)
        self.mean_amp = np.empty(n_records, dtype=np.complex128)
        self.var_amp = np.empty(n_records, dtype=np.complex128)
        self._i = 0

    def record(self, time: float, states: np.ndarray) -> None:
        m = states.mean()
        d = states - m
        self.times[self._i] = time
        self.mean_amp[self._i] = m
        self.var_amp[self._i] = (d * d).mean()
        self._i += 1

    @property
    def mean_q(self) -> np.ndarray:
        return 2.0 * self.mean_amp.real

    @property
    def mean_p(self) -> np.ndarray:
        # P = i(alpha* - alpha) = 2 Im alpha
        return 2.0 * self.mean_amp.imag

    def __len__(self) -> int:
        return self._i

    def __getitem__(self, i: int) -> EnsembleStats:
        if i < 0:
            i += self._i
        if not 0 <= i < self._i:
            raise IndexError(i)
        return EnsembleStats(
            time=float(self.times[i]),
            mean_amp=complex(self.mean_amp[i]),
            var_amp=complex(self.var_amp[i]),
            mean_q=float(2.0 * self.mean_amp[i].real),
            mean_p=float(2.0 * self.mean_amp[i].imag),
        )

    @staticmethod
    def concatenate(parts: list["StatsSeries"]) -> "StatsSeries":
        """Stitch recorded segments into one series."""
        out = StatsSeries(0)
        out.times = np.concatenate([p.times[: p._i] for p in parts]) if parts else np.empty(0)
        out.mean_amp = np.concatenate([p.mean_amp[: p._i] for p in parts]) \
            if parts else np.empty(0, dtype=np.complex128)
        out.var_amp = np.concatenate([p.var_amp[: p._i] for p in parts]) \
            if parts else np.empty(0, dtype=np.complex128)
        out._i = len(out.times)
        return out


def limit_cycle_radius(params: OscillatorParams) -> float:
    """Classical limit-cycle radius r = 2*sqrt(kappa1/(2*kappa2) + 1)."""
    if not params.kappa2 > 0:
        raise DomainError("limit cycle radius requires kappa2 > 0")
    return 2.0 * math.sqrt(params.kappa1 / (2.0 * params.kappa2) + 1.0)


def noise_amplitude(params: OscillatorParams) -> float:
    """Amplitude sqrt(3*kappa1 + 2*kappa2) of the vacuum input noise."""
    return math.sqrt(3.0 * params.kappa1 + 2.0 * params.kappa2)


def drift(alpha, params: OscillatorParams):
    """Deterministic part of d(alpha)/dt; works on scalars and arrays."""
    a2 = np.real(alpha) ** 2 + np.imag(alpha) ** 2
    return (-1j * params.omega_m + params.kappa1) * alpha \
        - 2.0 * params.kappa2 * (a2 - 1.0) * alpha


def init_coherent(center: complex, n_traj: int, seed: int) -> TrajectoryEnsemble:
    """Ensemble sampling of a coherent state centered at ``center``.

    Each trajectory starts at ``center + Z`` with Z complex Gaussian,
    E|Z|^2 = 0.5 (quadrature variance 0.25 each), which reproduces the
    second moments of a coherent state's Wigner function (Var Q = 1).
    """
    if n_traj < 1:
        raise DomainError(f"n_traj must be >= 1, got {n_traj}")
    ens = TrajectoryEnsemble(np.empty(n_traj, dtype=np.complex128), 0.0, seed)
    z = ens.draw_normals(1)
    ens.states[:] = complex(center) + 0.5 * (z[:, 0] + 1j * z[:, 1])
    return ens


@njit(parallel=True, cache=True)
def _advance_kernel(states, keys, counter0, n_steps, gain_dt, loss_dt, rot, amp_dt, noise_on):
    n = states.shape[0]
    for j in prange(n):
        s = states[j]
        key = keys[j]
        for k in range(n_steps):
            a2 = s.real * s.real + s.imag * s.imag
            g = gain_dt - loss_dt * (a2 - 1.0)
            s = s + g * s
            s = s * rot
            if noise_on:
                n0, n1 = normal_pair(key, counter0 + k)
                s = complex(s.real + amp_dt * n0, s.imag + amp_dt * n1)
        states[j] = s


def _step_coefficients(params: OscillatorParams, cfg: IntegratorConfig):
    if params.omega_m * cfg.dt > MAX_OMEGA_DT * (1 + 1e-12):
        raise ConfigError(
            f"omega_m*dt = {params.omega_m * cfg.dt:.4g} exceeds the accuracy "
            f"guard {MAX_OMEGA_DT}"
        )
    gain_dt = params.kappa1 * cfg.dt
    loss_dt = 2.0 * params.kappa2 * cfg.dt
    rot = complex(np.exp(-1j * params.omega_m * cfg.dt))
    amp_dt = noise_amplitude(params) * math.sqrt(cfg.dt / 2.0)
    return gain_dt, loss_dt, rot, amp_dt


def _advance(ens: TrajectoryEnsemble, params: OscillatorParams,
             cfg: IntegratorConfig, n_steps: int) -> None:
    if n_steps == 0:
        return
    gain_dt, loss_dt, rot, amp_dt = _step_coefficients(params, cfg)
    _advance_kernel(ens.states, ens.keys, ens.noise_count, n_steps,
                    gain_dt, loss_dt, rot, amp_dt, cfg.noise)
    if cfg.noise:
        ens.noise_count += n_steps
    ens.time += n_steps * cfg.dt


def step(ens: TrajectoryEnsemble, params: OscillatorParams,
         cfg: IntegratorConfig) -> TrajectoryEnsemble:
    """Advance the ensemble by a single time step (in place)."""
    _advance(ens, params, cfg, 1)
    return ens


def evolve(ens: TrajectoryEnsemble, params: OscillatorParams, cfg: IntegratorConfig,
           duration: float, record_initial: bool = True) -> tuple[TrajectoryEnsemble, StatsSeries]:
    """Advance by ``duration``, recording stats every ``record_stride`` steps.

    The number of steps is ``round(duration / dt)``. Statistics are
    reduced over the full trajectory array in index order, so recorded
    values do not depend on worker count. The final step is always
    recorded. ``record_initial=False`` suppresses the leading record
    (used when stitching measurement segments whose boundary was already
    recorded by the previous segment).
    """
    if duration < 0:
        raise DomainError(f"duration must be >= 0, got {duration}")
    n_steps = int(round(duration / cfg.dt))
    record_steps = list(range(0, n_steps + 1, cfg.record_stride))
    if record_steps[-1] != n_steps:
        record_steps.append(n_steps)
    if not record_initial and record_steps and record_steps[0] == 0:
        record_steps = record_steps[1:]
    series = StatsSeries(len(record_steps))
    done = 0
    for rs in record_steps:
        _advance(ens, params, cfg, rs - done)
        done = rs
        series.record(ens.time, ens.states)
    if done < n_steps:
        _advance(ens, params, cfg, n_steps - done)
    return ens, series


def set_workers(n: int | None) -> int:
    """Set the numba thread count used by the ensemble kernels.

    Results are bit-exact for any worker count (noise is counter
    addressed, reductions happen outside the kernels); this only affects
    wall time. Returns the thread count in effect.
    """
    if n is not None and n >= 1:
        numba.set_num_threads(min(int(n), numba.config.NUMBA_NUM_THREADS))
    return numba.get_num_threads()
