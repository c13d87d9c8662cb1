"""Two coupled van der Pol oscillators and their phase synchronization.

The modes follow

    d(alpha_j)/dt = (-i*omega_mj + kappa1)*alpha_j
                    - 2*kappa2*(|alpha_j|^2 - 1)*alpha_j
                    + i*mu*alpha_{3-j}
                    + sqrt(3*kappa1 + 2*kappa2)*xi_j(t),    j = 1, 2,

with uncorrelated vacuum noises. The coupling respects the global U(1)
symmetry, so only the phase difference theta_- = theta_1 - theta_2 has
deterministic structure: eliminating the amplitude fluctuations around
I0 = sqrt(kappa1/(2*kappa2) + 1) yields a Kuramoto-type reduced equation

    d(theta_-)/dt = -delta_omega - 2*c_k*sin(2*theta_-) + noise,

a washboard with two wells, theta_- = 0 (in-phase) and pi (anti-phase).
``kuramoto_coefficient`` returns c_k = mu^2 / (2*(2*kappa1 + 8*kappa2)).

Joint heterodyne collapses sample one trajectory *pair* and restart every
pair in a two-mode coherent cloud around it, preserving the sampled
cross-mode phase relation. The synchronization degree of a run is the
time average of max[W(0), W(pi)] of the theta_- density, normalized by
the stationary common value of the two peaks in the unmeasured dynamics.

theta_- is always computed as angle(alpha_1 * conj(alpha_2)), which is
exactly invariant under a global quarter-turn rotation of both modes
(bit-for-bit, multiplication by i is exact in floating point).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from qvdp.errors import DomainError, ScheduleError, StateError
from qvdp.measurement import MeasurementSchedule
from qvdp.noise import derive_keys, normal_pair, protocol_key, protocol_uniform
from qvdp.phase_space import PhaseDistribution, phase_distribution
from qvdp.sde_core import MAX_OMEGA_DT, IntegratorConfig, OscillatorParams, noise_amplitude

__all__ = [
    "CoupledParams",
    "CoupledEnsemble",
    "PolarState",
    "SyncResult",
    "CoupledRun",
    "init_coherent_pairs",
    "coupled_step",
    "coupled_evolve",
    "to_polar",
    "theta_minus",
    "kuramoto_coefficient",
    "stationary_amplitude_shift",
    "reduced_phase_step",
    "joint_heterodyne_collapse",
    "run_coupled_measured",
    "baseline_sync_level",
    "sync_measure",
]

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class CoupledParams:
    """Two oscillators sharing kappa1/kappa2, with coupling ``mu``."""

    omega_m1: float = 1.0
    omega_m2: float = 0.99
    kappa1: float = 0.1
    kappa2: float = 0.005
    mu: float = 0.02

    def __post_init__(self):
        if self.mu < 0:
            raise DomainError(f"mu must be >= 0, got {self.mu}")
        OscillatorParams(self.omega_m1, self.kappa1, self.kappa2)
        OscillatorParams(self.omega_m2, self.kappa1, self.kappa2)

    @property
    def delta_omega(self) -> float:
        return self.omega_m1 - self.omega_m2

    def oscillator(self, j: int) -> OscillatorParams:
        return OscillatorParams(self.omega_m1 if j == 1 else self.omega_m2,
                                self.kappa1, self.kappa2)

    @property
    def equilibrium_amplitude(self) -> float:
        return math.sqrt(self.kappa1 / (2.0 * self.kappa2) + 1.0)


class CoupledEnsemble:
    """N pairs (alpha_1, alpha_2), one counter-addressed stream per pair.

    Each pair consumes two normal pairs per step (one per mode) and two
    per joint collapse, in a fixed order, so the realized noise is
    independent of worker partitioning.
    """

    __slots__ = ("states", "time", "seed", "keys", "pkey", "noise_count", "protocol_count")

    def __init__(self, states: np.ndarray, time: float, seed: int):
        self.states = np.asarray(states, dtype=np.complex128)
        if self.states.ndim != 2 or self.states.shape[1] != 2:
            raise DomainError("coupled states must have shape (n_traj, 2)")
        self.time = float(time)
        self.seed = int(seed)
        self.keys = derive_keys(seed, self.states.shape[0])
        self.pkey = protocol_key(seed)
        self.noise_count = 0
        self.protocol_count = 0

    @property
    def n_traj(self) -> int:
        return self.states.shape[0]

    def copy_states(self) -> np.ndarray:
        return self.states.copy()


def init_coherent_pairs(center1: complex, center2: complex, n_traj: int,
                        seed: int) -> CoupledEnsemble:
    """Pairs sampled as two independent coherent clouds (E|Z|^2 = 0.5 each)."""
    if n_traj < 1:
        raise DomainError(f"n_traj must be >= 1, got {n_traj}")
    ens = CoupledEnsemble(np.empty((n_traj, 2), dtype=np.complex128), 0.0, seed)
    from qvdp.noise import normal_block

    z = normal_block(ens.keys, ens.noise_count, 2)
    ens.noise_count += 2
    ens.states[:, 0] = center1 + 0.5 * (z[:, 0] + 1j * z[:, 1])
    ens.states[:, 1] = center2 + 0.5 * (z[:, 2] + 1j * z[:, 3])
    return ens


@njit(parallel=True, cache=True)
def _coupled_kernel(states, keys, counter0, n_steps, gain_dt, loss_dt,
                    rot1, rot2, mu_dt, amp_dt, noise_on):
    n = states.shape[0]
    imu = 1j * mu_dt
    for j in prange(n):
        s1 = states[j, 0]
        s2 = states[j, 1]
        key = keys[j]
        for k in range(n_steps):
            a1 = s1.real * s1.real + s1.imag * s1.imag
            a2 = s2.real * s2.real + s2.imag * s2.imag
            g1 = gain_dt - loss_dt * (a1 - 1.0)
            g2 = gain_dt - loss_dt * (a2 - 1.0)
            t1 = s1 + g1 * s1 + imu * s2
            t2 = s2 + g2 * s2 + imu * s1
            t1 = t1 * rot1
            t2 = t2 * rot2
            if noise_on:
                c = counter0 + 2 * k
                n0, n1 = normal_pair(key, c)
                n2, n3 = normal_pair(key, c + 1)
                t1 = complex(t1.real + amp_dt * n0, t1.imag + amp_dt * n1)
                t2 = complex(t2.real + amp_dt * n2, t2.imag + amp_dt * n3)
            s1 = t1
            s2 = t2
        states[j, 0] = s1
        states[j, 1] = s2


def _coupled_coefficients(params: CoupledParams, cfg: IntegratorConfig):
    w_max = max(params.omega_m1, params.omega_m2)
    if w_max * cfg.dt > MAX_OMEGA_DT * (1 + 1e-12):
        raise DomainError(
            f"omega*dt = {w_max * cfg.dt:.4g} exceeds the accuracy guard {MAX_OMEGA_DT}"
        )
    gain_dt = params.kappa1 * cfg.dt
    loss_dt = 2.0 * params.kappa2 * cfg.dt
    rot1 = complex(np.exp(-1j * params.omega_m1 * cfg.dt))
    rot2 = complex(np.exp(-1j * params.omega_m2 * cfg.dt))
    sigma = math.sqrt(3.0 * params.kappa1 + 2.0 * params.kappa2)
    amp_dt = sigma * math.sqrt(cfg.dt / 2.0)
    return gain_dt, loss_dt, rot1, rot2, params.mu * cfg.dt, amp_dt


def _coupled_advance(ens: CoupledEnsemble, params: CoupledParams,
                     cfg: IntegratorConfig, n_steps: int) -> None:
    if n_steps == 0:
        return
    gain_dt, loss_dt, rot1, rot2, mu_dt, amp_dt = _coupled_coefficients(params, cfg)
    _coupled_kernel(ens.states, ens.keys, ens.noise_count, n_steps,
                    gain_dt, loss_dt, rot1, rot2, mu_dt, amp_dt, cfg.noise)
    if cfg.noise:
        ens.noise_count += 2 * n_steps
    ens.time += n_steps * cfg.dt


def coupled_step(ens: CoupledEnsemble, params: CoupledParams,
                 cfg: IntegratorConfig) -> CoupledEnsemble:
    """Advance all pairs by one step (in place)."""
    _coupled_advance(ens, params, cfg, 1)
    return ens


def coupled_evolve(ens: CoupledEnsemble, params: CoupledParams, cfg: IntegratorConfig,
                   duration: float) -> CoupledEnsemble:
    """Advance all pairs by ``duration`` (no recording)."""
    if duration < 0:
        raise DomainError("duration must be >= 0")
    _coupled_advance(ens, params, cfg, int(round(duration / cfg.dt)))
    return ens


@dataclass(frozen=True)
class PolarState:
    """Amplitude/phase variables of one pair.

    ``theta_minus`` is wrapped to [0, 2*pi). ``theta_plus`` represents
    the phase sum through the convention theta_plus = 2*theta_2 +
    theta_minus (theta_2 the principal phase of the second mode); it
    equals theta_1 + theta_2 modulo 2*pi and keeps the decomposition
    exactly invertible despite the wrapped difference.
    """

    i1: float
    i2: float
    theta_plus: float
    theta_minus: float
    degenerate: bool = False


def to_polar(pair) -> PolarState:
    """Polar decomposition alpha_j = I_j exp(i theta_j) of one pair.

    A zero amplitude has no phase; it is reported as 0 with the
    ``degenerate`` flag set.
    """
    a1, a2 = complex(pair[0]), complex(pair[1])
    i1, i2 = abs(a1), abs(a2)
    degenerate = i1 == 0.0 or i2 == 0.0
    th1 = math.atan2(a1.imag, a1.real) if i1 > 0 else 0.0
    th2 = math.atan2(a2.imag, a2.real) if i2 > 0 else 0.0
    theta_minus_w = (th1 - th2) % _TWO_PI
    return PolarState(i1=i1, i2=i2,
                      theta_plus=2.0 * th2 + theta_minus_w,
                      theta_minus=theta_minus_w,
                      degenerate=degenerate)


def from_polar(state: PolarState) -> tuple[complex, complex]:
    """Inverse of :func:`to_polar` (up to phase of zero-amplitude modes)."""
    th2 = 0.5 * (state.theta_plus - state.theta_minus)
    th1 = th2 + state.theta_minus
    return (state.i1 * complex(np.exp(1j * th1)),
            state.i2 * complex(np.exp(1j * th2)))


def theta_minus(states: np.ndarray) -> np.ndarray:
    """Phase differences of an (N, 2) pair array, wrapped to [0, 2*pi).

    Built from alpha_1 * conj(alpha_2) with explicitly separated real
    arithmetic: the separate multiply/add ufuncs round deterministically
    (no fused multiply-add), which makes the result bit-identical under a
    global quarter-turn rotation of both modes.
    """
    xr, xi = states[:, 0].real, states[:, 0].imag
    yr, yi = states[:, 1].real, states[:, 1].imag
    re = xr * yr + xi * yi
    im = xi * yr - xr * yi
    return np.mod(np.arctan2(im, re), _TWO_PI)


def kuramoto_coefficient(params: CoupledParams) -> float:
    """Reduced-equation coefficient c_k = mu^2 / (2*(2*kappa1 + 8*kappa2))."""
    return params.mu**2 / (2.0 * (2.0 * params.kappa1 + 8.0 * params.kappa2))


def stationary_amplitude_shift(params: CoupledParams, theta_m: float) -> tuple[float, float]:
    """Stationary amplitude perturbations (dI1, dI2) at phase difference theta_m."""
    i0 = params.equilibrium_amplitude
    shift = params.mu * i0 * math.sin(theta_m) / (2.0 * params.kappa1 + 8.0 * params.kappa2)
    return shift, -shift


def reduced_phase_step(theta_m: float, params: CoupledParams, dt: float,
                       rng=None) -> float:
    """One Euler(-Maruyama) step of the reduced phase-difference equation.

    The optional noise term has variance 2*(3*kappa1 + 2*kappa2)/I0^2 * dt,
    the equilibrium-amplitude projection of the two independent phase
    noises. Pass a ``numpy.random.Generator`` to enable it.
    """
    c2 = 2.0 * kuramoto_coefficient(params)
    out = theta_m - (params.delta_omega + c2 * math.sin(2.0 * theta_m)) * dt
    if rng is not None:
        var = 2.0 * (3.0 * params.kappa1 + 2.0 * params.kappa2) \
            / params.equilibrium_amplitude**2 * dt
        out += math.sqrt(var) * rng.standard_normal()
    return out


def joint_heterodyne_collapse(ens: CoupledEnsemble, rng=None):
    """Collapse all pairs onto one sampled pair (in place).

    One pair index is drawn uniformly; every pair restarts at the sampled
    two-mode amplitude plus independent per-mode Gaussians (E|Z|^2 = 0.5),
    preserving the sampled cross-correlation of the outcome.
    """
    if ens.n_traj < 1:
        raise StateError("cannot collapse an empty ensemble")
    if rng is None:
        u = protocol_uniform(ens.pkey, ens.protocol_count)
        ens.protocol_count += 1
        k = min(int(u * ens.n_traj), ens.n_traj - 1)
    else:
        k = int(rng.integers(ens.n_traj))
    c1 = complex(ens.states[k, 0])
    c2 = complex(ens.states[k, 1])
    from qvdp.noise import normal_block

    z = normal_block(ens.keys, ens.noise_count, 2)
    ens.noise_count += 2
    ens.states[:, 0] = c1 + 0.5 * (z[:, 0] + 1j * z[:, 1])
    ens.states[:, 1] = c2 + 0.5 * (z[:, 2] + 1j * z[:, 3])
    return k, (c1, c2)


#: Bin count used to evaluate the phase-difference density at 0 and pi.
WELL_BINS = 64


def well_densities(theta: np.ndarray, n_bins: int = WELL_BINS) -> tuple[float, float]:
    """Per-radian density of angles in the bins containing 0 and pi."""
    w = _TWO_PI / n_bins
    idx = np.mod(np.rint(theta / w).astype(np.int64), n_bins)
    n = theta.size
    return (float(np.count_nonzero(idx == 0)) / (n * w),
            float(np.count_nonzero(idx == n_bins // 2)) / (n * w))


@dataclass
class CoupledRun:
    """Recorded output of one coupled (possibly measured) evolution."""

    times: np.ndarray
    w0: np.ndarray
    wpi: np.ndarray
    theta_hist: PhaseDistribution          # time-averaged over all records
    snapshots: dict[float, np.ndarray]
    n_collapses: int


def run_coupled_measured(params: CoupledParams, schedule: MeasurementSchedule,
                         cfg: IntegratorConfig, n_traj: int,
                         theta_stride: int | None = None,
                         snapshot_times=(), hist_from: float = 0.0) -> CoupledRun:
    """Evolve pairs with periodic joint collapses, recording theta_- statistics.

    Starts from the in-quadrature initial condition theta_- = pi/2 with
    both amplitudes at the equilibrium radius. Records the well densities
    W(0), W(pi) every ``theta_stride`` steps (default: the evolve record
    stride) and accumulates the time-averaged phase-difference histogram
    over records with t >= ``hist_from`` (use it to exclude the transient
    when estimating stationary distributions). Snapshots (pair copies)
    precede a coinciding collapse.
    """
    dt = cfg.dt
    stride = theta_stride if theta_stride is not None else cfg.record_stride
    n_total = int(round(schedule.total_time / dt))
    meas_steps = set(schedule.measurement_steps(dt))
    snap_steps = {}
    for t in snapshot_times:
        s = int(round(t / dt))
        if 0 <= s <= n_total:
            snap_steps.setdefault(s, t)

    i0 = params.equilibrium_amplitude
    ens = init_coherent_pairs(i0 * 1j, i0 + 0j, n_traj, cfg.seed)

    record_steps = set(range(0, n_total + 1, stride)) | {n_total}
    boundaries = sorted(meas_steps | set(snap_steps) | record_steps)

    times, w0s, wpis = [], [], []
    hist_accum = np.zeros(WELL_BINS)
    n_hist = 0
    snapshots: dict[float, np.ndarray] = {}
    n_coll = 0
    done = 0
    for b in boundaries:
        _coupled_advance(ens, params, cfg, b - done)
        done = b
        if b in snap_steps:
            snapshots[snap_steps[b]] = ens.copy_states()
        if b in record_steps:
            th = theta_minus(ens.states)
            v0, vpi = well_densities(th)
            times.append(ens.time)
            w0s.append(v0)
            wpis.append(vpi)
            if ens.time >= hist_from - 1e-9:
                hist_accum += phase_distribution(th, WELL_BINS).density
                n_hist += 1
        if b in meas_steps:
            joint_heterodyne_collapse(ens)
            n_coll += 1
    theta_hist = PhaseDistribution(n_bins=WELL_BINS, density=hist_accum / max(n_hist, 1))
    return CoupledRun(times=np.asarray(times), w0=np.asarray(w0s), wpi=np.asarray(wpis),
                      theta_hist=theta_hist, snapshots=snapshots, n_collapses=n_coll)


def baseline_sync_level(run: CoupledRun, window: float) -> float:
    """Common stationary level of W(0) and W(pi) from an unmeasured run.

    Averages both well densities over the trailing ``window`` of the run,
    where the bistable distribution has equilibrated.
    """
    t_end = run.times[-1]
    if window > t_end - run.times[0] + 1e-9:
        raise DomainError("averaging window longer than the run")
    mask = run.times >= t_end - window
    return float((run.w0[mask].mean() + run.wpi[mask].mean()) / 2.0)


@dataclass
class SyncResult:
    """Synchronization degree over repeated measured runs."""

    s_each: np.ndarray
    s_mean: float
    s_baseline: float | None
    ratio: float | None
    sigma_ratio: float | None


def sync_measure(runs, horizon: float, s_baseline: float | None = None) -> SyncResult:
    """Time-averaged max[W(0), W(pi)] over runs, normalized by the baseline.

    ``runs`` is an iterable of :class:`CoupledRun`. Each S_i averages
    max(W(0)_t, W(pi)_t) over records with t <= horizon; the mean over
    runs is reported, with the standard deviation of S_i/S_baseline over
    runs when a baseline is supplied (otherwise the result is
    unnormalized: ratio and sigma are None).
    """
    s_each = []
    for run in runs:
        mask = run.times <= horizon + 1e-9
        if not np.any(mask):
            raise DomainError("no records inside the averaging horizon")
        s_each.append(float(np.maximum(run.w0[mask], run.wpi[mask]).mean()))
    s_each = np.asarray(s_each)
    if len(s_each) < 1:
        raise DomainError("at least one run is required")
    s_mean = float(s_each.mean())
    if s_baseline is None:
        return SyncResult(s_each, s_mean, None, None, None)
    ratios = s_each / s_baseline
    sigma = float(ratios.std(ddof=1)) if len(ratios) > 1 else 0.0
    return SyncResult(s_each, s_mean, float(s_baseline),
                      float(s_mean / s_baseline), sigma)
