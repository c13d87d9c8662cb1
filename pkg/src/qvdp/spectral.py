"""Fourier analysis of the mean quadrature and the Zeno threshold.

The spectrum is the rectangle-rule discretization of

    Q(w) = | (1/sqrt(2*pi)) * Integral dt <Q>(t) exp(-i*w*t) |

with no window and no zero padding, i.e. |rfft(<Q>)| * dt / sqrt(2*pi)
on the grid w_m = 2*pi*m / (n*dt). Frequency resolution is set by the
total record length.

The critical measurement interval separating the Zeno-suppressed
oscillatory regime from the measurement-dominated random walk is

    delta_t_c = (3*pi/omega_m) * sqrt(2*kappa2 / (kappa1 + 2*kappa2)),

equivalently a critical count n_c = t / delta_t_c for a run of length t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from qvdp.errors import DomainError
from qvdp.sde_core import OscillatorParams, limit_cycle_radius

__all__ = [
    "SpectralSeries",
    "fourier_q",
    "peak_normalized",
    "critical_interval",
    "threshold_ratio",
]


@dataclass
class SpectralSeries:
    """One-sided magnitude spectrum on a uniform angular-frequency grid."""

    frequencies: np.ndarray
    magnitudes: np.ndarray

    def magnitude_at(self, omega: float) -> float:
        """Magnitude at the grid frequency nearest ``omega``."""
        i = int(np.argmin(np.abs(self.frequencies - omega)))
        return float(self.magnitudes[i])


def fourier_q(q_series: np.ndarray, dt_record: float,
              times: np.ndarray | None = None) -> SpectralSeries:
    """Magnitude spectrum of a uniformly sampled <Q>(t) series.

    ``times``, if given, is checked for uniform spacing ``dt_record``;
    a non-uniform series is rejected.
    """
    q = np.asarray(q_series, dtype=float)
    if q.ndim != 1 or q.size < 2:
        raise DomainError("q_series must be a 1D series of length >= 2")
    if not dt_record > 0:
        raise DomainError(f"dt_record must be > 0, got {dt_record}")
    if times is not None:
        d = np.diff(np.asarray(times, dtype=float))
        if d.size and (np.any(d <= 0) or np.max(np.abs(d - dt_record)) > 1e-9 * max(dt_record, 1.0)):
            raise DomainError("series is not uniformly sampled at dt_record")
    mags = np.abs(np.fft.rfft(q)) * dt_record / math.sqrt(2.0 * math.pi)
    freqs = 2.0 * math.pi * np.fft.rfftfreq(q.size, d=dt_record)
    return SpectralSeries(frequencies=freqs, magnitudes=mags)


def peak_normalized(series: SpectralSeries, params: OscillatorParams) -> float:
    """Spectral magnitude at the oscillator frequency over the cycle radius."""
    return series.magnitude_at(params.omega_m) / limit_cycle_radius(params)


def critical_interval(params: OscillatorParams,
                      total_time: float | None = None) -> tuple[float, float | None]:
    """Critical measurement interval, and count n_c = t/delta_t_c if t given."""
    denom = params.kappa1 + 2.0 * params.kappa2
    if not denom > 0 or not params.kappa2 > 0:
        raise DomainError("critical interval requires kappa2 > 0 and kappa1 + 2*kappa2 > 0")
    dtc = (3.0 * math.pi / params.omega_m) * math.sqrt(2.0 * params.kappa2 / denom)
    n_c = None if total_time is None else total_time / dtc
    return dtc, n_c


def threshold_ratio(omega_delta_t: float) -> float:
    """Rate ratio kappa2/kappa1 whose critical interval equals ``omega_delta_t``.

    Inverts the threshold condition at fixed dimensionless measurement
    interval; the returned ratio marks the knee between the flat and the
    phase-diffusion-dominated regimes of the normalized spectral peak.
    """
    y = (omega_delta_t / (3.0 * math.pi)) ** 2
    if not 0 < y < 1:
        raise DomainError("omega_delta_t out of the invertible range (0, 3*pi)")
    return y / (2.0 * (1.0 - y))
