"""Spectrum discretization identities and the threshold formula."""

import math

import numpy as np
import pytest

from qvdp.errors import DomainError
from qvdp.sde_core import OscillatorParams, limit_cycle_radius
from qvdp.spectral import (
    SpectralSeries,
    critical_interval,
    fourier_q,
    peak_normalized,
    threshold_ratio,
)

FIG = OscillatorParams(1.0, 0.1, 0.005)


class TestFourier:
    def test_rejects_short_or_nonuniform(self):
        with pytest.raises(DomainError):
            fourier_q(np.array([1.0]), 0.1)
        with pytest.raises(DomainError):
            fourier_q(np.ones(5), 0.1, times=np.array([0.0, 0.1, 0.2, 0.35, 0.4]))

    def test_constant_series_dc_only(self):
        n, dt, c = 1000, 0.05, 2.5
        s = fourier_q(np.full(n, c), dt)
        assert s.frequencies[0] == 0.0
        assert s.magnitudes[0] == pytest.approx(c * n * dt / math.sqrt(2 * math.pi), rel=1e-12)
        assert np.max(s.magnitudes[1:]) < 1e-10 * s.magnitudes[0]

    def test_on_grid_cosine_peak(self):
        n, dt, amp = 4000, 0.05, 1.7
        t = np.arange(n) * dt
        w0 = 2 * math.pi * 40 / (n * dt)  # exactly on the grid
        s = fourier_q(amp * np.cos(w0 * t), dt)
        total_t = n * dt
        peak = s.magnitude_at(w0)
        assert peak == pytest.approx(amp * total_t / (2 * math.sqrt(2 * math.pi)), rel=1e-10)
        others = s.magnitudes[np.abs(s.frequencies - w0) > 1e-9]
        assert np.max(others) < 0.01 * peak

    def test_parseval_discrete(self):
        # two-sided sum |Q(w)|^2 dw equals sum <Q>^2 dt exactly (rectangle rule)
        rng = np.random.default_rng(2)
        for n in (256, 511):
            x = rng.normal(size=n)
            dt = 0.21
            s = fourier_q(x, dt)
            m2 = s.magnitudes**2
            two_sided = 2.0 * m2.sum() - m2[0]
            if n % 2 == 0:
                two_sided -= m2[-1]  # Nyquist bin appears once
            dw = s.frequencies[1] - s.frequencies[0]
            assert two_sided * dw == pytest.approx((x**2).sum() * dt, rel=1e-9)

    def test_linearity_triangle_inequality(self):
        rng = np.random.default_rng(4)
        x, y = rng.normal(size=300), rng.normal(size=300)
        a, b = 0.7, 1.3
        s_sum = fourier_q(a * x + b * y, 0.1)
        s_x = fourier_q(x, 0.1)
        s_y = fourier_q(y, 0.1)
        assert np.all(s_sum.magnitudes <= a * s_x.magnitudes + b * s_y.magnitudes + 1e-12)


class TestPeakNormalized:
    def test_zero_series(self):
        s = fourier_q(np.zeros(100), 0.1)
        assert peak_normalized(s, FIG) == 0.0

    def test_cosine_at_cycle_radius(self):
        r = limit_cycle_radius(FIG)
        n, dt = 6000, 0.1
        t = np.arange(n) * dt
        # put omega_m exactly on the grid: choose the nearest grid line
        k = round(FIG.omega_m * n * dt / (2 * math.pi))
        w0 = 2 * math.pi * k / (n * dt)
        s = fourier_q(r * np.cos(w0 * t), dt)
        expected = n * dt / (2 * math.sqrt(2 * math.pi))
        assert peak_normalized(s, FIG) == pytest.approx(expected, rel=1e-6)


class TestCriticalInterval:
    def test_fig_parameters(self):
        dtc, n_c = critical_interval(FIG, total_time=600.0)
        assert dtc == pytest.approx(3 * math.pi * math.sqrt(0.01 / 0.11), rel=1e-12)
        assert dtc == pytest.approx(2.84166, abs=1e-4)
        assert n_c == pytest.approx(211.14, abs=0.05)

    def test_vanishing_loss_limit(self):
        p = OscillatorParams(1.0, 0.1, 1e-12)
        dtc, _ = critical_interval(p)
        assert dtc < 1e-4

    def test_threshold_ratio_inversion(self):
        x = threshold_ratio(0.3)
        assert x == pytest.approx(5.071e-4, rel=1e-3)
        # consistency: the critical interval at that ratio is 0.3
        p = OscillatorParams(1.0, 0.1, 0.1 * x)
        dtc, _ = critical_interval(p)
        assert dtc == pytest.approx(0.3, rel=1e-12)

    def test_monotonicity_grid(self):
        # increasing in kappa2, decreasing in kappa1
        k1s = [0.01, 0.05, 0.1, 0.5]
        k2s = [1e-4, 1e-3, 1e-2]
        for k1 in k1s:
            vals = [critical_interval(OscillatorParams(1.0, k1, k2))[0] for k2 in k2s]
            assert np.all(np.diff(vals) > 0)
        for k2 in k2s:
            vals = [critical_interval(OscillatorParams(1.0, k1, k2))[0] for k1 in k1s]
            assert np.all(np.diff(vals) < 0)

    def test_out_of_range_ratio(self):
        with pytest.raises(DomainError):
            threshold_ratio(0.0)
        with pytest.raises(DomainError):
            threshold_ratio(3 * math.pi)
