"""Histogram and circular-density estimators."""

import math

import numpy as np
import pytest
from scipy.special import i0, i1

from qvdp.errors import DomainError, StateError
from qvdp.phase_space import (
    SPREAD_CAP,
    PhaseDistribution,
    circular_spread,
    normalized,
    phase_distribution,
    wigner_histogram,
)


class TestWignerHistogram:
    def test_rejects_bad_bin(self):
        with pytest.raises(DomainError):
            wigner_histogram(np.ones(3, dtype=complex), h=0.0, extent=1.0)

    def test_single_bin_density(self):
        # all samples in one bin -> density 1/h^2 there, 0 elsewhere
        samples = np.full(1000, 0.52 + 0.52j)  # Q=P=1.04
        hist = wigner_histogram(samples, h=0.1, extent=2.0)
        d = hist.density
        assert d.max() == pytest.approx(1.0 / 0.01, rel=1e-12)
        assert np.count_nonzero(d) == 1
        assert hist.dropped == 0

    def test_right_closed_bins(self):
        # Q exactly on a bin edge belongs to the lower bin
        h = 0.5
        hist = wigner_histogram(np.array([0.25 + 0.25j]), h=h, extent=1.0)  # Q=P=0.5
        iq, ip = np.argwhere(hist.counts)[0]
        qc = hist.q_centers
        assert qc[iq] == pytest.approx(0.25)
        assert qc[ip] == pytest.approx(0.25)

    def test_mass_conservation_exact(self):
        rng = np.random.default_rng(0)
        samples = rng.normal(size=4000) + 1j * rng.normal(size=4000) * 3.0
        hist = wigner_histogram(samples, h=0.2, extent=2.0)
        assert hist.counts.sum() + hist.dropped == hist.n_total
        mass = hist.density.sum() * hist.h**2 + hist.dropped / hist.n_total
        assert mass == pytest.approx(1.0, abs=1e-12)

    def test_gaussian_sampler_histogram(self, big_coherent_ensemble):
        ens, r = big_coherent_ensemble
        hist = wigner_histogram(ens.states, h=0.1, extent=1.5 * r)
        d = hist.density
        # peak location from the centroid of the top-half-density region
        # (a bare argmax wanders by a few bins: neighbor contrast at this h
        # is below the Poisson noise even with 10^6 samples)
        top = d >= 0.5 * d.max()
        qs = np.broadcast_to(hist.q_centers[:, None], d.shape)
        ps = np.broadcast_to(hist.q_centers[None, :], d.shape)
        wsum = d[top].sum()
        q_peak = float((qs[top] * d[top]).sum() / wsum)
        p_peak = float((ps[top] * d[top]).sum() / wsum)
        assert abs(q_peak - r) < 0.1
        assert abs(p_peak - 0.0) < 0.1
        # quadrature variance of the underlying samples is 1
        q = 2.0 * ens.states.real
        assert abs(q.var() - 1.0) < 4e-3

    def test_refinement_consistency_exact(self):
        # halving h with the same samples: 2x2 blocks sum to the coarse counts
        rng = np.random.default_rng(3)
        samples = rng.normal(size=20000) * 1.5 + 1j * rng.normal(size=20000)
        coarse = wigner_histogram(samples, h=0.5, extent=4.0)
        fine = wigner_histogram(samples, h=0.25, extent=4.0)
        c = fine.counts.reshape(coarse.n_bins, 2, coarse.n_bins, 2).sum(axis=(1, 3))
        assert np.array_equal(c, coarse.counts)

    def test_normalized(self):
        samples = np.full(10, 0.0 + 0.0j)
        hist = wigner_histogram(samples, h=0.5, extent=1.0)
        grid = normalized(hist)
        assert grid.max() == 1.0
        assert np.argmax(grid) == np.argmax(hist.density)

    def test_normalized_rejects_empty(self):
        hist = wigner_histogram(np.full(5, 10.0 + 10.0j), h=0.5, extent=1.0)
        assert hist.dropped == 5
        with pytest.raises(StateError):
            normalized(hist)


class TestPhaseDistribution:
    def test_bin_count_guard(self):
        with pytest.raises(DomainError):
            phase_distribution(np.ones(4), n_bins=4)

    def test_empty_rejected(self):
        with pytest.raises(StateError):
            phase_distribution(np.array([]), n_bins=16)

    def test_normalization(self):
        rng = np.random.default_rng(1)
        d = phase_distribution(rng.uniform(0, 2 * math.pi, 5000), n_bins=64)
        assert d.density.sum() * d.bin_width == pytest.approx(1.0, abs=1e-12)

    def test_single_angle_spike(self):
        d = phase_distribution(np.full(100, 1.0 + 1.0j), n_bins=32)
        assert d.density.max() == pytest.approx(32 / (2 * math.pi), rel=1e-12)
        assert np.count_nonzero(d.density) == 1

    def test_uniform_flat(self):
        rng = np.random.default_rng(7)
        n = 1_000_000
        d = phase_distribution(rng.uniform(0, 2 * math.pi, n), n_bins=64)
        level = 1.0 / (2 * math.pi)
        se = math.sqrt(level / (n * d.bin_width))  # multinomial per-bin error
        assert np.all(np.abs(d.density - level) < 3.5 * se)

    def test_rotation_invariance_exact(self):
        # theta_- from stored pairs is bit-identical under a global quarter turn
        from qvdp.coupled import theta_minus

        rng = np.random.default_rng(5)
        pairs = rng.normal(size=(3000, 2)) + 1j * rng.normal(size=(3000, 2))
        t1 = theta_minus(pairs)
        t2 = theta_minus(pairs * 1j)
        assert np.array_equal(t1, t2)
        d1 = phase_distribution(t1, 64)
        d2 = phase_distribution(t2, 64)
        assert np.array_equal(d1.density, d2.density)


class TestCircularSpread:
    def test_delta_is_zero(self):
        d = phase_distribution(np.full(50, 0.3), n_bins=64)
        assert circular_spread(d) == pytest.approx(0.0, abs=1e-9)

    def test_uniform_capped(self):
        dens = np.full(64, 1.0 / (2 * math.pi))
        assert circular_spread(PhaseDistribution(64, dens)) == SPREAD_CAP

    def test_von_mises_matches_analytic(self):
        kappa = 4.0
        rng = np.random.default_rng(11)
        sample = rng.vonmises(0.0, kappa, size=200_000) % (2 * math.pi)
        spread = circular_spread(phase_distribution(sample, 256))
        expected = math.sqrt(-2.0 * math.log(i1(kappa) / i0(kappa)))
        assert spread == pytest.approx(expected, rel=0.02)


class TestRingState:
    def test_long_run_ring_is_annular_and_uniform(self):
        # after ~500 time units the unmeasured ensemble is an annulus at r/2,
        # angularly uniform within 10%
        from qvdp.sde_core import IntegratorConfig, OscillatorParams, evolve, init_coherent, limit_cycle_radius

        p = OscillatorParams(1.0, 0.1, 0.005)
        r = limit_cycle_radius(p)
        ens = init_coherent(r / 2.0, 10_000, seed=44)
        evolve(ens, p, IntegratorConfig(dt=0.005, record_stride=10**6, seed=44), 500.0)
        radii = np.abs(ens.states)
        inside = np.mean(np.abs(radii - r / 2.0) < 1.0)
        assert inside > 0.85
        d = phase_distribution(ens.states, 16)
        level = 1.0 / (2 * math.pi)
        se = math.sqrt(level / (ens.n_traj * d.bin_width))
        assert np.all(np.abs(d.density - level) < 0.1 * level + 3.0 * se)
