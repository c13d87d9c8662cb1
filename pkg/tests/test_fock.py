"""Truncated Fock-space branch: master equation, POVM, Wigner evaluation."""

import math
import warnings

import numpy as np
import pytest
from scipy.linalg import expm

from qvdp.errors import DomainError, StateError, TruncationError
from qvdp.fock import (
    DensityMatrix,
    apply_povm,
    coherent_state,
    dichotomic_measure,
    displacement,
    lindblad_rhs,
    lindblad_step,
    liouvillian_steady_state,
    steady_state,
    survival_experiment,
    target_state,
    wigner_from_density,
)
from qvdp.sde_core import OscillatorParams

FIG = OscillatorParams(1.0, 0.1, 0.005)


@pytest.fixture(scope="module")
def rho_ss():
    return steady_state(FIG, 50)


class TestLindblad:
    def test_energy_eigenstate_frozen_without_dissipation(self):
        # H only: |1><1| has no coherences, nothing moves
        p = OscillatorParams(1.0, 1e-300, 1e-300)  # rates numerically zero
        rho = DensityMatrix.fock(1, 20)
        out = lindblad_step(rho, p, dt=1e-3)
        assert np.allclose(out.matrix, rho.matrix, atol=1e-15)

    def test_two_excitation_loss_annihilates_low_fock(self):
        p = OscillatorParams(1.0, 1e-300, 0.3)
        for n in (0, 1):
            rho = DensityMatrix.fock(n, 20)
            rhs = lindblad_rhs(rho.matrix, p)
            assert np.max(np.abs(rhs)) < 1e-12

    def test_step_preserves_structure(self):
        rho = coherent_state(2.0 + 1.0j, 40)
        out = lindblad_step(rho, FIG, dt=1e-3)
        out.check(herm_tol=1e-12, trace_tol=1e-12, positivity_floor=-1e-10)

    def test_steady_number_near_semiclassical(self, rho_ss):
        n_sc = FIG.kappa1 / (2 * FIG.kappa2) + 1.0
        assert abs(rho_ss.expect_number() - n_sc) / n_sc < 0.10

    def test_steady_state_matches_liouvillian_oracle(self, rho_ss):
        oracle = liouvillian_steady_state(FIG, 50)
        n_int, n_or = rho_ss.expect_number(), oracle.expect_number()
        assert abs(n_int - n_or) / n_or < 1e-4
        assert np.max(np.abs(rho_ss.matrix - oracle.matrix)) < 1e-6


class TestDisplacement:
    def test_identity_at_zero(self):
        assert np.allclose(displacement(0.0, 30), np.eye(30), atol=1e-15)

    def test_vacuum_matrix_element(self):
        d = displacement(1.0, 50)
        assert abs(d[0, 0].real - math.exp(-0.5)) < 1e-6

    def test_unitarity_within_guard(self):
        for alpha in (0.5, 1.5 + 1.0j, 3.0):
            d = displacement(alpha, 50)
            prod = d @ displacement(-alpha, 50)
            assert np.max(np.abs(prod - np.eye(50))) < 1e-8

    def test_guard(self):
        with pytest.raises(TruncationError):
            displacement(4.0, 50)  # |alpha|^2 = 16 >= 12.5


class TestTargetState:
    def test_initial_amplitude_real_positive(self, rho_ss):
        a0 = target_state(rho_ss, 0.0, FIG)
        assert a0.imag == 0.0 and a0.real > 0

    def test_amplitude_near_semiclassical(self, rho_ss):
        a0 = abs(target_state(rho_ss, 0.0, FIG))
        assert abs(a0 - math.sqrt(11.0)) / math.sqrt(11.0) < 0.10

    def test_half_period_sign_flip(self, rho_ss):
        a0 = target_state(rho_ss, 0.0, FIG)
        ah = target_state(rho_ss, math.pi / FIG.omega_m, FIG)
        assert abs(ah + a0) < 1e-12 * abs(a0) + 1e-12


class TestDichotomicMeasure:
    def test_perfect_overlap(self):
        alpha = 1.2 - 0.7j
        rho = coherent_state(alpha, 50)
        rng = np.random.default_rng(0)
        outcome, post, prob = dichotomic_measure(rho, alpha, rng)
        assert outcome == 1
        assert prob > 1.0 - 1e-6
        assert np.max(np.abs(post.matrix - rho.matrix)) < 1e-6

    def test_coherent_overlap_probability(self):
        # P1 = exp(-|alpha - alpha'|^2), checked at unit separation
        alpha = 1.0 + 0.5j
        rho = coherent_state(alpha + 1.0, 50)
        d = displacement(alpha, 50)
        p1 = float((d.conj().T @ rho.matrix @ d)[0, 0].real)
        assert abs(p1 - math.exp(-1.0)) < 1e-5

    def test_probabilities_sum_to_one(self):
        rho = coherent_state(2.0, 50)
        _, p1 = apply_povm(rho, 1.0 + 0.5j, 1)
        _, p2 = apply_povm(rho, 1.0 + 0.5j, 2)
        assert p1 + p2 == pytest.approx(1.0, abs=1e-12)

    def test_sampled_frequencies_match_probability(self):
        # sample the outcome many times at fixed P1 ~ 0.5
        alpha = 2.0
        rho = coherent_state(alpha + math.sqrt(math.log(2.0)), 50)
        d = displacement(alpha, 50)
        p1 = float((d.conj().T @ rho.matrix @ d)[0, 0].real)
        rng = np.random.default_rng(123)
        n = 10_000
        hits = sum(1 for _ in range(n) if rng.random() < p1)
        se = math.sqrt(p1 * (1 - p1) / n)
        assert abs(hits / n - p1) < 3.5 * se

    def test_success_branch_idempotent(self):
        rho = coherent_state(1.5, 50)
        alpha = 1.0
        post1, _ = apply_povm(rho, alpha, 1)
        post2, p_again = apply_povm(post1, alpha, 1)
        assert p_again > 1.0 - 1e-10
        assert np.max(np.abs(post2.matrix - post1.matrix)) < 1e-10

    def test_failure_branch_orthogonal_to_target(self):
        rho = coherent_state(2.5, 50)
        alpha = 1.8
        post, _ = apply_povm(rho, alpha, 2)
        d = displacement(alpha, 50)
        assert (d.conj().T @ post.matrix @ d)[0, 0].real < 1e-12

    def test_degenerate_branch_rejected(self):
        rho = coherent_state(1.0, 50)
        with pytest.raises(StateError):
            apply_povm(rho, 1.0, 2)  # P2 ~ 0


class TestSurvival:
    def test_zero_interval_survives(self, rho_ss):
        curve = survival_experiment(FIG, [0.001, 0.01, 0.05], n_grid=[10])
        assert curve.p1[0] > 0.999

    def test_requires_grid_on_master_dt(self):
        with pytest.raises(DomainError):
            survival_experiment(FIG, [0.0015], n_grid=[10])

    def test_start_validation(self):
        with pytest.raises(DomainError):
            survival_experiment(FIG, [0.01], start="m3")

    def test_truncation_robustness(self):
        # raising the truncation 50 -> 70 leaves P1 values unchanged to 1e-4;
        # the dim-70 stationary state comes from the independent sparse solve
        from qvdp.fock import _evolve_matrix

        p1 = {}
        for dim in (50, 70):
            rho_s = liouvillian_steady_state(FIG, dim)
            a0 = target_state(rho_s, 0.0, FIG)
            m = _evolve_matrix(coherent_state(a0, dim).matrix, FIG, 1.0)
            d = displacement(target_state(rho_s, 1.0, FIG), dim)
            p1[dim] = float((d.conj().T @ m @ d)[0, 0].real)
        assert abs(p1[50] - p1[70]) < 1e-4


class TestWigner:
    def test_vacuum_peak(self):
        w = wigner_from_density(DensityMatrix.vacuum(30), [0.0], [0.0])
        assert w[0, 0] == pytest.approx(2.0 / math.pi, rel=1e-12)

    def test_single_phonon_negative_core(self):
        w = wigner_from_density(DensityMatrix.fock(1, 30), [0.0], [0.0])
        assert w[0, 0] == pytest.approx(-2.0 / math.pi, rel=1e-12)

    def test_coherent_is_displaced_vacuum(self):
        alpha = 1.1 - 0.6j
        rho = coherent_state(alpha, 40)
        q = np.linspace(-4, 4, 21)
        w = wigner_from_density(rho, q, q)
        i, j = np.unravel_index(np.argmax(w), w.shape)
        assert abs(q[i] - 2 * alpha.real) <= 0.4
        assert abs(q[j] - 2 * alpha.imag) <= 0.4
        # exactly at the center the value is the vacuum peak
        w0 = wigner_from_density(rho, [2 * alpha.real], [2 * alpha.imag])
        assert w0[0, 0] == pytest.approx(2.0 / math.pi, rel=1e-9)

    def test_matches_displaced_parity_reference(self):
        # independent oracle: explicit expm displacement and parity trace
        rng = np.random.default_rng(42)
        dim, support = 30, 10
        m = np.zeros((dim, dim), dtype=complex)
        block = rng.normal(size=(support, support)) + 1j * rng.normal(size=(support, support))
        m[:support, :support] = block @ block.conj().T
        m /= np.trace(m).real
        rho = DensityMatrix(m)
        a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)
        parity = np.diag((-1.0) ** np.arange(dim))
        pts = [(0.4, -0.2), (1.4, 0.9), (-1.0, 0.3)]
        w = wigner_from_density(rho, [q for q, _ in pts], [p for _, p in pts], guard=False)
        for i, (q, p) in enumerate(pts):
            beta = 0.5 * (q + 1j * p)
            d = expm(beta * a.conj().T - np.conj(beta) * a)
            ref = (2.0 / math.pi) * np.trace(d.conj().T @ m @ d @ parity).real
            assert abs(w[i, i] - ref) < 1e-10

    def test_guard_warning(self):
        rho = DensityMatrix.vacuum(20)
        with pytest.warns(RuntimeWarning):
            wigner_from_density(rho, [10.0], [0.0])
