"""Exact open-system branch in a truncated Fock space.

The density matrix of the van der Pol oscillator evolves under

    d(rho)/dt = -i[H, rho] + kappa1*L[a^dag]rho + kappa2*L[a^2]rho,
    H = omega_m * a^dag a,   L[o]rho = 2 o rho o^dag - o^dag o rho - rho o^dag o,

integrated with classical RK4 in a dim x dim number basis (default 50).
The dichotomic measurement asks whether the oscillator is in a target
coherent state |alpha>: displacing with D(alpha) turns it into the
ground-state projector pair {M1 = |0><0|, M2 = 1 - |0><0|}, applied and
undone around the state,

    rho_mi = D(alpha) [ M_i rho' M_i / Tr(M_i rho' M_i) ] D(alpha)^dag,
    rho' = D(alpha)^dag rho D(alpha),    P_i = Tr(M_i rho' M_i).

The target follows the limit cycle: alpha(t) = sqrt(<n>_ss) e^{-i omega_m t}.

Wigner functions are evaluated with the displaced-parity formula
W(beta) = (2/pi) Tr[rho D(2 beta) Pi] in closed form (associated-Laguerre
recurrence over the diagonals of rho), which is exact for the truncated
state and can go negative, unlike the semiclassical histogram branch.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import expm

from qvdp.errors import DomainError, StateError, TraceDriftError, TruncationError
from qvdp.sde_core import OscillatorParams

__all__ = [
    "DensityMatrix",
    "SurvivalCurve",
    "lindblad_rhs",
    "lindblad_step",
    "steady_state",
    "liouvillian_steady_state",
    "displacement",
    "target_state",
    "coherent_state",
    "apply_povm",
    "dichotomic_measure",
    "survival_experiment",
    "wigner_from_density",
]

DEFAULT_DIM = 50
#: RK4 step for master-equation evolution (units of 1/omega_m).
MASTER_DT = 1e-3
_TRACE_TOL = 1e-6


@dataclass
class DensityMatrix:
    """Truncated Fock-space density matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DomainError(f"density matrix must be square, got {m.shape}")
        self.matrix = m

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def expect_number(self) -> float:
        return float(np.sum(np.arange(self.dim) * np.diag(self.matrix).real))

    def check(self, herm_tol: float = 1e-10, trace_tol: float = 1e-9,
              positivity_floor: float = -1e-8) -> None:
        """Raise if hermiticity, unit trace or positivity are violated."""
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > herm_tol:
            raise StateError("density matrix is not Hermitian within tolerance")
        if abs(np.trace(m).real - 1.0) > trace_tol:
            raise StateError("density matrix trace differs from one")
        if np.min(np.linalg.eigvalsh((m + m.conj().T) / 2.0)) < positivity_floor:
            raise StateError("density matrix has a significantly negative eigenvalue")

    @staticmethod
    def vacuum(dim: int = DEFAULT_DIM) -> "DensityMatrix":
        m = np.zeros((dim, dim), dtype=np.complex128)
        m[0, 0] = 1.0
        return DensityMatrix(m)

    @staticmethod
    def fock(n: int, dim: int = DEFAULT_DIM) -> "DensityMatrix":
        m = np.zeros((dim, dim), dtype=np.complex128)
        m[n, n] = 1.0
        return DensityMatrix(m)


def _destroy(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(np.complex128)


@lru_cache(maxsize=8)
def _ops(dim: int):
    a = _destroy(dim)
    ad = a.conj().T
    a2 = a @ a
    ad2 = a2.conj().T
    n_diag = np.arange(dim, dtype=float)
    return a, ad, a2, ad2, a @ ad, ad2 @ a2, n_diag


def lindblad_rhs(rho_mat: np.ndarray, params: OscillatorParams) -> np.ndarray:
    """Right-hand side of the master equation for a raw matrix."""
    dim = rho_mat.shape[0]
    a, ad, a2, ad2, a_ad, ad2a2, n = _ops(dim)
    # -i[H, rho] with diagonal H = omega * n: elementwise frequency matrix
    comm = (-1j * params.omega_m) * (n[:, None] - n[None, :]) * rho_mat
    gain = params.kappa1 * (2.0 * (ad @ rho_mat @ a) - a_ad @ rho_mat - rho_mat @ a_ad)
    loss = params.kappa2 * (2.0 * (a2 @ rho_mat @ ad2) - ad2a2 @ rho_mat - rho_mat @ ad2a2)
    return comm + gain + loss


def _rk4(rho_mat: np.ndarray, params: OscillatorParams, dt: float) -> np.ndarray:
    k1 = lindblad_rhs(rho_mat, params)
    k2 = lindblad_rhs(rho_mat + 0.5 * dt * k1, params)
    k3 = lindblad_rhs(rho_mat + 0.5 * dt * k2, params)
    k4 = lindblad_rhs(rho_mat + dt * k3, params)
    return rho_mat + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def lindblad_step(rho: DensityMatrix, params: OscillatorParams,
                  dt: float = MASTER_DT) -> DensityMatrix:
    """One RK4 step; renormalizes the (tiny) trace drift.

    A per-step trace drift above 1e-6 signals truncation overflow or an
    unstable step and raises :class:`~qvdp.errors.TraceDriftError`.
    """
    out = _rk4(rho.matrix, params, dt)
    tr = np.trace(out).real
    if abs(tr - 1.0) > _TRACE_TOL:
        raise TraceDriftError(
            f"trace drifted by {abs(tr - 1.0):.2e} in one step (dt={dt}); "
            "state is leaving the truncated space"
        )
    return DensityMatrix(out / tr)


def _evolve_matrix(rho_mat: np.ndarray, params: OscillatorParams, duration: float,
                   dt: float = MASTER_DT) -> np.ndarray:
    n_steps = int(round(duration / dt))
    for _ in range(n_steps):
        rho_mat = _rk4(rho_mat, params, dt)
        tr = np.trace(rho_mat).real
        if abs(tr - 1.0) > _TRACE_TOL:
            raise TraceDriftError(f"trace drifted by {abs(tr - 1.0):.2e} during evolution")
        rho_mat = rho_mat / tr
    return rho_mat


@lru_cache(maxsize=8)
def _steady_state_cached(params: OscillatorParams, dim: int) -> np.ndarray:
    # Relaxation from the vacuum stays diagonal, so no slowly decaying
    # coherences appear. The transient is integrated at the master dt;
    # the long diagonal tail tolerates a much larger stable step (the
    # Liouvillian spectrum there is real and well inside the RK4 region),
    # which turns a minutes-long relaxation into seconds.
    rho = DensityMatrix.vacuum(dim).matrix
    residual_check = 5.0
    t_hard = 5000.0
    for dt_stage, t_stage in ((MASTER_DT, 10.0), (0.02, t_hard)):
        steps_per_check = max(1, int(round(residual_check / dt_stage)))
        t = 0.0
        while t < t_stage:
            for _ in range(steps_per_check):
                rho = _rk4(rho, params, dt_stage)
            rho /= np.trace(rho).real
            t += steps_per_check * dt_stage
            if np.linalg.norm(lindblad_rhs(rho, params)) < 1e-9:
                rho = (rho + rho.conj().T) / 2.0
                return rho
    raise StateError("steady state did not converge below the residual tolerance")


def steady_state(params: OscillatorParams, dim: int = DEFAULT_DIM) -> DensityMatrix:
    """Stationary state by long-time integration (residual < 1e-9)."""
    return DensityMatrix(_steady_state_cached(params, dim).copy())


def liouvillian_steady_state(params: OscillatorParams, dim: int = DEFAULT_DIM) -> DensityMatrix:
    """Stationary state from the null space of the sparse Liouvillian.

    Independent oracle for :func:`steady_state`: builds the full
    superoperator over vec(rho) (row-major), replaces one row with the
    trace constraint and solves the linear system directly.
    """
    a = sp.csr_matrix(_destroy(dim))
    ad = sp.csr_matrix(a.conj().T)
    a2 = a @ a
    ad2 = a2.conj().T
    eye = sp.identity(dim, dtype=np.complex128, format="csr")
    n = sp.diags(np.arange(dim, dtype=float)).tocsr()

    def left(op):
        return sp.kron(op, eye, format="csr")

    def right(op):
        return sp.kron(eye, op.T, format="csr")

    h = params.omega_m * n
    lv = -1j * (left(h) - right(h))
    lv = lv + params.kappa1 * (2.0 * sp.kron(ad, a.T, format="csr")
                               - left(a @ ad) - right(a @ ad))
    lv = lv + params.kappa2 * (2.0 * sp.kron(a2, ad2.T, format="csr")
                               - left(ad2 @ a2) - right(ad2 @ a2))
    lv = lv.tolil()
    trace_row = np.zeros(dim * dim, dtype=np.complex128)
    trace_row[:: dim + 1] = 1.0
    lv[0, :] = trace_row
    rhs = np.zeros(dim * dim, dtype=np.complex128)
    rhs[0] = 1.0
    v = spla.spsolve(lv.tocsc(), rhs)
    m = v.reshape(dim, dim)
    m = (m + m.conj().T) / 2.0
    return DensityMatrix(m / np.trace(m).real)


def displacement(alpha: complex, dim: int = DEFAULT_DIM) -> np.ndarray:
    """Displacement unitary expm(alpha a^dag - alpha* a) in the number basis.

    Guarded by |alpha|^2 < dim/4 so the displaced vacuum stays well inside
    the truncation.
    """
    if abs(alpha) ** 2 >= dim / 4.0:
        raise TruncationError(
            f"|alpha|^2 = {abs(alpha)**2:.2f} violates the truncation guard dim/4 = {dim / 4.0}"
        )
    a = _destroy(dim)
    return expm(alpha * a.conj().T - np.conj(alpha) * a)


def coherent_state(alpha: complex, dim: int = DEFAULT_DIM) -> DensityMatrix:
    """Projector onto the truncated coherent state |alpha>."""
    n = np.arange(dim)
    log_fact = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, dim)))))
    amp = np.exp(-0.5 * abs(alpha) ** 2 + n * np.log(complex(alpha)) - 0.5 * log_fact) \
        if alpha != 0 else np.eye(dim, 1, dtype=np.complex128).ravel()
    amp = amp / np.linalg.norm(amp)
    return DensityMatrix(np.outer(amp, amp.conj()))


def target_state(rho_steady: DensityMatrix, t: float, params: OscillatorParams) -> complex:
    """Rotating target amplitude sqrt(<n>_ss) * exp(-i omega_m t)."""
    return math.sqrt(rho_steady.expect_number()) * np.exp(-1j * params.omega_m * t)


def apply_povm(rho: DensityMatrix, alpha: complex, outcome: int) -> tuple[DensityMatrix, float]:
    """Apply one branch of the dichotomic POVM {|alpha><alpha|, 1 - |alpha><alpha|}.

    Returns the normalized post-measurement state and the branch
    probability. ``outcome`` is 1 (state found in |alpha>) or 2.
    """
    if outcome not in (1, 2):
        raise DomainError(f"outcome must be 1 or 2, got {outcome}")
    d = displacement(alpha, rho.dim)
    rho_disp = d.conj().T @ rho.matrix @ d
    p1 = float(rho_disp[0, 0].real)
    if outcome == 1:
        prob = p1
        if prob < 1e-12:
            raise StateError("branch probability below 1e-12; cannot renormalize")
        post = np.zeros_like(rho_disp)
        post[0, 0] = 1.0
    else:
        prob = 1.0 - p1
        if prob < 1e-12:
            raise StateError("branch probability below 1e-12; cannot renormalize")
        post = rho_disp.copy()
        post[0, :] = 0.0
        post[:, 0] = 0.0
        post /= np.trace(post).real
    back = d @ post @ d.conj().T
    back = (back + back.conj().T) / 2.0
    return DensityMatrix(back / np.trace(back).real), prob


def dichotomic_measure(rho: DensityMatrix, alpha: complex, rng) -> tuple[int, DensityMatrix, float]:
    """Sample the dichotomic measurement; returns (outcome, post state, P_outcome)."""
    d = displacement(alpha, rho.dim)
    p1 = float((d.conj().T @ rho.matrix @ d)[0, 0].real)
    p1 = min(max(p1, 0.0), 1.0)
    outcome = 1 if rng.random() < p1 else 2
    post, prob = apply_povm(rho, alpha, outcome)
    return outcome, post, prob


@dataclass
class SurvivalCurve:
    """Probability of re-finding the target coherent state vs interval.

    ``c_m`` is the initial linear decay rate, fitted on the smallest five
    grid points with P1 > 0.9 (P1(dt) ~ 1 - c_m*dt). The repeated-success
    probability after a fixed horizon t, P_t1(n) = P1(t/n)^n, is reported
    over ``n_grid``.
    """

    delta_t: np.ndarray
    p1: np.ndarray
    c_m: float
    start: str
    horizon: float = 2.0
    n_grid: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))
    p_t1: np.ndarray = field(default_factory=lambda: np.array([]))


def _fit_linear_rate(delta_t: np.ndarray, p1: np.ndarray) -> float:
    mask = p1 > 0.9
    idx = np.argsort(delta_t[mask])[:5]
    x = delta_t[mask][idx]
    y = p1[mask][idx]
    if len(x) < 2:
        return float("nan")
    slope = np.polyfit(x, y, 1)[0]
    return float(-slope)


def survival_experiment(params: OscillatorParams, delta_t_grid, start: str = "m1",
                        dim: int = DEFAULT_DIM, horizon: float = 2.0,
                        n_grid=(10, 20, 25, 40, 50, 100, 125, 200, 250, 500, 1000),
                        dt: float = MASTER_DT) -> SurvivalCurve:
    """Measure P1(delta_t) from a post-measurement start state.

    ``start='m1'`` begins from the target coherent state itself (previous
    measurement succeeded); ``start='m2'`` begins from the complementary
    state obtained by applying the failing branch to the stationary state.
    The state is evolved once up to the largest requested interval, with
    the dichotomic projection probability recorded at every grid time
    against the co-rotating target.
    """
    if start not in ("m1", "m2"):
        raise DomainError(f"start must be 'm1' or 'm2', got {start!r}")
    rho_s = steady_state(params, dim)
    amp0 = target_state(rho_s, 0.0, params)
    if start == "m1":
        rho = coherent_state(amp0, dim)
    else:
        rho, _ = apply_povm(rho_s, amp0, 2)

    delta_t_grid = np.asarray(sorted(float(x) for x in delta_t_grid))
    n_grid = np.asarray(sorted(int(n) for n in n_grid))
    horizon_dts = horizon / n_grid
    all_times = np.unique(np.concatenate([delta_t_grid, horizon_dts]))
    steps = np.rint(all_times / dt).astype(int)
    if np.any(np.abs(steps * dt - all_times) > 1e-9):
        raise DomainError("all requested intervals must be multiples of the master dt")

    p1_at: dict[int, float] = {}
    m = rho.matrix
    if 0 in steps:
        d = displacement(amp0, dim)
        p1_at[0] = float((d.conj().T @ m @ d)[0, 0].real)
    done = 0
    for s in steps:
        if s == 0:
            continue
        for _ in range(s - done):
            m = _rk4(m, params, dt)
            m /= np.trace(m).real
        done = s
        d = displacement(target_state(rho_s, s * dt, params), dim)
        p1_at[s] = float((d.conj().T @ m @ d)[0, 0].real)

    p1_curve = np.array([p1_at[int(round(x / dt))] for x in delta_t_grid])
    p1_h = np.array([p1_at[int(round(x / dt))] for x in horizon_dts])
    p_t1 = p1_h ** n_grid
    return SurvivalCurve(delta_t=delta_t_grid, p1=p1_curve,
                         c_m=_fit_linear_rate(delta_t_grid, p1_curve),
                         start=start, horizon=horizon, n_grid=n_grid, p_t1=p_t1)


def wigner_from_density(rho: DensityMatrix, q_grid, p_grid,
                        guard: bool = True) -> np.ndarray:
    """Wigner function on a (Q, P) grid; may be negative.

    Evaluates (2/pi) Tr[rho D(2 beta) Pi] at beta = (Q + iP)/2 through the
    closed-form number-basis matrix elements of the displacement operator
    (associated Laguerre polynomials, evaluated by upward recurrence),
    which is exact for the truncated state. Grid points with
    |beta|^2 >= dim/4 are outside the displacement truncation guard; they
    are still evaluated (the closed form needs no embedding), but a
    warning flags that the truncated state itself may not faithfully
    represent the physical state that far out. Returns shape
    ``(len(q_grid), len(p_grid))``.
    """
    q = np.asarray(q_grid, dtype=float)
    p = np.asarray(p_grid, dtype=float)
    beta = 0.5 * (q[:, None] + 1j * p[None, :])
    dim = rho.dim
    if guard and np.max(np.abs(beta)) ** 2 >= dim / 4.0:
        warnings.warn(
            "Wigner grid extends beyond the truncation guard |beta|^2 < dim/4; "
            "values far outside the occupied region reflect the truncated state only",
            RuntimeWarning, stacklevel=2,
        )
    b = (2.0 * beta).ravel()  # displacement argument
    x = np.abs(b) ** 2
    exp_fac = np.exp(-0.5 * x)
    rho_m = rho.matrix
    signs = (-1.0) ** np.arange(dim)

    total = np.zeros(b.shape, dtype=np.complex128)
    # k = 0 diagonal: sum_n rho_nn (-1)^n L_n^0(x)
    lm2 = np.ones_like(x)
    lm1 = 1.0 - x
    diag = np.diag(rho_m).real
    acc = diag[0] * signs[0] * lm2
    if dim > 1:
        acc = acc + diag[1] * signs[1] * lm1
    for n in range(2, dim):
        ln = ((2.0 * n - 1.0 - x) * lm1 - (n - 1.0) * lm2) / n
        acc = acc + diag[n] * signs[n] * ln
        lm2, lm1 = lm1, ln
    total += acc
    # k >= 1 off-diagonals, using hermiticity: add 2 Re of the upper band
    for k in range(1, dim):
        band = np.diag(rho_m, k=k)
        if not np.any(band):
            continue
        # c_{n,k} = sqrt(n! / (n+k)!), built up recursively
        c = math.exp(-0.5 * math.lgamma(k + 1.0))
        bk = b ** k
        lm2 = np.ones_like(x)           # L_0^k
        lm1 = 1.0 + k - x               # L_1^k
        acc = band[0] * signs[0] * c * lm2
        if dim - k > 1:
            c1 = c * math.sqrt(1.0 / (1.0 + k))
            acc = acc + band[1] * signs[1] * c1 * lm1
        else:
            c1 = c
        cn = c1
        for n in range(2, dim - k):
            ln = ((2.0 * n - 1.0 + k - x) * lm1 - (n - 1.0 + k) * lm2) / n
            cn = cn * math.sqrt(n / (n + k))
            acc = acc + band[n] * signs[n] * cn * ln
            lm2, lm1 = lm1, ln
        total += 2.0 * np.real(acc * bk)
    w = (2.0 / math.pi) * exp_fac * np.real(total)
    return w.reshape(len(q), len(p))
