"""Phase-space and phase densities estimated from trajectory ensembles.

The Wigner function of the semiclassical branch is non-negative and is
estimated as a normalized 2D histogram over the quadratures
Q = 2 Re alpha, P = 2 Im alpha: W(Q, P) ~ N_{Q,P} / (N h^2) with square
pixels of side h and bins closed on the right, Q in (Qc - h/2, Qc + h/2].
Out-of-range samples are dropped (and counted), never clamped.

Circular (phase) densities use bins *centered* on the uniform grid
theta_k = 2*pi*k/n_bins, so the values 0 and pi sit at bin centers; the
reported density is per radian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from qvdp.errors import DomainError, StateError

__all__ = [
    "WignerHistogram",
    "PhaseDistribution",
    "wigner_histogram",
    "normalized",
    "phase_distribution",
    "circular_spread",
    "SPREAD_CAP",
]

#: Sentinel returned by :func:`circular_spread` for (near-)uniform densities.
SPREAD_CAP = 2.0 * math.pi

_R_FLOOR = math.exp(-(SPREAD_CAP**2) / 2.0)


@dataclass
class WignerHistogram:
    """Binned phase-space density.

    ``counts[i, j]`` is the number of samples with Q in the i-th and P in
    the j-th bin; ``density = counts / (n_total * h^2)``. ``dropped``
    counts samples outside the extent, so integrated density plus dropped
    fraction is exactly one.
    """

    h: float
    extent: float
    counts: np.ndarray
    n_total: int
    dropped: int

    @property
    def n_bins(self) -> int:
        return self.counts.shape[0]

    @property
    def density(self) -> np.ndarray:
        return self.counts / (self.n_total * self.h * self.h)

    @property
    def q_centers(self) -> np.ndarray:
        e0 = -0.5 * self.n_bins * self.h
        return e0 + self.h * (np.arange(self.n_bins) + 0.5)

    p_centers = q_centers


def _quadratures(x) -> tuple[np.ndarray, np.ndarray]:
    states = np.asarray(getattr(x, "states", x))
    return 2.0 * states.real, 2.0 * states.imag


def wigner_histogram(ens, h: float = 0.1, extent: float | None = None,
                     params=None) -> WignerHistogram:
    """Histogram an ensemble (or complex amplitude array) in (Q, P).

    ``extent`` is the half-width of the square domain; when omitted it
    defaults to 1.5x the classical limit-cycle radius computed from
    ``params``. The domain is tiled with an integer number of bins of
    side ``h`` (the extent is rounded up to the next bin boundary).
    """
    if not h > 0:
        raise DomainError(f"bin side h must be > 0, got {h}")
    if extent is None:
        if params is None:
            raise DomainError("either extent or params must be given")
        from qvdp.sde_core import limit_cycle_radius

        extent = 1.5 * limit_cycle_radius(params)
    q, p = _quadratures(ens)
    n_total = q.size
    if n_total == 0:
        raise StateError("cannot histogram an empty ensemble")
    n_bins = int(math.ceil(2.0 * extent / h - 1e-9))
    e0 = -0.5 * n_bins * h
    # right-closed bins: index = ceil((x - e0)/h) - 1
    iq = np.ceil((q - e0) / h).astype(np.int64) - 1
    ip = np.ceil((p - e0) / h).astype(np.int64) - 1
    ok = (iq >= 0) & (iq < n_bins) & (ip >= 0) & (ip < n_bins)
    flat = iq[ok] * n_bins + ip[ok]
    counts = np.bincount(flat, minlength=n_bins * n_bins).reshape(n_bins, n_bins)
    return WignerHistogram(h=h, extent=0.5 * n_bins * h, counts=counts,
                           n_total=n_total, dropped=int(n_total - ok.sum()))


def normalized(hist: WignerHistogram) -> np.ndarray:
    """Density grid scaled so its maximum is one (figure export format)."""
    d = hist.density
    m = d.max()
    if not m > 0:
        raise StateError("cannot normalize an all-zero histogram")
    return d / m


@dataclass
class PhaseDistribution:
    """Circular density per radian on bins centered at 2*pi*k/n_bins."""

    n_bins: int
    density: np.ndarray

    @property
    def bin_width(self) -> float:
        return 2.0 * math.pi / self.n_bins

    @property
    def centers(self) -> np.ndarray:
        return self.bin_width * np.arange(self.n_bins)


def _angles(x) -> np.ndarray:
    arr = np.asarray(getattr(x, "states", x))
    if arr.size == 0:
        raise StateError("cannot bin an empty angle set")
    if np.iscomplexobj(arr):
        arr = np.angle(arr)
    return np.mod(arr, 2.0 * math.pi)


def phase_distribution(x, n_bins: int = 64) -> PhaseDistribution:
    """Normalized circular density of ensemble phases (or raw angles)."""
    if n_bins < 8:
        raise DomainError(f"n_bins must be >= 8, got {n_bins}")
    theta = _angles(x)
    w = 2.0 * math.pi / n_bins
    idx = np.mod(np.rint(theta / w).astype(np.int64), n_bins)
    counts = np.bincount(idx, minlength=n_bins)
    return PhaseDistribution(n_bins=n_bins, density=counts / (theta.size * w))


def circular_spread(dist: PhaseDistribution) -> float:
    """Circular standard deviation sqrt(-2 ln R) of a binned density.

    R is the mean resultant length of the density. A uniform density has
    R -> 0; the divergent spread is capped at :data:`SPREAD_CAP`.
    """
    w = dist.bin_width
    resultant = np.sum(dist.density * np.exp(1j * dist.centers)) * w
    r = min(abs(resultant), 1.0)
    if r <= _R_FLOOR:
        return SPREAD_CAP
    return min(math.sqrt(-2.0 * math.log(r)), SPREAD_CAP)
