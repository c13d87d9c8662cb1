import math

import numpy as np
import pytest

from qvdp.sde_core import OscillatorParams, init_coherent, limit_cycle_radius


@pytest.fixture(scope="session")
def fig_params():
    """The workhorse parameter set: kappa1/omega = 0.1, kappa2/omega = 0.005."""
    return OscillatorParams(omega_m=1.0, kappa1=0.1, kappa2=0.005)


@pytest.fixture(scope="session")
def big_coherent_ensemble(fig_params):
    """10^6 samples of a coherent state at the limit-cycle radius.

    Shared read-only by the sampler-moment and histogram tests; do not
    mutate its states.
    """
    r = limit_cycle_radius(fig_params)
    return init_coherent(r / 2.0, 1_000_000, seed=2024), r
