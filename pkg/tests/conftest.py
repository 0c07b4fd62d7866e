import numpy as np
import pytest

from spdc_bell.state import FrequencyGrid, SourceParams, make_spdc_state


@pytest.fixture(scope="session")
def src():
    return SourceParams(lambda0=702e-9, tau0=63e-15)


@pytest.fixture(scope="session")
def state(src):
    return make_spdc_state(src, FrequencyGrid(tau0=src.tau0))


@pytest.fixture(scope="session")
def raw_state(src):
    """Unnormalized source: A_HV(0) = A_VH(0) = 1."""
    return make_spdc_state(src, FrequencyGrid(tau0=src.tau0), normalize=False)


@pytest.fixture(scope="session")
def small_state(src):
    return make_spdc_state(src, FrequencyGrid(n_points=257, tau0=src.tau0))


def brute_force_rate(amp, theta1, theta2, u=None):
    """Kronecker-product oracle: |<v1 v2| (U x U) |psi>|^2 for one 2x2 amplitude."""
    psi = amp.reshape(4)  # |HH>, |HV>, |VH>, |VV>
    if u is not None:
        psi = np.kron(u, u) @ psi
    v = np.kron([np.cos(theta1), np.sin(theta1)], [np.cos(theta2), np.sin(theta2)])
    return abs(v @ psi) ** 2
