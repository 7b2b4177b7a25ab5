import numpy as np
import pytest

from channel import discrete_channel, propagate
from distiller import TapConfig, attach_tap
from experiment import calibrate
from gaussian_core import GaussianState, apply_beamsplitter, apply_rotation, apply_symplectic, make_kerr_entangled


@pytest.fixture(scope="session")
def source_params():
    """(V_s, V_a) calibrated to LN 0.76 before and -1.63 after the discrete channel."""
    return calibrate(0.76, -1.63)


@pytest.fixture(scope="session")
def source(source_params):
    return make_kerr_entangled(*source_params)


@pytest.fixture(scope="session")
def discrete_mixture(source):
    return propagate(source, discrete_channel())


@pytest.fixture(scope="session")
def discrete_mixture3(discrete_mixture):
    return attach_tap(discrete_mixture, TapConfig(reflectivity=0.07))


@pytest.fixture
def random_state():
    """Builds random physical states: thermal modes with random squeezing, phases and one beam splitter."""
    def build(rng, n_modes=2):
        nu = rng.uniform(1.0, 3.0, n_modes)
        state = GaussianState(n_modes, rng.normal(scale=2.0, size=2 * n_modes), np.diag(np.repeat(nu, 2)))
        for mode in range(n_modes):
            r = rng.uniform(-1.0, 1.0)
            squeeze = np.eye(2 * n_modes)
            squeeze[2 * mode, 2 * mode], squeeze[2 * mode + 1, 2 * mode + 1] = np.exp(r), np.exp(-r)
            state = apply_rotation(apply_symplectic(state, squeeze), mode, rng.uniform(0.0, 2 * np.pi))
        return apply_beamsplitter(state, 0, 1, rng.uniform())
    return build
