"""Shared fixtures: moderately sized states and operator sets.

Session scope keeps assembly cost out of individual tests; everything here
is immutable after construction.
"""

import numpy as np
import pytest

from kinlab.equilibria import EnergyProfile, Potential, build_gibbs_state, suggest_grid
from kinlab.operators import assemble_operator_set


@pytest.fixture(scope="session")
def maxwell_state():
    """Maxwellian state for V = (1 + x^2), 96 x 96."""
    pot = Potential.power_law(1.0)
    prof = EnergyProfile.maxwellian()
    grid = suggest_grid(prof, pot, 96, 96)
    return build_gibbs_state(prof, pot, grid)


@pytest.fixture(scope="session")
def maxwell_state_small():
    """Coarse Maxwellian state for dense-oracle cross-checks."""
    pot = Potential.power_law(1.0)
    prof = EnergyProfile.maxwellian()
    grid = suggest_grid(prof, pot, 24, 24)
    return build_gibbs_state(prof, pot, grid)


@pytest.fixture(scope="session")
def ops_bgk(maxwell_state):
    return assemble_operator_set(maxwell_state, "bgk")


@pytest.fixture(scope="session")
def ops_fp(maxwell_state):
    return assemble_operator_set(maxwell_state, "fokker_planck")


@pytest.fixture(scope="session")
def ops_scatter(maxwell_state):
    def kernel(v_out, v_in):
        mw = np.exp(-0.5 * v_out * v_out) / np.sqrt(2.0 * np.pi)
        return 0.4 * mw * (1.3 + np.tanh(v_in))
    return assemble_operator_set(maxwell_state, "scattering", kernel=kernel)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
