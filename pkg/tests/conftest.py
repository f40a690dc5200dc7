# Shared fixtures for the test suite

import numpy as np
import pytest

from potentials import RadialProfile, radial_metric, validate_symmetry


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def wall_profile():
    return RadialProfile("wall", {"height": 10.0, "radius": 1.0})


@pytest.fixture
def gaussian_profile():
    return RadialProfile("gaussian", {"height": 20.0, "width": 0.5, "cutoff": 1.5})


@pytest.fixture
def metric_gaussian(gaussian_profile, rng):
    """Symmetry-certified three-body potential whose pullback is radial."""
    return validate_symmetry(radial_metric(gaussian_profile), sample_count=2000, rng=rng).potential
