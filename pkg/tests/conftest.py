import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "desk", max_examples=25, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("desk")


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def free_dirac_small():
    """Constant-mass model small enough for dense oracles, both backends."""
    from diraclab.model import free_dirac_spec
    from diraclab.operators import build_model
    out = {}
    for backend in ("fourier_symbol", "wilson_sparse"):
        spec = free_dirac_spec(mu=1.0, side=4, points_per_cell=4, buffer=0,
                               backend=backend)
        out[backend] = build_model(spec)
    return out
