import sys

import numpy as np
import pytest

from meanfield.surface import SpectralField, build_surface


def smooth_field(surface, rng, amplitude=1.0, decay=40.0):
    """Random mean-zero field with decaying spectrum, scaled to L2 norm ``amplitude``."""
    c = rng.normal(size=surface.n_modes) / (1.0 + surface.eigenvalues / decay)
    c[0] = 0.0
    return SpectralField.from_coeffs(surface, amplitude * c / np.linalg.norm(c), mean_zero=True)


@pytest.fixture(scope="session")
def torus16():
    return build_surface("torus", 16)


@pytest.fixture(scope="session")
def torus32():
    return build_surface("torus", 32)


@pytest.fixture(scope="session")
def sphere8():
    return build_surface("sphere", 8)


@pytest.fixture(scope="session")
def sphere16():
    return build_surface("sphere", 16)


@pytest.fixture(params=["torus", "sphere"], scope="session")
def surface(request):
    return build_surface(request.param, 16 if request.param == "torus" else 10)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[key])
