import numpy as np
import pytest

from germkit.germ import analyze
from germkit.models import builtin_suite, make_cyclic_model, torus2_spec
from germkit.symcore import SymplecticSpace


@pytest.fixture(scope="session")
def suite_specs():
    specs = dict(builtin_suite())
    specs["torus2"] = torus2_spec()
    specs["torus2_resonant"] = torus2_spec(omega3=1.0)
    return specs


@pytest.fixture(scope="session")
def suite_analyses(suite_specs):
    """One full pipeline run per built-in model, shared by all tests."""
    out = {}
    for name, spec in suite_specs.items():
        model = make_cyclic_model(spec)
        out[name] = (spec, model, analyze(model))
    return out


@pytest.fixture
def space1():
    return SymplecticSpace(1)


@pytest.fixture
def space2():
    return SymplecticSpace(2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
