import numpy as np
import pytest

from hmnmf import _fallback
from hmnmf.hierarchy import HierarchicalModel, Layer
from hmnmf.matrix import row_mean_broadcast
from hmnmf.nonlinearity import Nonlinearity
from hmnmf.synthetic import hierarchical_data  # noqa: F401

try:
    from hmnmf import _kernels
except ImportError:  # extension not built
    _kernels = None

BACKENDS = [pytest.param(_fallback, id="python")]
if _kernels is not None:
    BACKENDS.append(pytest.param(_kernels, id="cython"))


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_model(rng, dims, n, f=None):
    """Random positive model with feature chain ``dims = [m, k1, ..., kL]``."""
    layers = []
    for rows, k in zip(dims[:-1], dims[1:]):
        w = rng.uniform(0.1, 1.0, (rows, k))
        h = rng.uniform(0.1, 1.0, (k, n))
        layers.append(Layer(w=w, h=h, m=row_mean_broadcast(h)))
    return HierarchicalModel(layers=layers, nonlinearity=f or Nonlinearity())


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
