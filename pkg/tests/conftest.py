import numpy as np
import pytest

from quenched_portfolio import _kernels
from quenched_portfolio.model import AssetParameters, build_risk_matrix, generate_returns, make_rng

BACKENDS = ["numpy"] + (["numba"] if _kernels.HAVE_NUMBA else [])

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(params=BACKENDS)
def backend(request):
    previous = _kernels.get_backend()
    _kernels.set_backend(request.param)
    yield request.param
    _kernels.set_backend(previous)


@pytest.fixture
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_params(n, seed):
    """Heterogeneous universe: means ~ N(1, 0.5^2), variances ~ U[0.5, 2]."""
    rng = make_rng((seed, 0xA55E7))
    return AssetParameters(rng.normal(1.0, 0.5, n), rng.uniform(0.5, 2.0, n))


def random_instance(n, alpha, seed, family="gaussian"):
    params = random_params(n, seed)
    sample = generate_returns(params, int(round(alpha * n)), seed, family)
    return params, build_risk_matrix(sample)
