import pytest

from autohuber import kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # compile (or load from cache) the JIT kernels up front so timed tests
    # never pay compilation cost
    kernels.warm_up()
