import pytest

N_UNIT = 400
N_REF = 2000


@pytest.fixture(scope="session")
def n_unit():
    return N_UNIT
