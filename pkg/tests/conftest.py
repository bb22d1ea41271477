import pytest

from densalg.fixtures import chart_f1, chart_f2, chart_f2b, f1, f2
from densalg.scalar import Chart


@pytest.fixture
def c1():
    return chart_f1()


@pytest.fixture
def c2():
    return chart_f2()


@pytest.fixture
def c2b():
    return chart_f2b()


@pytest.fixture
def cs():
    """Two even and two odd coordinates in a mixed order."""
    return Chart(["x", "xi", "y", "eta"], ["even", "odd", "even", "odd"])


@pytest.fixture
def data_f1():
    return f1()


@pytest.fixture
def data_f2():
    return f2()
