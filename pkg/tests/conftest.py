import pytest

from admlat.lattice import build_lattice, lattice_from_matrix, module_from_field_data
from admlat.numfield import load_field_file
from admlat.unitsgeo import unit_system


@pytest.fixture(scope="session")
def fields():
    return {name: load_field_file(name) for name in ("sqrt2", "sqrt5", "cubic")}


@pytest.fixture(scope="session")
def lattices(fields):
    out = {name: build_lattice(module_from_field_data(fd)) for name, fd in fields.items()}
    out["Z2"] = lattice_from_matrix([[1, 0], [0, 1]], "Z^2")
    out["Z3"] = lattice_from_matrix([[1, 0, 0], [0, 1, 0], [0, 0, 1]], "Z^3")
    return out


@pytest.fixture(scope="session")
def sqrt2(fields):
    return fields["sqrt2"]


@pytest.fixture(scope="session")
def units2(sqrt2):
    return unit_system(sqrt2.units)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
