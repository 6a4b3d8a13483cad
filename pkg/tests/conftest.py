import sys
import time
from pathlib import Path

# allow running pytest from a bare checkout, without installing
_SRC = Path(__file__).resolve().parent.parent / "src"
if str(_SRC) not in sys.path:
    sys.path.insert(0, str(_SRC))

import numpy as np
import pytest

import coreg
from coreg.scenarios import MicrogridParams, run_microgrid

_SESSION_T0 = time.perf_counter()


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Touch every jitted kernel once so first-call compilation stays out
    of the timed acceptance checks."""
    a = np.array([[0.0, 1.0], [-1.0, -0.5]])
    coreg.mat_exp(a, 0.3)
    coreg.eigenvalues(a)
    coreg.kron(a, a)
    coreg.solve_sylvester(np.array([[-1.0]]), np.array([[1.0]]),
                          np.array([[1.0]]))
    run_microgrid(MicrogridParams.table1(), T=0.05)
    yield


@pytest.fixture(scope="session")
def example41():
    return coreg.example_4_1()


@pytest.fixture(scope="session")
def example41_design(example41):
    sc = example41
    design = coreg.assemble_zoh(sc.plants, sc.exo, sc.graph, sc.h,
                                mu=sc.mu, k1=list(sc.k1))
    cert = coreg.certify_zoh(design, sc.plants, sc.exo, sc.graph)
    return design, cert


def pytest_terminal_summary(terminalreporter):
    elapsed = time.perf_counter() - _SESSION_T0
    terminalreporter.write_line(
        f"full suite wall time: {elapsed:.1f} s (backend: {coreg.ACTIVE_BACKEND})"
    )
