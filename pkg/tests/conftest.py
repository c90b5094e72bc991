import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def dense_cnorm(C, v):
    """Independent C-seminorm on dense data."""
    C = C.toarray() if hasattr(C, "toarray") else np.asarray(C)
    return float(np.sqrt(max(np.real(np.conj(v) @ C @ v), 0.0)))


def dense_S(system, gamma):
    """``P_C (C + gamma G)^{-1} C`` as a dense matrix (independent of the solver)."""
    Cd, Gd = system.C.toarray(), system.G.toarray()
    V = system.projector.V_C
    return V @ V.T @ np.linalg.solve(Cd + gamma * Gd, Cd)


def dense_B(system):
    """``P_C G^{-1} C`` as a dense matrix."""
    Cd, Gd = system.C.toarray(), system.G.toarray()
    V = system.projector.V_C
    return V @ V.T @ np.linalg.solve(Gd, Cd)


_CRITERIA = {}


@pytest.fixture
def criterion(request):
    """``criterion(n, ok, detail)`` records one acceptance line and asserts ``ok``."""

    def record(n, ok, detail=""):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA[n] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
