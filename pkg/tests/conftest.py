import numpy as np
import pytest

_CRITERIA: list[str] = []


class QuadraticProblem:
    """f(u) = 1/2 Σ a_j (u_j - c_j)^2 with the same interface as fem.ControlProblem.

    γ_j = a_j (u_j - c_j) is the exact gradient in the pairing Σ γ_j h_j.
    """

    def __init__(self, areas, center, bounds=(-1.0, 1.0), objective_shift=0.0):
        self.areas = np.asarray(areas, dtype=float)
        self.center = np.asarray(center, dtype=float)
        self.bounds = bounds
        self.state_solves = 0
        self.objective_shift = objective_shift
        self._last = None

    def solve_state(self, u):
        self.state_solves += 1
        self._last = np.array(u, dtype=float)
        return self._last

    def solve_adjoint(self, y):
        return np.asarray(y) - self.center

    def gradient_from_adjoint(self, p):
        return self.areas * p

    def objective(self, u):
        u = np.asarray(u, dtype=float)
        val = 0.5 * float(self.areas @ (u - self.center) ** 2)
        if self._last is not None and not np.array_equal(u, self._last):
            val += self.objective_shift
        self.solve_state(u)
        return val

    def value_and_gradient(self, u):
        u = np.asarray(u, dtype=float)
        p = self.solve_adjoint(self.solve_state(u))
        return 0.5 * float(self.areas @ (u - self.center) ** 2), self.gradient_from_adjoint(p), p


@pytest.fixture
def quadratic_problem():
    return QuadraticProblem


@pytest.fixture(scope="session")
def ref_cache(tmp_path_factory):
    return tmp_path_factory.mktemp("refcache")


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion, then assert."""

    def check(number, name, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {name}"
        if detail:
            line += f" -- {detail}"
        _CRITERIA.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
