import numpy as np
import pytest

from swarmkin.core import InteractionKernel, ModelParams


@pytest.fixture
def small_noise():
    return ModelParams(gamma0=0.3, b=1.0, n_agents=20, dt=0.01, kernel=InteractionKernel.global_())


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion(request):
    """Record the outcome of an acceptance check; printed in the terminal summary."""

    def record(name: str, passed: bool, detail: str):
        _ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        assert passed, f"{name}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
        n_pass = sum(line.startswith("PASS") for line in _ACCEPTANCE_LINES)
        terminalreporter.write_line(f"{n_pass}/{len(_ACCEPTANCE_LINES)} criteria passed")
