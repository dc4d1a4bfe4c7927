import pytest

from qchaoslab.model import WignerSpec, build_wigner

# PASS/FAIL lines from the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_model():
    return build_wigner(WignerSpec(N=200, b=8, seed=11))


@pytest.fixture(scope="session")
def model_b16():
    return build_wigner(WignerSpec(N=400, b=16, seed=3))
