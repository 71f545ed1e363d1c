import pytest

from qcka.params import reference_params

_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def reference():
    """Published constants, three parties, zero-length arms."""
    return reference_params(3, 0.0)


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def report_line(request):
    """Print one verdict line now and repeat it in the terminal summary."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def emit(text: str) -> None:
        print(text)
        lines.append(text)

    return emit


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
