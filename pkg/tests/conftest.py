import pytest

from ppanav import harness


@pytest.fixture(scope="session")
def gates8():
    """The default 8-gate run, shared because it takes ~20 s."""
    cfg = harness.load_config(harness.data_path("gates8_run.yaml"))
    return cfg, harness.run(cfg)


@pytest.fixture(scope="session")
def slalom():
    cfg = harness.load_config(harness.data_path("slalom_run.yaml"))
    return cfg, harness.run(cfg)


def pytest_terminal_summary(terminalreporter):
    from acceptance_report import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
