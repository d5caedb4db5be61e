"""Shared fixtures and the acceptance summary printer."""

import contextlib
from dataclasses import replace

import pytest

from climcoop import default_config

_ACCEPTANCE_RESULTS = []


@contextlib.contextmanager
def criterion(name):
    """Record one acceptance criterion outcome for the terminal summary."""
    try:
        yield
    except Exception as exc:
        _ACCEPTANCE_RESULTS.append((name, "FAIL", str(exc).splitlines()[0][:120]))
        raise
    _ACCEPTANCE_RESULTS.append((name, "PASS", ""))


def record_info(name, detail):
    _ACCEPTANCE_RESULTS.append((name, "INFO", detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, status, detail in _ACCEPTANCE_RESULTS:
        line = f"[{status}] {name}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def full_config():
    """The shipped 27-region configuration."""
    return default_config()


@pytest.fixture(scope="session")
def tiny_config():
    """3 regions, 3 steps: the scripted-oracle scenario."""
    cfg = default_config(n_regions=3)
    return replace(
        cfg,
        econ=replace(cfg.econ, num_steps=3),
    )


@pytest.fixture(scope="session")
def small_config():
    """4 regions, 5 steps: cheap enough for training smoke tests."""
    cfg = default_config(n_regions=4)
    return replace(cfg, econ=replace(cfg.econ, num_steps=5))
