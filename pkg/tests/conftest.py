import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from catqm import ir

settings.register_profile("catqm", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("catqm")

SESSION_START = time.perf_counter()
ACCEPTANCE_LINES: list[str] = []


def pytest_collection_modifyitems(items):
    # acceptance runs last so the end-to-end criterion can time the whole suite
    items.sort(key=lambda it: it.nodeid.startswith("tests/test_acceptance.py"))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def rand_prim(gen, name, a, b, *, backend="fdhilb"):
    """A primitive a -> b with a random literal in one backend."""
    da, db = ir.dim(a), ir.dim(b)
    if backend == "rel":
        return ir.prim(name, a, b, rel=gen.random((db, da)) < 0.5)
    return ir.prim(name, a, b, fdhilb=gen.normal(size=(db, da)) + 1j * gen.normal(size=(db, da)))


@pytest.fixture
def gen():
    return np.random.default_rng(1234)
