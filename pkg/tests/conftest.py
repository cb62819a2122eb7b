import contextlib
import time

import numpy as np
import pytest

from unimatte.network import forward, init_weights
from unimatte.rng import Rng


@pytest.fixture(scope="session")
def store():
    return init_weights(seed=0)


@pytest.fixture(scope="session")
def image320():
    return Rng(11).random(3 * 320 * 320).reshape(1, 3, 320, 320)


@pytest.fixture(scope="session")
def outputs320(store, image320):
    return forward(store, image320, keep_activations=True)


@pytest.fixture
def nprng():
    return np.random.default_rng(1234)


_ACCEPTANCE = pytest.StashKey[list]()


class Acceptance:
    """Records one PASS/FAIL line per acceptance criterion.

    Use as ``with acceptance("name") as notes: ...``; anything appended to
    ``notes`` ends up on the verdict line, and any exception (including a
    failed assert) marks the criterion FAIL and propagates.
    """

    def __init__(self, lines):
        self.lines = lines

    @contextlib.contextmanager
    def __call__(self, name):
        notes = []
        t0 = time.perf_counter()
        try:
            yield notes
        except BaseException as exc:
            msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
            self._emit("FAIL", name, notes + [msg], t0)
            raise
        self._emit("PASS", name, notes, t0)

    def _emit(self, verdict, name, notes, t0):
        detail = "; ".join(notes + [f"{time.perf_counter() - t0:.2f}s"])
        line = f"[{verdict}] {name}: {detail}"
        self.lines.append(line)
        print(line)


@pytest.fixture
def acceptance(request):
    return Acceptance(request.config.stash.setdefault(_ACCEPTANCE, []))


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
