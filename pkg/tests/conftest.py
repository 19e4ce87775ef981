import math
import sys

import numpy as np
import pytest

from twotime.qcore import make_projector
from twotime.scenario import pauli_embed, three_boxes_preset
from twotime.twostate import TwoTimeState

T1, T2, T3, TF = 0.0, math.pi / 4, math.pi / 2, math.pi
S3 = math.sqrt(3.0)


@pytest.fixture
def preset():
    return three_boxes_preset(1.0)


@pytest.fixture
def tt(preset):
    return TwoTimeState(preset)


@pytest.fixture
def boxes():
    return [make_projector(3, k) for k in range(3)]


@pytest.fixture
def sigmas():
    return {axis: pauli_embed(axis, 3) for axis in ("x", "y", "z", "identity")}


@pytest.fixture
def rng():
    return np.random.default_rng(20161019)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
