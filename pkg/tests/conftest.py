import itertools

import numpy as np
import pytest

from gramevo.cli import read_text
from gramevo.grammar import parse_bnf, parse_grouping

FIG3A = read_text("builtin:standard.bnf")
FIG3B = read_text("builtin:fg.bnf")
TRIG_POW = read_text("builtin:trig_pow.grouping")


class StubRng:
    """Deterministic stand-in for numpy's Generator, replaying fixed values."""

    def __init__(self, randoms=(0.0,), integers=(0,), normals=(0.0,)):
        self._r = itertools.cycle(randoms)
        self._i = itertools.cycle(integers)
        self._n = itertools.cycle(normals)
        self.calls = 0

    def random(self, size=None):
        self.calls += 1
        if size is None:
            return next(self._r)
        return np.array([next(self._r) for _ in range(size)], dtype=float)

    def integers(self, low, high, size=None):
        self.calls += 1
        if size is None:
            return next(self._i)
        return np.array([next(self._i) for _ in range(size)], dtype=int)

    def normal(self, loc, scale, size=None):
        self.calls += 1
        return np.array([next(self._n) for _ in range(int(np.prod(size)))]).reshape(size)


@pytest.fixture
def fig3a():
    return parse_bnf(FIG3A)


@pytest.fixture
def fig3b():
    return parse_bnf(FIG3B)


@pytest.fixture
def trig_pow():
    return parse_grouping(TRIG_POW)
