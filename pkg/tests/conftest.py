"""Shared fixtures and helpers for the test suite."""

import importlib

import numpy as np
import pytest

from psisplit.rng import DrawBuffer, stream_for

# Backends available in this build: the pure-Python one always exists, the
# compiled one only when the extension was built.
BACKENDS = ["pure"]
try:
    importlib.import_module("psisplit._core")
    BACKENDS.insert(0, "compiled")
except ImportError:  # pragma: no cover - depends on build environment
    pass


@pytest.fixture(params=BACKENDS)
def backend(request):
    """Run the test once per available backend."""
    return request.param


def injected_draws(values):
    """A DrawBuffer that yields exactly the given values first.

    After the injected values are exhausted the buffer refills from its
    (fixed-seed) generator, so tests should consume exactly what they inject
    and may assert on ``buf.pos`` to count the draws used.
    """
    buf = DrawBuffer(stream_for(0, 0))
    buf.arr = np.asarray(values, dtype=np.float64)
    buf.pos = 0
    return buf


def fixed_ten_points():
    """Nine interior points giving ten intervals with distinct lengths k/55."""
    return np.cumsum(np.arange(1, 10)) / 55.0


PRESET_NAMES = ("uniform", "max2", "max3", "min2", "mix-60-40", "mix-75-25")
