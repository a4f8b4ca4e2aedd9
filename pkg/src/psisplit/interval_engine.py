"""Public interval-partition engine.

``IntervalSet`` maintains a partition of [0, 1] under point insertion with
O(log n) splits, length-quantile lookups, size-biased CDF evaluation and
power-sum statistics.  The heavy lifting lives in one of two interchangeable
backends (compiled / pure Python) selected at import or per instance; both
produce bit-identical results for identical inputs.
"""

from __future__ import annotations

import importlib
import os
from dataclasses import dataclass
from enum import IntEnum
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, DomainError, DuplicatePointError

DEFAULT_AUDIT_INTERVAL = 1 << 20


def _load_backend(name: str):
    if name == "compiled":
        return importlib.import_module("psisplit._core")
    if name == "pure":
        return importlib.import_module("psisplit._pycore")
    raise ConfigError(f"unknown backend {name!r}; expected 'compiled' or 'pure'")


def _select_backend(name: str | None):
    if name is None or name == "auto":
        name = os.environ.get("PSISPLIT_BACKEND", "auto")
    if name == "auto":
        try:
            return _load_backend("compiled")
        except ImportError:
            return _load_backend("pure")
    return _load_backend(name)


_DEFAULT_MOD = _select_backend(None)


def backend_name(backend: str | None = None) -> str:
    """Name of the backend that would serve the given selector."""
    if backend is None:
        return _DEFAULT_MOD.BACKEND
    return _select_backend(backend).BACKEND


def available_backends() -> tuple[str, ...]:
    """Backends usable in this build, fastest first."""
    names = []
    for name in ("compiled", "pure"):
        try:
            _load_backend(name)
        except ImportError:
            continue
        names.append(name)
    return tuple(names)


class Side(IntEnum):
    """Interval class relative to the tracked point alpha."""

    ALL = 0
    LEFT = 1
    RIGHT = 2


class IntervalRef(NamedTuple):
    uid: int
    left: float
    length: float
    side: int


class SplitRecord(NamedTuple):
    new_uid: int
    old_uid: int
    x: float


@dataclass(frozen=True)
class AuditReport:
    """Result of a full O(n) structural self-check."""

    max_tiling_err: float
    total_len_err: float
    max_index_err: float
    bad_count_nodes: int
    bad_side_nodes: int
    counter_mismatch: int
    n_intervals: int

    @property
    def healthy(self) -> bool:
        return (self.max_tiling_err <= 1e-9 and self.total_len_err <= 1e-9
                and self.max_index_err <= 1e-12 and self.bad_count_nodes == 0
                and self.bad_side_nodes == 0 and self.counter_mismatch == 0)


class IntervalSet:
    """Partition of [0, 1] refined by inserted points.

    ``initial_points`` seeds the partition (strictly increasing, inside
    (0, 1)).  When ``alpha`` is given, every interval is classified as LEFT
    (left endpoint < alpha) or RIGHT, and per-side aggregates are maintained;
    alpha must be one of the initial points (or 0/1 boundaries never split).
    """

    def __init__(self, initial_points: Sequence[float] = (),
                 alpha: float | None = None, backend: str | None = None,
                 audit_interval: int = DEFAULT_AUDIT_INTERVAL):
        pts = [float(p) for p in initial_points]
        for p in pts:
            if not 0.0 < p < 1.0:
                raise DomainError(f"initial point {p!r} outside (0, 1)")
        for a, b in zip(pts, pts[1:]):
            if not a < b:
                raise DomainError("initial points must be strictly increasing")
        if alpha is not None:
            alpha = float(alpha)
            if not 0.0 < alpha < 1.0:
                raise DomainError(f"alpha {alpha!r} outside (0, 1)")
            if alpha not in pts:
                raise DomainError(
                    "alpha must be one of the initial points so no interval "
                    "straddles it")
        if audit_interval < 0:
            raise ConfigError("audit_interval must be >= 0")
        self._mod = _select_backend(backend)
        self._idx = self._mod.Index(pts, alpha)
        self._idx.audit_every = int(audit_interval)
        self._alpha = alpha

    # -- identity

    @property
    def backend(self) -> str:
        return self._mod.BACKEND

    @property
    def alpha(self) -> float | None:
        return self._alpha

    @property
    def n_intervals(self) -> int:
        return self._idx.n_intervals

    @property
    def n_points(self) -> int:
        """Points inserted by split() since construction."""
        return self._idx.n_points

    @property
    def n_points_below_alpha(self) -> int:
        return self._idx.n_points_alpha

    @property
    def left_intervals(self) -> int:
        """Number of intervals classified LEFT of alpha."""
        return self._idx.left_intervals

    def __len__(self) -> int:
        return self._idx.n_intervals

    # -- queries

    def _ref(self, uid: int) -> IntervalRef:
        return IntervalRef(uid, self._idx.get_left(uid),
                           self._idx.get_len(uid), self._idx.get_side(uid))

    def find(self, x: float) -> IntervalRef:
        """Interval containing x (the one whose left endpoint is rightmost
        among those <= x)."""
        if not 0.0 <= x < 1.0:
            raise DomainError(f"x = {x!r} outside [0, 1)")
        return self._ref(self._idx.locate(x))

    def quantile(self, u: float) -> IntervalRef:
        """Interval at size-biased quantile u: for a uniform u this picks an
        interval with probability proportional to its length, ordering
        intervals by (length, uid)."""
        if not 0.0 <= u <= 1.0:
            raise DomainError(f"u = {u!r} outside [0, 1]")
        return self._ref(self._idx.quantile(u))

    def size_biased_mass(self, x: float, side: Side = Side.ALL) -> float:
        """Total length of intervals (on the given side) with length <= x."""
        if x < 0.0:
            raise DomainError(f"x = {x!r} negative")
        return self._idx.sbd(x, int(side))

    def size_biased_cdf(self, x: float, side: Side = Side.ALL) -> float:
        """size_biased_mass normalized by the total mass of the side."""
        denom = self._idx.sbd(1.0, int(side))
        if denom <= 0.0:
            return 0.0
        return self._idx.sbd(x, int(side)) / denom

    def delta_norm(self, delta: float, side: Side = Side.ALL) -> float:
        """(1/delta) * sum of length**(1-delta) over the side's intervals.

        At delta = 1 this is exactly the interval count of the side.
        """
        if not 0.0 < delta <= 1.0:
            raise DomainError(f"delta = {delta!r} outside (0, 1]")
        return self._idx.delta_norm(delta, int(side))

    def largest_gap(self) -> float:
        return self._idx.max_len()

    def smallest_gap(self) -> float:
        return self._idx.min_len()

    def n_tied_largest(self) -> int:
        return self._idx.n_tied_longest()

    # -- mutation

    def insert(self, x: float) -> SplitRecord:
        """Split the interval containing x at x."""
        if not 0.0 < x < 1.0:
            raise DomainError(f"split point {x!r} outside (0, 1)")
        old = self._idx.locate(x)
        new = self._idx.split_in(old, x)
        if new < 0:
            raise DuplicatePointError(f"point {x!r} already present")
        return SplitRecord(new, old, x)

    # -- bulk views

    def snapshot(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Arrays (lefts, lengths, sides) in left-to-right order."""
        n = self._idx.n_intervals
        lefts = np.empty(n, dtype=np.float64)
        lengths = np.empty(n, dtype=np.float64)
        sides = np.empty(n, dtype=np.int8)
        self._idx.fill_snapshot(lefts, lengths, sides)
        return lefts, lengths, sides

    def export_csv(self, path) -> None:
        lefts, lengths, sides = self.snapshot()
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("left,length,side\n")
            for a, l, s in zip(lefts, lengths, sides):
                fh.write(f"{a:.17g},{l:.17g},{int(s)}\n")

    # -- health

    def audit(self) -> AuditReport:
        rep = self._idx.audit()
        return AuditReport(*rep, n_intervals=self._idx.n_intervals)

    def _corrupt_index_for_tests(self, eps: float) -> None:
        self._idx.corrupt_index(eps)
