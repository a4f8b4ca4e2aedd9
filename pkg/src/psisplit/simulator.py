"""Trajectory simulation for interval-splitting processes.

A process starts from a partition of [0, 1] and repeatedly splits an interval
at a uniform point.  The interval is chosen by one of three rules:

* a choice-rule spec (``PsiSpec``): draw w uniform, map it through the rule's
  quantile function to u, and take the interval at size-biased quantile u;
* a direct rule: draw k uniform candidate points, keep the one landing in the
  longest (or shortest) interval;
* ``"kakutani"``: always split the largest interval.

Each replica consumes a dedicated random stream derived from (seed, replica),
so runs are reproducible and replicas can execute in any order or in
parallel.  An optional continuous-time overlay assigns arrival times from an
independent stream without disturbing the jump chain.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import AuditError, ConfigError
from .interval_engine import (DEFAULT_AUDIT_INTERVAL, AuditReport, IntervalSet,
                              Side)
from .psi_model import PsiSpec, spec_from_any
from .rng import DrawBuffer, stream_for, times_stream_for

KAKUTANI = "kakutani"

DEFAULT_ALPHAS = (0.25, 0.5, 0.75)
DEFAULT_ECDF_GRID = tuple(np.geomspace(1e-3, 50.0, 512))


@dataclass(frozen=True)
class DirectRule:
    """Split the longest (mode='max') or shortest (mode='min') of the
    intervals hit by k uniform candidate points."""

    k: int
    mode: str = "max"

    def __post_init__(self):
        if not isinstance(self.k, int) or self.k < 1:
            raise ConfigError(f"candidate count k must be a positive int, got {self.k!r}")
        if self.k > 256:
            raise ConfigError(f"candidate count k = {self.k} exceeds 256")
        if self.mode not in ("max", "min"):
            raise ConfigError(f"mode must be 'max' or 'min', got {self.mode!r}")

    def label(self) -> str:
        return f"direct-{self.mode}{self.k}"


def rule_label(rule) -> str:
    if isinstance(rule, PsiSpec):
        return rule.label()
    if isinstance(rule, DirectRule):
        return rule.label()
    return str(rule)


def _default_checkpoints(n_steps: int) -> tuple[int, ...]:
    cps = []
    c = 1024
    while c < n_steps:
        cps.append(c)
        c *= 2
    cps.append(n_steps)
    return tuple(cps)


@dataclass(frozen=True)
class SimConfig:
    """Validated, picklable description of one simulation experiment."""

    rule: object
    n_steps: int
    seed: int = 0
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    checkpoints: tuple[int, ...] | None = None
    initial_points: tuple[float, ...] | None = None
    replicas: int = 1
    track_alpha: float | None = None
    poisson_time: bool = False
    ecdf: bool = False
    ecdf_grid: tuple[float, ...] = DEFAULT_ECDF_GRID
    audit_interval: int = DEFAULT_AUDIT_INTERVAL

    def __post_init__(self):
        if isinstance(self.rule, (PsiSpec, DirectRule)):
            pass
        elif self.rule == KAKUTANI:
            pass
        else:
            object.__setattr__(self, "rule", spec_from_any(self.rule))
        if not isinstance(self.n_steps, int) or self.n_steps < 1:
            raise ConfigError(f"n_steps must be a positive int, got {self.n_steps!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a nonnegative int, got {self.seed!r}")
        if self.replicas < 1:
            raise ConfigError("replicas must be >= 1")
        alphas = tuple(float(a) for a in self.alphas)
        for a in alphas:
            if not 0.0 < a < 1.0:
                raise ConfigError(f"alpha {a!r} outside (0, 1)")
        for a, b in zip(alphas, alphas[1:]):
            if not a < b:
                raise ConfigError("alphas must be strictly increasing")
        object.__setattr__(self, "alphas", alphas)
        if self.checkpoints is None:
            cps = _default_checkpoints(self.n_steps)
        else:
            cps = tuple(int(c) for c in self.checkpoints)
            if not cps or any(c < 1 for c in cps):
                raise ConfigError("checkpoints must be positive step counts")
            if any(a >= b for a, b in zip(cps, cps[1:])):
                raise ConfigError("checkpoints must be strictly increasing")
            if cps[-1] > self.n_steps:
                raise ConfigError("checkpoints cannot exceed n_steps")
            if cps[-1] != self.n_steps:
                cps = cps + (self.n_steps,)
        object.__setattr__(self, "checkpoints", cps)
        if self.initial_points is None:
            pts = alphas
        else:
            pts = tuple(float(p) for p in self.initial_points)
            for p in pts:
                if not 0.0 < p < 1.0:
                    raise ConfigError(f"initial point {p!r} outside (0, 1)")
            if any(a >= b for a, b in zip(pts, pts[1:])):
                raise ConfigError("initial points must be strictly increasing")
            missing = [a for a in alphas if a not in pts]
            if missing:
                raise ConfigError(
                    f"initial points must contain every alpha; missing {missing}")
        object.__setattr__(self, "initial_points", pts)
        if self.track_alpha is not None:
            ta = float(self.track_alpha)
            if ta not in pts:
                raise ConfigError("track_alpha must be one of the initial points")
            object.__setattr__(self, "track_alpha", ta)
        grid = tuple(float(x) for x in self.ecdf_grid)
        if self.ecdf:
            if not grid or any(x <= 0.0 for x in grid):
                raise ConfigError("ecdf_grid must contain positive values")
            if any(a >= b for a, b in zip(grid, grid[1:])):
                raise ConfigError("ecdf_grid must be strictly increasing")
        object.__setattr__(self, "ecdf_grid", grid)
        if self.audit_interval < 0:
            raise ConfigError("audit_interval must be >= 0")

    def rule_label(self) -> str:
        return rule_label(self.rule)


@dataclass(frozen=True)
class TrajectoryStats:
    """Per-replica statistics recorded at each checkpoint."""

    replica: int
    checkpoints: np.ndarray          # (n_chk,) step counts
    alphas: np.ndarray               # (n_alpha,)
    counts: np.ndarray               # (n_chk, n_alpha) points below each alpha
    n_intervals: np.ndarray          # (n_chk,)
    largest_gaps: np.ndarray         # (n_chk,)
    smallest_gaps: np.ndarray        # (n_chk,)
    times: np.ndarray | None         # (n_chk,) arrival times, if enabled
    ecdf_grid: np.ndarray | None     # (n_grid,)
    ecdf: np.ndarray | None          # (n_chk, n_grid)
    ecdf_by_alpha: np.ndarray | None  # (n_chk, n_alpha, n_grid)
    final_audit: AuditReport

    @property
    def count_fractions(self) -> np.ndarray:
        """counts / step count, the equidistribution statistic."""
        return self.counts / self.checkpoints[:, None]

    @property
    def scaled_gaps(self) -> np.ndarray:
        """n_intervals * largest_gap at each checkpoint."""
        return self.n_intervals * self.largest_gaps


@dataclass(frozen=True)
class RunResult:
    config: SimConfig
    stats: list[TrajectoryStats] = field(default_factory=list)

    def mean_count_fractions(self) -> np.ndarray:
        return np.mean([s.count_fractions for s in self.stats], axis=0)

    def mean_scaled_gaps(self) -> np.ndarray:
        return np.mean([s.scaled_gaps for s in self.stats], axis=0)


def arrival_times(rng: np.random.Generator, n: int) -> np.ndarray:
    """Arrival times of the first n splits in the continuous-time overlay.

    Inter-arrival waits are Exp(1) on an exponentially growing clock, so the
    n-th split arrives near log(n): t_n = log1p(sum of n Exp(1) waits).
    """
    return np.log1p(np.cumsum(rng.standard_exponential(n)))


def _ecdf_rows(iset: IntervalSet, grid: np.ndarray, alphas: np.ndarray):
    """Size-biased mass of rescaled lengths <= x, total and per alpha.

    Lengths are rescaled by the current interval count n (mean rescaled
    length is exactly 1); the per-alpha rows restrict to intervals left of
    alpha but stay normalized by the total mass, so row j tends to
    alphas[j] * F pointwise.
    """
    lefts, lengths, _ = iset.snapshot()
    n = lengths.size
    total = lengths.sum()
    order = np.argsort(lengths, kind="stable")
    sl = lengths[order]
    cum = np.cumsum(sl)
    pos = np.searchsorted(sl, grid / n, side="right")
    row = np.where(pos > 0, cum[np.minimum(pos, n) - 1], 0.0) / total
    by_alpha = np.empty((alphas.size, grid.size))
    for j, a in enumerate(alphas):
        mask = lefts[order] < a
        cum_a = np.cumsum(np.where(mask, sl, 0.0))
        by_alpha[j] = np.where(pos > 0, cum_a[np.minimum(pos, n) - 1], 0.0) / total
    return row, by_alpha


def _run_replica(config: SimConfig, replica: int,
                 backend: str | None) -> TrajectoryStats:
    track = config.track_alpha
    if track is None and config.alphas:
        track = config.alphas[0]
    iset = IntervalSet(config.initial_points, alpha=track, backend=backend,
                       audit_interval=config.audit_interval)
    idx = iset._idx
    mod = iset._mod
    buf = DrawBuffer(stream_for(config.seed, replica))
    alphas = np.asarray(config.alphas, dtype=np.float64)
    counts = np.zeros(alphas.size, dtype=np.int64)
    cps = np.asarray(config.checkpoints, dtype=np.int64)
    n_chk = cps.size
    out_counts = np.empty((n_chk, alphas.size), dtype=np.int64)
    out_nint = np.empty(n_chk, dtype=np.int64)
    out_lg = np.empty(n_chk)
    out_sg = np.empty(n_chk)
    grid = np.asarray(config.ecdf_grid, dtype=np.float64)
    ecdf = np.empty((n_chk, grid.size)) if config.ecdf else None
    ecdf_a = np.empty((n_chk, alphas.size, grid.size)) if config.ecdf else None

    rule = config.rule
    done = 0
    for ci, cp in enumerate(cps):
        seg = int(cp - done)
        if isinstance(rule, PsiSpec):
            ks, ps = rule.terms()
            mod.advance_psi(idx, buf, ks, ps, seg, alphas, counts)
        elif isinstance(rule, DirectRule):
            mod.advance_direct(idx, buf, rule.k, rule.mode == "max", seg,
                               alphas, counts)
        else:
            mod.advance_kakutani(idx, buf, seg, alphas, counts)
        done = int(cp)
        out_counts[ci] = counts
        out_nint[ci] = iset.n_intervals
        out_lg[ci] = iset.largest_gap()
        out_sg[ci] = iset.smallest_gap()
        if config.ecdf:
            row, rows_a = _ecdf_rows(iset, grid, alphas)
            ecdf[ci] = row
            ecdf_a[ci] = rows_a

    times = None
    if config.poisson_time:
        t = arrival_times(times_stream_for(config.seed, replica),
                          config.n_steps)
        times = t[cps - 1]

    audit = iset.audit()
    if not audit.healthy:
        raise AuditError(f"replica {replica} failed its final audit: {audit}")
    return TrajectoryStats(
        replica=replica,
        checkpoints=cps,
        alphas=alphas,
        counts=out_counts,
        n_intervals=out_nint,
        largest_gaps=out_lg,
        smallest_gaps=out_sg,
        times=times,
        ecdf_grid=grid if config.ecdf else None,
        ecdf=ecdf,
        ecdf_by_alpha=ecdf_a,
        final_audit=audit,
    )


def run(config: SimConfig, backend: str | None = None,
        workers: int = 1) -> RunResult:
    """Simulate all replicas of the configured experiment."""
    reps = range(config.replicas)
    if workers > 1 and config.replicas > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            stats = list(pool.map(_run_replica, [config] * config.replicas,
                                  reps, [backend] * config.replicas))
    else:
        stats = [_run_replica(config, r, backend) for r in reps]
    return RunResult(config=config, stats=stats)


# --- single-step drivers ------------------------------------------------------
#
# These mirror one step of the bulk loops through the public IntervalSet API.
# They exist so tests can verify the draw-consumption contract of the bulk
# loops against an independent implementation, and for interactive use.


def step_psi(iset: IntervalSet, spec: PsiSpec, draws: DrawBuffer) -> float:
    """One choice-rule step; returns the inserted point."""
    w = draws.next_nonzero()
    u = spec.ppf(w)
    ref = iset.quantile(u)
    v = draws.next()
    x = ref.left + v * ref.length
    if _try_insert(iset, ref, x):
        return x
    v = draws.next()
    x = ref.left + v * ref.length
    if _try_insert(iset, ref, x):
        return x
    raise ConfigError(f"split point collided twice at x={x!r}")


def step_direct(iset: IntervalSet, rule: DirectRule,
                draws: DrawBuffer) -> float:
    """One direct-rule step; returns the inserted point."""
    for _ in range(2):
        ref, x = _direct_candidate(iset, rule, draws)
        if _try_insert(iset, ref, x):
            return x
    raise ConfigError(f"candidate point collided twice at x={x!r}")


def step_kakutani(iset: IntervalSet, draws: DrawBuffer) -> float:
    """One largest-interval step; returns the inserted point."""
    for _ in range(2):
        c = iset.n_tied_largest()
        if c > 1:
            r = draws.next()
            i = min(int(r * c), c - 1)
            uid = iset._idx.tied_longest(i)
            ref = iset._ref(uid)
        else:
            ref = iset._ref(iset._idx.longest_uid())
        v = draws.next()
        x = ref.left + v * ref.length
        if _try_insert(iset, ref, x):
            return x
    raise ConfigError(f"split point collided twice at x={x!r}")


def _direct_candidate(iset: IntervalSet, rule: DirectRule, draws: DrawBuffer):
    xs = [draws.next() for _ in range(rule.k)]
    refs = [iset.find(xi) for xi in xs]
    lens = [r.length for r in refs]
    best = max(lens) if rule.mode == "max" else min(lens)
    tied = []
    for r in refs:
        if r.length == best and r.uid not in [t.uid for t in tied]:
            tied.append(r)
    if len(tied) > 1:
        r = draws.next()
        pick = tied[min(int(r * len(tied)), len(tied) - 1)]
    else:
        pick = tied[0]
    own = [xi for xi, ref in zip(xs, refs) if ref.uid == pick.uid]
    if len(own) > 1:
        r = draws.next()
        return pick, own[min(int(r * len(own)), len(own) - 1)]
    return pick, own[0]


def _try_insert(iset: IntervalSet, ref, x: float) -> bool:
    if x == ref.left:
        return False
    if iset._idx.split_in(ref.uid, x) < 0:
        return False
    return True
