"""The compiled and pure backends must produce bit-identical results.

Both backends consume random draws in the same order and evaluate every
floating-point expression in the same order, so trajectories, aggregates,
and ODE sweeps agree exactly — not just within tolerance.
"""

import math

import numpy as np
import pytest

from psisplit.interval_engine import IntervalSet
from psisplit.limit_solver import build_grid, solve_f
from psisplit.psi_model import preset
from psisplit.rng import DrawBuffer, stream_for
from psisplit.simulator import DirectRule, KAKUTANI, SimConfig, run

from conftest import BACKENDS, PRESET_NAMES

pytestmark = pytest.mark.skipif(
    len(BACKENDS) < 2, reason="only one backend available in this build")

RULES = ([preset(n) for n in PRESET_NAMES]
         + [DirectRule(1, "max"), DirectRule(2, "max"), DirectRule(2, "min"),
            DirectRule(3, "max"), KAKUTANI])


def drive(backend, rule, n_steps, seed):
    iset = IntervalSet((0.25, 0.5, 0.75), alpha=0.5, backend=backend)
    buf = DrawBuffer(stream_for(seed, 0))
    alphas = np.array([0.25, 0.5, 0.75])
    counts = np.zeros(3, dtype=np.int64)
    mod, idx = iset._mod, iset._idx
    if rule == KAKUTANI:
        mod.advance_kakutani(idx, buf, n_steps, alphas, counts)
    elif isinstance(rule, DirectRule):
        mod.advance_direct(idx, buf, rule.k, rule.mode == "max", n_steps,
                           alphas, counts)
    else:
        ks, ps = rule.terms()
        mod.advance_psi(idx, buf, ks, ps, n_steps, alphas, counts)
    return iset, counts, buf.pos


@pytest.mark.parametrize("rule", RULES, ids=[str(getattr(r, "label", lambda: r)())
                                             if hasattr(r, "label") else str(r)
                                             for r in RULES])
def test_trajectories_bit_identical(rule):
    a, ca, pa = drive("compiled", rule, 3000, seed=314)
    b, cb, pb = drive("pure", rule, 3000, seed=314)
    sa, sb = a.snapshot(), b.snapshot()
    for x, y in zip(sa, sb):
        assert np.array_equal(x, y)
    assert np.array_equal(ca, cb)
    assert pa == pb, "backends must consume the same number of draws"
    assert a.n_intervals == b.n_intervals
    assert a.largest_gap() == b.largest_gap()
    assert a.smallest_gap() == b.smallest_gap()
    assert a.audit() == b.audit()


def test_queries_bit_identical():
    a, _, _ = drive("compiled", preset("mix-60-40"), 2000, seed=9)
    b, _, _ = drive("pure", preset("mix-60-40"), 2000, seed=9)
    us = np.random.default_rng(1).random(100)
    for u in us:
        ra = a.quantile(float(u))
        rb = b.quantile(float(u))
        assert ra == rb
        assert a.size_biased_mass(float(u)) == b.size_biased_mass(float(u))
    for delta in (0.25, 0.5, 1.0):
        assert a.delta_norm(delta) == b.delta_norm(delta)


def test_ode_sweep_bit_identical():
    import psisplit._core as core
    import psisplit._pycore as pycore

    grid = build_grid(40.0, 4000)
    ks, ps = preset("max2").terms()
    for lam in (0.3, 0.596569697808834, 1.7):
        out = []
        for mod in (core, pycore):
            F = np.empty_like(grid)
            Fp = np.empty_like(grid)
            E = np.empty_like(grid)
            status, n_valid = mod.ode_rk4(ks, ps, lam, grid, F, Fp, E, math.inf)
            out.append((status, n_valid, F, Fp, E))
        assert out[0][0] == out[1][0]
        assert out[0][1] == out[1][1]
        for x, y in zip(out[0][2:], out[1][2:]):
            assert np.array_equal(x, y)


def test_solver_bit_identical():
    ca = solve_f("max2", backend="compiled")
    cb = solve_f("max2", backend="pure")
    assert ca.lam == cb.lam
    assert np.array_equal(ca.F, cb.F)
    assert np.array_equal(ca.Fp, cb.Fp)
    assert ca.residuals == cb.residuals


def test_run_results_bit_identical():
    cfg = SimConfig(rule="mix-75-25", n_steps=4000, seed=77, replicas=2,
                    ecdf=True)
    ra = run(cfg, backend="compiled")
    rb = run(cfg, backend="pure")
    for sa, sb in zip(ra.stats, rb.stats):
        assert np.array_equal(sa.counts, sb.counts)
        assert np.array_equal(sa.largest_gaps, sb.largest_gaps)
        assert np.array_equal(sa.ecdf, sb.ecdf)
        assert np.array_equal(sa.ecdf_by_alpha, sb.ecdf_by_alpha)
        assert sa.final_audit == sb.final_audit
