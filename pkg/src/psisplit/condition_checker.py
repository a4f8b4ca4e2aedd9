"""Numerical check of the equidistribution sufficient condition.

For a solved limit curve F with rate lam, the sufficient condition for
equidistribution is that for some delta > 0 and all z > 0

    |z * psi'(F(z)) * F'(z) - psi(F(z))|  <=  (2 - delta) * psi(F(z)).

This module evaluates the ratio

    R(z) = |z psi'(F) F' - psi(F)| / psi(F)

over the solver grid, reports R_star = sup R and delta_max = 2 - R_star, and
issues a PASS / FAIL / INCONCLUSIVE verdict.  As z -> 0+, R tends to 1 when
psi(0) > 0 and to 2k - 3 when the rule is a pure largest-of-k mixture with
smallest order k; nodes below a small-z threshold use that limit, which also
sidesteps underflow of psi(F) ~ F^(k-1) for large k.

Closed-form bounds on solved curves are checked alongside: sup F' <= 1
always; for two-term rules with p_{-2} > p_2, lam <= 2 and
sup zF' <= 2 (p_2 e)^-2; when p_1 > 0, sup zF' <= 2 e^-1 / p_1^2; and the
curvature constant C = sum k(k-1)(p_k + p_{-k}) dominates sup |psi'|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SingularityError
from .limit_solver import LimitCurve, solve_f
from .psi_model import PsiSpec, spec_from_any

DELTA_FLOOR = 1e-3
FAIL_MARGIN = 1e-3
SMALL_Z = 1e-6
BOUND_TOL = 1e-9

VERDICT_PASS = "PASS"
VERDICT_FAIL = "FAIL"
VERDICT_INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class BoundCheck:
    """One closed-form bound evaluated on a solved curve."""

    name: str
    applicable: bool
    value: float
    bound: float
    holds: bool

    def to_dict(self) -> dict:
        return {"name": self.name, "applicable": self.applicable,
                "value": self.value, "bound": self.bound, "holds": self.holds}


@dataclass(frozen=True)
class ConditionReport:
    spec: PsiSpec
    lam: float
    zs: np.ndarray
    ratios: np.ndarray
    r_star: float
    argmax_z: float
    r_zero: float
    delta_max: float
    delta_effective: float
    verdict: str
    bound_checks: tuple[BoundCheck, ...]
    residuals: object
    notes: tuple[str, ...]

    def to_json_dict(self) -> dict:
        return {
            "spec": self.spec.label(),
            "weights": {str(k): p for k, p in self.spec.weights.items()},
            "lambda": self.lam,
            "R_star": self.r_star,
            "argmax_z": self.argmax_z,
            "R_zero": self.r_zero,
            "delta_max": self.delta_max,
            "delta_effective": self.delta_effective,
            "verdict": self.verdict,
            "bound_checks": [c.to_dict() for c in self.bound_checks],
            "residuals": (self.residuals.to_dict()
                          if self.residuals is not None else None),
            "notes": list(self.notes),
        }


def ratio_zero_limit(spec: PsiSpec) -> float:
    """lim_{z->0+} R(z).

    With F ~ lam z^2 / 2 the term z psi'(F) F' behaves like
    2 F psi'(F).  When psi(0) > 0 both psi'(F)F z -> 0 and psi(F) -> psi(0),
    so R -> 1.  For a pure largest-of-k mixture (psi(0) = 0) with smallest
    order k0, psi(F) ~ c F^(k0-1) gives 2 F psi'(F) / psi(F) -> 2(k0-1) and
    R -> 2 k0 - 3.
    """
    if spec.pdf(0.0) > 0.0:
        return 1.0
    k0 = min(k for k, _ in zip(*spec.terms()) if k >= 2)
    return float(2 * k0 - 3)


def condition_ratio(curve: LimitCurve, zs: np.ndarray | None = None,
                    F: np.ndarray | None = None,
                    Fp: np.ndarray | None = None) -> np.ndarray:
    """R(z) over the given nodes (default: the curve's positive grid nodes).

    Passing precomputed F/Fp (as stored on the curve) avoids interpolation
    error; otherwise values are interpolated from the curve.
    """
    spec = curve.spec
    if zs is None:
        zs = curve.grid[1:]
        F = curve.F[1:]
        Fp = curve.Fp[1:]
    else:
        zs = np.asarray(zs, dtype=np.float64)
        if F is None:
            F = curve.interp(zs)
        if Fp is None:
            Fp = curve.interp_fp(zs)
    if np.any(zs <= 0.0):
        raise SingularityError("the ratio is only defined for z > 0")
    Fc = np.clip(F, 0.0, 1.0)
    psi = spec.pdf_array(Fc)
    dpsi = spec.dpdf_array(Fc)
    with np.errstate(divide="ignore", invalid="ignore"):
        R = np.abs(zs * dpsi * Fp - psi) / psi
    limit = ratio_zero_limit(spec)
    R[zs < SMALL_Z] = limit
    bad = ~np.isfinite(R)
    if np.any(bad):
        psi0 = spec.pdf(0.0)
        psi1 = spec.pdf(1.0)
        if psi0 == 0.0:
            # psi(F) ~ F^(k0-1) underflows near 0 for high orders
            low = bad & (Fc < 0.5)
            R[low] = limit
            bad &= ~low
        if psi1 == 0.0:
            # psi(F) -> 0 as F -> 1; drop underflowed far-tail nodes
            R[bad & (Fc > 0.5)] = np.nan
            bad &= ~(Fc > 0.5)
        if np.any(bad):
            raise SingularityError(
                f"psi(F) vanished at z = {zs[bad][0]!r}; ratio undefined")
    return R


def check_closed_form_bounds(spec: PsiSpec, curve: LimitCurve) -> tuple[BoundCheck, ...]:
    sup_fp = float(np.max(curve.Fp))
    sup_zfp = float(np.max(curve.grid * curve.Fp))
    p2 = spec.weight(2)
    pm2 = spec.weight(-2)
    p1 = spec.weight(1)
    two_term = set(spec.weights) <= {2, -2}
    checks = []

    def add(name, applicable, value, bound):
        holds = bool(applicable and value <= bound + BOUND_TOL)
        checks.append(BoundCheck(name=name, applicable=applicable,
                                 value=value, bound=bound, holds=holds))

    add("fprime_max_le_1", True, sup_fp, 1.0)
    add("lambda_le_2", two_term and pm2 > p2, curve.lam, 2.0)
    add("zfprime_two_term_bound", two_term and p2 > 0.0 and pm2 > p2,
        sup_zfp, 2.0 * (p2 * math.e) ** -2 if p2 > 0.0 else math.inf)
    add("zfprime_p1_bound", p1 > 0.0, sup_zfp,
        2.0 * math.exp(-1.0) / p1 ** 2 if p1 > 0.0 else math.inf)
    curv = spec.curvature_bound()
    add("curvature_bound", True, curv.sup_abs_dpdf, curv.bound)
    return tuple(checks)


def check_condition(spec, curve: LimitCurve | None = None,
                    z_max: float | None = None, steps: int = 10_000,
                    backend: str | None = None) -> ConditionReport:
    """Solve (if needed) and evaluate the sufficient condition for the rule."""
    spec = spec_from_any(spec)
    if curve is None:
        curve = solve_f(spec, z_max=z_max, steps=steps, backend=backend)
    zs = curve.grid[1:]
    ratios = condition_ratio(curve)
    notes = []
    valid = np.isfinite(ratios)
    if not np.all(valid):
        n_bad = int(np.sum(~valid))
        notes.append(f"{n_bad} far-tail nodes dropped (psi(F) underflowed)")
    r_star = float(np.max(ratios[valid]))
    argmax_z = float(zs[valid][int(np.argmax(ratios[valid]))])
    r_zero = ratio_zero_limit(spec)
    delta_max = 2.0 - r_star
    delta_effective = min(delta_max, 1.0)
    psi1 = spec.pdf(1.0)
    if delta_max <= -FAIL_MARGIN:
        verdict = VERDICT_FAIL
    elif psi1 == 0.0:
        verdict = VERDICT_INCONCLUSIVE
        notes.append(
            "psi(1) = 0: the far tail cannot be certified numerically, so a "
            "nonnegative margin is reported as INCONCLUSIVE")
    elif delta_max >= DELTA_FLOOR:
        verdict = VERDICT_PASS
    else:
        verdict = VERDICT_INCONCLUSIVE
        notes.append(f"margin |delta_max| < {DELTA_FLOOR} is below resolution")
    if curve.residuals is not None and (curve.residuals.norm > 1e-3
                                        or curve.residuals.lam > 1e-3):
        notes.append("curve residuals exceed 1e-3; consider more steps")
    return ConditionReport(
        spec=spec, lam=curve.lam, zs=zs, ratios=ratios, r_star=r_star,
        argmax_z=argmax_z, r_zero=r_zero, delta_max=delta_max,
        delta_effective=delta_effective, verdict=verdict,
        bound_checks=check_closed_form_bounds(spec, curve),
        residuals=curve.residuals, notes=tuple(notes))


def pinch_thresholds(tol: float = 1e-10) -> dict[str, float]:
    """Two interpolation-family thresholds found when optimizing the bounds.

    cubic_root: the p in [1/2, 1] solving (2/e^2)(2p - 1) = (1-p)^3, the
    largest two-term weight p_{-2} the pinch argument can certify.
    exp_third: e^(-1/3), the smallest uniform weight p_1 the curvature
    argument requires.
    """

    def h(p: float) -> float:
        return (2.0 / math.e ** 2) * (2.0 * p - 1.0) - (1.0 - p) ** 3

    lo, hi = 0.5, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if h(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return {"cubic_root": 0.5 * (lo + hi), "exp_third": math.exp(-1.0 / 3.0)}


@dataclass(frozen=True)
class ScanRow:
    param: float
    lam: float
    r_star: float
    delta_max: float
    verdict: str
    error: str | None = None


def scan_family(make_spec, params, z_max: float | None = None,
                steps: int = 10_000, backend: str | None = None) -> list[ScanRow]:
    """Run check_condition across a parametrized family of rules.

    Per-parameter failures are captured in the row instead of aborting the
    scan.
    """
    rows = []
    for p in params:
        try:
            rep = check_condition(make_spec(p), z_max=z_max, steps=steps,
                                  backend=backend)
            rows.append(ScanRow(param=float(p), lam=rep.lam, r_star=rep.r_star,
                                delta_max=rep.delta_max, verdict=rep.verdict))
        except Exception as exc:  # noqa: BLE001 - scan rows record failures
            rows.append(ScanRow(param=float(p), lam=math.nan, r_star=math.nan,
                                delta_max=math.nan, verdict="ERROR",
                                error=f"{type(exc).__name__}: {exc}"))
    return rows
