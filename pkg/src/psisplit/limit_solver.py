"""Limiting rescaled-length distribution of an interval-splitting process.

For a choice rule with density psi, the size-biased CDF F of rescaled
interval lengths solves

    F'(z) = lam * z * exp(-E(z)),   E'(z) = psi(F(z)),   F(0) = E(0) = 0,

where the rate constant lam is pinned down by F(infinity) = 1.  This module
integrates the system with classical RK4 on a fixed grid and finds lam by
bisection on the overshoot of F at infinity (a shooting method).  The mass
beyond the grid is folded in analytically: exponentially decaying tails when
psi(1) > 0, power-law tails otherwise.

Sanity checks on a solved curve (``validate_curve``) verify the equivalent
integral equation F'(z) = z * int_z^inf psi(F(y)) F'(y) / y dy, the
normalizations int z^-2 F dz = 1 and int z^-2 Psi(F) dz = lam, and
monotonicity.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, NumericalBlowupError, SolverError
from .interval_engine import _select_backend
from .psi_model import PsiSpec, spec_from_any

SHOOT_CAP = 1.003
LAMBDA_GUARD = 2.0 ** 60

TAIL_EXP = "exp"
TAIL_POWER = "power"


@dataclass(frozen=True)
class CurveResiduals:
    """How well a curve satisfies the identities it should satisfy."""

    integro: float          # max |F' - z * int_z^inf psi(F) F'/y dy|
    norm: float             # |int z^-2 F dz - 1|
    lam: float              # |int z^-2 Psi(F) dz - lam|
    sup_fprime: float
    sup_zfprime: float
    monotonicity_violations: int

    def to_dict(self) -> dict:
        return {
            "integro": self.integro,
            "norm": self.norm,
            "lambda": self.lam,
            "sup_fprime": self.sup_fprime,
            "sup_zfprime": self.sup_zfprime,
            "monotonicity_violations": self.monotonicity_violations,
        }


@dataclass(frozen=True)
class LimitCurve:
    """A solved (or integrated) curve F on [0, z_max] plus its tail model."""

    spec: PsiSpec
    lam: float
    grid: np.ndarray
    F: np.ndarray
    Fp: np.ndarray
    E: np.ndarray | None
    z_max: float
    tail_model: str
    f_infinity: float
    residuals: CurveResiduals | None = None

    def _tail_params(self) -> tuple[float, float]:
        """(tail mass beyond z_max, decay parameter)."""
        if self.tail_model == TAIL_EXP:
            a = self.spec.pdf(min(float(self.F[-1]), 1.0))
            return self.f_infinity - float(self.F[-1]), a
        q = _power_slope(self.grid, self.Fp)
        return self.f_infinity - float(self.F[-1]), q

    def interp(self, z) -> np.ndarray:
        """F evaluated at z, extending past z_max with the tail model."""
        z = np.asarray(z, dtype=np.float64)
        out = np.interp(z, self.grid, self.F)
        beyond = z > self.z_max
        if np.any(beyond):
            zb = z[beyond]
            mass, par = self._tail_params()
            if self.tail_model == TAIL_EXP and par > 0.0:
                a = par
                rest = (float(self.Fp[-1]) / self.z_max
                        * np.exp(-a * (zb - self.z_max))
                        * (zb / a + 1.0 / (a * a)))
                out[beyond] = self.f_infinity - rest
            else:
                q = par
                out[beyond] = self.f_infinity - mass * (zb / self.z_max) ** (1.0 - q)
        return out

    def interp_fp(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        out = np.interp(z, self.grid, self.Fp)
        beyond = z > self.z_max
        if np.any(beyond):
            zb = z[beyond]
            _, par = self._tail_params()
            if self.tail_model == TAIL_EXP and par > 0.0:
                out[beyond] = (float(self.Fp[-1]) * (zb / self.z_max)
                               * np.exp(-par * (zb - self.z_max)))
            else:
                out[beyond] = float(self.Fp[-1]) * (zb / self.z_max) ** (-par)
        return out

    def to_csv(self, path) -> None:
        text = self.to_csv_text()
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"# spec: {self.spec.to_json()}\n")
        buf.write(f"# lambda: {self.lam:.17g}\n")
        buf.write(f"# z_max: {self.z_max:.17g}\n")
        buf.write(f"# f_infinity: {self.f_infinity:.17g}\n")
        buf.write(f"# tail_model: {self.tail_model}\n")
        if self.residuals is not None:
            buf.write(f"# residuals: {json.dumps(self.residuals.to_dict())}\n")
        buf.write("z,F,Fp\n")
        for z, f, fp in zip(self.grid, self.F, self.Fp):
            buf.write(f"{z:.17g},{f:.17g},{fp:.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, path) -> "LimitCurve":
        meta = {}
        rows = []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    key, _, value = line[1:].partition(":")
                    meta[key.strip()] = value.strip()
                elif not line.startswith("z,"):
                    rows.append([float(tok) for tok in line.split(",")])
        if "spec" not in meta or "lambda" not in meta:
            raise ConfigError(f"curve file {path} lacks spec/lambda metadata")
        arr = np.asarray(rows, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] < 2:
            raise ConfigError(f"curve file {path} has no usable z,F,Fp rows")
        spec = PsiSpec.from_json(meta["spec"])
        resid = None
        if "residuals" in meta:
            d = json.loads(meta["residuals"])
            resid = CurveResiduals(
                integro=d["integro"], norm=d["norm"], lam=d["lambda"],
                sup_fprime=d["sup_fprime"], sup_zfprime=d["sup_zfprime"],
                monotonicity_violations=d["monotonicity_violations"])
        return cls(
            spec=spec, lam=float(meta["lambda"]), grid=arr[:, 0], F=arr[:, 1],
            Fp=arr[:, 2], E=None, z_max=float(meta.get("z_max", arr[-1, 0])),
            tail_model=meta.get("tail_model", TAIL_EXP),
            f_infinity=float(meta.get("f_infinity", arr[-1, 1])),
            residuals=resid)


# --- grids -------------------------------------------------------------------


def build_grid(z_max: float, steps: int, near_zero: bool = True) -> np.ndarray:
    """Integration grid on [0, z_max]: linear up to 1, geometric beyond,
    plus (optionally) a geometric cluster near 0 so ratio limits at 0+ are
    resolved."""
    if z_max <= 1.0:
        raise ConfigError(f"z_max = {z_max!r} must exceed 1")
    if steps < 100:
        raise ConfigError(f"steps = {steps!r} too small; need >= 100")
    n_lin = max(steps // 10, 100)
    n_geo = max(steps - n_lin, 100)
    parts = [np.array([0.0])]
    if near_zero:
        parts.append(np.geomspace(1e-8, 1e-3, 200))
    parts.append(np.linspace(0.0, 1.0, n_lin + 1)[1:])
    parts.append(np.geomspace(1.0, z_max, n_geo + 1)[1:])
    return np.unique(np.concatenate(parts))


def refine_grid(grid: np.ndarray) -> np.ndarray:
    """Insert cell midpoints (for step-halving convergence checks)."""
    grid = np.asarray(grid, dtype=np.float64)
    mids = 0.5 * (grid[1:] + grid[:-1])
    return np.unique(np.concatenate([grid, mids]))


def default_z_max(spec: PsiSpec) -> float:
    """Grid extent giving a negligible tail for the given rule.

    The tail of F decays like exp(-psi(1) z); the slower the decay the
    farther the grid must reach, and when psi(1) = 0 the decay is only
    polynomial so a much larger extent is used.
    """
    p1 = spec.pdf(1.0)
    if p1 >= 0.375:
        return 40.0
    if p1 > 0.0:
        return min(500.0, 15.0 / p1)
    return 1e4


# --- integration -------------------------------------------------------------


def _power_slope(grid: np.ndarray, Fp: np.ndarray) -> float:
    """Fitted log-log decay exponent q of F' over the last decade of z."""
    z0 = grid[-1] / 10.0
    mask = (grid >= z0) & (Fp > 0.0)
    if mask.sum() < 2:
        return 2.0
    lz = np.log(grid[mask])
    lf = np.log(Fp[mask])
    q = -np.polyfit(lz, lf, 1)[0]
    return float(min(max(q, 1.05), 1e3))


def _tail_mass(spec: PsiSpec, grid: np.ndarray, F: np.ndarray,
               Fp: np.ndarray, tail_model: str) -> float:
    z_max = float(grid[-1])
    fp_end = float(Fp[-1])
    if tail_model == TAIL_EXP:
        a = spec.pdf(min(float(F[-1]), 1.0))
        if a <= 0.0:
            return fp_end * z_max  # degenerate; fall back to power-ish guess
        return fp_end / a + fp_end / (a * a * z_max)
    q = _power_slope(grid, Fp)
    return fp_end * z_max / (q - 1.0)


def integrate_given_lambda(spec, lam: float, z_max: float | None = None,
                           steps: int = 10_000, grid: np.ndarray | None = None,
                           backend: str | None = None) -> LimitCurve:
    """Integrate the system for a fixed lam (no shooting).

    Raises NumericalBlowupError if the state leaves the representable range.
    """
    spec = spec_from_any(spec)
    if lam <= 0.0 or not math.isfinite(lam):
        raise ConfigError(f"lam = {lam!r} must be positive and finite")
    mod = _select_backend(backend)
    if grid is None:
        if z_max is None:
            z_max = default_z_max(spec)
        grid = build_grid(float(z_max), steps)
    else:
        grid = np.ascontiguousarray(grid, dtype=np.float64)
        if grid[0] != 0.0 or grid.size < 2 or np.any(np.diff(grid) <= 0.0):
            raise ConfigError("grid must start at 0 and strictly increase")
    F = np.empty_like(grid)
    Fp = np.empty_like(grid)
    E = np.empty_like(grid)
    ks, ps = spec.terms()
    status, n_valid = mod.ode_rk4(ks, ps, lam, grid, F, Fp, E, math.inf)
    if status == mod.ODE_BLOWUP:
        raise NumericalBlowupError(
            f"integration blew up at z = {grid[min(n_valid, grid.size - 1)]!r} "
            f"for lam = {lam!r}")
    tail_model = TAIL_EXP if spec.pdf(1.0) > 0.0 else TAIL_POWER
    mass = _tail_mass(spec, grid, F, Fp, tail_model)
    return LimitCurve(spec=spec, lam=float(lam), grid=grid, F=F, Fp=Fp, E=E,
                      z_max=float(grid[-1]), tail_model=tail_model,
                      f_infinity=float(F[-1]) + mass)


def _overshoot(mod, spec, ks, ps, lam, grid, F, Fp, E, tail_model) -> float:
    """F(infinity) - 1 for the given lam; +inf when the cap was hit."""
    status, n_valid = mod.ode_rk4(ks, ps, lam, grid, F, Fp, E, SHOOT_CAP)
    if status != mod.ODE_OK:
        return math.inf
    mass = _tail_mass(spec, grid, F, Fp, tail_model)
    return float(F[-1]) + mass - 1.0


def solve_f(spec, z_max: float | None = None, steps: int = 10_000,
            lam_tol: float = 1e-10, backend: str | None = None,
            validate: bool = True) -> LimitCurve:
    """Find lam so that F(infinity) = 1 and return the solved curve."""
    spec = spec_from_any(spec)
    mod = _select_backend(backend)
    if z_max is None:
        z_max = default_z_max(spec)
    grid = build_grid(float(z_max), steps)
    F = np.empty_like(grid)
    Fp = np.empty_like(grid)
    E = np.empty_like(grid)
    ks, ps = spec.terms()
    tail_model = TAIL_EXP if spec.pdf(1.0) > 0.0 else TAIL_POWER

    def g(lam: float) -> float:
        return _overshoot(mod, spec, ks, ps, lam, grid, F, Fp, E, tail_model)

    lo = hi = 1.0
    g1 = g(1.0)
    if g1 < 0.0:
        while g(hi) < 0.0:
            hi *= 2.0
            if hi > LAMBDA_GUARD:
                raise SolverError("no lam <= 2^60 reaches F(infinity) = 1")
        lo = hi / 2.0
    elif g1 > 0.0:
        while g(lo) > 0.0:
            lo /= 2.0
            if lo < 1.0 / LAMBDA_GUARD:
                raise SolverError("no lam >= 2^-60 reaches F(infinity) = 1")
        hi = lo * 2.0
    else:
        lo = hi = 1.0

    if lo < hi:
        probes = np.linspace(lo, hi, 5)
        vals = [g(p) for p in probes]
        if any(b < a for a, b in zip(vals, vals[1:])):
            raise SolverError(
                f"overshoot is not monotone on [{lo!r}, {hi!r}]: {vals}")
        for _ in range(200):
            if hi - lo <= lam_tol * hi:
                break
            mid = 0.5 * (lo + hi)
            if g(mid) >= 0.0:
                hi = mid
            else:
                lo = mid

    lam = 0.5 * (lo + hi)
    curve = integrate_given_lambda(spec, lam, grid=grid, backend=backend)
    if validate:
        curve = replace(curve, residuals=validate_curve(curve))
    return curve


# --- validation ---------------------------------------------------------------


def _suffix_trapezoid(grid: np.ndarray, g: np.ndarray) -> np.ndarray:
    """out[i] = trapezoid integral of g from grid[i] to grid[-1]."""
    seg = 0.5 * (g[1:] + g[:-1]) * np.diff(grid)
    out = np.zeros_like(g)
    out[:-1] = np.cumsum(seg[::-1])[::-1]
    return out


def validate_curve(curve: LimitCurve) -> CurveResiduals:
    spec = curve.spec
    grid = curve.grid
    F = curve.F
    Fp = curve.Fp
    lam = curve.lam
    z_max = float(grid[-1])
    psi_F = spec.pdf_array(np.minimum(F, 1.0))

    # integral form: F'(z) = z * int_z^inf psi(F(y)) F'(y) / y dy;
    # the integrand equals lam * psi(F) * exp(-E) = -lam * d/dy exp(-E),
    # so the mass beyond z_max is exactly Fp[-1] / z_max.
    g = np.empty_like(grid)
    g[0] = spec.pdf(0.0) * lam
    g[1:] = psi_F[1:] * Fp[1:] / grid[1:]
    J = _suffix_trapezoid(grid, g) + Fp[-1] / z_max
    integro = float(np.max(np.abs(Fp - grid * J)))

    # normalization int z^-2 F dz = 1; F ~ lam z^2 / 2 near 0.
    h = np.empty_like(grid)
    h[0] = 0.5 * lam
    h[1:] = F[1:] / grid[1:] ** 2
    norm = float(abs(np.trapezoid(h, grid) + curve.f_infinity / z_max - 1.0))

    # rate identity lam = int z^-2 Psi(F) dz; Psi(F) ~ psi(0) F near 0.
    big_psi = spec.cdf_array(np.minimum(F, 1.0))
    h2 = np.empty_like(grid)
    h2[0] = 0.5 * spec.pdf(0.0) * lam
    h2[1:] = big_psi[1:] / grid[1:] ** 2
    tail2 = spec.cdf(min(curve.f_infinity, 1.0)) / z_max
    lam_resid = float(abs(np.trapezoid(h2, grid) + tail2 - lam))

    return CurveResiduals(
        integro=integro,
        norm=norm,
        lam=lam_resid,
        sup_fprime=float(np.max(Fp)),
        sup_zfprime=float(np.max(grid * Fp)),
        monotonicity_violations=int(np.sum(np.diff(F) < 0.0)),
    )
