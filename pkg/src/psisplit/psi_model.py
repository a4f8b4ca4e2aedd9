"""Choice-rule specifications.

A choice rule is a probability distribution on (0, 1] whose CDF is a mixture

    Psi(u) = p_1 * u + sum_{k>=2} p_k * u**k + p_{-k} * (1 - (1-u)**k)

with nonnegative weights summing to one.  The key ``k`` selects the component:
``k = 1`` is the uniform rule, ``k >= 2`` keeps the largest of ``k`` size-biased
candidates (CDF ``u**k``), ``k <= -2`` keeps the smallest of ``|k|`` candidates
(CDF ``1 - (1-u)**|k|``).  The quantile drawn from this law picks an interval
through the size-biased empirical CDF of interval lengths.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .errors import ConfigError, DomainError

WEIGHT_SUM_TOL = 1e-12
MAX_ORDER = 64

# --- scalar kernels -------------------------------------------------------
#
# These loops are mirrored verbatim (same expression order, integer-power
# loops instead of pow) in the compiled backend; keep them bit-identical.


def _terms_eval(ks, ps, u):
    """Return (cdf, pdf, dpdf) of the mixture at u."""
    cdf = 0.0
    pdf = 0.0
    dpdf = 0.0
    for k, p in zip(ks, ps):
        if k == 1:
            cdf += p * u
            pdf += p
        elif k >= 2:
            acc = 1.0
            i = 2
            while i < k:
                acc *= u
                i += 1
            u_km1 = acc * u
            cdf += p * (u_km1 * u)
            pdf += p * k * u_km1
            dpdf += p * (k * (k - 1)) * acc
        else:
            m = -k
            w1 = 1.0 - u
            acc = 1.0
            i = 2
            while i < m:
                acc *= w1
                i += 1
            w_m1 = acc * w1
            cdf += p * (1.0 - w_m1 * w1)
            pdf += p * m * w_m1
            dpdf -= p * (m * (m - 1)) * acc
    return cdf, pdf, dpdf


def _terms_pdf(ks, ps, u):
    pdf = 0.0
    for k, p in zip(ks, ps):
        if k == 1:
            pdf += p
        elif k >= 2:
            acc = 1.0
            i = 1
            while i < k:
                acc *= u
                i += 1
            pdf += p * k * acc
        else:
            m = -k
            w1 = 1.0 - u
            acc = 1.0
            i = 1
            while i < m:
                acc *= w1
                i += 1
            pdf += p * m * acc
    return pdf


def _terms_ppf(ks, ps, w):
    """Invert the CDF: return u with |Psi(u) - w| <= 1e-12.

    Newton iteration from u = w with a bisection safeguard; the bracket
    [lo, hi] always contains the root.
    """
    if w <= 0.0:
        return 0.0
    if w >= 1.0:
        return 1.0
    lo = 0.0
    hi = 1.0
    u = w
    for _ in range(200):
        cdf, pdf, _ = _terms_eval(ks, ps, u)
        err = cdf - w
        if err < 0.0:
            if -err <= 1e-12:
                return u
            lo = u
        else:
            if err <= 1e-12:
                return u
            hi = u
        if pdf > 0.0:
            nu = u - err / pdf
        else:
            nu = 0.5 * (lo + hi)
        if not (lo < nu < hi):
            nu = 0.5 * (lo + hi)
        if nu == u:
            nu = 0.5 * (lo + hi)
            if nu == u:
                return u
        u = nu
    return 0.5 * (lo + hi)


# --- spec type ------------------------------------------------------------


class PsiEval(NamedTuple):
    cdf: float
    pdf: float
    dpdf: float


@dataclass(frozen=True)
class PsiSpec:
    """Immutable choice-rule specification.

    ``weights`` maps component order k (integer, |k| in [1, 64], k != -1,
    k != 0) to a nonnegative weight; weights must sum to 1 within 1e-12.
    Zero weights are dropped on construction.
    """

    weights: Mapping[int, float]
    _terms: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        clean = {}
        for key, value in self.weights.items():
            k = int(key)
            if k != key:
                raise ConfigError(f"weight key {key!r} is not an integer")
            if k in (0, -1):
                raise ConfigError(f"weight key {k} is not a valid component order")
            if not (1 <= abs(k) <= MAX_ORDER):
                raise ConfigError(f"|k| = {abs(k)} outside supported range [1, {MAX_ORDER}]")
            p = float(value)
            if not math.isfinite(p) or p < 0.0:
                raise ConfigError(f"weight for k={k} must be finite and >= 0, got {value!r}")
            if p > 0.0:
                if k in clean:
                    raise ConfigError(f"duplicate weight key {k}")
                clean[k] = p
        total = math.fsum(clean.values())
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ConfigError(f"weights sum to {total!r}, expected 1 within {WEIGHT_SUM_TOL}")
        if not clean:
            raise ConfigError("at least one positive weight is required")
        items = tuple(sorted(clean.items()))
        object.__setattr__(self, "weights", dict(items))
        object.__setattr__(self, "_terms", items)

    # -- term access

    def terms(self) -> tuple[list[int], list[float]]:
        """Component orders and weights in canonical (sorted key) order."""
        ks = [k for k, _ in self._terms]
        ps = [p for _, p in self._terms]
        return ks, ps

    def weight(self, k: int) -> float:
        return self.weights.get(k, 0.0)

    # -- pointwise evaluation

    def eval(self, u: float) -> PsiEval:
        """CDF, density and density derivative at u in [0, 1]."""
        if not 0.0 <= u <= 1.0:
            raise DomainError(f"u = {u!r} outside [0, 1]")
        ks, ps = self.terms()
        return PsiEval(*_terms_eval(ks, ps, u))

    def cdf(self, u: float) -> float:
        return self.eval(u).cdf

    def pdf(self, u: float) -> float:
        if not 0.0 <= u <= 1.0:
            raise DomainError(f"u = {u!r} outside [0, 1]")
        ks, ps = self.terms()
        return _terms_pdf(ks, ps, u)

    def dpdf(self, u: float) -> float:
        return self.eval(u).dpdf

    def ppf(self, w: float) -> float:
        """Quantile function: u with |cdf(u) - w| <= 1e-12."""
        if not 0.0 <= w <= 1.0:
            raise DomainError(f"w = {w!r} outside [0, 1]")
        ks, ps = self.terms()
        return _terms_ppf(ks, ps, w)

    # -- vectorised evaluation (analysis paths; not used by the step loops)

    def cdf_array(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        out = np.zeros_like(u)
        for k, p in self._terms:
            if k >= 1:
                out += p * u**k
            else:
                out += p * (1.0 - (1.0 - u) ** (-k))
        return out

    def pdf_array(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        out = np.zeros_like(u)
        for k, p in self._terms:
            if k == 1:
                out += p
            elif k >= 2:
                out += p * k * u ** (k - 1)
            else:
                m = -k
                out += p * m * (1.0 - u) ** (m - 1)
        return out

    def dpdf_array(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        out = np.zeros_like(u)
        for k, p in self._terms:
            if k >= 2:
                out += p * k * (k - 1) * u ** (k - 2)
            elif k <= -2:
                m = -k
                out -= p * m * (m - 1) * (1.0 - u) ** (m - 2)
        return out

    # -- structural reports

    def curvature_bound(self) -> "CurvatureReport":
        """Closed-form bound sum k(k-1)(p_k + p_{-k}) on sup |pdf'|.

        The grid supremum of |pdf'| is returned alongside so callers can
        confirm the bound numerically.
        """
        bound = 0.0
        for k, p in self._terms:
            a = abs(k)
            if a >= 2:
                bound += a * (a - 1) * p
        u = np.linspace(0.0, 1.0, 4001)
        sup = float(np.max(np.abs(self.dpdf_array(u))))
        return CurvatureReport(bound=bound, sup_abs_dpdf=sup, holds=sup <= bound + 1e-12)

    def sf_array(self, u: np.ndarray) -> np.ndarray:
        """Survival function 1 - cdf(u), evaluated without cancellation.

        1 - u**k is expanded as (1-u) * (1 + u + ... + u**(k-1)) so the
        result stays accurate even where 1 - cdf(u) underflows the naive
        subtraction.
        """
        u = np.asarray(u, dtype=np.float64)
        one_minus = 1.0 - u
        out = np.zeros_like(u)
        for k, p in self._terms:
            if k >= 1:
                geom = np.zeros_like(u)
                power = np.ones_like(u)
                for _ in range(k):
                    geom += power
                    power *= u
                out += p * one_minus * geom
            else:
                out += p * one_minus ** (-k)
        return out

    def cdf_tail_bound(self, grid: np.ndarray | None = None) -> "TailBoundReport":
        """Fit the largest c with 1 - cdf(u) >= c * (1-u)**kappa on a grid.

        kappa is the largest smallest-of-|k| order present (1 if none).
        """
        kappa = 1
        for k, _ in self._terms:
            if k <= -2:
                kappa = max(kappa, -k)
        if grid is None:
            grid = 1.0 - np.geomspace(1e-9, 1.0, 2001)[::-1]
        u = np.asarray(grid, dtype=np.float64)
        u = u[(u > 0.0) & (u < 1.0)]
        ratio = self.sf_array(u) / (1.0 - u) ** kappa
        c = float(np.min(ratio))
        return TailBoundReport(coefficient=c, exponent=kappa, holds=c > 0.0)

    # -- serialization

    def to_json(self) -> str:
        return json.dumps({"weights": {str(k): p for k, p in self._terms}})

    @classmethod
    def from_json(cls, text: str) -> "PsiSpec":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid spec JSON: {exc}") from exc
        if not isinstance(obj, dict) or "weights" not in obj:
            raise ConfigError('spec JSON must be an object with a "weights" key')
        raw = obj["weights"]
        if not isinstance(raw, dict):
            raise ConfigError('"weights" must be an object of {order: weight}')
        weights = {}
        for key, value in raw.items():
            try:
                k = int(key)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"weight key {key!r} is not an integer string") from exc
            weights[k] = value
        return cls(weights)

    def label(self) -> str:
        """Preset name when the weights match one, else canonical weights."""
        for name, spec_weights in PRESET_WEIGHTS.items():
            if self.weights == {k: v for k, v in spec_weights.items() if v > 0}:
                return name
        return ",".join(f"{k}:{p:g}" for k, p in self._terms)


@dataclass(frozen=True)
class CurvatureReport:
    bound: float
    sup_abs_dpdf: float
    holds: bool


@dataclass(frozen=True)
class TailBoundReport:
    coefficient: float
    exponent: int
    holds: bool


# --- presets ---------------------------------------------------------------

PRESET_WEIGHTS: dict[str, dict[int, float]] = {
    "uniform": {1: 1.0},
    "max2": {2: 1.0},
    "max3": {3: 1.0},
    "min2": {-2: 1.0},
    "mix-60-40": {-2: 0.6, 2: 0.4},
    "mix-75-25": {1: 0.75, -2: 0.25},
}

_MAXMIN_RE = re.compile(r"^(max|min)(\d+)$")


def preset(name: str) -> PsiSpec:
    """Named spec: presets plus the max<k>/min<k> families."""
    if name in PRESET_WEIGHTS:
        return PsiSpec(PRESET_WEIGHTS[name])
    m = _MAXMIN_RE.match(name)
    if m:
        k = int(m.group(2))
        if not 1 <= k <= MAX_ORDER:
            raise ConfigError(f"order {k} outside [1, {MAX_ORDER}]")
        if k == 1:
            return PsiSpec({1: 1.0})
        return PsiSpec({k if m.group(1) == "max" else -k: 1.0})
    raise ConfigError(f"unknown spec preset {name!r}")


def max_k(k: int) -> PsiSpec:
    return preset(f"max{k}")


def min_k(k: int) -> PsiSpec:
    return preset(f"min{k}")


def two_term(p_min2: float) -> PsiSpec:
    """The two-term family p_{-2} = theta, p_2 = 1 - theta."""
    if not 0.0 <= p_min2 <= 1.0:
        raise ConfigError(f"p_min2 = {p_min2!r} outside [0, 1]")
    return PsiSpec({-2: p_min2, 2: 1.0 - p_min2})


def uniform_min_geometric(uniform_weight: float = 0.9995, ratio: float = 5.0,
                          max_order: int = MAX_ORDER) -> PsiSpec:
    """Mostly-uniform rule with a geometric tail of smallest-of-k components.

    p_{-k} is proportional to ratio**-k for k = 2..max_order; the truncated
    remainder of the geometric tail is folded into the last term.
    """
    if not 0.0 < uniform_weight < 1.0:
        raise ConfigError("uniform_weight must lie in (0, 1)")
    if ratio <= 1.0:
        raise ConfigError("ratio must exceed 1")
    rest = 1.0 - uniform_weight
    raw = [ratio ** -k for k in range(2, max_order + 1)]
    tail = (ratio ** -max_order) * (1.0 / (ratio - 1.0))
    raw[-1] += tail
    scale = rest / math.fsum(raw)
    weights: dict[int, float] = {1: uniform_weight}
    for k, r in zip(range(2, max_order + 1), raw):
        weights[-k] = r * scale
    return PsiSpec(weights)


def spec_from_any(value) -> PsiSpec:
    """Coerce a PsiSpec, preset name, weights map, or JSON text to a spec."""
    if isinstance(value, PsiSpec):
        return value
    if isinstance(value, Mapping):
        return PsiSpec(value)
    if isinstance(value, str):
        text = value.strip()
        if text.startswith("{"):
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid weights JSON: {exc}") from exc
            if isinstance(obj, dict) and "weights" in obj:
                return PsiSpec.from_json(text)
            try:
                return PsiSpec({int(k): v for k, v in obj.items()})
            except (TypeError, ValueError, AttributeError) as exc:
                raise ConfigError(f"invalid weights object: {exc}") from exc
        if ":" in text:
            weights = {}
            for pair in text.split(","):
                key, _, val = pair.partition(":")
                try:
                    weights[int(key.strip())] = float(val)
                except ValueError as exc:
                    raise ConfigError(f"invalid weight pair {pair!r}") from exc
            return PsiSpec(weights)
        return preset(text)
    raise ConfigError(f"cannot interpret {value!r} as a choice-rule spec")
