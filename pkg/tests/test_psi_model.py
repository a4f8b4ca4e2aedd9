"""Choice-rule model: validation, closed forms, derivatives, inversion."""

import json
import math

import numpy as np
import pytest

from psisplit.errors import ConfigError, DomainError
from psisplit.psi_model import (
    PRESET_WEIGHTS,
    PsiSpec,
    preset,
    spec_from_any,
    two_term,
    uniform_min_geometric,
)

from conftest import PRESET_NAMES

INTERIOR = np.linspace(0.02, 0.98, 49)


class TestValidation:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(ConfigError):
            PsiSpec({2: 0.5, 3: 0.6})

    @pytest.mark.parametrize("bad_key", [0, -1])
    def test_degenerate_orders_rejected(self, bad_key):
        with pytest.raises(ConfigError):
            PsiSpec({bad_key: 1.0})

    def test_order_magnitude_capped(self):
        with pytest.raises(ConfigError):
            PsiSpec({65: 1.0})

    def test_negative_weight_rejected(self):
        with pytest.raises(ConfigError):
            PsiSpec({2: 1.5, 3: -0.5})

    def test_non_integer_order_rejected(self):
        with pytest.raises(ConfigError):
            PsiSpec({2.5: 1.0})

    def test_zero_weights_dropped(self):
        s = PsiSpec({2: 1.0, 3: 0.0})
        assert s.weights == {2: 1.0}

    def test_weight_lookup(self):
        s = preset("mix-60-40")
        assert s.weight(-2) == 0.6
        assert s.weight(2) == 0.4
        assert s.weight(7) == 0.0


class TestClosedForms:
    """Exact CDFs for the nameable rules."""

    @pytest.mark.parametrize("u", INTERIOR)
    def test_uniform_is_identity(self, u):
        assert preset("uniform").cdf(u) == pytest.approx(u, abs=1e-15)

    @pytest.mark.parametrize("u", INTERIOR)
    def test_largest_of_two(self, u):
        assert preset("max2").cdf(u) == pytest.approx(u * u, abs=1e-15)

    @pytest.mark.parametrize("u", INTERIOR)
    def test_smallest_of_two(self, u):
        assert preset("min2").cdf(u) == pytest.approx(1 - (1 - u) ** 2, abs=1e-15)

    @pytest.mark.parametrize("u", [0.1, 0.5, 0.9])
    def test_two_term_mixture(self, u):
        s = two_term(0.6)
        want = 0.6 * (1 - (1 - u) ** 2) + 0.4 * u * u
        assert s.cdf(u) == pytest.approx(want, abs=1e-15)

    @pytest.mark.parametrize("name", PRESET_NAMES)
    def test_endpoints_and_monotone(self, name):
        s = preset(name)
        assert s.cdf(0.0) == 0.0
        assert s.cdf(1.0) == pytest.approx(1.0, abs=1e-12)
        grid = np.linspace(0.0, 1.0, 257)
        vals = s.cdf_array(grid)
        assert np.all(np.diff(vals) > 0.0), "CDF must be strictly increasing"

    def test_domain_errors(self):
        s = preset("max2")
        with pytest.raises(DomainError):
            s.cdf(-0.1)
        with pytest.raises(DomainError):
            s.pdf(1.1)
        with pytest.raises(DomainError):
            s.ppf(2.0)


class TestDerivativeOracles:
    """pdf and dpdf against central finite differences of the CDF."""

    @pytest.mark.parametrize("name", PRESET_NAMES)
    def test_pdf_matches_cdf_slope(self, name):
        s = preset(name)
        h = 1e-5
        for u in INTERIOR:
            fd = (s.cdf(u + h) - s.cdf(u - h)) / (2 * h)
            assert s.pdf(u) == pytest.approx(fd, abs=5e-8)

    @pytest.mark.parametrize("name", PRESET_NAMES)
    def test_dpdf_matches_pdf_slope(self, name):
        s = preset(name)
        h = 1e-5
        for u in INTERIOR:
            fd = (s.pdf(u + h) - s.pdf(u - h)) / (2 * h)
            assert s.dpdf(u) == pytest.approx(fd, abs=5e-7)

    @pytest.mark.parametrize("name", PRESET_NAMES)
    def test_vectorized_matches_scalar(self, name):
        s = preset(name)
        u = np.linspace(0.0, 1.0, 101)
        assert np.allclose(s.cdf_array(u), [s.cdf(x) for x in u], atol=5e-15)
        assert np.allclose(s.pdf_array(u), [s.pdf(x) for x in u], atol=1e-13)
        assert np.allclose(s.dpdf_array(u), [s.dpdf(x) for x in u], atol=1e-12)


class TestInverse:
    @pytest.mark.parametrize("name", PRESET_NAMES)
    def test_round_trip(self, name):
        s = preset(name)
        for u in INTERIOR:
            w = s.cdf(u)
            assert s.ppf(w) == pytest.approx(u, abs=1e-10)
        rng = np.random.default_rng(5)
        for w in rng.random(50):
            assert s.cdf(s.ppf(w)) == pytest.approx(w, abs=1e-10)

    def test_boundary_values(self):
        s = preset("max3")
        assert s.ppf(0.0) == 0.0
        assert s.ppf(1.0) == 1.0


class TestCurvature:
    @pytest.mark.parametrize(
        "name,want",
        [("uniform", 0.0), ("max2", 2.0), ("max3", 6.0), ("min2", 2.0),
         ("mix-60-40", 2.0), ("mix-75-25", 0.5)],
    )
    def test_bound_constant(self, name, want):
        # independent arithmetic: sum |k|(|k|-1)(p_k + p_{-k})
        s = preset(name)
        by_hand = sum(abs(k) * (abs(k) - 1) * p for k, p in s.weights.items())
        rep = s.curvature_bound()
        assert by_hand == pytest.approx(want, abs=1e-15)
        assert rep.bound == pytest.approx(want, abs=1e-15)
        assert rep.holds
        assert rep.sup_abs_dpdf <= rep.bound + 1e-12

    def test_tail_lower_bound(self):
        rep = preset("min2").cdf_tail_bound()
        assert rep.exponent == 2
        assert rep.holds
        # 1 - cdf = (1-u)^2 exactly, so the fitted coefficient is 1
        assert rep.coefficient == pytest.approx(1.0, rel=1e-9)


class TestFamiliesAndParsing:
    def test_two_term_weights(self):
        assert two_term(0.6).weights == {-2: 0.6, 2: 0.4}
        assert two_term(1.0).weights == {-2: 1.0}
        with pytest.raises(ConfigError):
            two_term(1.5)

    def test_uniform_min_geometric(self):
        s = uniform_min_geometric(uniform_weight=0.999, ratio=5.0)
        w = s.weights
        assert w[1] == 0.999
        assert sum(w.values()) == pytest.approx(1.0, abs=1e-12)
        assert all(k == 1 or k <= -2 for k in w)
        # geometric decay of the small-gap weights
        assert w[-2] > w[-3] > w[-4]
        with pytest.raises(ConfigError):
            uniform_min_geometric(ratio=0.5)

    def test_preset_patterns(self):
        assert preset("max5").weights == {5: 1.0}
        assert preset("min3").weights == {-3: 1.0}
        with pytest.raises(ConfigError):
            preset("nope")

    def test_preset_table_is_normalized(self):
        for name, w in PRESET_WEIGHTS.items():
            assert sum(w.values()) == pytest.approx(1.0, abs=1e-12), name

    def test_spec_from_any(self):
        s = preset("max2")
        assert spec_from_any(s) is s
        assert spec_from_any({2: 1.0}).weights == {2: 1.0}
        assert spec_from_any("max2").weights == {2: 1.0}
        assert spec_from_any("2:0.4,-2:0.6").weights == {-2: 0.6, 2: 0.4}
        with pytest.raises(ConfigError):
            spec_from_any("2:0.4,-2")
        with pytest.raises(ConfigError):
            spec_from_any(42)

    def test_json_round_trip(self):
        s = preset("mix-75-25")
        blob = s.to_json()
        json.loads(blob)  # must be valid JSON
        back = PsiSpec.from_json(blob)
        assert back.weights == s.weights
        assert back.label() == s.label()

    def test_label_round_trips_through_parser(self):
        for name in PRESET_NAMES:
            s = preset(name)
            again = spec_from_any(s.label())
            assert again.weights == pytest.approx(s.weights)
