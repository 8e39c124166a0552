"""Tests for the potential, charts, weight and metric checks."""

import cmath
import math

import numpy as np
import pytest

from ehbalanced.eh_geometry import (
    GeometryDomainError,
    StepSizeError,
    chart_potential,
    chart_to_point,
    complex_hessian,
    log_weight,
    metric_determinant,
    metric_matrix,
    metric_matrix_exact,
    point_to_chart,
    potential,
    potential_derivative,
    potential_second_derivative,
    radial_potential,
    ricci_defect,
    weight,
)
from ehbalanced.models import Chart, ChartPoint, HermitianWeight, PointC2


class TestPotential:
    """Tests for Φ on C^2 minus the origin."""

    def test_unit_sphere_value(self):
        """Test Φ at |z|^2 = 1 equals √2 − log(1+√2)."""
        p = PointC2(z1=1, z2=0)
        assert potential(p) == pytest.approx(math.sqrt(2) - math.log(1 + math.sqrt(2)), abs=1e-15)
        assert potential(p) == pytest.approx(0.5328399753535521, abs=1e-12)

    def test_small_radius_limit(self):
        """Test Φ − log|z|^2 → 1 − log 2 as |z| → 0."""
        s = 1e-10
        assert radial_potential(s) - math.log(s) == pytest.approx(1 - math.log(2), abs=1e-9)

    def test_large_radius_no_overflow(self):
        """Test that Φ is finite and close to |z|^2 far out."""
        s = 1e150
        value = radial_potential(s)
        assert math.isfinite(value)
        assert value == pytest.approx(s, rel=1e-12)

    def test_origin_rejected(self):
        """Test that the origin raises GeometryDomainError."""
        with pytest.raises(GeometryDomainError):
            potential(PointC2(z1=0, z2=0))
        with pytest.raises(ValueError):
            radial_potential(0.0)

    def test_radial_and_symmetric(self):
        """Test invariance under phases and under z1 ↔ z2."""
        z1, z2 = 0.8 - 0.3j, 1.1 + 0.45j
        reference = potential(PointC2(z1=z1, z2=z2))
        for theta in np.linspace(0.0, 2 * math.pi, 9):
            rotated = PointC2(z1=z1 * cmath.exp(1j * theta), z2=z2 * cmath.exp(-2j * theta))
            assert potential(rotated) == pytest.approx(reference, rel=1e-14)
        assert potential(PointC2(z1=z2, z2=z1)) == pytest.approx(reference, rel=1e-15)

    def test_derivative(self):
        """Test dΦ/ds against a central difference."""
        for s in (0.05, 0.7, 3.0, 40.0):
            h = 1e-6 * s
            numeric = (radial_potential(s + h) - radial_potential(s - h)) / (2 * h)
            assert potential_derivative(s) == pytest.approx(numeric, rel=1e-7)


class TestCharts:
    """Tests for the blow-up charts."""

    def test_divisor_value(self):
        """Test that both charts give 1 − log 2 at the chart origin."""
        for chart in Chart:
            c = ChartPoint(chart=chart, w1=0, w2=0)
            assert chart_potential(c) == pytest.approx(1 - math.log(2), abs=1e-15)

    def test_compatible_with_potential(self):
        """Test Φ(chart point) = chart potential + log|w1|^2 in U1."""
        c = ChartPoint(chart=Chart.U1, w1=0.6 + 0.2j, w2=-0.4 + 1.3j)
        p = chart_to_point(c)
        expected = chart_potential(c) + math.log(abs(c.w1) ** 2)
        assert potential(p) == pytest.approx(expected, abs=1e-14)

    def test_compatible_in_second_chart(self):
        """Test Φ(chart point) = chart potential + log|w2|^2 in U2."""
        c = ChartPoint(chart=Chart.U2, w1=2.0 - 0.5j, w2=0.3j)
        p = chart_to_point(c)
        expected = chart_potential(c) + math.log(abs(c.w2) ** 2)
        assert potential(p) == pytest.approx(expected, abs=1e-14)

    def test_difference_is_pluriharmonic(self):
        """Test that ∂∂̄ of Φ∘chart − chart potential vanishes."""

        def difference(v: np.ndarray) -> float:
            c = ChartPoint(chart=Chart.U1, w1=complex(v[0], v[1]), w2=complex(v[2], v[3]))
            return potential(chart_to_point(c)) - chart_potential(c)

        hess = complex_hessian(difference, np.array([0.7, 0.2, 0.3, -0.5]))
        assert np.max(np.abs(hess)) < 1e-6

    def test_round_trip(self):
        """Test point_to_chart followed by chart_to_point."""
        p = PointC2(z1=0.5 + 0.5j, z2=-1.5 + 0.1j)
        for chart in Chart:
            back = chart_to_point(point_to_chart(p, chart))
            assert back.z1 == pytest.approx(p.z1, abs=1e-15)
            assert back.z2 == pytest.approx(p.z2, abs=1e-15)

    def test_divisor_has_no_image(self):
        """Test that chart_to_point rejects points on the exceptional divisor."""
        with pytest.raises(GeometryDomainError):
            chart_to_point(ChartPoint(chart=Chart.U1, w1=0, w2=0.5))
        with pytest.raises(GeometryDomainError):
            chart_to_point(ChartPoint(chart=Chart.U2, w1=1.0, w2=0))

    def test_uncovered_point(self):
        """Test that U1 does not cover z1 = 0."""
        with pytest.raises(GeometryDomainError):
            point_to_chart(PointC2(z1=0, z2=1), Chart.U1)


class TestWeight:
    """Tests for the quantization weight w_m."""

    @staticmethod
    def _definition(m: int, s: float) -> float:
        t = math.sqrt(s * s + 1)
        return -m * t + m * math.log(1 + t) - m * math.log(s)

    def test_is_minus_m_phi(self):
        """Test log w_m = −m·Φ."""
        for m in (1, 3, 17):
            for p in (PointC2(z1=1, z2=0), PointC2(z1=0.1j, z2=0.2), PointC2(z1=4, z2=-3j)):
                assert log_weight(HermitianWeight(m=m), p) == pytest.approx(-m * potential(p), abs=1e-13)

    def test_matches_definition(self):
        """Test against the expanded formula at moderate |z|^2."""
        for m in (1, 2, 5):
            for s in (0.3, 1.0, 2.0, 9.0):
                p = PointC2.from_moduli(s / 2, s / 2)
                assert log_weight(HermitianWeight(m=m), p) == pytest.approx(
                    self._definition(m, s), abs=1e-12 * m * max(1.0, s)
                )

    def test_unit_value(self):
        """Test w_1 at |z|^2 = 1."""
        assert weight(HermitianWeight(m=1), PointC2(z1=1, z2=0)) == pytest.approx(
            (1 + math.sqrt(2)) * math.exp(-math.sqrt(2)), rel=1e-14
        )

    def test_level_must_be_positive(self):
        """Test that m = 0 is rejected."""
        with pytest.raises(ValueError):
            HermitianWeight(m=0)


class TestMetric:
    """Tests for the finite-difference metric and Ricci checks."""

    def test_known_matrix(self):
        """Test g at (1, 0): diag(1/√2, √2)."""
        g = metric_matrix(PointC2(z1=1, z2=0))
        np.testing.assert_allclose(
            g, np.diag([1 / math.sqrt(2), math.sqrt(2)]).astype(complex), atol=1e-8
        )

    def test_hermitian(self):
        """Test that g is exactly Hermitian."""
        g = metric_matrix(PointC2(z1=0.4 + 0.9j, z2=-1.2 + 0.3j))
        assert np.array_equal(g, g.conj().T)

    def test_asymptotically_flat(self):
        """Test g ≈ identity at |z| = 50."""
        g = metric_matrix(PointC2(z1=30, z2=40j), h=1e-2)
        np.testing.assert_allclose(g, np.eye(2), atol=1e-6)

    def test_positive_definite_on_random_points(self):
        """Test positivity and det g ≈ 1 at 100 random points."""
        rng = np.random.default_rng(7)
        for _ in range(100):
            radius = math.exp(rng.uniform(math.log(0.1), math.log(10.0)))
            direction = rng.normal(size=4)
            v = radius * direction / np.linalg.norm(direction)
            p = PointC2(z1=complex(v[0], v[1]), z2=complex(v[2], v[3]))
            g = metric_matrix(p, h=1e-2 * min(1.0, radius))
            assert np.all(np.linalg.eigvalsh(g) > 0)
            assert np.linalg.det(g).real == pytest.approx(1.0, abs=1e-5)

    def test_closed_form_known_matrix(self):
        """Test the closed-form metric at (1, 0)."""
        g = metric_matrix_exact(PointC2(z1=1, z2=0))
        np.testing.assert_allclose(g, np.diag([1 / math.sqrt(2), math.sqrt(2)]), atol=1e-15)

    def test_closed_form_matches_differences(self):
        """Test the finite-difference metric against the closed form, off-diagonal included."""
        rng = np.random.default_rng(11)
        for _ in range(20):
            v = rng.uniform(-2.0, 2.0, size=4)
            if np.linalg.norm(v) < 0.5:
                continue
            p = PointC2(z1=complex(v[0], v[1]), z2=complex(v[2], v[3]))
            exact = metric_matrix_exact(p)
            np.testing.assert_allclose(metric_matrix(p), exact, atol=1e-7)
            assert np.linalg.det(exact).real == pytest.approx(1.0, abs=1e-13)

    def test_second_derivative(self):
        """Test d²Φ/ds² against a central difference of dΦ/ds."""
        for s in (0.2, 1.0, 7.5):
            h = 1e-5 * s
            numeric = (potential_derivative(s + h) - potential_derivative(s - h)) / (2 * h)
            assert potential_second_derivative(s) == pytest.approx(numeric, rel=1e-7)

    def test_determinant(self):
        """Test metric_determinant at a generic point."""
        assert metric_determinant(PointC2(z1=0.5, z2=0.5j)) == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("z1, z2", [(1.0, 0.5), (3.0, 0.0), (0.4j, -0.7)])
    def test_ricci_flat(self, z1, z2):
        """Test that the Ricci defect is below 1e-4."""
        assert ricci_defect(PointC2(z1=z1, z2=z2)) < 1e-4

    def test_bad_step(self):
        """Test that nonpositive steps are rejected."""
        p = PointC2(z1=1, z2=0)
        with pytest.raises(StepSizeError):
            metric_matrix(p, h=0.0)
        with pytest.raises(StepSizeError):
            ricci_defect(p, h=-1e-3)
