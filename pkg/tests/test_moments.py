"""Tests for monomial norms, norm tables and the Monte-Carlo orthogonality check."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from ehbalanced.models import MonomialIndex, NormMethod, describe_validation_error
from ehbalanced.moments import (
    MomentDomainError,
    MonomialNormTable,
    ParityError,
    build_table,
    closed_norm_even_gap,
    closed_norm_gap2,
    closed_norm_min,
    log_closed_norm_even_gap,
    log_norm_squared,
    log_radial_integral,
    monte_carlo_inner_product,
    norm_squared,
    radial_integral,
)


class TestClosedForms:
    """Tests for the incomplete-Gamma closed forms."""

    def test_minimal_degree_level_one(self):
        """Test ‖z1‖² = 7/(2e) at m = 1."""
        assert closed_norm_min(1) == pytest.approx(7 / (2 * math.e), rel=1e-14)

    def test_gap_two_level_one(self):
        """Test ‖z1³‖² = 74/(4e) at m = 1."""
        assert closed_norm_gap2(1) == pytest.approx(74 / (4 * math.e), rel=1e-14)

    def test_minimal_degree_level_two(self):
        """Test ‖z1²‖² = 90/(48e²) at m = 2."""
        assert closed_norm_min(2) == pytest.approx(90 / (48 * math.e**2), rel=1e-14)

    def test_general_even_gap_reduces(self):
        """Test that gaps 0 and 2 of the general form match the dedicated ones."""
        for m in (1, 2, 7, 30):
            assert closed_norm_even_gap(MonomialIndex(j=m, k=0, m=m)) == pytest.approx(
                closed_norm_min(m), rel=1e-12
            )
            assert closed_norm_even_gap(MonomialIndex(j=m + 2, k=0, m=m)) == pytest.approx(
                closed_norm_gap2(m), rel=1e-10
            )

    def test_matches_quadrature_up_to_fifty(self):
        """Test closed forms against quadrature for m = 1..50."""
        for m in range(1, 51):
            minimal = MonomialIndex(j=m, k=0, m=m)
            gap2 = MonomialIndex(j=m + 2, k=0, m=m)
            assert math.log(closed_norm_min(m)) == pytest.approx(log_norm_squared(minimal), abs=1e-9)
            assert math.log(closed_norm_gap2(m)) == pytest.approx(log_norm_squared(gap2), abs=1e-9)

    def test_even_gap_grid(self):
        """Test the general even-gap form on a grid of levels, gaps and splits."""
        for m in (1, 2, 5, 12):
            for q in range(4):
                degree = m + 2 * q
                for j in (0, degree // 2, degree):
                    idx = MonomialIndex(j=j, k=degree - j, m=m)
                    assert log_closed_norm_even_gap(idx) == pytest.approx(
                        log_norm_squared(idx), abs=1e-9
                    )

    def test_odd_gap_rejected(self):
        """Test ParityError for an odd degree gap."""
        with pytest.raises(ParityError):
            closed_norm_even_gap(MonomialIndex(j=2, k=0, m=1))

    def test_level_must_be_positive(self):
        """Test that m = 0 is rejected."""
        with pytest.raises(MomentDomainError):
            closed_norm_min(0)
        with pytest.raises(MomentDomainError):
            closed_norm_gap2(0)


class TestQuadrature:
    """Tests for the radial integral."""

    def test_known_value(self):
        """Test I(3, 1) = 7/(2e)."""
        assert radial_integral(3, 1) == pytest.approx(7 / (2 * math.e), rel=1e-10)

    def test_large_level_is_finite(self):
        """Test that log I stays finite where I itself underflows."""
        value = log_radial_integral(5, 3000)
        assert math.isfinite(value)
        assert value < -745

    def test_odd_gap_norm(self):
        """Test that quadrature norms on odd gaps are positive and finite."""
        m = 3
        norms = [norm_squared(MonomialIndex(j=d, k=0, m=m)) for d in range(m, m + 4)]
        assert all(n > 0 for n in norms)
        assert all(math.isfinite(n) for n in norms)

    def test_exponent_out_of_range(self):
        """Test MomentDomainError for p < 3."""
        with pytest.raises(MomentDomainError):
            log_radial_integral(1, 2)

    def test_vanishing_order(self):
        """Test that j + k < m is not a section."""
        with pytest.raises(ValueError):
            MonomialIndex(j=0, k=1, m=2)

    def test_vanishing_order_message(self):
        """Test the one-line message naming the model and the monomial."""
        with pytest.raises(ValidationError) as info:
            MonomialIndex(j=0, k=0, m=1)
        assert describe_validation_error(info.value) == (
            "models.MonomialIndex: monomial z1^0 z2^0 vanishes to order 0 < m=1"
        )


class TestNormTable:
    """Tests for MonomialNormTable."""

    def test_counts(self):
        """Test the number of rows for small tables."""
        assert len(build_table(1, 1)) == 2
        assert len(build_table(2, 4)) == 12

    def test_iteration_order_and_methods(self):
        """Test rows by degree then j, closed forms on even gaps only."""
        table = build_table(2, 5)
        rows = list(table)
        assert [(e.j, e.k) for e in rows[:3]] == [(0, 2), (1, 1), (2, 0)]
        for e in rows:
            expected = NormMethod.CLOSED_FORM if (e.j + e.k - 2) % 2 == 0 else NormMethod.QUADRATURE
            assert e.method == expected

    def test_values(self):
        """Test table entries against the single-monomial functions."""
        table = build_table(1, 4)
        assert table.log_norm(1, 0) == pytest.approx(math.log(7 / (2 * math.e)), abs=1e-14)
        assert table.log_norm(1, 1) == pytest.approx(log_norm_squared(MonomialIndex(j=1, k=1, m=1)), abs=1e-9)

    def test_exchange_symmetry(self):
        """Test that (j, k) and (k, j) agree exactly."""
        table = build_table(3, 9)
        for e in table:
            assert table.log_norm(e.k, e.j) == e.log_norm

    def test_extend(self):
        """Test that extending a table matches building it directly."""
        small = build_table(2, 4)
        extended = small.extend(7)
        direct = build_table(2, 7)
        assert extended.dmax == 7
        assert len(extended) == len(direct)
        for e in direct:
            assert extended.log_norm(e.j, e.k) == e.log_norm
        assert small.extend(3) is small

    def test_parallel_matches_serial(self):
        """Test that a process pool gives the same table."""
        serial = build_table(2, 8)
        parallel = build_table(2, 8, workers=2)
        assert [e.log_norm for e in parallel] == [e.log_norm for e in serial]

    def test_from_entries(self):
        """Test rebuilding a table from its rows."""
        table = build_table(1, 5)
        rebuilt = MonomialNormTable.from_entries(list(table))
        assert rebuilt.m == 1
        assert rebuilt.dmax == 5
        np.testing.assert_array_equal(rebuilt.degree_log_norms(4), table.degree_log_norms(4))

    def test_from_entries_errors(self):
        """Test that incomplete or mixed rows are rejected."""
        rows = list(build_table(1, 3))
        with pytest.raises(MomentDomainError):
            MonomialNormTable.from_entries(rows[:-1])
        with pytest.raises(MomentDomainError):
            MonomialNormTable.from_entries(rows + list(build_table(2, 2)))
        with pytest.raises(MomentDomainError):
            MonomialNormTable.from_entries([])

    def test_outside_table(self):
        """Test lookups outside the computed range."""
        table = build_table(2, 3)
        with pytest.raises(MomentDomainError):
            table.entry(2, 2)

    def test_invalid_range(self):
        """Test dmax < m."""
        with pytest.raises(MomentDomainError):
            build_table(3, 2)


class TestMonteCarlo:
    """Tests for the sampled inner products."""

    PAIRS = [
        ((2, 0), (1, 1)),
        ((2, 0), (0, 2)),
        ((1, 1), (0, 2)),
        ((3, 0), (2, 1)),
        ((3, 0), (1, 2)),
        ((2, 1), (0, 3)),
        ((2, 0), (3, 1)),
        ((1, 1), (2, 2)),
        ((4, 0), (0, 4)),
        ((2, 2), (3, 1)),
    ]

    @pytest.mark.parametrize("a, b", PAIRS)
    def test_distinct_monomials_orthogonal(self, a, b):
        """Test that the sample mean of distinct monomials vanishes within its error bar."""
        estimate = monte_carlo_inner_product(a, b, m=2)
        assert estimate.stderr_real > 0
        assert estimate.is_zero_within(4.0)

    def test_plain_mean_is_not_cancelled(self):
        """Test that only the stratified mean cancels a distinct pair exactly."""
        estimate = monte_carlo_inner_product((2, 0), (1, 1), m=2, samples=2)
        assert estimate.real != 0.0
        assert abs(estimate.stratified_real) < 1e-12 * estimate.stderr_real

    def test_diagonal_matches_norm(self):
        """Test ⟨z1², z1²⟩ against the closed form at m = 2 within four standard errors."""
        estimate = monte_carlo_inner_product((2, 0), (2, 0), m=2, samples=40_000)
        expected = closed_norm_min(2)
        assert 0 < estimate.stderr_real < 0.05 * expected
        assert abs(estimate.real - expected) <= 4.0 * estimate.stderr_real
        assert estimate.imag == 0.0
        assert estimate.stratified_real == estimate.real

    def test_wrong_level_is_detected(self):
        """Test that the m = 2 norm is rejected by a sample drawn at level 3."""
        estimate = monte_carlo_inner_product((3, 0), (3, 0), m=3, samples=40_000)
        assert abs(estimate.real - closed_norm_min(2)) > 4.0 * estimate.stderr_real

    def test_seeded(self):
        """Test that a fixed seed reproduces the estimate."""
        first = monte_carlo_inner_product((2, 0), (1, 1), m=2, samples=1000, seed=5)
        second = monte_carlo_inner_product((2, 0), (1, 1), m=2, samples=1000, seed=5)
        assert first == second

    def test_invalid_monomial(self):
        """Test that a monomial vanishing to low order is rejected."""
        with pytest.raises(ValueError):
            monte_carlo_inner_product((1, 0), (2, 0), m=2)
