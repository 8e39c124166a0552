"""Norms of the monomials z1^j z2^k at level m.

‖z1^j z2^k‖² = (2·j!k!/(j+k+1)!)·I(p, m), where
I(p, m) = ∫_0^∞ e^{−m√(r⁴+1)}(1+√(r⁴+1))^m r^p dr and p = 2(j+k−m+1)+1.
Norms are kept as logarithms throughout.
"""

import logging
import math
import multiprocessing
import warnings
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from typing import Iterable, Iterator, Optional

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .eh_geometry import radial_potential
from .models import MonomialIndex, MonteCarloEstimate, NormEntry, NormMethod
from .special_functions import (
    beta_angular,
    gamma_upper_int_sums,
    log_fraction,
    log_gamma_upper_int,
)

logger = logging.getLogger(__name__)

QUAD_EPSREL = 1.0e-11
QUAD_LIMIT = 200
ACCEPTED_ERROR = 1.0e-10
MAX_RADIUS = 1.0e100
DEFAULT_SEED = 20240517


class MomentDomainError(ValueError):
    """Exponent or monomial outside the convergent range."""

    pass


class ParityError(ValueError):
    """Closed form requested for an odd degree gap."""

    pass


class QuadratureError(ArithmeticError):
    """Adaptive quadrature did not meet its tolerance."""

    pass


def _log_integrand(r: float, p: int, m: int) -> float:
    t = math.hypot(r * r, 1.0)
    return m * (math.log1p(t) - t) + p * math.log(r)


def _integrate(func, lower: float, upper: float, label: str) -> tuple[float, float]:
    with warnings.catch_warnings(record=True) as messages:
        warnings.simplefilter("always", category=IntegrationWarning)
        value, abserr = quad(func, lower, upper, epsabs=0.0, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT)
    if messages:
        raise QuadratureError(f"moments.radial_integral: {label}: {messages[0].message}")
    return value, abserr


def log_radial_integral(p: int, m: int) -> float:
    """Return log I(p, m) by two-panel adaptive quadrature.

    The integrand is split at its peak r* (t* = 1 + p/(2m)); the tail
    [r*, ∞) is mapped to [0, 1) by r = r*/(1 − s). Both panels integrate
    exp(L(r) − L(r*)), so nothing underflows.

    Raises:
        MomentDomainError: If p < 3 or m < 1
        QuadratureError: If a panel does not converge
    """
    if m < 1 or p < 3:
        raise MomentDomainError(
            f"moments.radial_integral: need p >= 3 and m >= 1, got p={p}, m={m}"
        )
    t_peak = 1.0 + p / (2.0 * m)
    r_peak = (t_peak * t_peak - 1.0) ** 0.25
    log_peak = _log_integrand(r_peak, p, m)

    def head(r: float) -> float:
        if r <= 0.0:
            return 0.0
        return math.exp(_log_integrand(r, p, m) - log_peak)

    def tail(s: float) -> float:
        if s >= 1.0:
            return 0.0
        r = r_peak / (1.0 - s)
        if r > MAX_RADIUS:
            return 0.0
        return math.exp(_log_integrand(r, p, m) - log_peak) * r_peak / (1.0 - s) ** 2

    label = f"p={p}, m={m}"
    head_value, head_err = _integrate(head, 0.0, r_peak, f"{label} head panel")
    tail_value, tail_err = _integrate(tail, 0.0, 1.0, f"{label} tail panel")
    total = head_value + tail_value
    if not total > 0 or head_err + tail_err > ACCEPTED_ERROR * total:
        raise QuadratureError(
            f"moments.radial_integral: {label}: error estimate {head_err + tail_err:.3e} "
            f"exceeds tolerance for value {total:.6e}"
        )
    logger.debug(f"I({label}) = exp({log_peak:.6f})·{total:.15g} (r*={r_peak:.6g})")
    return log_peak + math.log(total)


def radial_integral(p: int, m: int) -> float:
    """Return I(p, m) = ∫_0^∞ e^{−m√(r⁴+1)}(1+√(r⁴+1))^m r^p dr."""
    return math.exp(log_radial_integral(p, m))


def log_norm_squared(idx: MonomialIndex) -> float:
    """log ‖z1^j z2^k‖²_{h_m} by quadrature."""
    prefactor = 4 * beta_angular(idx.j, idx.k)
    return log_fraction(prefactor) + log_radial_integral(idx.radial_exponent, idx.m)


def norm_squared(idx: MonomialIndex) -> float:
    """Return ‖z1^j z2^k‖²_{h_m} = (2·j!k!/(j+k+1)!)·I(p, m)."""
    return math.exp(log_norm_squared(idx))


def log_min_denominator(m: int) -> float:
    """log(Γ(m+2, 2m) − m·Γ(m+1, 2m)) = log(Γ(m+1, 2m) + (2m)^{m+1}e^{−2m})."""
    return float(
        np.logaddexp(log_gamma_upper_int(m, 2.0 * m), (m + 1) * math.log(2.0 * m) - 2.0 * m)
    )


def log_gap2_denominator(m: int) -> float:
    """log(Γ(m+4, 2m) − 3m·Γ(m+3, 2m) + 2m²·Γ(m+2, 2m)).

    Reduced by the recurrence to (6 − m)·Γ(m+2, 2m) + 3·(2m)^{m+2}e^{−2m}.
    """
    log_gamma = log_gamma_upper_int(m + 1, 2.0 * m)
    log_power = (m + 2) * math.log(2.0 * m) - 2.0 * m
    return log_power + math.log((6 - m) * math.exp(log_gamma - log_power) + 3.0)


def closed_norm_min(m: int) -> float:
    """‖z1^m‖² = (1/(m²(m+1)))·(e/m)^m·(Γ(m+2, 2m) − m·Γ(m+1, 2m))."""
    if m < 1:
        raise MomentDomainError(f"moments.closed_norm_min: m must be >= 1, got {m}")
    return math.exp(
        -math.log(m * m * (m + 1)) + m * (1.0 - math.log(m)) + log_min_denominator(m)
    )


def closed_norm_gap2(m: int) -> float:
    """‖z1^{m+2}‖² = (1/(m⁴(m+3)))·(e/m)^m·(Γ(m+4, 2m) − 3mΓ(m+3, 2m) + 2m²Γ(m+2, 2m))."""
    if m < 1:
        raise MomentDomainError(f"moments.closed_norm_gap2: m must be >= 1, got {m}")
    return math.exp(
        -math.log(m**4 * (m + 3)) + m * (1.0 - math.log(m)) + log_gap2_denominator(m)
    )


def _even_gap_polynomial(m: int, q: int) -> list[int]:
    """Integer coefficients of s^{m+q}(s−1)(s−2)^q, lowest power first."""
    coeffs = [0] * (m + 2 * q + 2)
    for i in range(q + 1):
        c = math.comb(q, i) * (-2) ** (q - i)
        coeffs[m + q + i + 1] += c
        coeffs[m + q + i] -= c
    return coeffs


def _radial_fraction(m: int, q: int) -> Fraction:
    """Exact R with I(p, m) = ½·e^{−m}·R for the degree gap 2q."""
    coeffs = _even_gap_polynomial(m, q)
    top = len(coeffs) - 1
    sums = gamma_upper_int_sums(top, 2 * m)
    numerator = sum(c * sums[i] * m ** (top - i) for i, c in enumerate(coeffs) if c)
    return Fraction(numerator, m ** (top + 1))


def log_closed_norm_even_gap(idx: MonomialIndex) -> float:
    """log ‖z1^j z2^k‖² for an even degree gap j + k − m, exactly up to the final log."""
    if idx.gap % 2:
        raise ParityError(
            f"moments.closed_norm_even_gap: gap j+k-m = {idx.gap} is odd for ({idx.j}, {idx.k}, {idx.m})"
        )
    radial = _radial_fraction(idx.m, idx.gap // 2)
    return log_fraction(2 * beta_angular(idx.j, idx.k) * radial) - idx.m


def closed_norm_even_gap(idx: MonomialIndex) -> float:
    """‖z1^j z2^k‖² from a finite combination of Γ(n, 2m) values.

    With t = √(r⁴+1) and s = 1 + t the radial integrand becomes
    e^{m}e^{−ms}s^{m+q}(s−1)(s−2)^q on [2, ∞), a polynomial times an
    exponential; q = 0 and q = 1 give closed_norm_min and closed_norm_gap2.
    """
    return math.exp(log_closed_norm_even_gap(idx))


def _log_radial_for_degree(m: int, degree: int) -> tuple[float, NormMethod]:
    """log I for every monomial of one total degree; the radial part is shared."""
    gap = degree - m
    if gap % 2 == 0:
        radial = _radial_fraction(m, gap // 2)
        return log_fraction(radial / 2) - m, NormMethod.CLOSED_FORM
    return log_radial_integral(2 * (gap + 1) + 1, m), NormMethod.QUADRATURE


class MonomialNormTable:
    """log ‖z1^j z2^k‖² for all j + k in [m, dmax].

    A table is not modified after construction; extend returns a new table
    sharing the existing rows.
    """

    def __init__(self, m: int, dmax: int, entries: dict[tuple[int, int], NormEntry]) -> None:
        self.m = m
        self.dmax = dmax
        self._entries = dict(entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: tuple[int, int]) -> bool:
        return key in self._entries

    def __iter__(self) -> Iterator[NormEntry]:
        """Rows in ascending total degree, then ascending j."""
        for degree in range(self.m, self.dmax + 1):
            for j in range(degree + 1):
                yield self._entries[(j, degree - j)]

    def entry(self, j: int, k: int) -> NormEntry:
        try:
            return self._entries[(j, k)]
        except KeyError:
            raise MomentDomainError(
                f"moments.MonomialNormTable: ({j}, {k}) is outside the table "
                f"(m={self.m}, dmax={self.dmax})"
            ) from None

    def log_norm(self, j: int, k: int) -> float:
        return self.entry(j, k).log_norm

    def degree_log_norms(self, degree: int) -> np.ndarray:
        """log norms of (j, degree − j) for j = 0..degree."""
        return np.array([self._entries[(j, degree - j)].log_norm for j in range(degree + 1)])

    def extend(self, dmax: int, workers: int = 1) -> "MonomialNormTable":
        """Return a table covering degrees up to dmax."""
        if dmax <= self.dmax:
            return self
        extra = build_table(self.m, dmax, workers=workers, start=self.dmax + 1)
        entries = dict(self._entries)
        entries.update(extra._entries)
        return MonomialNormTable(self.m, dmax, entries)

    @classmethod
    def from_entries(cls, entries: Iterable[NormEntry]) -> "MonomialNormTable":
        """Rebuild a table from rows, e.g. parsed from CSV."""
        rows = list(entries)
        if not rows:
            raise MomentDomainError("moments.MonomialNormTable: no rows")
        levels = {e.m for e in rows}
        if len(levels) != 1:
            raise MomentDomainError(f"moments.MonomialNormTable: mixed levels {sorted(levels)}")
        m = levels.pop()
        dmax = max(e.j + e.k for e in rows)
        entries = {(e.j, e.k): e for e in rows}
        missing = [
            (j, d - j) for d in range(m, dmax + 1) for j in range(d + 1) if (j, d - j) not in entries
        ]
        if missing:
            raise MomentDomainError(f"moments.MonomialNormTable: missing entries {missing[:5]}")
        return cls(m, dmax, entries)


def build_table(m: int, dmax: int, workers: int = 1, start: Optional[int] = None) -> MonomialNormTable:
    """Build the norm table for all j + k in [start or m, dmax].

    Closed forms are used for even degree gaps, quadrature for odd ones.
    With workers > 1 the degrees are computed in a process pool.
    """
    if m < 1:
        raise MomentDomainError(f"moments.build_table: m must be >= 1, got {m}")
    if dmax < m:
        raise MomentDomainError(f"moments.build_table: dmax={dmax} is below m={m}")
    first = m if start is None else start
    degrees = list(range(first, dmax + 1))
    if workers > 1 and len(degrees) > 1:
        # spawn: tables may be extended from worker threads
        context = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=context) as pool:
            radial = list(pool.map(_log_radial_for_degree, [m] * len(degrees), degrees))
    else:
        radial = [_log_radial_for_degree(m, d) for d in degrees]

    entries = {}
    for degree, (log_radial, method) in zip(degrees, radial):
        for j in range(degree + 1):
            k = degree - j
            # beta_angular is exactly symmetric, so (j, k) and (k, j) agree bit for bit
            log_norm = log_fraction(4 * beta_angular(j, k)) + log_radial
            entries[(j, k)] = NormEntry(j=j, k=k, m=m, log_norm=log_norm, method=method)
    logger.info(f"built norm table m={m} degrees {first}..{dmax}: {len(entries)} entries")
    return MonomialNormTable(m, dmax, entries)


def monte_carlo_inner_product(
    a: tuple[int, int],
    b: tuple[int, int],
    m: int,
    samples: int = 20_000,
    seed: int = DEFAULT_SEED,
) -> MonteCarloEstimate:
    """Estimate ⟨z^a, z^b⟩ = ∫ z^a·conj(z^b)·w_m dμ/π² by importance sampling.

    Points are drawn from a complex normal with variance 2/m in each
    coordinate. The estimate is the plain sample mean with its iid standard
    error. The stratified mean additionally averages each point over the L×L
    phase rotations z_i ↦ z_i·e^{2πik/L}, L = max|a − b| + 1.
    """
    for j, k in (a, b):
        MonomialIndex(j=j, k=k, m=m)
    if samples < 2:
        raise MomentDomainError(f"moments.monte_carlo_inner_product: need >= 2 samples, got {samples}")

    rng = np.random.default_rng(seed)
    variance = 2.0 / m
    z = rng.normal(scale=math.sqrt(variance / 2), size=(samples, 2, 2))
    z = z[..., 0] + 1j * z[..., 1]
    s = np.sum(np.abs(z) ** 2, axis=1)
    log_w = -m * np.array([radial_potential(v) for v in s])
    scale = np.exp(log_w + s / variance) * variance**2

    def values(points: np.ndarray) -> np.ndarray:
        za = points[:, 0] ** a[0] * points[:, 1] ** a[1]
        zb = points[:, 0] ** b[0] * points[:, 1] ** b[1]
        return za * np.conj(zb) * scale

    raw = values(z)
    rotations = max(abs(a[0] - b[0]), abs(a[1] - b[1])) + 1
    roots = np.exp(2j * np.pi * np.arange(rotations) / rotations)
    stratified = np.zeros(samples, dtype=complex)
    for r1 in roots:
        for r2 in roots:
            stratified += values(z * np.array([r1, r2]))
    estimate = raw.mean()
    stratified_estimate = stratified.mean() / rotations**2
    root_n = np.sqrt(samples)
    return MonteCarloEstimate(
        real=float(estimate.real),
        imag=float(estimate.imag),
        stderr_real=float(np.std(raw.real, ddof=1) / root_n),
        stderr_imag=float(np.std(raw.imag, ddof=1) / root_n),
        stratified_real=float(stratified_estimate.real),
        stratified_imag=float(stratified_estimate.imag),
        samples=samples,
    )
