"""Truncated power series and the expansion of e^{mΦ} near the origin.

Φ is radial, so e^{mΦ} = s^m·A(s²)^m with s = |z|² = x + y and
A(u) = e^{√(1+u)}/(1+√(1+u)). The expansion is done in one variable and
distributed over monomials x^a y^b by the binomial theorem.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .eh_geometry import potential
from .models import PointC2, SignFinding

logger = logging.getLogger(__name__)

SPLITTER = 134217729.0  # 2^27 + 1
FIT_RANGE = (0.02, 0.2)
FIT_POINTS = 40
FIT_DEGREE = 6


class ZeroConstantTermError(ValueError):
    """Operation needs a nonzero (or positive) constant term."""

    pass


class SeriesOrderError(ValueError):
    """Invalid truncation order or exponent."""

    pass


class SeriesOp(str, Enum):
    """Operations accepted by series_arith."""

    ADD = "add"
    MUL = "mul"
    POWER = "power"
    EXP = "exp"
    SQRT = "sqrt"
    RECIPROCAL = "reciprocal"
    LOG = "log"


def _two_sum(a: float, b: float) -> tuple[float, float]:
    s = a + b
    z = s - a
    return s, (a - (s - z)) + (b - z)


def _split(a: float) -> tuple[float, float]:
    c = SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a: float, b: float) -> tuple[float, float]:
    p = a * b
    a_hi, a_lo = _split(a)
    b_hi, b_lo = _split(b)
    return p, a_lo * b_lo - (((p - a_hi * b_hi) - a_lo * b_hi) - a_hi * b_lo)


@dataclass(frozen=True)
class TruncatedSeries:
    """Coefficients c_0..c_D of a power series in u, known to order D."""

    coeffs: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.coeffs:
            raise SeriesOrderError("series.TruncatedSeries: at least one coefficient is required")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    @classmethod
    def constant(cls, value: float, order: int) -> "TruncatedSeries":
        return cls((value,) + (0.0,) * order)

    @classmethod
    def variable(cls, order: int) -> "TruncatedSeries":
        """The series u itself."""
        if order < 1:
            return cls.constant(0.0, order)
        return cls((0.0, 1.0) + (0.0,) * (order - 1))

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def __getitem__(self, n: int) -> float:
        return self.coeffs[n]

    def __len__(self) -> int:
        return len(self.coeffs)

    def truncate(self, order: int) -> "TruncatedSeries":
        return TruncatedSeries(self.coeffs[: order + 1])

    def __add__(self, other: "TruncatedSeries | float") -> "TruncatedSeries":
        if not isinstance(other, TruncatedSeries):
            return TruncatedSeries((self.coeffs[0] + other,) + self.coeffs[1:])
        order = min(self.order, other.order)
        return TruncatedSeries(tuple(a + b for a, b in zip(self.coeffs[: order + 1], other.coeffs)))

    __radd__ = __add__

    def __neg__(self) -> "TruncatedSeries":
        return TruncatedSeries(tuple(-c for c in self.coeffs))

    def __sub__(self, other: "TruncatedSeries | float") -> "TruncatedSeries":
        return self + (-other)

    def __mul__(self, other: "TruncatedSeries | float") -> "TruncatedSeries":
        if not isinstance(other, TruncatedSeries):
            return TruncatedSeries(tuple(c * other for c in self.coeffs))
        order = min(self.order, other.order)
        product = np.convolve(self.coeffs[: order + 1], other.coeffs[: order + 1])
        return TruncatedSeries(tuple(product[: order + 1]))

    __rmul__ = __mul__

    def __pow__(self, exponent: int) -> "TruncatedSeries":
        if not isinstance(exponent, int) or exponent < 0:
            raise SeriesOrderError(
                f"series.series_arith: power needs a nonnegative integer exponent, got {exponent}"
            )
        result = TruncatedSeries.constant(1.0, self.order)
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            base = base * base
            exponent >>= 1
        return result

    def exp(self) -> "TruncatedSeries":
        """e^f from n·g_n = Σ_{k=1..n} k·f_k·g_{n−k}."""
        f = self.coeffs
        g = [math.exp(f[0])]
        for n in range(1, len(f)):
            g.append(math.fsum(k * f[k] * g[n - k] for k in range(1, n + 1)) / n)
        return TruncatedSeries(tuple(g))

    def sqrt(self) -> "TruncatedSeries":
        f = self.coeffs
        if not f[0] > 0:
            raise ZeroConstantTermError(
                f"series.series_arith: sqrt needs a positive constant term, got {f[0]}"
            )
        g = [math.sqrt(f[0])]
        for n in range(1, len(f)):
            cross = math.fsum(g[k] * g[n - k] for k in range(1, n))
            g.append((f[n] - cross) / (2.0 * g[0]))
        return TruncatedSeries(tuple(g))

    def reciprocal(self) -> "TruncatedSeries":
        f = self.coeffs
        if f[0] == 0.0:
            raise ZeroConstantTermError("series.series_arith: reciprocal of a series with zero constant term")
        g = [1.0 / f[0]]
        for n in range(1, len(f)):
            g.append(-math.fsum(f[k] * g[n - k] for k in range(1, n + 1)) / f[0])
        return TruncatedSeries(tuple(g))

    def log(self) -> "TruncatedSeries":
        """log f from f·g' = f'."""
        f = self.coeffs
        if not f[0] > 0:
            raise ZeroConstantTermError(
                f"series.series_arith: log needs a positive constant term, got {f[0]}"
            )
        g = [math.log(f[0])]
        for n in range(1, len(f)):
            cross = math.fsum(k * g[k] * f[n - k] for k in range(1, n))
            g.append((n * f[n] - cross) / (n * f[0]))
        return TruncatedSeries(tuple(g))

    def derivative(self) -> "TruncatedSeries":
        """d/du, one order shorter."""
        if self.order == 0:
            return TruncatedSeries((0.0,))
        return TruncatedSeries(tuple(n * c for n, c in enumerate(self.coeffs) if n > 0))

    def evaluate(self, u: float) -> float:
        """Σ c_n u^n by compensated Horner."""
        result = self.coeffs[-1]
        correction = 0.0
        for c in reversed(self.coeffs[:-1]):
            p, p_err = _two_prod(result, u)
            result, s_err = _two_sum(p, c)
            correction = correction * u + (p_err + s_err)
        return result + correction


def series_arith(op: SeriesOp, *args: TruncatedSeries, exponent: int = 1) -> TruncatedSeries:
    """Apply a truncated-series operation.

    Binary operations truncate to the smaller order of their operands.

    Raises:
        ZeroConstantTermError: For reciprocal, sqrt or log of a series whose
            constant term does not allow it
    """
    op = SeriesOp(op)
    expected = 2 if op in (SeriesOp.ADD, SeriesOp.MUL) else 1
    if len(args) != expected:
        raise SeriesOrderError(
            f"series.series_arith: {op.value} takes {expected} series, got {len(args)}"
        )
    if op == SeriesOp.ADD:
        return args[0] + args[1]
    if op == SeriesOp.MUL:
        return args[0] * args[1]
    if op == SeriesOp.POWER:
        return args[0] ** exponent
    if op == SeriesOp.EXP:
        return args[0].exp()
    if op == SeriesOp.SQRT:
        return args[0].sqrt()
    if op == SeriesOp.RECIPROCAL:
        return args[0].reciprocal()
    return args[0].log()


def expand_amplitude(order: int) -> TruncatedSeries:
    """Coefficients of A(u) = e^{√(1+u)}/(1+√(1+u)) to the given order."""
    if order < 0:
        raise SeriesOrderError(f"series.expand_amplitude: order must be >= 0, got {order}")
    root = (TruncatedSeries.variable(order) + 1.0).sqrt()
    return root.exp() * (root + 1.0).reciprocal()


@dataclass(frozen=True)
class BidegreeExpansion:
    """Coefficients of x^a y^b in a series in x = |z1|², y = |z2|²."""

    m: int
    max_degree: int
    coefficients: dict[tuple[int, int], float] = field(default_factory=dict)

    def coefficient(self, a: int, b: int) -> float:
        """Coefficient of x^a y^b; zero when absent."""
        if a + b > self.max_degree:
            raise SeriesOrderError(
                f"series.BidegreeExpansion: degree {a + b} exceeds the expansion order {self.max_degree}"
            )
        return self.coefficients.get((a, b), 0.0)

    def slice(self, degree: int) -> list[float]:
        """Coefficients at (degree − s, s) for s = 0..degree."""
        return [self.coefficient(degree - s, s) for s in range(degree + 1)]

    def evaluate(self, x: float, y: float) -> float:
        return math.fsum(c * x**a * y**b for (a, b), c in self.coefficients.items())


def expand_exp_m_phi(m: int, max_degree: int) -> BidegreeExpansion:
    """Expand e^{mΦ} into monomials x^a y^b up to total degree max_degree.

    Only total degrees m + 2n occur; the coefficient of x^a y^b is
    a_n·C(a+b, b), where a_n is the coefficient of u^n in A(u)^m.
    """
    if m < 1:
        raise SeriesOrderError(f"series.expand_exp_m_phi: m must be >= 1, got {m}")
    if max_degree < m:
        raise SeriesOrderError(
            f"series.expand_exp_m_phi: max_degree {max_degree} is below m={m}"
        )
    radial = expand_amplitude((max_degree - m) // 2) ** m
    coefficients = {}
    for n, a_n in enumerate(radial.coeffs):
        degree = m + 2 * n
        for b in range(degree + 1):
            coefficients[(degree - b, b)] = a_n * math.comb(degree, b)
    logger.debug(f"expanded e^(mΦ) for m={m} to degree {max_degree}: {len(coefficients)} terms")
    return BidegreeExpansion(m=m, max_degree=max_degree, coefficients=coefficients)


def grid_fit_slice_sign(m: int, points: int = FIT_POINTS, degree: int = FIT_DEGREE) -> float:
    """Fit the coefficient of x^{m+2} in e^{mΦ} from samples of the potential.

    Samples e^{mΦ}/s^m on the diagonal x = y for s in a small range, fits a
    polynomial in u = s², and returns the linear coefficient. This goes
    through eh_geometry.potential only, never the series engine.
    """
    s = np.linspace(*FIT_RANGE, points)
    u = s**2
    u_max = float(u.max())
    values = np.array(
        [math.exp(m * (potential(PointC2.from_moduli(si / 2, si / 2)) - math.log(si))) for si in s]
    )
    fit = np.polynomial.polynomial.polyfit(u / u_max, values, degree)
    return float(fit[1] / u_max)


def sign_finding(m: int, series_order: Optional[int] = None) -> SignFinding:
    """Compare the sign of the degree-(m+2) slice from two oracles with (−1)^m."""
    expansion = expand_exp_m_phi(m, series_order or m + 2)
    finding = SignFinding(
        m=m,
        series_coefficient=expansion.coefficient(m + 2, 0),
        fit_coefficient=grid_fit_slice_sign(m),
        alternating_sign=(-1) ** m,
    )
    logger.info(
        f"m={m}: series sign {finding.series_sign:+d}, fit sign {finding.fit_sign:+d}, "
        f"alternating sign {finding.alternating_sign:+d}"
    )
    return finding
