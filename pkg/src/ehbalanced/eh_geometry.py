"""Eguchi-Hanson potential, blow-up charts, quantization weight and metric checks.

Points of C^2 minus the origin are handled as PointC2; the exceptional
divisor is only reachable through ChartPoint. Derivatives are taken by
finite differences in the real coordinates (x1, y1, x2, y2).
"""

import logging
import math
from typing import Callable

import numpy as np

from .models import Chart, ChartPoint, HermitianWeight, PointC2

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1.0e-3
INNER_STEP = 5.0e-4
COMPLEX_STEP = 1.0e-20


class GeometryDomainError(ValueError):
    """Point outside the domain of a geometric quantity."""

    pass


class StepSizeError(ValueError):
    """Finite-difference step is not positive."""

    pass


def _check_point(p: PointC2, operation: str) -> float:
    s = p.norm_squared
    if s == 0.0:
        raise GeometryDomainError(f"eh_geometry.{operation}: the origin is not in the domain")
    return s


def _check_step(h: float, operation: str) -> None:
    if not h > 0:
        raise StepSizeError(f"eh_geometry.{operation}: step must be positive, got {h}")


def radial_potential(s: float) -> float:
    """Φ as a function of s = |z|^2 > 0.

    Uses t - log((1+t)/s) with (1+t)/s = 1 + (1 + 1/(t+s))/s, which has no
    cancellation for large or small s.
    """
    if not s > 0:
        raise GeometryDomainError(f"eh_geometry.potential: |z|^2 must be positive, got {s}")
    t = math.hypot(s, 1.0)
    return t - math.log1p((1.0 + 1.0 / (t + s)) / s)


def potential_derivative(s: float) -> float:
    """dΦ/ds = √(s²+1)/s."""
    if not s > 0:
        raise GeometryDomainError(
            f"eh_geometry.potential_derivative: |z|^2 must be positive, got {s}"
        )
    return math.hypot(s, 1.0) / s


def potential_second_derivative(s: float) -> float:
    """d²Φ/ds² = −1/(s²√(s²+1))."""
    if not s > 0:
        raise GeometryDomainError(
            f"eh_geometry.potential_derivative: |z|^2 must be positive, got {s}"
        )
    return -1.0 / (s * s * math.hypot(s, 1.0))


def potential(p: PointC2) -> float:
    """Return the Kähler potential √(|z|⁴+1) + log|z|² − log(1+√(|z|⁴+1))."""
    return radial_potential(_check_point(p, "potential"))


def _chart_value(chart: Chart, a: float, b: float) -> float:
    """Chart potential in terms of a = |w1|², b = |w2|²."""
    if chart == Chart.U1:
        fiber, base = b, a
    else:
        fiber, base = a, b
    t = math.hypot(base * (1.0 + fiber), 1.0)
    return t + math.log1p(fiber) - math.log1p(t)


def chart_potential(c: ChartPoint) -> float:
    """Return the potential pulled back to a chart of the blow-up.

    In U1, with a = |w1|² and b = |w2|², this is
    √(a²(1+b)²+1) + log(1+b) − log(1+√(a²(1+b)²+1)); U2 swaps the roles of
    w1 and w2. Defined on the whole chart, exceptional divisor included.
    """
    a = c.w1.real**2 + c.w1.imag**2
    b = c.w2.real**2 + c.w2.imag**2
    return _chart_value(c.chart, a, b)


def chart_to_point(c: ChartPoint) -> PointC2:
    """Map chart coordinates to C^2: U1 gives (w1, w1·w2), U2 gives (w1·w2, w2)."""
    if c.on_exceptional_divisor:
        raise GeometryDomainError(
            f"eh_geometry.chart_to_point: {c.chart.value} point ({c.w1}, {c.w2}) "
            "lies on the exceptional divisor"
        )
    if c.chart == Chart.U1:
        return PointC2(z1=c.w1, z2=c.w1 * c.w2)
    return PointC2(z1=c.w1 * c.w2, z2=c.w2)


def point_to_chart(p: PointC2, chart: Chart) -> ChartPoint:
    """Inverse of chart_to_point; U1 needs z1 ≠ 0 and U2 needs z2 ≠ 0."""
    if chart == Chart.U1:
        if p.z1 == 0:
            raise GeometryDomainError("eh_geometry.point_to_chart: z1 = 0 is not covered by U1")
        return ChartPoint(chart=chart, w1=p.z1, w2=p.z2 / p.z1)
    if p.z2 == 0:
        raise GeometryDomainError("eh_geometry.point_to_chart: z2 = 0 is not covered by U2")
    return ChartPoint(chart=chart, w1=p.z1 / p.z2, w2=p.z2)


def log_weight(w: HermitianWeight, p: PointC2) -> float:
    """log w_m = −m√(|z|⁴+1) + m·log(1+√(|z|⁴+1)) − m·log|z|², i.e. −m·Φ."""
    s = _check_point(p, "weight")
    return -w.m * radial_potential(s)


def weight(w: HermitianWeight, p: PointC2) -> float:
    """Return w_m(p) = e^{−m√(|z|⁴+1)}·((1+√(|z|⁴+1))/|z|²)^m."""
    return math.exp(log_weight(w, p))


def point_vector(p: PointC2) -> np.ndarray:
    """Real coordinates (x1, y1, x2, y2) of a point."""
    return np.array([p.z1.real, p.z1.imag, p.z2.real, p.z2.imag])


def _potential_of_vector(v: np.ndarray) -> float:
    return radial_potential(float(np.dot(v, v)))


def _real_hessian(func: Callable[[np.ndarray], float], v: np.ndarray, h: float) -> np.ndarray:
    """Second-order central-difference Hessian of a function of R^n."""
    n = len(v)
    hess = np.empty((n, n))
    f0 = func(v)
    basis = np.eye(n) * h
    for i in range(n):
        hess[i, i] = (func(v + basis[i]) - 2.0 * f0 + func(v - basis[i])) / h**2
        for j in range(i + 1, n):
            hess[i, j] = (
                func(v + basis[i] + basis[j])
                - func(v + basis[i] - basis[j])
                - func(v - basis[i] + basis[j])
                + func(v - basis[i] - basis[j])
            ) / (4.0 * h**2)
            hess[j, i] = hess[i, j]
    return hess


def hessian_to_complex(hess: np.ndarray) -> np.ndarray:
    """Fold a real Hessian in (x1, y1, x2, y2) into ∂²/∂z_i∂z̄_j.

    The off-diagonal entries are mirrored so the result is Hermitian exactly.
    """
    g = np.empty((2, 2), dtype=complex)
    for i in range(2):
        for j in range(2):
            xi, yi, xj, yj = 2 * i, 2 * i + 1, 2 * j, 2 * j + 1
            g[i, j] = 0.25 * complex(
                hess[xi, xj] + hess[yi, yj], hess[xi, yj] - hess[yi, xj]
            )
    g[0, 0] = g[0, 0].real
    g[1, 1] = g[1, 1].real
    g[1, 0] = np.conj(g[0, 1])
    return g


def complex_hessian(
    func: Callable[[np.ndarray], float],
    v: np.ndarray,
    h: float = DEFAULT_STEP,
    richardson: bool = True,
) -> np.ndarray:
    """Return the 2×2 matrix ∂²func/∂z_i∂z̄_j at the real 4-vector v.

    With richardson=True the central differences at h and h/2 are combined
    as (4·H(h/2) − H(h))/3.
    """
    _check_step(h, "complex_hessian")
    v = np.asarray(v, dtype=float)
    hess = _real_hessian(func, v, h)
    if richardson:
        hess = (4.0 * _real_hessian(func, v, h / 2.0) - hess) / 3.0
    return hessian_to_complex(hess)


def metric_matrix(p: PointC2, h: float = DEFAULT_STEP) -> np.ndarray:
    """Return g_{ij̄} = ∂²Φ/∂z_i∂z̄_j at p by finite differences with step h."""
    _check_point(p, "metric_matrix")
    _check_step(h, "metric_matrix")
    return complex_hessian(_potential_of_vector, point_vector(p), h)


def metric_matrix_exact(p: PointC2) -> np.ndarray:
    """Closed-form g_{ij̄} = Φ'(s)·δ_{ij} + Φ''(s)·z̄_i·z_j for the radial potential."""
    s = _check_point(p, "metric_matrix")
    z = np.array([p.z1, p.z2])
    return potential_derivative(s) * np.eye(2) + potential_second_derivative(s) * np.outer(z.conj(), z)


def metric_determinant(p: PointC2, h: float = DEFAULT_STEP) -> float:
    """det g at p; equals Φ'·(sΦ')' = 1 for this potential."""
    return float(np.linalg.det(metric_matrix(p, h)).real)


def _potential_complex(v: np.ndarray) -> complex:
    """Φ continued analytically in the real coordinates, for complex-step use."""
    s = np.sum(v * v)
    t = np.sqrt(s * s + 1.0)
    return t + np.log(s) - np.log1p(t)


def _gradient_complex_step(v: np.ndarray) -> np.ndarray:
    grad = np.empty(len(v))
    for j in range(len(v)):
        shifted = v.astype(complex)
        shifted[j] += 1j * COMPLEX_STEP
        grad[j] = _potential_complex(shifted).imag / COMPLEX_STEP
    return grad


def _hessian_from_gradient(v: np.ndarray, h: float) -> np.ndarray:
    n = len(v)
    hess = np.empty((n, n))
    for j in range(n):
        step = np.zeros(n)
        step[j] = h
        hess[:, j] = (_gradient_complex_step(v + step) - _gradient_complex_step(v - step)) / (2 * h)
    return 0.5 * (hess + hess.T)


def _log_det_metric(v: np.ndarray) -> float:
    hess = _hessian_from_gradient(v, INNER_STEP)
    hess = (4.0 * _hessian_from_gradient(v, INNER_STEP / 2.0) - hess) / 3.0
    det = np.linalg.det(hessian_to_complex(hess)).real
    if not det > 0:
        raise GeometryDomainError(
            f"eh_geometry.ricci_defect: metric is degenerate at {v.tolist()} (det = {det})"
        )
    return math.log(det)


def ricci_defect(p: PointC2, h: float = DEFAULT_STEP) -> float:
    """Return max |R_{ij̄}| of the Ricci form −(i/2π)∂∂̄ log det g at p.

    The inner metric uses complex-step gradients; the outer derivative is a
    plain central difference with step h.
    """
    _check_point(p, "ricci_defect")
    _check_step(h, "ricci_defect")
    ricci = -complex_hessian(_log_det_metric, point_vector(p), h, richardson=False) / (2 * math.pi)
    defect = float(np.max(np.abs(ricci)))
    logger.debug(f"Ricci defect at ({p.z1}, {p.z2}) with h={h}: {defect:.3e}")
    return defect
