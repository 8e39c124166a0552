"""The constant candidates at each level and the obstruction function f.

Matching the constant term of ε against ‖z1^m‖² and against ‖z1^{m+2}‖²
gives two candidates for the same constant C; f(x) is their difference
continued to real x, and balancedness at level m would need f(m) = 0.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Optional

from .export import emit_plot_script, report_to_csv, write_atomic
from .models import (
    CandidateValue,
    FSample,
    GammaArgs,
    IntegerSample,
    LimitDiagnostic,
    ObstructionReport,
    SignChange,
)
from .moments import log_gap2_denominator, log_min_denominator
from .special_functions import gamma_upper, gamma_upper_scaled_asymptotic, log_gamma_upper

logger = logging.getLogger(__name__)

DIRECT_LIMIT = 20.0
SINGULAR_THRESHOLD = 1.0e-300
BISECTION_XTOL = 1.0e-10
ASYMPTOTIC_POINTS = (1.0e3, 1.0e4)
FIGURE_CSV = "figure1.csv"
FIGURE_SCRIPT = "figure1_plot.py"


class ObstructionDomainError(ValueError):
    """Argument outside the range of an obstruction computation."""

    pass


class SingularDenominatorError(ZeroDivisionError):
    """A denominator of f vanished to within 1e-300."""

    pass


def log_c_candidate_e8(m: int) -> float:
    """log of (2m/e²)^m·m(m+1)/(Γ(m+2, 2m) − m·Γ(m+1, 2m))."""
    if m < 1:
        raise ObstructionDomainError(f"obstruction.c_candidate_e8: m must be >= 1, got {m}")
    return m * math.log(2.0 * m) - 2.0 * m + math.log(m * (m + 1)) - log_min_denominator(m)


def log_c_candidate_e9(m: int) -> float:
    """log of (2m/e²)^m·4m³(m+3)/((m+2)(Γ(m+4, 2m) − 3mΓ(m+3, 2m) + 2m²Γ(m+2, 2m)))."""
    if m < 1:
        raise ObstructionDomainError(f"obstruction.c_candidate_e9: m must be >= 1, got {m}")
    return (
        m * math.log(2.0 * m)
        - 2.0 * m
        + math.log(4 * m**3 * (m + 3))
        - math.log(m + 2)
        - log_gap2_denominator(m)
    )


def c_candidate_e8(m: int) -> float:
    """Constant C forced by the norm of z1^m."""
    return math.exp(log_c_candidate_e8(m))


def c_candidate_e9(m: int) -> float:
    """Constant C forced by the norm of z1^{m+2}."""
    return math.exp(log_c_candidate_e9(m))


def _direct_value(x: float) -> float:
    """f(x) from Γ values, with denominators reduced by Γ(a+1, b) = aΓ(a, b) + b^a e^{−b}."""
    b = 2.0 * x
    power = math.exp((x + 1.0) * math.log(b) - b)
    d1 = gamma_upper(GammaArgs(a=x + 1.0, b=b)) + power
    d2 = (6.0 - x) * gamma_upper(GammaArgs(a=x + 2.0, b=b)) + 3.0 * b * power
    _check_denominators(x, d1, d2)
    return x * (x + 1.0) / d1 - 4.0 * x**3 * (x + 3.0) / ((x + 2.0) * d2)


def _scaled_bracket(x: float, g1: float, g2: float) -> float:
    """f(x)·e^{−2x}(2x)^{x+1} from G_k = Γ(x+k, 2x)·e^{2x}(2x)^{−(x+1)}."""
    d1 = g1 + 1.0
    d2 = (6.0 - x) * g2 + 6.0 * x
    _check_denominators(x, d1, d2)
    return x * (x + 1.0) / d1 - 4.0 * x**3 * (x + 3.0) / ((x + 2.0) * d2)


def _check_denominators(x: float, d1: float, d2: float) -> None:
    if abs(d1) < SINGULAR_THRESHOLD or abs(d2) < SINGULAR_THRESHOLD:
        raise SingularDenominatorError(
            f"obstruction.f_of_x: denominator vanishes at x={x} (d1={d1:.3e}, d2={d2:.3e})"
        )


def _log_scale(x: float) -> float:
    """log of e^{2x}(2x)^{−(x+1)}."""
    return 2.0 * x - (x + 1.0) * math.log(2.0 * x)


def _bracket(x: float) -> float:
    b = 2.0 * x
    scale = _log_scale(x)
    g1 = math.exp(log_gamma_upper(GammaArgs(a=x + 1.0, b=b)) + scale)
    g2 = math.exp(log_gamma_upper(GammaArgs(a=x + 2.0, b=b)) + scale)
    return _scaled_bracket(x, g1, g2)


def _signed_log(value: float, log_scale: float = 0.0) -> tuple[int, float]:
    if value == 0.0:
        return 0, -math.inf
    return (1 if value > 0 else -1), math.log(abs(value)) + log_scale


def sign_function(x: float) -> float:
    """f(x) up to a positive factor that keeps it representable; used for sign scans."""
    if x < 0:
        raise ObstructionDomainError(f"obstruction.f_of_x: x must be >= 0, got {x}")
    if x == 0.0:
        return 0.0
    if x <= DIRECT_LIMIT:
        return _direct_value(x)
    return _bracket(x)


def _log_factor(x: float) -> float:
    """log of the factor relating sign_function(x) to f(x)."""
    return 0.0 if x <= DIRECT_LIMIT else _log_scale(x)


def f_of_x_log(x: float) -> tuple[int, float]:
    """Return (sign of f(x), log|f(x)|); representable far beyond double underflow."""
    return _signed_log(sign_function(x), _log_factor(x))


def f_of_x(x: float) -> float:
    """Return f(x) = x(x+1)/D1(x) − 4x³(x+3)/((x+2)·D2(x)).

    D1 = Γ(x+2, 2x) − xΓ(x+1, 2x) and
    D2 = Γ(x+4, 2x) − 3xΓ(x+3, 2x) + 2x²Γ(x+2, 2x). f(0) = 0, and f
    underflows to 0.0 for x beyond about 180; use f_of_x_log there.

    Raises:
        SingularDenominatorError: If a denominator vanishes
    """
    sign, log_abs = f_of_x_log(x)
    return sign * math.exp(log_abs) if sign else 0.0


def find_sign_changes(
    func: Callable[[float], float],
    xs: Iterable[float],
    values: Optional[Iterable[float]] = None,
    xtol: float = BISECTION_XTOL,
) -> list[SignChange]:
    """Bisect every consecutive pair of samples where func changes sign.

    A zero needs a strict sign change; samples that are exactly zero or
    NaN start no bracket.
    """
    xs = list(xs)
    values = list(values) if values is not None else [func(x) for x in xs]
    changes = []
    for lower, upper, f_lower, f_upper in zip(xs, xs[1:], values, values[1:]):
        if not f_lower * f_upper < 0:
            continue
        while upper - lower > xtol:
            middle = 0.5 * (lower + upper)
            f_middle = func(middle)
            if f_middle == 0.0:
                break
            if (f_middle < 0) == (f_lower < 0):
                lower, f_lower = middle, f_middle
            else:
                upper, f_upper = middle, f_middle
        changes.append(SignChange(lower=lower, upper=upper, value_lower=f_lower, value_upper=f_upper))
        logger.info(f"sign change in [{lower:.12g}, {upper:.12g}]")
    return changes


def _sample(x: float) -> tuple[FSample, Optional[float]]:
    try:
        scan_value = sign_function(x)
        sign, log_abs = _signed_log(scan_value, _log_factor(x))
    except (ArithmeticError, ValueError) as e:
        logger.warning(f"f({x}) failed: {e}")
        return FSample(x=x, error=str(e)), None
    value = sign * math.exp(log_abs) if sign else 0.0
    return FSample(x=x, f=value, log_abs_f=log_abs if sign else None, sign=sign), scan_value


def asymptotic_tail(xs: Iterable[float] = ASYMPTOTIC_POINTS) -> list[LimitDiagnostic]:
    """log|f| at large x from the asymptotic series of Γ(x+k, 2x)."""
    diagnostics = []
    for x in xs:
        g1 = gamma_upper_scaled_asymptotic(1, x) / (2.0 * x)
        g2 = gamma_upper_scaled_asymptotic(2, x)
        _, log_abs = _signed_log(_scaled_bracket(x, g1, g2), _log_scale(x))
        diagnostics.append(LimitDiagnostic(x=x, log_abs_f=log_abs, method="asymptotic"))
    return diagnostics


def _scan_points(x_min: float, x_max: float, step: float) -> list[float]:
    """x_min, x_min + step, ... and always x_max itself."""
    count = math.floor((x_max - x_min) / step + 1e-9)
    points = [x_min + i * step for i in range(count + 1)]
    if x_max - points[-1] > 1e-9 * step:
        points.append(x_max)
    else:
        points[-1] = x_max
    return points


def scan_f(
    x_min: float = 0.0,
    x_max: float = 200.0,
    step: float = 0.01,
    workers: int = 1,
) -> ObstructionReport:
    """Sample f on [x_min, x_max] and collect sign changes, integer values and tail diagnostics.

    Per-sample failures are recorded on the sample and logged, not raised.
    """
    if not 0 <= x_min < x_max:
        raise ObstructionDomainError(
            f"obstruction.scan_f: need 0 <= x_min < x_max, got [{x_min}, {x_max}]"
        )
    if not step > 0:
        raise ObstructionDomainError(f"obstruction.scan_f: step must be positive, got {step}")

    points = _scan_points(x_min, x_max, step)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sample, points))
    else:
        results = [_sample(x) for x in points]
    results.sort(key=lambda r: r[0].x)

    usable = [(s.x, v) for s, v in results if v is not None]
    sign_changes = find_sign_changes(
        sign_function, [x for x, _ in usable], [v for _, v in usable]
    )

    integers = range(max(1, math.ceil(x_min)), math.floor(x_max) + 1)
    f_at_integers = []
    for m in integers:
        sign, log_abs = f_of_x_log(float(m))
        f_at_integers.append(
            IntegerSample(m=m, f=sign * math.exp(log_abs), log_abs_f=log_abs, sign=sign)
        )

    limit = []
    for x in (x_max / 2.0, x_max):
        if x > 0:
            _, log_abs = f_of_x_log(x)
            limit.append(
                LimitDiagnostic(x=x, log_abs_f=log_abs, method="direct" if x <= DIRECT_LIMIT else "scaled")
            )
    limit.extend(asymptotic_tail())

    report = ObstructionReport(
        x_min=x_min,
        x_max=x_max,
        step=step,
        samples=[s for s, _ in results],
        sign_changes=sign_changes,
        f_at_integers=f_at_integers,
        limit_diagnostic=limit,
        c_e8=[CandidateValue(m=m, log_value=log_c_candidate_e8(m)) for m in integers],
        c_e9=[CandidateValue(m=m, log_value=log_c_candidate_e9(m)) for m in integers],
        caveat=(
            f"no sign change is certified only on the sampled grid [{x_min:g}, {x_max:g}] "
            f"with step {step:g}; beyond it the decay of f rests on the asymptotic diagnostics"
        ),
    )
    logger.info(
        f"scanned f at {len(points)} points: {len(sign_changes)} sign changes, "
        f"{len(report.failed_samples)} failed samples"
    )
    return report


def emit_figure1(report: ObstructionReport, out_dir: Path) -> tuple[Path, Path]:
    """Write the (x, f) samples as CSV plus a script that plots them.

    Returns:
        Paths of the CSV file and the plotting script
    """
    if not report.samples:
        raise ObstructionDomainError("obstruction.emit_figure1: report has no samples")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = write_atomic(out_dir / FIGURE_CSV, report_to_csv(report))
    script_path = write_atomic(
        out_dir / FIGURE_SCRIPT, emit_plot_script(FIGURE_CSV, report.x_min, report.x_max)
    )
    return csv_path, script_path
