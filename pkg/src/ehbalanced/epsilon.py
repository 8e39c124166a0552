"""The ε-function of the level-m quantization and the balance test.

ε(x, y) = w_m(z)·Σ_{j+k≥m} x^j y^k / N_{j,k,m} with x = |z1|², y = |z2|².
Sums run over total degree d in log space; a degree is added until the
terms have decayed geometrically and the remaining tail is below tol.
"""

import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Optional

import numpy as np
from scipy.special import logsumexp

from .eh_geometry import StepSizeError, complex_hessian, radial_potential
from .models import BalanceReport, EpsilonProfile, EpsilonSample, PointC2
from .moments import MonomialNormTable, build_table

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1.0e-10
DEFAULT_BUDGET_OVER_M = 200
TABLE_CHUNK = 40
DECAY_RUN = 5
DECAY_RATIO = 0.5
BALANCE_FACTOR = 10.0


class EpsilonDomainError(ValueError):
    """ε requested at the origin or with a mismatched table."""

    pass


class EpsilonConvergenceError(ArithmeticError):
    """Degree sum did not certify its tail within the degree budget."""

    pass


def default_budget(m: int) -> int:
    return m + DEFAULT_BUDGET_OVER_M


class EpsilonEvaluator:
    """Evaluates ε at level m from a norm table that grows on demand.

    Table extension runs under a lock and swaps in a new immutable table;
    evaluation only reads the current table, so one evaluator can be shared
    by a thread pool.

    Args:
        m: Quantization level
        dmax: Degree budget; defaults to m + 200
        table: Optional precomputed table at level m
        workers: Process count used when the table is extended
    """

    def __init__(
        self,
        m: int,
        dmax: Optional[int] = None,
        table: Optional[MonomialNormTable] = None,
        workers: int = 1,
    ) -> None:
        if m < 1:
            raise EpsilonDomainError(f"epsilon.epsilon_eval: m must be >= 1, got {m}")
        if table is not None and table.m != m:
            raise EpsilonDomainError(
                f"epsilon.epsilon_eval: table level {table.m} does not match m={m}"
            )
        self.m = m
        self.dmax = dmax if dmax is not None else default_budget(m)
        if self.dmax < m:
            raise EpsilonDomainError(f"epsilon.epsilon_eval: dmax={self.dmax} is below m={m}")
        self.workers = workers
        self._table = table
        self._lock = threading.Lock()

    @property
    def table(self) -> MonomialNormTable:
        if self._table is None:
            self._ensure_degree(min(self.dmax, self.m + TABLE_CHUNK))
        return self._table

    def _ensure_degree(self, degree: int) -> MonomialNormTable:
        table = self._table
        if table is not None and table.dmax >= degree:
            return table
        with self._lock:
            if self._table is None:
                self._table = build_table(self.m, degree, workers=self.workers)
            elif self._table.dmax < degree:
                self._table = self._table.extend(degree, workers=self.workers)
            return self._table

    def _degree_term(self, table: MonomialNormTable, degree: int, log_x: float, log_y: float) -> float:
        """log Σ_{j+k=degree} x^j y^k / N_{j,k}."""
        j = np.arange(degree + 1)
        k = degree - j
        # x^0 = 1 also when x = 0
        x_part = np.zeros(degree + 1)
        y_part = np.zeros(degree + 1)
        np.multiply(j, log_x, out=x_part, where=j > 0)
        np.multiply(k, log_y, out=y_part, where=k > 0)
        return float(logsumexp(x_part + y_part - table.degree_log_norms(degree)))

    def _log_terms(self, x: float, y: float, tol: float) -> tuple[list[float], float]:
        """Degree terms up to the first certified degree, and the relative tail bound."""
        log_x = math.log(x) if x > 0 else -math.inf
        log_y = math.log(y) if y > 0 else -math.inf
        terms: list[float] = []
        peak = -math.inf
        decaying = 0
        table = self._ensure_degree(min(self.dmax, self.m + TABLE_CHUNK))
        for degree in range(self.m, self.dmax + 1):
            if degree > table.dmax:
                table = self._ensure_degree(min(self.dmax, degree + TABLE_CHUNK))
            term = self._degree_term(table, degree, log_x, log_y)
            if terms and term > peak:
                decaying = 0
            elif terms and term - terms[-1] < math.log(DECAY_RATIO):
                decaying += 1
            else:
                decaying = 0
            terms.append(term)
            peak = max(peak, term)
            if decaying >= DECAY_RUN:
                ratio = math.exp(max(np.diff(terms[-DECAY_RUN - 1 :])))
                tail = math.exp(term - float(logsumexp(terms))) * ratio / (1.0 - ratio)
                if tail < tol:
                    return terms, tail
        raise EpsilonConvergenceError(
            f"epsilon.epsilon_eval: tail not certified below {tol:g} at (x={x}, y={y}) "
            f"within degree budget {self.dmax}"
        )

    def evaluate(self, x: float, y: float, tol: float = DEFAULT_TOL) -> EpsilonSample:
        """ε at (x, y) = (|z1|², |z2|²) with its relative tail estimate."""
        if x < 0 or y < 0:
            raise EpsilonDomainError(f"epsilon.epsilon_eval: need x, y >= 0, got ({x}, {y})")
        if x + y == 0:
            raise EpsilonDomainError("epsilon.epsilon_eval: ε is not defined at the origin")
        terms, tail = self._log_terms(x, y, tol)
        log_eps = -self.m * radial_potential(x + y) + float(logsumexp(terms))
        return EpsilonSample(
            x=x,
            y=y,
            epsilon=math.exp(log_eps),
            tail_estimate=tail,
            degree=self.m + len(terms) - 1,
        )

    def evaluate_point(self, p: PointC2, tol: float = DEFAULT_TOL) -> EpsilonSample:
        return self.evaluate(p.x, p.y, tol)

    def log_epsilon_fixed(self, x: float, y: float, degree: int) -> float:
        """log ε summed over total degrees m..degree exactly, without tail control."""
        if x + y == 0:
            raise EpsilonDomainError("epsilon.epsilon_eval: ε is not defined at the origin")
        table = self._ensure_degree(degree)
        log_x = math.log(x) if x > 0 else -math.inf
        log_y = math.log(y) if y > 0 else -math.inf
        terms = [self._degree_term(table, d, log_x, log_y) for d in range(self.m, degree + 1)]
        return -self.m * radial_potential(x + y) + float(logsumexp(terms))

    def axis_limit(self) -> float:
        """lim ε as x → 0⁺ with y = 0, i.e. 2^m·e^{−m}/N_{m,0,m}."""
        return math.exp(self.m * (math.log(2.0) - 1.0) - self.table.log_norm(self.m, 0))


def epsilon_eval(
    m: int, x: float, y: float, tol: float = DEFAULT_TOL, table: Optional[MonomialNormTable] = None
) -> EpsilonSample:
    """ε at (x, y) for level m; the table is extended on demand for this call."""
    return EpsilonEvaluator(m, table=table).evaluate(x, y, tol)


def axis_limit(m: int) -> float:
    """Value of ε on the exceptional divisor, reached along the z1-axis."""
    return EpsilonEvaluator(m, dmax=m).axis_limit()


def _evaluate_all(
    evaluator: EpsilonEvaluator, grid: list[tuple[float, float]], tol: float, workers: int
) -> list[EpsilonSample]:
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda p: evaluator.evaluate(p[0], p[1], tol), grid))
    return [evaluator.evaluate(x, y, tol) for x, y in grid]


def epsilon_profile(
    m: int,
    grid: Iterable[tuple[float, float]],
    tol: float = DEFAULT_TOL,
    dmax: Optional[int] = None,
    workers: int = 1,
    evaluator: Optional[EpsilonEvaluator] = None,
) -> EpsilonProfile:
    """Sample ε over a grid of (x, y) points, in grid order."""
    points = list(grid)
    if not points:
        raise EpsilonDomainError("epsilon.epsilon_profile: grid is empty")
    evaluator = evaluator or EpsilonEvaluator(m, dmax=dmax, workers=workers)
    samples = _evaluate_all(evaluator, points, tol, workers)
    logger.info(f"evaluated ε at {len(samples)} points for m={m}")
    return EpsilonProfile(m=m, dmax=evaluator.dmax, tol=tol, samples=samples)


def balanced_test(
    m: int,
    grid: Iterable[tuple[float, float]],
    tol: float = DEFAULT_TOL,
    dmax: Optional[int] = None,
    workers: int = 1,
) -> BalanceReport:
    """Measure how far ε is from constant over the grid.

    The metric passes only if (max − min)/min ≤ 10·max_tail_estimate.
    """
    profile = epsilon_profile(m, grid, tol, dmax=dmax, workers=workers)
    return balance_report(profile)


def balance_report(profile: EpsilonProfile) -> BalanceReport:
    values = [s.epsilon for s in profile.samples]
    low, high = min(values), max(values)
    report = BalanceReport(
        m=profile.m,
        points=len(values),
        minimum=low,
        maximum=high,
        relative_variation=(high - low) / low,
        max_tail_estimate=profile.max_tail_estimate,
    )
    logger.info(f"m={profile.m}: relative variation {report.relative_variation:.6g}, {report.summary}")
    return report


def discrepancy_form(
    m: int,
    x: float,
    y: float,
    h: float = 1.0e-3,
    tol: float = DEFAULT_TOL,
    evaluator: Optional[EpsilonEvaluator] = None,
    log_epsilon: Optional[Callable[[np.ndarray], float]] = None,
) -> np.ndarray:
    """Coefficients of (1/2π)·∂∂̄ log ε at the point z = (√x, √y).

    Zero when ε is constant. The degree is fixed from the certified sum at
    the centre and reused on the whole stencil. log_epsilon replaces ε as a
    function of the real vector (x1, y1, x2, y2).
    """
    if not h > 0:
        raise StepSizeError(f"epsilon.discrepancy_form: step must be positive, got {h}")
    if x + y == 0:
        raise EpsilonDomainError("epsilon.discrepancy_form: ε is not defined at the origin")
    if log_epsilon is None:
        evaluator = evaluator or EpsilonEvaluator(m)
        degree = evaluator.evaluate(x, y, tol).degree

        def log_epsilon(v: np.ndarray) -> float:
            return evaluator.log_epsilon_fixed(v[0] ** 2 + v[1] ** 2, v[2] ** 2 + v[3] ** 2, degree)

    centre = np.array([math.sqrt(x), 0.0, math.sqrt(y), 0.0])
    return complex_hessian(log_epsilon, centre, h) / (2 * math.pi)
