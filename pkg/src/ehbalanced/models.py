"""Data models for ehbalanced."""

import math
from enum import Enum
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator


def _as_complex(value: Any) -> complex:
    """Coerce ints, floats and (re, im) pairs to complex."""
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    return complex(value)


def describe_validation_error(e: ValidationError, module: str = "models") -> str:
    """One-line "<module>.<Model>: field: message; ..." text for a pydantic error."""
    parts = []
    for error in e.errors():
        location = ".".join(str(part) for part in error["loc"])
        message = error["msg"].removeprefix("Value error, ")
        parts.append(f"{location}: {message}" if location else message)
    return f"{module}.{e.title}: " + "; ".join(parts)


class Chart(str, Enum):
    """Coordinate charts of the blow-up of C^2 at the origin."""

    U1 = "U1"
    U2 = "U2"


class NormMethod(str, Enum):
    """How a monomial norm was obtained."""

    QUADRATURE = "quadrature"
    CLOSED_FORM = "closed-form"


class GammaArgs(BaseModel):
    """Arguments of the upper incomplete Gamma function Γ(a, b)."""

    model_config = ConfigDict(frozen=True)

    a: float = Field(..., gt=0, allow_inf_nan=False, description="Shape parameter")
    b: float = Field(..., ge=0, allow_inf_nan=False, description="Lower integration limit")


class PointC2(BaseModel):
    """A point (z1, z2) of C^2."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    z1: complex
    z2: complex

    @field_validator("z1", "z2", mode="before")
    @classmethod
    def _coerce(cls, value: Any) -> complex:
        return _as_complex(value)

    @classmethod
    def from_moduli(cls, x: float, y: float) -> "PointC2":
        """Build the real point with |z1|^2 = x and |z2|^2 = y."""
        return cls(z1=complex(x**0.5), z2=complex(y**0.5))

    @property
    def x(self) -> float:
        """|z1|^2."""
        return self.z1.real**2 + self.z1.imag**2

    @property
    def y(self) -> float:
        """|z2|^2."""
        return self.z2.real**2 + self.z2.imag**2

    @property
    def norm_squared(self) -> float:
        """|z|^2 = |z1|^2 + |z2|^2."""
        return self.x + self.y

    @property
    def is_origin(self) -> bool:
        return self.z1 == 0 and self.z2 == 0


class ChartPoint(BaseModel):
    """A point of the blow-up given in chart coordinates (w1, w2)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    chart: Chart
    w1: complex
    w2: complex

    @field_validator("w1", "w2", mode="before")
    @classmethod
    def _coerce(cls, value: Any) -> complex:
        return _as_complex(value)

    @property
    def on_exceptional_divisor(self) -> bool:
        """True on the inserted CP^1 (w1 = 0 in U1, w2 = 0 in U2)."""
        if self.chart == Chart.U1:
            return self.w1 == 0
        return self.w2 == 0


class HermitianWeight(BaseModel):
    """The quantization weight w_m at level m."""

    model_config = ConfigDict(frozen=True)

    m: int = Field(..., ge=1, description="Quantization level")


class MonomialIndex(BaseModel):
    """The monomial z1^j z2^k as a section at level m."""

    model_config = ConfigDict(frozen=True)

    j: int = Field(..., ge=0)
    k: int = Field(..., ge=0)
    m: int = Field(..., ge=1)

    @model_validator(mode="after")
    def _check_order(self) -> "MonomialIndex":
        if self.j + self.k < self.m:
            raise ValueError(
                f"monomial z1^{self.j} z2^{self.k} vanishes to order {self.j + self.k} < m={self.m}"
            )
        return self

    @property
    def degree(self) -> int:
        """Total degree j + k."""
        return self.j + self.k

    @property
    def gap(self) -> int:
        """Excess of the total degree over the level, j + k - m."""
        return self.j + self.k - self.m

    @property
    def radial_exponent(self) -> int:
        """Exponent p = 2(j + k - m + 1) + 1 of r in the radial integrand."""
        return 2 * (self.gap + 1) + 1


class NormEntry(BaseModel):
    """One row of a monomial norm table."""

    model_config = ConfigDict(frozen=True)

    j: int = Field(..., ge=0)
    k: int = Field(..., ge=0)
    m: int = Field(..., ge=1)
    log_norm: float = Field(..., allow_inf_nan=False, description="log ||z1^j z2^k||^2")
    method: NormMethod


class MonteCarloEstimate(BaseModel):
    """Monte-Carlo estimate of an inner product <z^a, z^b>.

    real and imag are the plain sample mean with its iid standard error.
    The phase-stratified mean is kept apart: it cancels distinct monomials
    exactly, so it cannot test orthogonality.
    """

    real: float
    imag: float
    stderr_real: float = Field(..., ge=0)
    stderr_imag: float = Field(..., ge=0)
    stratified_real: float = 0.0
    stratified_imag: float = 0.0
    samples: int = Field(..., ge=1)

    def is_zero_within(self, standard_errors: float = 3.0) -> bool:
        """Check whether both parts vanish within the given number of standard errors."""
        return (
            abs(self.real) <= standard_errors * self.stderr_real
            and abs(self.imag) <= standard_errors * self.stderr_imag
        )


class EpsilonSample(BaseModel):
    """ε evaluated at one point (x, y) = (|z1|^2, |z2|^2)."""

    x: float = Field(..., ge=0)
    y: float = Field(..., ge=0)
    epsilon: float = Field(..., gt=0)
    tail_estimate: float = Field(..., ge=0)
    degree: int = Field(..., ge=0, description="Highest total degree summed")


class EpsilonProfile(BaseModel):
    """Sampled values of ε over a grid, with truncation diagnostics."""

    m: int = Field(..., ge=1)
    dmax: int = Field(..., ge=1, description="Degree budget")
    tol: float = Field(..., gt=0)
    samples: list[EpsilonSample] = Field(default_factory=list)

    @property
    def max_tail_estimate(self) -> float:
        return max((s.tail_estimate for s in self.samples), default=0.0)


class BalanceReport(BaseModel):
    """Variation of ε over a grid."""

    m: int = Field(..., ge=1)
    points: int = Field(..., ge=1)
    minimum: float
    maximum: float
    relative_variation: float = Field(..., ge=0)
    max_tail_estimate: float = Field(..., ge=0)

    @property
    def balanced(self) -> bool:
        """ε counts as constant only when its variation is within the truncation error."""
        return self.relative_variation <= 10.0 * self.max_tail_estimate

    @property
    def summary(self) -> str:
        if self.balanced:
            return "balanced within tail error"
        return "NOT balanced (variation ≫ tail error)"


class SignFinding(BaseModel):
    """Sign of the second slice of e^{mΦ}, from two independent oracles."""

    m: int = Field(..., ge=1)
    series_coefficient: float
    fit_coefficient: float
    alternating_sign: int = Field(..., description="(-1)^m, the sign a factor (-e/2)^m would give")

    @property
    def series_sign(self) -> int:
        return 1 if self.series_coefficient > 0 else -1

    @property
    def fit_sign(self) -> int:
        return 1 if self.fit_coefficient > 0 else -1

    @property
    def oracles_agree(self) -> bool:
        return self.series_sign == self.fit_sign

    @property
    def matches_alternating(self) -> bool:
        return self.series_sign == self.alternating_sign


class FSample(BaseModel):
    """One sample of the obstruction function f."""

    x: float = Field(..., ge=0)
    f: Optional[float] = None
    log_abs_f: Optional[float] = None
    sign: int = 0
    error: Optional[str] = None


class SignChange(BaseModel):
    """A bracket [lower, upper] across which f changes sign."""

    lower: float
    upper: float
    value_lower: float
    value_upper: float

    @model_validator(mode="after")
    def _check_bracket(self) -> "SignChange":
        if not self.value_lower * self.value_upper < 0:
            raise ValueError("bracket must have f(lower)·f(upper) < 0")
        return self

    @property
    def width(self) -> float:
        return self.upper - self.lower


class IntegerSample(BaseModel):
    """f at an integer level m."""

    m: int = Field(..., ge=1)
    f: float
    log_abs_f: float
    sign: int


class CandidateValue(BaseModel):
    """A candidate value of the constant C, stored in log space."""

    m: int = Field(..., ge=1)
    log_value: float

    @property
    def value(self) -> float:
        return math.exp(self.log_value)


class LimitDiagnostic(BaseModel):
    """log|f(x)| at a large x, and how it was computed."""

    x: float = Field(..., gt=0)
    log_abs_f: float
    method: str = Field(..., description="'direct' or 'asymptotic'")


class ObstructionReport(BaseModel):
    """Samples of f, sign changes, integer values and limit diagnostics."""

    x_min: float = Field(..., ge=0)
    x_max: float = Field(..., gt=0)
    step: float = Field(..., gt=0)
    samples: list[FSample] = Field(default_factory=list)
    sign_changes: list[SignChange] = Field(default_factory=list)
    f_at_integers: list[IntegerSample] = Field(default_factory=list)
    limit_diagnostic: list[LimitDiagnostic] = Field(default_factory=list)
    c_e8: list[CandidateValue] = Field(default_factory=list)
    c_e9: list[CandidateValue] = Field(default_factory=list)
    caveat: str = ""

    @property
    def failed_samples(self) -> list[FSample]:
        return [s for s in self.samples if s.error is not None]
