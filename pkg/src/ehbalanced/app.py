"""Command-line front end for ehbalanced."""

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from . import __version__
from .config import (
    CONFIG_FILE_NAME,
    Command,
    OutputFormat,
    RunConfig,
    build_config,
    load_config,
    save_config,
)
from .eh_geometry import metric_matrix, metric_matrix_exact, ricci_defect
from .epsilon import balanced_test, epsilon_profile
from .export import (
    PROFILE_HEADER,
    TABLE_HEADER,
    profile_to_csv,
    records_to_json,
    rows_to_csv,
    table_to_csv,
    write_atomic,
)
from .models import NormMethod, PointC2, describe_validation_error
from .moments import build_table, monte_carlo_inner_product
from .obstruction import emit_figure1, scan_f
from .series import expand_exp_m_phi, sign_finding

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NOT_CONVERGED = 2
RICCI_TOLERANCE = 1.0e-4
RICCI_POINTS = 20
ORTHOGONALITY_PAIRS = 10


class Artifacts:
    """Writes result tables in the configured format under the output directory."""

    def __init__(self, config: RunConfig) -> None:
        self.config = config
        self.out_dir = Path(config.out)
        self.written: list[Path] = []

    def metadata(self, **extra: Any) -> dict[str, Any]:
        meta = {
            "command": self.config.command.value,
            "m": self.config.m,
            "dmax": self.config.effective_dmax,
            "tol": self.config.tol,
            "numpy": np.__version__,
        }
        meta.update(extra)
        return meta

    def write_table(self, name: str, header: list[str], rows: list[list[Any]], **extra: Any) -> Path:
        if self.config.format == OutputFormat.JSON:
            records = [dict(zip(header, row)) for row in rows]
            text = records_to_json(records, self.metadata(**extra))
            path = write_atomic(self.out_dir / f"{name}.json", text)
        else:
            path = write_atomic(self.out_dir / f"{name}.csv", rows_to_csv(header, rows))
        self.written.append(path)
        return path


def _run_norms(config: RunConfig, artifacts: Artifacts) -> str:
    table = build_table(config.m, config.effective_dmax, workers=config.workers)
    if config.format == OutputFormat.JSON:
        rows = [[e.j, e.k, e.m, e.log_norm, e.method.value] for e in table]
        artifacts.write_table("norms", TABLE_HEADER, rows)
    else:
        artifacts.written.append(write_atomic(artifacts.out_dir / "norms.csv", table_to_csv(table)))
    closed = sum(1 for e in table if e.method == NormMethod.CLOSED_FORM)
    return (
        f"norm table m={config.m}, degrees {config.m}..{config.effective_dmax}: "
        f"{len(table)} entries ({closed} closed-form, {len(table) - closed} quadrature)"
    )


def _run_epsilon(config: RunConfig, artifacts: Artifacts) -> str:
    profile = epsilon_profile(
        config.m, config.grid_points(), config.tol, dmax=config.effective_dmax, workers=config.workers
    )
    if config.format == OutputFormat.JSON:
        rows = [[profile.m, s.x, s.y, s.epsilon, s.tail_estimate, profile.dmax] for s in profile.samples]
        artifacts.write_table("epsilon", PROFILE_HEADER, rows)
    else:
        artifacts.written.append(write_atomic(artifacts.out_dir / "epsilon.csv", profile_to_csv(profile)))
    values = [s.epsilon for s in profile.samples]
    return (
        f"ε at {len(values)} points for m={config.m}: min {min(values):.10g}, "
        f"max {max(values):.10g}, max tail {profile.max_tail_estimate:.3e}"
    )


def _run_balanced_check(config: RunConfig, artifacts: Artifacts) -> str:
    report = balanced_test(
        config.m, config.grid_points(), config.tol, dmax=config.effective_dmax, workers=config.workers
    )
    header = ["m", "points", "min", "max", "relative_variation", "max_tail_estimate", "balanced"]
    row = [
        report.m,
        report.points,
        report.minimum,
        report.maximum,
        report.relative_variation,
        report.max_tail_estimate,
        report.balanced,
    ]
    artifacts.write_table("balance", header, [row])
    return (
        f"m={report.m}: {report.summary}; relative variation {report.relative_variation:.6g}, "
        f"max tail estimate {report.max_tail_estimate:.3e}"
    )


def _run_obstruction(config: RunConfig, artifacts: Artifacts) -> str:
    report = scan_f(config.x_min, config.x_max, config.step, workers=config.workers)
    samples = [s for s in report.samples if s.f is not None]
    artifacts.write_table(
        "obstruction",
        ["x", "f"],
        [[s.x, s.f] for s in samples],
        step=config.step,
        sign_changes=[c.model_dump() for c in report.sign_changes],
        limit_diagnostic=[d.model_dump() for d in report.limit_diagnostic],
        caveat=report.caveat,
    )
    integer_rows = [
        [i.m, i.f, i.log_abs_f, i.sign, c8.log_value, c9.log_value]
        for i, c8, c9 in zip(report.f_at_integers, report.c_e8, report.c_e9)
    ]
    artifacts.write_table(
        "integers", ["m", "f", "log_abs_f", "sign", "log_C_e8", "log_C_e9"], integer_rows
    )
    tail = ", ".join(f"log|f({d.x:g})| = {d.log_abs_f:.6g}" for d in report.limit_diagnostic)
    nonzero = sum(1 for i in report.f_at_integers if i.sign != 0)
    return (
        f"f sampled at {len(report.samples)} points on [{config.x_min:g}, {config.x_max:g}]: "
        f"{len(report.sign_changes)} sign changes, {len(report.failed_samples)} failed samples; "
        f"f(m) != 0 at {nonzero}/{len(report.f_at_integers)} integers; {tail}\n"
        f"note: {report.caveat}"
    )


def _run_expand(config: RunConfig, artifacts: Artifacts) -> str:
    max_degree = config.dmax if config.dmax is not None else config.m + 4
    expansion = expand_exp_m_phi(config.m, max_degree)
    keys = sorted(expansion.coefficients, key=lambda ab: (ab[0] + ab[1], ab[1]))
    rows = [[a, b, expansion.coefficients[(a, b)]] for a, b in keys]
    artifacts.write_table("expansion", ["a", "b", "coefficient"], rows, dmax=max_degree)
    finding = sign_finding(config.m)
    verdict = "matches" if finding.matches_alternating else "differs from"
    agreement = "agree" if finding.oracles_agree else "DISAGREE"
    return (
        f"e^(mΦ) for m={config.m} to degree {max_degree}: {len(rows)} coefficients; "
        f"degree-{config.m + 2} slice sign {finding.series_sign:+d} (series) / {finding.fit_sign:+d} (fit), "
        f"oracles {agreement}; {verdict} the alternating sign (-1)^m = {finding.alternating_sign:+d}"
    )


def _run_figure1(config: RunConfig, artifacts: Artifacts) -> str:
    report = scan_f(config.x_min, config.x_max, config.step, workers=config.workers)
    csv_path, script_path = emit_figure1(report, artifacts.out_dir)
    artifacts.written.extend([csv_path, script_path])
    return (
        f"figure data for [{config.x_min:g}, {config.x_max:g}] step {config.step:g}: "
        f"{len(report.sign_changes)} sign changes"
    )


def ricci_sample_points(count: int = RICCI_POINTS) -> list[PointC2]:
    """Fixed points with |z| spread over [0.3, 5] and varied directions."""
    points = []
    for i, radius in enumerate(np.geomspace(0.3, 5.0, count)):
        theta = 0.5 * math.pi * ((i * 0.618033988749895) % 1.0)
        phase = 2.0 * math.pi * ((i * 0.414213562373095) % 1.0)
        points.append(
            PointC2(
                z1=complex(radius * math.cos(theta)),
                z2=radius * math.sin(theta) * complex(math.cos(phase), math.sin(phase)),
            )
        )
    return points


def _run_ricci_check(config: RunConfig, artifacts: Artifacts) -> str:
    rows = []
    for p in ricci_sample_points():
        defect = ricci_defect(p)
        g = metric_matrix(p)
        metric_error = float(np.max(np.abs(g - metric_matrix_exact(p))))
        eigenvalues = np.linalg.eigvalsh(g)
        rows.append(
            [p.z1.real, p.z1.imag, p.z2.real, p.z2.imag, defect, metric_error, float(eigenvalues.min())]
        )
    header = ["x1", "y1", "x2", "y2", "ricci_defect", "metric_error", "min_eigenvalue"]
    artifacts.write_table("ricci", header, rows)
    worst = max(r[4] for r in rows)
    worst_metric = max(r[5] for r in rows)
    positive = all(r[6] > 0 for r in rows)
    verdict = "Ricci-flat within tolerance" if worst < RICCI_TOLERANCE else "Ricci defect ABOVE tolerance"
    return (
        f"{len(rows)} points: max Ricci defect {worst:.3e} ({verdict} {RICCI_TOLERANCE:g}); "
        f"max metric error against the closed form {worst_metric:.3e}; metric positive definite: {positive}"
    )


MonomialPair = tuple[tuple[int, int], tuple[int, int]]


def orthogonality_pairs(m: int, seed: int, count: int = ORTHOGONALITY_PAIRS) -> list[MonomialPair]:
    """Distinct monomial pairs of total degree m..m+3, drawn with the given seed."""
    monomials = [(j, d - j) for d in range(m, m + 4) for j in range(d + 1)]
    rng = np.random.default_rng(seed)
    pairs: list[MonomialPair] = []
    while len(pairs) < count:
        i, k = rng.choice(len(monomials), size=2, replace=False)
        pair = (monomials[i], monomials[k])
        if pair not in pairs:
            pairs.append(pair)
    return pairs


def _run_orthogonality(config: RunConfig, artifacts: Artifacts) -> str:
    rows = []
    for a, b in orthogonality_pairs(config.m, config.seed):
        est = monte_carlo_inner_product(a, b, config.m, samples=config.samples, seed=config.seed)
        rows.append(
            [
                *a,
                *b,
                est.real,
                est.imag,
                est.stderr_real,
                est.stderr_imag,
                est.stratified_real,
                est.stratified_imag,
                est.is_zero_within(3.0),
            ]
        )
    header = [
        "a1", "a2", "b1", "b2", "real", "imag", "stderr_real", "stderr_imag",
        "stratified_real", "stratified_imag", "zero_within_3se",
    ]
    artifacts.write_table("orthogonality", header, rows, seed=config.seed, samples=config.samples)
    zero = sum(1 for r in rows if r[-1])
    return f"{zero}/{len(rows)} distinct monomial pairs orthogonal within 3 standard errors (m={config.m})"


RUNNERS = {
    Command.NORMS: _run_norms,
    Command.EPSILON: _run_epsilon,
    Command.BALANCED_CHECK: _run_balanced_check,
    Command.OBSTRUCTION: _run_obstruction,
    Command.EXPAND: _run_expand,
    Command.FIGURE1: _run_figure1,
    Command.RICCI_CHECK: _run_ricci_check,
    Command.ORTHOGONALITY: _run_orthogonality,
}


def run(config: RunConfig) -> int:
    """Run one command and write its artifacts.

    Returns:
        0 on success, 1 on a domain or validation error, 2 when a numerical
        method did not converge
    """
    artifacts = Artifacts(config)
    try:
        summary = RUNNERS[config.command](config, artifacts)
        artifacts.written.append(save_config(config, artifacts.out_dir / CONFIG_FILE_NAME))
    except ArithmeticError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except ValidationError as e:
        print(f"error: {describe_validation_error(e)}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"error: cli.run: {e}", file=sys.stderr)
        return EXIT_INVALID
    print(summary)
    for path in artifacts.written:
        logger.info(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    defaults = RunConfig()
    parser = argparse.ArgumentParser(
        prog="ehbalanced",
        description="Numerical checks for balanced multiples of the Eguchi-Hanson metric.",
    )
    parser.add_argument("command", choices=[c.value for c in Command], help="computation to run")
    parser.add_argument("--m", type=int, help=f"quantization level (default {defaults.m})")
    parser.add_argument("--dmax", type=int, help="degree budget (default m + 200; expand: m + 4)")
    parser.add_argument("--tol", type=float, help=f"relative tail tolerance (default {defaults.tol:g})")
    parser.add_argument("--grid", help=f'grid "x0:x1:n[,y0:y1:n]" (default "{defaults.grid}")')
    parser.add_argument("--x-min", dest="x_min", type=float, help=f"scan start (default {defaults.x_min:g})")
    parser.add_argument("--x-max", dest="x_max", type=float, help=f"scan end (default {defaults.x_max:g})")
    parser.add_argument("--step", type=float, help=f"scan step (default {defaults.step:g})")
    parser.add_argument("--out", help=f"output directory (default {defaults.out})")
    parser.add_argument(
        "--format", choices=[f.value for f in OutputFormat], help="artifact format (default csv)"
    )
    parser.add_argument("--seed", type=int, help=f"Monte-Carlo seed (default {defaults.seed})")
    parser.add_argument("--samples", type=int, help=f"Monte-Carlo samples (default {defaults.samples})")
    parser.add_argument("--workers", type=int, help=f"parallel workers (default {defaults.workers})")
    parser.add_argument("--config", type=Path, help="JSON run configuration; flags override its values")
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug logging"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


def configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def make_config(args: argparse.Namespace) -> RunConfig:
    """Merge an optional config file with the flags given on the command line."""
    base = load_config(args.config).model_dump() if args.config else {}
    flags = {
        k: v
        for k, v in vars(args).items()
        if k not in ("config", "verbose") and v is not None
    }
    return build_config(**{**base, **flags})


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the ehbalanced command line."""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        config = make_config(args)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
