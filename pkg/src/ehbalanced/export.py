"""CSV and JSON artifacts, atomic file writes and the plot bundle script.

Floats are written with 17 significant digits, so values read back equal
the values written.
"""

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Optional

from . import __version__
from .models import EpsilonProfile, NormEntry, NormMethod, ObstructionReport

TABLE_HEADER = ["j", "k", "m", "logN", "method"]
PROFILE_HEADER = ["m", "x", "y", "epsilon", "tail_estimate", "Dmax"]
FIGURE_HEADER = ["x", "f"]


class ExportFormatError(ValueError):
    """Error parsing an exported artifact."""

    pass


def format_float(value: float) -> str:
    return f"{value:.17g}"


def rows_to_csv(header: list[str], rows: Iterable[list[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])
    return buffer.getvalue()


def table_to_csv(entries: Iterable[NormEntry]) -> str:
    """Norm table rows as CSV, in the iteration order of the table."""
    return rows_to_csv(
        TABLE_HEADER, ([e.j, e.k, e.m, e.log_norm, e.method.value] for e in entries)
    )


def parse_table_csv(data: str) -> list[NormEntry]:
    """Parse rows written by table_to_csv.

    Raises:
        ExportFormatError: If the header or a row is malformed
    """
    reader = csv.reader(io.StringIO(data))
    header = next(reader, None)
    if header != TABLE_HEADER:
        raise ExportFormatError(f"export.parse_table_csv: unexpected header {header}")
    entries = []
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            j, k, m, log_norm, method = row
            entries.append(
                NormEntry(
                    j=int(j), k=int(k), m=int(m), log_norm=float(log_norm), method=NormMethod(method)
                )
            )
        except ValueError as e:
            raise ExportFormatError(f"export.parse_table_csv: line {line}: {e}") from e
    return entries


def profile_to_csv(profile: EpsilonProfile) -> str:
    return rows_to_csv(
        PROFILE_HEADER,
        (
            [profile.m, s.x, s.y, s.epsilon, s.tail_estimate, profile.dmax]
            for s in profile.samples
        ),
    )


def report_to_csv(report: ObstructionReport) -> str:
    """(x, f) rows of the successful samples, sorted by x."""
    samples = sorted((s for s in report.samples if s.f is not None), key=lambda s: s.x)
    return rows_to_csv(FIGURE_HEADER, ([s.x, s.f] for s in samples))


def _finite(value: Any) -> Any:
    """Replace non-finite floats, which JSON cannot carry, by None."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _finite(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_finite(v) for v in value]
    return value


def records_to_json(records: list[dict[str, Any]], metadata: Optional[dict[str, Any]] = None) -> str:
    """Records plus a metadata object carrying the package version."""
    meta = {"version": __version__}
    meta.update(metadata or {})
    document = {"metadata": _finite(meta), "records": _finite(records)}
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


def write_atomic(path: Path, text: str) -> Path:
    """Write text through a temporary file in the same directory and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    return path


PLOT_SCRIPT = '''"""Plot y = f(x) from {csv_name}.

Needs matplotlib. Run from the directory containing {csv_name}.
"""

import csv
from pathlib import Path

import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent


def main() -> None:
    with open(HERE / "{csv_name}", newline="") as f:
        rows = list(csv.DictReader(f))
    xs = [float(r["x"]) for r in rows]
    ys = [float(r["f"]) for r in rows]

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(xs, ys, lw=1.5)
    ax.axhline(0.0, color="grey", lw=0.8)
    ax.set_xlim({x_min!r}, {x_max!r})
    ax.set_xlabel("x")
    ax.set_ylabel("f(x)")
    fig.tight_layout()
    fig.savefig(HERE / "{png_name}", dpi=150)


if __name__ == "__main__":
    main()
'''


def emit_plot_script(csv_name: str, x_min: float, x_max: float) -> str:
    """Source of a standalone script that reads csv_name by relative path and plots it."""
    png_name = Path(csv_name).with_suffix(".png").name
    return PLOT_SCRIPT.format(csv_name=csv_name, png_name=png_name, x_min=x_min, x_max=x_max)
