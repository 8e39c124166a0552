"""Tests for CSV/JSON artifacts and atomic writes."""

import json
import math

import pytest

from ehbalanced import __version__
from ehbalanced.export import (
    TABLE_HEADER,
    ExportFormatError,
    emit_plot_script,
    format_float,
    parse_table_csv,
    profile_to_csv,
    records_to_json,
    rows_to_csv,
    table_to_csv,
    write_atomic,
)
from ehbalanced.models import EpsilonProfile, EpsilonSample
from ehbalanced.moments import build_table


class TestCsv:
    """Tests for CSV rendering and parsing."""

    def test_float_precision(self):
        """Test that 17 significant digits reproduce the double."""
        for value in (0.1, 1 / 3, math.pi * 1e-200, -2.5e17):
            assert float(format_float(value)) == value
        assert format_float(0.1) == "0.10000000000000001"

    def test_rows(self):
        """Test header, float formatting and line endings."""
        text = rows_to_csv(["a", "b", "c"], [[1, 0.5, "x"], [2, 1.0, True]])
        assert text == "a,b,c\n1,0.5,x\n2,1,True\n"

    def test_norm_table_survives_csv(self):
        """Test that a table written as CSV parses back to the same rows."""
        entries = list(build_table(1, 4))
        text = table_to_csv(entries)
        assert text.splitlines()[0] == ",".join(TABLE_HEADER)
        assert len(text.splitlines()) == 15
        assert parse_table_csv(text) == entries

    def test_parse_rejects_bad_header(self):
        """Test ExportFormatError for a foreign header."""
        with pytest.raises(ExportFormatError):
            parse_table_csv("x,f\n1,2\n")

    def test_parse_rejects_bad_row(self):
        """Test ExportFormatError with the offending line number."""
        text = "j,k,m,logN,method\n1,0,1,0.25,closed-form\n1,1,1,abc,quadrature\n"
        with pytest.raises(ExportFormatError, match="line 3"):
            parse_table_csv(text)

    def test_parse_rejects_unknown_method(self):
        """Test ExportFormatError for an unknown method name."""
        with pytest.raises(ExportFormatError):
            parse_table_csv("j,k,m,logN,method\n1,0,1,0.25,guess\n")

    def test_profile_rows(self):
        """Test the ε profile columns."""
        profile = EpsilonProfile(
            m=2,
            dmax=202,
            tol=1e-10,
            samples=[EpsilonSample(x=0.5, y=0.0, epsilon=1.25, tail_estimate=1e-12, degree=30)],
        )
        lines = profile_to_csv(profile).splitlines()
        assert lines == ["m,x,y,epsilon,tail_estimate,Dmax", "2,0.5,0,1.25,9.9999999999999998e-13,202"]


class TestJson:
    """Tests for JSON documents."""

    def test_metadata_and_records(self):
        """Test that metadata carries the version and the given keys."""
        document = json.loads(records_to_json([{"x": 1.0, "f": 2.0}], {"step": 0.5}))
        assert document["metadata"] == {"version": __version__, "step": 0.5}
        assert document["records"] == [{"f": 2.0, "x": 1.0}]

    def test_non_finite_become_null(self):
        """Test that NaN and infinities are written as null."""
        text = records_to_json([{"a": math.nan, "b": [math.inf, 1.0]}], {"c": -math.inf})
        document = json.loads(text)
        assert document["records"] == [{"a": None, "b": [None, 1.0]}]
        assert document["metadata"]["c"] is None
        assert "NaN" not in text

    def test_stable_key_order(self):
        """Test that key order does not depend on insertion order."""
        assert records_to_json([{"b": 1, "a": 2}]) == records_to_json([{"a": 2, "b": 1}])


class TestWriteAtomic:
    """Tests for atomic file writes."""

    def test_creates_parents(self, tmp_path):
        """Test writing into a missing directory."""
        path = write_atomic(tmp_path / "deep" / "dir" / "out.csv", "a\n")
        assert path.read_text() == "a\n"

    def test_replaces_and_cleans_up(self, tmp_path):
        """Test overwrite with no temporary file left behind."""
        target = tmp_path / "out.txt"
        write_atomic(target, "first")
        write_atomic(target, "second")
        assert target.read_text() == "second"
        assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]


class TestPlotScript:
    """Tests for the generated plotting script."""

    def test_relative_paths(self):
        """Test that the script reads and writes next to itself."""
        script = emit_plot_script("figure1.csv", 0.0, 200.0)
        assert 'HERE / "figure1.csv"' in script
        assert 'HERE / "figure1.png"' in script
        assert "ax.set_xlim(0.0, 200.0)" in script
        compile(script, "figure1_plot.py", "exec")

