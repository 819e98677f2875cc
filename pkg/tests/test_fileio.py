"""Round-trip and error-reporting checks for the text file grammars."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srot.fileio import (
    MeasureFormatError,
    read_measure,
    read_plan,
    read_report,
    write_measure,
    write_plan,
    write_report,
    write_transport_summary,
)
from srot.geodesics import connect
from srot.manifolds import Point, heisenberg
from srot.measures import DiscreteMeasure, GeneralizedCurve, Plan, TransportMeasure

from conftest import LIGHT_CFG


def test_measure_roundtrip(tmp_path):
    rng = np.random.default_rng(31)
    w = rng.random(5) + 0.1
    mu = DiscreteMeasure(rng.normal(size=(5, 3)), w / w.sum())
    f = tmp_path / "mu.txt"
    write_measure(f, mu)
    back = read_measure(f)
    np.testing.assert_array_equal(back.points, mu.points)
    np.testing.assert_array_equal(back.weights, mu.weights)


@given(
    st.lists(
        st.tuples(
            st.floats(-1e6, 1e6, allow_nan=False),
            st.floats(-1e6, 1e6, allow_nan=False),
        ),
        min_size=1,
        max_size=5,
    )
)
@settings(max_examples=25, deadline=None)
def test_measure_roundtrip_property(tmp_path_factory, coords):
    pts = np.array(coords, dtype=float)
    w = np.full(len(coords), 1.0 / len(coords))
    mu = DiscreteMeasure(pts, w)
    f = tmp_path_factory.mktemp("m") / "mu.txt"
    write_measure(f, mu)
    back = read_measure(f)
    np.testing.assert_array_equal(back.points, mu.points)
    np.testing.assert_array_equal(back.weights, mu.weights)


def test_measure_comments_and_blank_lines(tmp_path):
    f = tmp_path / "mu.txt"
    f.write_text(
        "# leading comment\n\nsrot-measure v1 dim=2  # trailing comment\n"
        "0.5 0.0 1.0\n\n0.5 2.0 3.0  # atom\n"
    )
    mu = read_measure(f)
    assert mu.size == 2 and mu.dim == 2


@pytest.mark.parametrize(
    "text, line_no",
    [
        ("", None),
        ("srot-plan v1\n0 0 1.0\n", 1),           # wrong header kind
        ("srot-measure v1\n0.5 0 0\n", 1),        # missing dim
        ("srot-measure v1 dim=x\n", 1),
        ("srot-measure v1 dim=2\n0.5 0.0\n", 2),  # too few fields
        ("srot-measure v1 dim=2\n0.5 a b\n", 2),  # non-numeric
        ("srot-measure v1 dim=2\n", None),        # no atoms
        ("srot-measure v1 dim=2\n0.5 0 0\n", None),  # weights sum to 0.5
    ],
)
def test_measure_errors_carry_line_numbers(tmp_path, text, line_no):
    f = tmp_path / "bad.txt"
    f.write_text(text)
    with pytest.raises(MeasureFormatError) as err:
        read_measure(f)
    assert err.value.line_no == line_no
    assert str(f) in str(err.value)


def test_plan_roundtrip(tmp_path):
    plan = Plan(np.array([0, 1]), np.array([1, 0]), np.array([0.25, 0.75]))
    f = tmp_path / "plan.txt"
    write_plan(f, plan)
    back = read_plan(f)
    np.testing.assert_array_equal(back.rows, plan.rows)
    np.testing.assert_array_equal(back.cols, plan.cols)
    np.testing.assert_array_equal(back.weights, plan.weights)


@pytest.mark.parametrize(
    "text, line_no",
    [
        ("", None),
        ("srot-measure v1 dim=2\n", 1),
        ("srot-plan v1\n0 1\n", 2),
        ("srot-plan v1\n0 1 w\n", 2),
        ("srot-plan v1\n", None),
    ],
)
def test_plan_errors(tmp_path, text, line_no):
    f = tmp_path / "bad.txt"
    f.write_text(text)
    with pytest.raises(MeasureFormatError) as err:
        read_plan(f)
    assert err.value.line_no == line_no


def test_transport_summary_contents(tmp_path, h1):
    path = connect(h1, Point(np.zeros(3)), Point(np.array([1.0, 0, 0])), LIGHT_CFG)
    curve = GeneralizedCurve.from_path(path)
    eta = TransportMeasure([curve], np.array([1.0]), curve.times)
    f = tmp_path / "eta.txt"
    write_transport_summary(f, eta)
    text = f.read_text()
    assert text.startswith("srot-transport v1\n")
    assert "curves = 1" in text
    assert "[curve 0]" in text
    assert f"energy = {repr(curve.relaxed_energy())}" in text


def test_report_roundtrip_and_timestamp(tmp_path):
    values = {"c_kan": 0.123456789012345678, "passed": True, "n": 4}
    f1, f2, f3 = (tmp_path / n for n in ("a.txt", "b.txt", "c.txt"))
    write_report(f1, values)
    write_report(f2, values)
    # identical inputs produce byte-identical reports
    assert f1.read_bytes() == f2.read_bytes()
    write_report(f3, values, timestamp="2026-01-01T00:00:00Z")
    back = read_report(f3)
    assert back["timestamp"] == "2026-01-01T00:00:00Z"
    assert float(back["c_kan"]) == values["c_kan"]
    assert back["passed"] == "True"
    # skipping the timestamp line recovers the deterministic content
    det = {k: v for k, v in back.items() if k != "timestamp"}
    assert det == read_report(f1)


def test_report_bad_header(tmp_path):
    f = tmp_path / "r.txt"
    f.write_text("not a report\n")
    with pytest.raises(MeasureFormatError):
        read_report(f)
    f.write_text("srot-report v1\nno equals sign\n")
    with pytest.raises(MeasureFormatError) as err:
        read_report(f)
    assert err.value.line_no == 2
