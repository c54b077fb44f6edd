import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rigor import io
from rigor.generators import winerack
from rigor.kempe import angle_expand, assemble_curve_linkage, trace


def test_float_format_round_trips():
    for x in (0.1, 1 / 3, 2.0 ** -40, -123456.789, 0.0):
        assert float(io.fmt(x)) == x
    assert io.fmt(1 / 3) == "0.33333333333333331"


@settings(max_examples=50, deadline=None)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_dumps_floats_exact(x):
    assert json.loads(io.dumps({"v": [x, x]}))["v"] == [x, x]


def test_framework_json_round_trip(tmp_path):
    f = winerack(2)
    path = tmp_path / "w.json"
    io.write_framework(f, str(path))
    d = json.loads(path.read_text())
    assert d["dimension"] == 2 and d["family"]["name"] == "winerack"
    g = io.read_framework(str(path))
    assert np.array_equal(g.positions, f.positions) and g.edges == f.edges


@pytest.mark.parametrize(
    "payload",
    [[], {"vertices": [[0, 0]]}, {"dimension": 3, "vertices": [], "edges": []}, {"vertices": [[0, 0, 0]], "edges": []}, {"vertices": [[0, 0], [1, 0]], "edges": [[0]]}],
)
def test_malformed_framework_json(payload):
    with pytest.raises(ValueError):
        io.framework_from_dict(payload)


def test_invalid_json_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ValueError):
        io.read_framework(str(p))


def test_atomic_write_replaces(tmp_path):
    p = tmp_path / "out.txt"
    io.write_atomic(str(p), "one")
    io.write_atomic(str(p), "two")
    assert p.read_text() == "two"
    assert [x.name for x in tmp_path.iterdir()] == ["out.txt"]


def test_linkage_json_round_trip():
    link = assemble_curve_linkage(angle_expand("cos(theta) + 0.5*cos(theta)^2"))
    d = json.loads(io.dumps(io.linkage_to_dict(link)))
    assert set(d["driver"]) == {"v1", "v2", "v3"} and len(d["range"]) == 2
    assert all({"kind", "vertex_indices", "tolerance"} <= set(g) for g in d["gadgets"])
    back = io.linkage_from_dict(d)
    a, b = trace(link, 8), trace(back, 8)
    assert np.array_equal(a.values, b.values)
    assert back.tolerance == link.tolerance


def test_csv_header_and_comments():
    text = io.csv_text(["a", "b"], [(1, 0.5)], io.repro_header("x", {"k": 3}))
    lines = text.splitlines()
    assert lines[0].startswith("# rigor ") and "# k: 3" in lines
    assert lines[-2:] == ["a,b", "1,0.5"]


def test_svg_viewport_has_margin():
    svg = io.svg_text(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 2.0]]), [(0, 1), (1, 2)])
    assert svg.count("<line") == 2 and svg.count("<circle") == 3
    # 1 x 2 box grows 5% per side to 1.1 x 2.2, scaled so the long side is 600
    assert 'viewBox="0 0 300.000 600.000"' in svg
    assert '<circle cx="13.6364" cy="572.7273"' in svg
