import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lingrowth.fieldio import (MAGIC, field_from_bytes, field_to_bytes, format_table,
                               read_field_binary, read_field_csv, write_field_binary,
                               write_field_csv, write_table)
from lingrowth.solver import DiscreteField, Grid


def _field(nx=5, ny=4):
    g = Grid(nx, ny, -1.0, 2.0, 0.5, 1.5)
    return DiscreteField.from_function(g, lambda x, y: np.sin(3 * x) * y + 1 / 3)


def test_binary_layout():
    u = _field()
    data = field_to_bytes(u)
    assert data[:4] == MAGIC
    version, nx, ny = struct.unpack_from("<III", data, 4)
    assert (version, nx, ny) == (1, 5, 4)
    assert struct.unpack_from("<4d", data, 16) == (-1.0, 2.0, 0.5, 1.5)
    assert len(data) == 48 + 8 * 20
    # row-major: second value is node (x1, y0)
    assert struct.unpack_from("<d", data, 56)[0] == u.values[0, 1]


def test_binary_round_trip_file(tmp_path):
    u = _field()
    write_field_binary(tmp_path / "u.bin", u)
    v = read_field_binary(tmp_path / "u.bin")
    assert v.grid == u.grid
    np.testing.assert_array_equal(v.values, u.values)


@pytest.mark.parametrize("mutate,msg", [(lambda d: b"XXXX" + d[4:], "bad magic"),
                                        (lambda d: d[:4] + struct.pack("<I", 9) + d[8:], "version"),
                                        (lambda d: d[:-8], "expected 20 values"),
                                        (lambda d: d[:10], "truncated")])
def test_binary_rejects_corruption(mutate, msg):
    with pytest.raises(ValueError, match=msg):
        field_from_bytes(mutate(field_to_bytes(_field())))


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (4, 6), elements=st.floats(-1e300, 1e300)))
def test_csv_round_trip_exact(tmp_path_factory, vals):
    g = Grid(6, 4)
    u = DiscreteField(g, vals)
    p = tmp_path_factory.mktemp("csv") / "u.csv"
    write_field_csv(p, u)
    v = read_field_csv(p)
    assert v.grid == g
    np.testing.assert_array_equal(v.values, vals)
    np.testing.assert_array_equal(field_from_bytes(field_to_bytes(u)).values, vals)


def test_csv_layout(tmp_path):
    u = _field(3, 3)
    write_field_csv(tmp_path / "u.csv", u)
    lines = (tmp_path / "u.csv").read_text().splitlines()
    assert lines[0].startswith("# grid nx=3 ny=3")
    assert lines[1] == "x,y,value"
    assert len(lines) == 2 + 9
    x, y, v = map(float, lines[3].split(","))
    assert (x, y, v) == (0.5, 0.5, u.values[0, 1])


def test_csv_rejects_missing_header(tmp_path):
    (tmp_path / "bad.csv").write_text("x,y,value\n0,0,1\n")
    with pytest.raises(ValueError, match="header"):
        read_field_csv(tmp_path / "bad.csv")


def test_table_formatting(tmp_path):
    text = format_table(["a", "b", "c", "d"], [[0.1, 3, True, "x"], [np.float64(1e-300), np.int64(2), np.bool_(False), None]])
    assert text.splitlines() == ["a,b,c,d", "0.1,3,true,x", "1e-300,2,false,None"]
    write_table(tmp_path / "t.csv", ["a"], [[1.5]])
    assert (tmp_path / "t.csv").read_text() == "a\n1.5\n"
