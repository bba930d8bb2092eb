import csv
import json

import numpy as np
import pytest

from volforms.errors import ConfigurationError
from volforms.fieldio import read_field, write_csv, write_field, write_table
from volforms.grid import make_grid


def test_spacetime_roundtrip(tmp_path, rng):
    g = make_grid(2, 8, 5)
    phi = rng.normal(size=g.shape)
    write_field(tmp_path / "phi.f64", phi, g)
    meta = json.loads((tmp_path / "phi.meta.json").read_text())
    assert meta == {"dim": 2, "n": 8, "nt": 5, "layout": "time-major"}
    back, _ = read_field(tmp_path / "phi.f64")
    assert np.array_equal(back, phi)
    assert (tmp_path / "phi.f64").stat().st_size == 8 * phi.size


def test_spatial_roundtrip(tmp_path, rng):
    g = make_grid(3, 4, 3)
    f = rng.normal(size=g.spatial_shape)
    write_field(tmp_path / "f.f64", f, g)
    back, meta = read_field(tmp_path / "f.f64")
    assert meta["nt"] == 0 and np.array_equal(back, f)


def test_raw_layout_is_time_major(tmp_path):
    g = make_grid(1, 4, 3)
    phi = np.arange(12.0).reshape(3, 4)
    write_field(tmp_path / "p.f64", phi, g)
    assert np.array_equal(np.fromfile(tmp_path / "p.f64", "<f8"), np.arange(12.0))


def test_read_errors(tmp_path):
    g = make_grid(1, 4, 3)
    with pytest.raises(ConfigurationError):
        write_field(tmp_path / "x.f64", np.zeros(5), g)
    (tmp_path / "y.f64").write_bytes(b"\0" * 16)
    with pytest.raises(ConfigurationError):
        read_field(tmp_path / "y.f64")
    write_field(tmp_path / "z.f64", np.zeros(4), g)
    (tmp_path / "z.f64").write_bytes(b"\0" * 8)
    with pytest.raises(ConfigurationError):
        read_field(tmp_path / "z.f64")


def test_csv_full_precision(tmp_path):
    g = make_grid(1, 4, 3)
    vals = np.array([0.1, 1 / 3, -2e-17, 7.0])
    write_csv(tmp_path / "f.csv", vals, g)
    rows = list(csv.reader((tmp_path / "f.csv").open()))
    assert rows[0] == ["i1", "value"]
    assert [float(r[1]) for r in rows[1:]] == list(vals)


def test_table(tmp_path):
    write_table(tmp_path / "t.csv", ["j", "v"], [(0, 0.1), (1, 2.0 / 3)])
    rows = list(csv.reader((tmp_path / "t.csv").open()))
    assert float(rows[2][1]) == 2.0 / 3
