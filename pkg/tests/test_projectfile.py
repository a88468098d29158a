import json
from importlib import resources

import numpy as np
import pytest

from conncalc.connection import build_vertex_model, haar_unitary
from conncalc.projectfile import (
    InputError,
    Project,
    atomic_write,
    complex_matrix_from_json,
    complex_matrix_to_json,
    load_project,
    parse_project,
    read_matrix_bin,
    serialize,
    write_matrix_bin,
)

FIXTURES = resources.files("conncalc") / "fixtures"
CANONICAL = ["vertex_identity.json", "vertex_seed7.json", "golden_graph.json", "random_pair_seed5.json",
             "corrupted_unitary.json", "non_pf.json"]


@pytest.mark.parametrize("name", CANONICAL)
def test_fixture_round_trip_is_byte_identical(name):
    path = FIXTURES / name
    text = path.read_text(encoding="utf-8")
    assert serialize(load_project(str(path))) == text


def test_complex_matrix_json(rng):
    a = haar_unitary(3, rng)
    back = complex_matrix_from_json(json.loads(json.dumps(complex_matrix_to_json(a))))
    assert np.array_equal(a, back)
    with pytest.raises(InputError):
        complex_matrix_from_json([[1.0, 2.0]])


def test_in_memory_round_trip(rng):
    c = build_vertex_model(haar_unitary(6, rng), 2, 3)
    c.source.name = "X2"
    text = serialize(Project({"X2": c.source}, {"v": c}))
    p = parse_project(json.loads(text))
    assert np.array_equal(p.one_cells["v"].w(1)[(0, 0)], c.w(1)[(0, 0)])
    assert serialize(p) == text


def test_schema_errors():
    base = json.loads((FIXTURES / "golden_graph.json").read_text())
    bad = dict(base, schema="other/1")
    with pytest.raises(InputError, match="schema"):
        parse_project(bad)
    bad = json.loads(json.dumps(base))
    bad["one_cells"]["graph-id"]["source"] = "nowhere"
    with pytest.raises(InputError, match="unknown source"):
        parse_project(bad)
    bad = json.loads(json.dumps(base))
    del bad["one_cells"]["graph-id"]["connection"][0][0]
    with pytest.raises(InputError, match="missing connection block"):
        parse_project(bad)


def test_malformed_and_missing(tmp_path):
    with pytest.raises(InputError, match="malformed JSON"):
        load_project(str(FIXTURES / "malformed.json"))
    with pytest.raises(InputError, match="cannot read"):
        load_project(str(tmp_path / "absent.json"))


def test_binary_matrix(tmp_path, rng):
    a = haar_unitary(5, rng)[:, :3]
    path = tmp_path / "m.bin"
    write_matrix_bin(str(path), a)
    raw = path.read_bytes()
    assert raw[:4] == b"CCMX" and len(raw) == 28 + 16 * a.size
    # row-major little-endian (re, im) doubles after the header
    assert np.frombuffer(raw[28:44], "<f8").tolist() == [a[0, 0].real, a[0, 0].imag]
    assert np.array_equal(read_matrix_bin(str(path)), a)
    r = np.arange(6.0).reshape(2, 3)
    write_matrix_bin(str(path), r)
    assert np.array_equal(read_matrix_bin(str(path)), r)
    path.write_bytes(b"XXXX")
    with pytest.raises(InputError):
        read_matrix_bin(str(path))


def test_atomic_write_replaces(tmp_path):
    p = tmp_path / "out.txt"
    atomic_write(str(p), "one")
    atomic_write(str(p), "two")
    assert p.read_text() == "two"
    assert [x.name for x in tmp_path.iterdir()] == ["out.txt"]
