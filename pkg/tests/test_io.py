import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qconserve import io
from qconserve.conservation import conservation_check, finite_composition
from qconserve.errors import ParseError
from qconserve.instrument import random_instrument
from qconserve.models import number_povm, photon_counting_instrument
from qconserve.outcomes import OutcomeSpace, random_kernel
from qconserve.povm import find_post_processing, random_povm


def test_matrix_literal_shape():
    lit = io.matrix_to_literal(np.array([[1, 2j], [-2j, 0.5]]))
    assert lit == [[[1.0, 0.0], [0.0, 2.0]], [[0.0, -2.0], [0.5, 0.0]]]
    assert np.array_equal(io.literal_to_matrix(lit), np.array([[1, 2j], [-2j, 0.5]]))
    with pytest.raises(ParseError):
        io.literal_to_matrix([[1, 2], [3, 4]])
    with pytest.raises(ParseError):
        io.literal_to_matrix(lit, dim=3)


@given(st.integers(0, 2**32 - 1))
def test_floats_roundtrip_exactly(seed):
    r = np.random.default_rng(seed)
    a = r.normal(size=(3, 3)) * 10.0 ** r.integers(-300, 300) + 1j * r.normal(size=(3, 3))
    text = json.dumps(io.matrix_to_literal(a))
    assert np.array_equal(io.literal_to_matrix(json.loads(text)), a)


def test_povm_roundtrip_with_tuple_labels(tmp_path):
    pc = photon_counting_instrument(0.5, 2)
    e = finite_composition(pc, 2)
    io.write_json(tmp_path / "e.json", io.povm_to_json(e))
    back = io.load_povm(tmp_path / "e.json")
    assert back.space == e.space and back.space.factors == e.space.factors
    assert np.array_equal(back.effects, e.effects)


def test_instrument_and_kernel_roundtrip(tmp_path, rng):
    ins = random_instrument(3, 2, rng)
    io.write_json(tmp_path / "i.json", io.instrument_to_json(ins))
    back = io.load_instrument(tmp_path / "i.json")
    assert back.space == ins.space and np.array_equal(back.kraus, ins.kraus)
    nu = random_kernel(OutcomeSpace([0, "rest"]), OutcomeSpace([(0, 1), (1, 1)]), rng)
    io.write_json(tmp_path / "k.json", io.kernel_to_json(nu))
    k = io.load_kernel(tmp_path / "k.json")
    assert k.source == nu.source and k.target == nu.target
    assert np.max(np.abs(k.matrix - nu.matrix)) <= 1e-15


def test_certificate_and_report_json(rng):
    e = random_povm(2, 3, rng)
    doc = io.certificate_to_json(find_post_processing(e, e))
    assert doc["feasible"] is True and doc["kernel"]["rows"][0][0] == pytest.approx(1.0)
    rep = conservation_check(photon_counting_instrument(0.5, 2), number_povm(2))
    doc = io.conservation_to_json(rep)
    assert set(doc) == {"conserved", "residual_forward", "residual_backward", "kernels"}
    json.dumps(doc)


def test_loader_errors(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ParseError):
        io.read_json(p)
    with pytest.raises(ParseError):
        io.povm_from_json({"labels": [0]})
    with pytest.raises(ParseError):
        io.povm_from_json({"labels": [1.5], "dim": 1, "effects": [[[[1, 0]]]]})


def test_csv_uses_17_digits(tmp_path):
    io.write_csv(tmp_path / "t.csv", ["n", "residual"], [(1, 0.1), (2, 1 / 3)])
    header, rows = io.read_csv(tmp_path / "t.csv")
    assert header == ["n", "residual"]
    assert rows[0] == ["1", "0.10000000000000001"]
    assert float(rows[1][1]) == 1 / 3
