import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from modfix.contraction import IterationTrace, StrongContractionCertificate, solve_strong
from modfix.errors import PreconditionError
from modfix.serialize import dumps, load_modular, load_problem, read_trace, result_to_dict, write_json, write_trace


def test_trace_roundtrip(tmp_path, rho2, half_shift):
    res = solve_strong(half_shift, rho2, StrongContractionCertificate(1.2, 1.0, 0.36), np.zeros(2), 1e-12)
    path = tmp_path / "t.csv"
    write_trace(path, res.trace)
    data = read_trace(path)
    assert list(data) == ["index", "residual", "bound", "distance", "distance_bound"]
    assert np.array_equal(data["residual"], res.trace.residual)
    assert np.array_equal(data["bound"], res.trace.bound)


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=20))
def test_float_repr_is_exact(vals):
    import tempfile
    from pathlib import Path

    tr = IterationTrace(np.arange(len(vals)), np.array(vals), np.array(vals), 0.0)
    with tempfile.TemporaryDirectory() as d:
        p = Path(d) / "t.csv"
        write_trace(p, tr)
        assert np.array_equal(read_trace(p)["residual"], np.array(vals))


def test_json_stable(tmp_path):
    doc = {"b": np.array([1.0, 2.5]), "a": np.float64(0.1), "inf": float("inf"), "flag": np.bool_(True)}
    assert dumps(doc) == dumps(dict(reversed(list(doc.items()))))
    back = json.loads(dumps(doc))
    assert back == {"a": 0.1, "b": [1.0, 2.5], "inf": "inf", "flag": True}


def test_result_document(rho2, half_shift):
    res = solve_strong(half_shift, rho2, StrongContractionCertificate(1.2, 1.0, 0.36), np.zeros(2), 1e-12)
    doc = json.loads(dumps(result_to_dict(res)))
    assert doc["converged"] and doc["trace_violations"] == []
    assert doc["certificate"]["c"] == 1.2


@pytest.mark.parametrize("body", ["", "index,foo\n1,2\n", "index,residual,bound\n1,x,2\n", "index,residual,bound\n1,2\n"])
def test_malformed_trace(tmp_path, body):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(PreconditionError):
        read_trace(p)


def test_load_specs(tmp_path):
    p = tmp_path / "m.json"
    write_json(p, {"dimension": 3, "generator": {"kind": "power", "params": {"p": 1.0}}, "weights": [1, 2, 3]})
    rho = load_modular(p)
    assert rho([1.0, 1.0, 1.0]) == 6.0
    T = load_problem({"type": "rotation", "theta": 0.0, "b": [0.0, 0.0]})
    assert T(np.array([1.0, 2.0])) == pytest.approx([1.0, 2.0])
    with pytest.raises(PreconditionError):
        load_modular(tmp_path / "missing.json")
    with pytest.raises(PreconditionError):
        load_modular({"dimension": 2})
