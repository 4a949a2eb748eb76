import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from aefrc.errors import DataError
from aefrc.serialize import dump_document, fmt_float, fmt_vector, load_document, parse_vector


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_text_round_trip_is_exact(x):
    assert float(fmt_float(x)) == x


def test_vector_round_trip():
    v = np.array([1.0, -2.5, 3e-300, math.pi])
    out = parse_vector(fmt_vector(v))
    assert (out == v).all()


def test_parse_vector_length_check():
    with pytest.raises(DataError):
        parse_vector("1 2 3", expected=4)


def test_document_version_gate(tmp_path):
    p = tmp_path / "doc.json"
    dump_document({"x": 1}, str(p), "aefrc-network", 1)
    doc = load_document(str(p), "aefrc-network", 1)
    assert doc["x"] == 1
    with pytest.raises(DataError):
        load_document(str(p), "aefrc-rulebase", 1)
    with pytest.raises(DataError):
        load_document(str(p), "aefrc-network", 2)
