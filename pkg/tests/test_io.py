import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from germkit.errors import ModelSpecError
from germkit.io import complex_matrix, decode_complex_array, dumps, load_json, locate
from germkit.spectral import StabilityClass


def test_float_format_round_trips():
    x = 0.1 + 0.2
    assert dumps(x).strip() == "0.30000000000000004"
    assert dumps(-0.0).strip() == "0"


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_floats_exact(x):
    assert float(json.loads(dumps(x))) == x


def test_complex_and_arrays():
    out = json.loads(dumps({"z": 1 + 2j, "A": np.array([[1, 1j], [0, 2]]), "b": np.bool_(True)}))
    assert out["z"] == [1, 2]
    assert out["A"] == [[[1, 0], [0, 1]], [[0, 0], [2, 0]]]
    assert decode_complex_array(out["A"])[0, 1] == 1j
    assert out["b"] is True


def test_enum_and_nonfinite():
    out = json.loads(dumps([StabilityClass.STABLE, float("inf"), float("nan")]))
    assert out == ["Stable", "inf", "nan"]


def test_deterministic():
    obj = {"b": np.linspace(0, 1, 50), "a": [np.eye(3) * (1 + 1e-13j)]}
    assert dumps(obj) == dumps(obj)
    assert list(json.loads(dumps(obj))) == ["b", "a"]


def test_unknown_type():
    with pytest.raises(TypeError):
        dumps(object())


class TestComplexMatrix:
    def test_mixed_entries(self):
        A = complex_matrix([[1, [0, 1]], [2.5, [3, -1]]])
        assert A[0, 1] == 1j and A[1, 1] == 3 - 1j

    @pytest.mark.parametrize(
        "data, path",
        [
            ([], "M"),
            ([[1, 2], [3]], "M[1]"),
            ([[1, "a"]], "M[0][1]"),
            ([[1, [1, 2, 3]]], "M[0][1]"),
            ([[True]], "M[0][0]"),
        ],
    )
    def test_errors(self, data, path):
        with pytest.raises(ModelSpecError) as err:
            complex_matrix(data, "M")
        assert err.value.path == path


def test_locate():
    text = '{\n  "a": 1,\n  "m": [\n    [1, 2],\n    [3,\n     4]\n  ]\n}'
    assert locate(text, "a") == 2
    assert locate(text, "m") == 3
    assert locate(text, "m[1]") == 5
    assert locate(text, "m[1][1]") == 6


def test_load_json_syntax_error():
    with pytest.raises(ModelSpecError) as err:
        load_json('{\n  "a": 1,\n  "b": \n}')
    assert err.value.line == 4 and "invalid JSON" in str(err.value)
