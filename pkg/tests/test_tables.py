import numpy as np
from hypothesis import given, settings, strategies as st

from qchaoslab.tables import read_table, sha256_file, write_table


def test_roundtrip_with_header(tmp_path):
    p = tmp_path / "t.tsv"
    h = {"kind": "ldos", "scales": {"dx_c": 0.5}, "A": np.float64(1.5)}
    digest = write_table(p, {"r": np.arange(3), "P": [0.25, 0.5, 0.25], "label": ["a", "b", "c"]}, h)
    assert digest == sha256_file(p)
    header, cols = read_table(p)
    assert header == {"kind": "ldos", "scales": {"dx_c": 0.5}, "A": 1.5}
    assert list(cols["r"]) == [0, 1, 2] and list(cols["label"]) == ["a", "b", "c"]


def test_single_column_and_no_header(tmp_path):
    p = tmp_path / "t.tsv"
    write_table(p, {"x": [1.0, 2.0]})
    header, cols = read_table(p)
    assert header == {} and list(cols["x"]) == [1.0, 2.0]


def test_ragged_columns_rejected(tmp_path):
    import pytest

    with pytest.raises(ValueError):
        write_table(tmp_path / "t.tsv", {"a": [1, 2], "b": [1]})


@settings(max_examples=50)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=30))
def test_floats_roundtrip_bit_exactly(tmp_path_factory, xs):
    p = tmp_path_factory.mktemp("t") / "t.tsv"
    write_table(p, {"x": np.array(xs)})
    _, cols = read_table(p)
    assert np.array_equal(cols["x"], np.array(xs))
    assert write_table(p, {"x": np.array(xs)}) == sha256_file(p)
