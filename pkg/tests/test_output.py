import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from branchkit import output


def test_header_only_csv():
    assert output.csv_text(("t", "p"), []) == "t,p\n"


def test_nan_refused():
    with pytest.raises(output.NonFiniteError):
        output.csv_text(("a",), [(float("nan"),)])
    with pytest.raises(output.NonFiniteError):
        output.json_text({"a": [1.0, float("inf")]})


def test_twelve_significant_digits_and_blanks():
    text = output.csv_text(("a", "b", "c"), [(np.pi, None, np.int64(3))])
    assert text.splitlines()[1] == "3.14159265359,,3"


def test_row_width_checked():
    with pytest.raises(ValueError):
        output.csv_text(("a", "b"), [(1,)])


def test_comment_line():
    text = output.csv_text(("x",), [(1,)], comment={"mass": 0.5})
    first = text.splitlines()[0]
    assert first.startswith("# ")
    assert json.loads(first[2:]) == {"schema_version": output.SCHEMA_VERSION, "mass": 0.5}


@given(st.dictionaries(st.text(min_size=1, max_size=5),
                       st.floats(allow_nan=False, allow_infinity=False) | st.integers()))
def test_json_round_trip(doc):
    back = json.loads(output.json_text(doc))
    assert back.pop("schema_version") == output.SCHEMA_VERSION
    assert back == doc


def test_write_to_file(tmp_path, capsys):
    path = tmp_path / "o.csv"
    output.emit([(1, 2.5)], "csv", path, header=("a", "b"))
    assert path.read_text() == "a,b\n1,2.5\n"
    output.emit({"v": np.arange(2)}, "json", None)
    assert json.loads(capsys.readouterr().out)["v"] == [0, 1]
