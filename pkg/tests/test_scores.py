import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edog.errors import DomainError, MalformedInputError, SchemaError
from edog.scores import EdgeScores, read_scores, scores_to_csv, write_scores


def test_pairs_are_canonicalized():
    s = EdgeScores([(3, 1), (0, 2)], [0.5, 0.25])
    assert s.pairs == ((1, 3), (0, 2))
    assert s[(2, 0)] == 0.25


def test_rejects_bad_maps():
    with pytest.raises(DomainError):
        EdgeScores([(0, 1), (1, 0)], [1.0, 2.0])
    with pytest.raises(DomainError):
        EdgeScores([(0, 1)], [np.nan])
    with pytest.raises(DomainError):
        EdgeScores([(0, 1)], [1.0, 2.0])


def test_csv_layout():
    s = EdgeScores([(2, 3), (0, 1)], [0.1, 1 / 3])
    lines = scores_to_csv(s).splitlines()
    assert lines[0] == "u,v,score"
    assert lines[1] == f"0,1,{1 / 3:.17g}"
    assert lines[2] == "2,3,0.10000000000000001"


@settings(max_examples=50, deadline=None)
@given(st.dictionaries(st.tuples(st.integers(0, 30), st.integers(0, 30)).filter(lambda p: p[0] != p[1]),
                       st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=20))
def test_roundtrip_is_exact(tmp_path_factory, mapping):
    mapping = {tuple(sorted(k)): v for k, v in mapping.items()}
    s = EdgeScores.from_mapping(mapping)
    path = tmp_path_factory.mktemp("s") / "s.csv"
    write_scores(s, path)
    back = read_scores(path)
    assert back.as_dict() == s.as_dict()


def test_read_errors(tmp_path):
    empty = tmp_path / "e.csv"
    empty.write_text("")
    with pytest.raises(MalformedInputError):
        read_scores(empty)
    bad_header = tmp_path / "h.csv"
    bad_header.write_text("a,b,c\n0,1,0.5\n")
    with pytest.raises(SchemaError):
        read_scores(bad_header)
    bad_value = tmp_path / "v.csv"
    bad_value.write_text("u,v,score\n0,1,high\n")
    with pytest.raises(MalformedInputError):
        read_scores(bad_value)
