import json
import logging
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hrlab import results
from hrlab.config import ExperimentManifest, config_hash, parse, serialize
from hrlab.errors import ConfigError
from hrlab.results import ResultEnvelope, cache_load, cache_store, check, dumps, write_csv

names = st.from_regex(r"[A-Za-z_][A-Za-z0-9_]{0,6}", fullmatch=True)
scalars = st.one_of(st.integers(-10**6, 10**6), st.floats(allow_nan=False), st.booleans(), st.none(),
                    st.text(st.characters(codec="ascii", exclude_characters="\r\x0b\x0c\x1c\x1d\x1e\x85"),
                            max_size=12))
values = st.one_of(scalars, st.lists(scalars, max_size=4))
manifests = st.dictionaries(names, st.dictionaries(names, values, max_size=4), max_size=3)


@given(manifests)
def test_serialize_round_trip(data):
    text = serialize(data)
    back = parse(text)
    assert back == data
    assert serialize(back) == text


@given(manifests)
def test_hash_ignores_order(data):
    rev = {s: dict(reversed(list(kv.items()))) for s, kv in reversed(list(data.items()))}
    assert config_hash(rev) == config_hash(data)


def test_parse_values():
    d = parse('top = 1\n[a]  # c\nx = 2.5\ny = [1, "b,c", true, none]\nz = hello world ; note\nq = "1"\n')
    assert d == {"main": {"top": 1}, "a": {"x": 2.5, "y": [1, "b,c", True, None], "z": "hello world", "q": "1"}}


@pytest.mark.parametrize("text,line,col", [
    ("[a]\nx 1\n", 2, 3),
    ("[a\n", 1, 3),
    ("[a]\n[a]\n", 2, 2),
    ("[a]\nx = 1\nx = 2\n", 3, 1),
    ('x = "abc\n', 1, 9),
    ("x = [1, 2\n", 1, 10),
    ("x =\n", 1, 4),
    ("9x = 1\n", 1, 1),
])
def test_parse_errors_carry_location(text, line, col):
    with pytest.raises(ConfigError) as ei:
        parse(text)
    assert (ei.value.line, ei.value.column) == (line, col)
    assert f"line {line}, column {col}" in str(ei.value)


def test_manifest_access(tmp_path):
    p = tmp_path / "m.ini"
    p.write_text("[main]\nseed = 4\n[model]\neps = 1\nsizes = [6, 8]\n[tolerances]\nfoo = 1e-3\n")
    m = ExperimentManifest.load(p)
    assert m.seed == 4 and m.tolerance("foo", 1.0) == 1e-3 and m.tolerance("bar", 2.0) == 2.0
    assert m.get("model", "eps", kind=float) == 1.0 and m.get("model", "sizes", kind=int) == [6, 8]
    with pytest.raises(ConfigError, match="expected float"):
        ExperimentManifest.from_text("x = true\n").get("main", "x", kind=float)
    with pytest.raises(ConfigError):
        ExperimentManifest.load(tmp_path / "missing.ini")
    assert ExperimentManifest.from_text(m.serialize()).hash == m.hash


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_dumps_round_trips_floats(x):
    out = json.loads(dumps({"v": x, "arr": np.array([x])}))
    assert out["v"] == x and isinstance(out["v"], float) and out["arr"] == [x]


def test_dumps_format():
    s = dumps({"a": 0.1, "b": 2.0, "c": float("inf"), "d": np.int64(3), "e": (1 + 2j), "f": [], "g": {}})
    assert '"a": 0.10000000000000001' in s and '"b": 2.0' in s and '"c": null' in s
    assert json.loads(s)["e"] == [1.0, 2.0]


def test_envelope_round_trip():
    env = ResultEnvelope("spectrum", "h" * 64, "gap", {"x": [1.5]}, [check("a", True, 1.0, 2.0, "n")], 0.5)
    back = ResultEnvelope.from_dict(json.loads(dumps(env.to_dict())))
    assert back.to_dict() == env.to_dict() and not back.failed
    assert env.to_dict()["schema"] == 1
    with pytest.raises(ValueError):
        ResultEnvelope.from_dict({**env.to_dict(), "schema": 2})


def test_csv_floats(tmp_path):
    p = tmp_path / "t.csv"
    write_csv(p, ["a", "b"], [(1.0, 3), (math.pi, "z")])
    assert p.read_text() == "a,b\n1.0,3\n3.1415926535897931,z\n"


def test_cache(tmp_path, monkeypatch, caplog):
    monkeypatch.setenv("HRLAB_CACHE_DIR", str(tmp_path))
    env = ResultEnvelope("certify", "abc", "v", {"v": 1.25})
    assert cache_load("certify", "abc") is None
    path = cache_store(env)
    assert path.parent == tmp_path
    assert cache_load("certify", "abc").payload == {"v": 1.25}
    assert cache_load("spectrum", "abc") is None
    path.write_text("{not json")
    with caplog.at_level(logging.WARNING, logger="hrlab"):
        assert cache_load("certify", "abc") is None
    assert "corrupt" in caplog.text
    assert results.cache_dir() == tmp_path
