import json

import pytest

from moranifs import ConfigError, parse_system, load_system
from moranifs.config import dumps, system_to_json


def explicit(**over):
    doc = {
        "schema_version": 1,
        "dimension": 1,
        "ambient": {"lo": [0.0], "hi": [1.0]},
        "provider": "explicit",
        "cycle": [[{"kind": "similarity", "ratio": 1 / 3, "translation": [0.0]},
                   {"kind": "similarity", "ratio": 1 / 3, "translation": [2.0]}]],
    }
    doc.update(over)
    return doc


def pointer_of(doc):
    with pytest.raises(ConfigError) as exc:
        parse_system(doc)
    return exc.value.pointer


def test_explicit_roundtrip():
    sys = parse_system(explicit())
    assert sys.layer(5).maps[1].ratio == pytest.approx(1 / 3)
    again = parse_system(json.loads(dumps(system_to_json(sys))))
    assert again.layer(3).maps[1].apply([0.0]) == pytest.approx(sys.layer(3).maps[1].apply([0.0]))


def test_family_with_ambient_override():
    sys = parse_system({"provider": "family", "family": {"name": "ex59", "params": {}},
                        "ambient": {"lo": [-0.5], "hi": [1.5]}})
    assert sys.ambient.lo[0] == -0.5


def test_weights():
    sys = parse_system(explicit(weights={"kind": "explicit", "cycle": [[0.25, 0.75]]}))
    assert sys.weights.kind == "explicit"


@pytest.mark.parametrize("doc,pointer", [
    (explicit(cycle=[[{"ratio": 1.2, "translation": [0]}, {"ratio": 0.3, "translation": [2]}]]), "/cycle/0/0/ratio"),
    (explicit(cycle=[[{"ratio": 0.3, "translation": [0]}, {"ratio": "x", "translation": [2]}]]), "/cycle/0/1/ratio"),
    (explicit(cycle=[[{"ratio": 0.3, "translation": [0, 1]}, {"ratio": 0.3}]]), "/cycle/0/0/translation"),
    (explicit(cycle=[[{"ratio": 0.3, "colour": 1}, {"ratio": 0.3}]]), "/cycle/0/0/colour"),
    (explicit(cycle=[[{"kind": "shear", "ratio": 0.3}, {"ratio": 0.3}]]), "/cycle/0/0/kind"),
    (explicit(cycle=[[{"kind": "diagonal", "diag": [0.5, 2.0], "translation": [0]}]]), "/cycle/0"),
    (explicit(cycle=[]), "/cycle"),
    (explicit(dimension=4), "/dimension"),
    (explicit(ambient={"lo": [1.0], "hi": [0.0]}), "/ambient"),
    (explicit(ambient=None), "/ambient"),
    (explicit(schema_version=2), "/schema_version"),
    (explicit(provider="magic"), "/provider"),
    (explicit(weights={"kind": "explicit", "cycle": [[0.5, 0.6]]}), "/weights/cycle/0"),
    ({"provider": "family", "family": {"name": "ex55", "params": {"a_rule": "sideways"}}},
     "/family/params/a_rule"),
    ({"provider": "family", "family": {"params": {}}}, "/family"),
])
def test_errors_point_at_field(doc, pointer):
    assert pointer_of(doc) == pointer


def test_diagonal_entry_pointer():
    doc = explicit(dimension=2, ambient={"lo": [0, 0], "hi": [1, 1]},
                   cycle=[[{"kind": "diagonal", "diag": [0.5, 1.5], "translation": [0, 0]},
                           {"kind": "diagonal", "diag": [0.5, 0.5], "translation": [1, 1]}]])
    assert pointer_of(doc) == "/cycle/0/0/diag"


def test_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{nope")
    with pytest.raises(ConfigError):
        load_system(p)


def test_dumps_is_canonical():
    assert dumps({"b": 1, "a": [1.5]}) == '{\n  "a": [\n    1.5\n  ],\n  "b": 1\n}\n'
    with pytest.raises(ValueError):
        dumps({"x": float("nan")})
