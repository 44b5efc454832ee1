import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mahlerlab.bodies import (
    Ball,
    CappedBody,
    ConedBody,
    Ellipsoid,
    Halfspace,
    HPolytope,
    LinearImage,
    LpBall,
    PolarBody,
    VPolytope,
    cube,
)
from mahlerlab.bodyio import BODY_KINDS, BodyFormatError, body_from_dict, dump, dumps, load, loads
from mahlerlab.volume import sphere_directions

BODIES = [
    cube(3),
    HPolytope(np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]]), np.array([1.0, 1.0, 0.5])),
    VPolytope([[0.0, 0.0], [1.0, 0.1], [0.3, 0.9]]),
    Ball(3, 1.3, center=[0.1, 0.0, -0.2]),
    Ellipsoid.from_axes([2.0, 1.0, 0.5]),
    LpBall(2, 3.0, 0.7),
    LpBall(3, math.inf),
    CappedBody(Ball(2), [Halfspace(np.array([0.0, 1.0]), 0.9)]),
    ConedBody(Ball(2), [[0.0, 1.2]]),
    LinearImage(Ball(2), np.array([[2.0, 0.3], [0.0, 1.0]]), np.array([0.1, 0.0])),
    PolarBody(LpBall(2, 3.0)),
]


@pytest.mark.parametrize("K", BODIES, ids=lambda K: type(K).__name__)
def test_roundtrip_preserves_support(K):
    text = dumps(K)
    L = loads(text)
    assert type(L) is type(K)
    u = sphere_directions(K.dim, 64, 1)
    np.testing.assert_array_equal(L.support(u), K.support(u))
    assert dumps(L) == text


def test_every_kind_is_covered():
    kinds = {json.loads(dumps(K))["kind"] for K in BODIES}
    assert kinds == set(BODY_KINDS)


@given(st.floats(-1e6, 1e6, allow_nan=False).filter(lambda x: abs(x) > 1e-3))
def test_seventeen_digits_are_exact(x):
    K = Ball(2, abs(x), center=[x, -x])
    L = loads(dumps(K))
    assert L.radius == abs(x)
    np.testing.assert_array_equal(L.center, [x, -x])


def test_infinite_exponent_is_a_string():
    d = json.loads(dumps(LpBall(2, math.inf)))
    assert d["p"] == "inf"


def test_file_roundtrip(tmp_path):
    K = Ellipsoid.from_axes([1.5, 0.5])
    path = tmp_path / "e.json"
    dump(K, path)
    np.testing.assert_array_equal(load(path).M, K.M)


@pytest.mark.parametrize(
    "text",
    [
        "{not json",
        "[1, 2]",
        '{"kind": "ball"}',
        '{"kind": "torus", "dim": 3}',
        '{"kind": "ball", "dim": "3"}',
        '{"kind": "ball", "dim": 2, "center": [0, 0, 0]}',
        '{"kind": "vpolytope", "dim": 2, "vertices": [[0, "a"]]}',
        '{"kind": "vpolytope", "dim": 2, "vertices": [0, 1]}',
        '{"kind": "capped", "dim": 2, "base": {"kind": "ball", "dim": 2}, "halfspaces": [{"normal": [0, 1]}]}',
    ],
)
def test_malformed_records_are_rejected(text):
    with pytest.raises(BodyFormatError):
        loads(text)


def test_format_error_is_a_value_error():
    with pytest.raises(ValueError):
        body_from_dict({"kind": "ball"})
