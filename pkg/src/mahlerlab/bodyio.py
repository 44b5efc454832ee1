"""JSON form of convex bodies.

Every record has ``dim`` and ``kind``; the remaining fields depend on the
kind (see ``BODY_KINDS``).  Floats are written with 17 significant digits
so a load/dump round trip is exact.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .bodies import (
    Ball,
    CappedBody,
    ConedBody,
    ConvexBody,
    Ellipsoid,
    Halfspace,
    HPolytope,
    LinearImage,
    LpBall,
    PolarBody,
    VPolytope,
)

SCHEMA_VERSION = 1

BODY_KINDS = {
    "hpolytope": "A (rows), b; optional interior_point",
    "vpolytope": "vertices",
    "ball": "radius; optional center",
    "ellipsoid": "semi_axes with optional center and rotation, or matrix with optional center",
    "lp_ball": "p (number or \"inf\"); optional radius",
    "capped": "base (body), halfspaces [{normal, offset}]",
    "coned": "base (body), apexes",
    "linear_image": "base (body), matrix; optional shift",
    "polar": "base (body)",
}


class BodyFormatError(ValueError):
    """The body record is not valid JSON or does not match the schema."""


def _require(d, key):
    if key not in d:
        raise BodyFormatError(f"body of kind {d.get('kind')!r} needs field {key!r}")
    return d[key]


def _array(value, name, ndim):
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise BodyFormatError(f"field {name!r} is not numeric") from exc
    if arr.ndim != ndim or not np.all(np.isfinite(arr)):
        raise BodyFormatError(f"field {name!r} must be a finite {ndim}-d array")
    return arr


def _center(d, dim):
    c = d.get("center")
    if c is None:
        return None
    c = _array(c, "center", 1)
    if len(c) != dim:
        raise BodyFormatError(f"center has {len(c)} coordinates, dim is {dim}")
    return c


def body_from_dict(d) -> ConvexBody:
    if not isinstance(d, dict):
        raise BodyFormatError("body record must be a JSON object")
    kind = _require(d, "kind")
    dim = _require(d, "dim")
    if not isinstance(dim, int) or isinstance(dim, bool):
        raise BodyFormatError("dim must be an integer")
    if kind == "hpolytope":
        ip = d.get("interior_point")
        body = HPolytope(
            _array(_require(d, "A"), "A", 2),
            _array(_require(d, "b"), "b", 1),
            interior_point=None if ip is None else _array(ip, "interior_point", 1),
        )
    elif kind == "vpolytope":
        body = VPolytope(_array(_require(d, "vertices"), "vertices", 2))
    elif kind == "ball":
        body = Ball(dim, float(d.get("radius", 1.0)), _center(d, dim))
    elif kind == "ellipsoid":
        c = _center(d, dim)
        if "matrix" in d:
            body = Ellipsoid(_array(d["matrix"], "matrix", 2), c)
        else:
            rot = d.get("rotation")
            body = Ellipsoid.from_axes(
                _array(_require(d, "semi_axes"), "semi_axes", 1),
                c,
                None if rot is None else _array(rot, "rotation", 2),
            )
    elif kind == "lp_ball":
        p = _require(d, "p")
        p = math.inf if p in ("inf", "Infinity", math.inf) else float(p)
        body = LpBall(dim, p, float(d.get("radius", 1.0)))
    elif kind == "capped":
        hs = [
            Halfspace(_array(_require(h, "normal"), "normal", 1), float(_require(h, "offset")))
            for h in _require(d, "halfspaces")
        ]
        body = CappedBody(body_from_dict(_require(d, "base")), hs)
    elif kind == "coned":
        body = ConedBody(body_from_dict(_require(d, "base")), _array(_require(d, "apexes"), "apexes", 2))
    elif kind == "linear_image":
        s = d.get("shift")
        body = LinearImage(
            body_from_dict(_require(d, "base")),
            _array(_require(d, "matrix"), "matrix", 2),
            None if s is None else _array(s, "shift", 1),
        )
    elif kind == "polar":
        body = PolarBody(body_from_dict(_require(d, "base")))
    else:
        raise BodyFormatError(f"unknown body kind {kind!r}")
    if body.dim != dim:
        raise BodyFormatError(f"declared dim {dim} but the data has dimension {body.dim}")
    return body


def loads(text) -> ConvexBody:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BodyFormatError(f"malformed JSON: {exc}") from exc
    return body_from_dict(d)


def load(path) -> ConvexBody:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def _encode(obj):
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "null"
        if math.isinf(x):
            return '"inf"' if x > 0 else '"-inf"'
        return format(x, ".17g")
    if obj is None:
        return "null"
    return json.dumps(obj)


def dumps(obj) -> str:
    """JSON text with every float at 17 significant digits (infinities as strings)."""
    if isinstance(obj, ConvexBody):
        obj = obj.to_dict()
    return _encode(obj)


def dump(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj) + "\n")
