"""Convex bodies as oracle bundles.

Every body answers membership, support, radial, gauge and boundary-normal
queries.  Polytopes are exact (H- or V-representation backed by Qhull);
smooth bodies use closed forms; the two perturbation wrappers,
:class:`CappedBody` (intersection with halfspaces) and :class:`ConedBody`
(convex hull with apex points), are lazy compositions over a base body.

Array conventions: query methods accept a single vector of shape ``(n,)`` or
a batch of shape ``(m, n)`` and return a scalar or an ``(m,)`` array
(``(m, n)`` for vector-valued queries).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from .errors import GeometryError, NonUniqueNormalError

MAX_DIM = 6
MERGE_TOL = 1e-10
BOUNDARY_TOL = 1e-9
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _batched(method):
    """Let ``method`` (written for (m, n) arrays) also accept one vector."""

    @functools.wraps(method)
    def wrapper(self, x, *args, **kwargs):
        arr = np.asarray(x, dtype=float)
        if arr.ndim == 1:
            return method(self, arr[None, :], *args, **kwargs)[0]
        return method(self, arr, *args, **kwargs)

    return wrapper


def _unit_rows(u):
    norms = np.linalg.norm(u, axis=1)
    if np.any(norms == 0):
        raise GeometryError("zero direction")
    return u / norms[:, None], norms


def golden_min(f, lo, hi, iters=120):
    """Vectorized golden-section minimization of convex 1-D functions.

    ``f`` maps an array of abscissae (one per problem) to function values.
    Returns ``(t, f(t))`` with the endpoint ``lo`` taken when it is better.
    """
    a = np.array(lo, dtype=float)
    b = np.array(hi, dtype=float)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if np.all(b - a <= 1e-16 * (1.0 + np.abs(b))):
            break
        left = fc <= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c_new = np.where(left, b - _INVPHI * (b - a), d)
        d_new = np.where(left, c, a + _INVPHI * (b - a))
        f_new = f(np.where(left, c_new, d_new))
        fc, fd = np.where(left, f_new, fd), np.where(left, fc, f_new)
        c, d = c_new, d_new
    t = 0.5 * (a + b)
    ft = f(t)
    lo = np.asarray(lo, dtype=float)
    f_lo = f(lo)
    take_lo = f_lo <= ft
    return np.where(take_lo, lo, t), np.where(take_lo, f_lo, ft)


def boundary_along(body, points, directions, t_inside, t_outside, iters=200):
    """Bisect for the boundary crossing on the segments ``p + t d``.

    ``t_inside`` must give points of ``body`` and ``t_outside`` points outside.
    Both are arrays with one entry per segment.
    """
    p = np.atleast_2d(np.asarray(points, dtype=float))
    d = np.atleast_2d(np.asarray(directions, dtype=float))
    t_in = np.array(t_inside, dtype=float) * np.ones(len(p))
    t_out = np.array(t_outside, dtype=float) * np.ones(len(p))
    for _ in range(iters):
        mid = 0.5 * (t_in + t_out)
        width = np.abs(t_out - t_in)
        if np.all(width <= 4e-16 * np.maximum(np.abs(mid), 1e-300)):
            break
        inside = body.contains(p + mid[:, None] * d, tol=0.0)
        t_in = np.where(inside, mid, t_in)
        t_out = np.where(inside, t_out, mid)
    return 0.5 * (t_in + t_out)


@dataclass(frozen=True)
class Halfspace:
    """The set ``{x : <normal, x> <= offset}`` with a unit normal."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        a = np.asarray(self.normal, dtype=float)
        norm = np.linalg.norm(a)
        if not np.isfinite(norm) or norm == 0:
            raise GeometryError("halfspace normal must be a finite nonzero vector")
        object.__setattr__(self, "normal", a / norm)
        object.__setattr__(self, "offset", float(self.offset) / norm)

    @property
    def dim(self):
        return len(self.normal)

    def contains(self, x, tol=0.0):
        return np.asarray(x, dtype=float) @ self.normal <= self.offset + tol

    def translate(self, t):
        return Halfspace(self.normal, self.offset + float(self.normal @ t))

    def linear_image(self, T):
        # <a, T^{-1} y> <= b  <=>  <T^{-T} a, y> <= b
        return Halfspace(np.linalg.solve(np.asarray(T, float).T, self.normal), self.offset)


class ConvexBody:
    """Base class; subclasses override whatever they have in closed form."""

    dim: int
    kind: str = "body"
    smooth: bool = False  # C^1 boundary and strictly convex

    # -- oracles -----------------------------------------------------------
    def contains(self, x, tol=1e-12):
        raise NotImplementedError

    def support(self, u):
        raise NotImplementedError

    def support_point(self, u):
        raise NotImplementedError

    @_batched
    def radial(self, u):
        u, norms = _unit_rows(u)
        if not self.contains(np.zeros(self.dim), tol=0.0):
            raise GeometryError("radial function needs the origin inside the body")
        t_out = self.support(u) * (1.0 + 1e-6) + 1e-300
        return boundary_along(self, np.zeros_like(u), u, 0.0, t_out) / norms

    @_batched
    def gauge(self, x):
        norms = np.linalg.norm(x, axis=1)
        out = np.zeros(len(x))
        nz = norms > 0
        if np.any(nz):
            out[nz] = norms[nz] / self.radial(x[nz] / norms[nz, None])
        return out

    @_batched
    def normal(self, x):
        """Unit outer normal from a central-difference gradient of the gauge."""
        step = 1e-6 * np.maximum(np.linalg.norm(x, axis=1), 1e-3)
        grads = np.empty_like(x)
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = 1.0
            grads[:, i] = (self.gauge(x + step[:, None] * e) - self.gauge(x - step[:, None] * e)) / (
                2 * step
            )
        return grads / np.linalg.norm(grads, axis=1)[:, None]

    # -- constructions -----------------------------------------------------
    def polar(self):
        """Polar body about the origin (origin must be interior)."""
        return PolarBody(self)

    def translate(self, t):
        t = np.asarray(t, dtype=float)
        if not np.any(t):
            return self
        return LinearImage(self, np.eye(self.dim), t)

    def linear_image(self, T):
        return LinearImage(self, T)

    def interior_point(self):
        eye = np.eye(self.dim)
        return 0.5 * np.mean(self.support_point(eye) + self.support_point(-eye), axis=0)

    def is_interior(self, z, tol=1e-10):
        z = np.asarray(z, dtype=float)
        eye = np.eye(self.dim)
        probes = np.vstack([z, z + tol * eye, z - tol * eye])
        return bool(np.all(self.contains(probes, tol=0.0)))

    def bounding_box(self):
        eye = np.eye(self.dim)
        return -self.support(-eye), self.support(eye)

    def to_dict(self):
        raise NotImplementedError(f"{type(self).__name__} has no JSON form")


# ---------------------------------------------------------------------------
# polytopes
# ---------------------------------------------------------------------------


def _check_dim(n):
    if n < 2 or n > MAX_DIM:
        raise GeometryError(f"polytope dimension must be in [2, {MAX_DIM}], got {n}")


def _hull(points):
    try:
        return ConvexHull(points)
    except (QhullError, ValueError) as exc:
        raise GeometryError(f"degenerate point set: {exc}") from None


def merge_halfspaces(A, b, tol=MERGE_TOL):
    """Drop halfspaces whose normal and offset match an earlier one within tol."""
    keep = []
    for i in range(len(A)):
        if not any(
            np.max(np.abs(A[i] - A[j])) < tol and abs(b[i] - b[j]) < tol for j in keep
        ):
            keep.append(i)
    return A[keep], b[keep]


def chebyshev_center(A, b):
    """Center and radius of the largest ball inside ``{A x <= b}`` (unit rows)."""
    m, n = A.shape
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = np.hstack([A, np.ones((m, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=b, bounds=[(None, None)] * n + [(0, None)], method="highs")
    if res.status == 3:
        raise GeometryError("halfspace system is unbounded")
    if res.status != 0:
        raise GeometryError(f"halfspace system infeasible: {res.message}")
    return res.x[:n], res.x[-1]


class _Polytope(ConvexBody):
    """Shared oracles for H- and V-polytopes, given ``A``, ``b`` and ``vertices``."""

    smooth = False

    def contains(self, x, tol=1e-12):
        x = np.asarray(x, dtype=float)
        return np.all(x @ self.A.T <= self.b + tol, axis=-1)

    def support(self, u):
        return np.max(np.asarray(u, dtype=float) @ self.vertices.T, axis=-1)

    def support_point(self, u):
        idx = np.argmax(np.asarray(u, dtype=float) @ self.vertices.T, axis=-1)
        return self.vertices[idx]

    def _require_origin(self):
        if np.min(self.b) <= MERGE_TOL:
            raise GeometryError("origin is not interior to the polytope")

    @_batched
    def gauge(self, x):
        self._require_origin()
        return np.maximum(np.max(x @ self.A.T / self.b, axis=1), 0.0)

    @_batched
    def radial(self, u):
        u, norms = _unit_rows(u)
        return 1.0 / self.gauge(u) / norms

    @_batched
    def normal(self, x):
        scale = 1.0 + np.max(np.abs(self.b))
        slack = np.abs(x @ self.A.T - self.b)
        active = slack <= BOUNDARY_TOL * scale
        counts = active.sum(axis=1)
        if np.any(counts == 0):
            raise GeometryError("point is not on the polytope boundary")
        if np.any(counts > 1):
            raise NonUniqueNormalError("point lies on a ridge or vertex; normal is not unique")
        return self.A[np.argmax(active, axis=1)]

    def is_interior(self, z, tol=1e-10):
        return bool(np.min(self.b - self.A @ np.asarray(z, float)) > tol)

    def interior_point(self):
        return self.vertices.mean(axis=0)

    @functools.cached_property
    def _triangulation(self):
        """Simplices (k, n+1, n) coning each hull facet to the vertex mean."""
        hull = _hull(self.vertices)
        center = self.vertices.mean(axis=0)
        facets = self.vertices[hull.simplices]
        apex = np.broadcast_to(center, (len(facets), 1, self.dim))
        return np.concatenate([apex, facets], axis=1)

    def moments(self):
        """Exact (volume, first moment, second moment) by triangulation."""
        simp = self._triangulation
        edges = simp[:, 1:, :] - simp[:, :1, :]
        vols = np.abs(np.linalg.det(edges)) / math.factorial(self.dim)
        sums = simp.sum(axis=1)
        first = (vols[:, None] * sums).sum(axis=0) / (self.dim + 1)
        outer = np.einsum("kij,kil->kjl", simp, simp) + np.einsum("kj,kl->kjl", sums, sums)
        second = (vols[:, None, None] * outer).sum(axis=0) / ((self.dim + 1) * (self.dim + 2))
        return vols.sum(), first, second

    def canonical_vertices(self, decimals=9):
        v = self.vertices
        keys = np.round(v, decimals)
        order = np.lexsort(keys.T[::-1])
        return v[order]

    def intersect(self, h: Halfspace):
        A = np.vstack([self.A, h.normal])
        b = np.append(self.b, h.offset)
        center, radius = chebyshev_center(A, b)
        if radius <= MERGE_TOL:
            raise GeometryError("intersection is empty or lower-dimensional")
        return HPolytope(A, b, interior_point=center)

    def hull_with(self, p):
        return VPolytope(np.vstack([self.vertices, p]))


class VPolytope(_Polytope):
    """Convex hull of finitely many points; the vertex list is made irredundant."""

    kind = "vpolytope"

    def __init__(self, vertices):
        pts = np.atleast_2d(np.asarray(vertices, dtype=float))
        _check_dim(pts.shape[1])
        if not np.all(np.isfinite(pts)):
            raise GeometryError("vertices must be finite")
        self.dim = pts.shape[1]
        hull = _hull(pts)
        self.vertices = pts[np.sort(hull.vertices)]
        self.vertices.setflags(write=False)
        A, b = merge_halfspaces(hull.equations[:, :-1], -hull.equations[:, -1])
        self.A, self.b = A, b

    def polar(self):
        self._require_origin()
        norms = np.linalg.norm(self.vertices, axis=1)
        return HPolytope(self.vertices / norms[:, None], 1.0 / norms, interior_point=np.zeros(self.dim))

    def translate(self, t):
        return VPolytope(self.vertices + np.asarray(t, float))

    def linear_image(self, T):
        return VPolytope(self.vertices @ np.asarray(T, float).T)

    def intersect(self, h):
        return VPolytope(super().intersect(h).vertices)

    def to_hpolytope(self):
        return HPolytope(self.A, self.b, interior_point=self.interior_point())

    def to_dict(self):
        return {"dim": self.dim, "kind": self.kind, "vertices": self.vertices.tolist()}


class HPolytope(_Polytope):
    """Bounded intersection of halfspaces ``{x : A x <= b}`` (rows of A unit)."""

    kind = "hpolytope"

    def __init__(self, A, b=None, interior_point=None):
        if b is None:  # list of Halfspace
            hs = list(A)
            A = np.array([h.normal for h in hs])
            b = np.array([h.offset for h in hs])
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).ravel()
        _check_dim(A.shape[1])
        norms = np.linalg.norm(A, axis=1)
        if np.any(norms == 0) or len(b) != len(A):
            raise GeometryError("malformed halfspace system")
        # rows that are already unit are left alone so reloading is bit-exact
        norms = np.where(np.abs(norms - 1.0) <= 4 * np.finfo(float).eps, 1.0, norms)
        A, b = merge_halfspaces(A / norms[:, None], b / norms)
        self.dim = A.shape[1]
        if interior_point is None:
            interior_point, radius = chebyshev_center(A, b)
            if radius <= MERGE_TOL:
                raise GeometryError("halfspace system has empty interior")
        interior_point = np.asarray(interior_point, dtype=float)
        if np.min(b - A @ interior_point) < MERGE_TOL:
            raise GeometryError("interior_point does not strictly satisfy the constraints")
        self.A, self.b = A, b
        self._interior = interior_point
        self.vertices  # validates boundedness eagerly

    @property
    def halfspaces(self):
        return [Halfspace(a, off) for a, off in zip(self.A, self.b)]

    @functools.cached_property
    def vertices(self):
        # vertex enumeration = facet enumeration of the polar about the interior point
        c = self._interior
        slack = self.b - self.A @ c
        hull = _hull(self.A / slack[:, None])
        if np.max(hull.equations[:, -1]) > -MERGE_TOL:
            raise GeometryError("halfspace system is unbounded")
        eq = hull.equations
        verts = eq[:, :-1] / (-eq[:, -1])[:, None] + c
        keep = []
        for i, v in enumerate(verts):
            if not any(np.max(np.abs(v - verts[j])) < MERGE_TOL * (1 + np.max(np.abs(v))) for j in keep):
                keep.append(i)
        out = verts[keep]
        out.setflags(write=False)
        return out

    def interior_point(self):
        return self._interior.copy()

    def polar(self):
        self._require_origin()
        return VPolytope(self.A / self.b[:, None])

    def translate(self, t):
        t = np.asarray(t, float)
        return HPolytope(self.A, self.b + self.A @ t, interior_point=self._interior + t)

    def linear_image(self, T):
        T = np.asarray(T, float)
        return HPolytope(np.linalg.solve(T.T, self.A.T).T, self.b, interior_point=T @ self._interior)

    def hull_with(self, p):
        v = VPolytope(np.vstack([self.vertices, p]))
        return v.to_hpolytope()

    def to_vpolytope(self):
        return VPolytope(self.vertices)

    def to_dict(self):
        return {
            "dim": self.dim,
            "kind": self.kind,
            "A": self.A.tolist(),
            "b": self.b.tolist(),
            "interior_point": self._interior.tolist(),
        }


def cube(n, half_width=1.0):
    corners = np.array(np.meshgrid(*[[-1.0, 1.0]] * n, indexing="ij")).reshape(n, -1).T
    return VPolytope(half_width * corners)


def cross_polytope(n, radius=1.0):
    eye = np.eye(n)
    return VPolytope(radius * np.vstack([eye, -eye]))


def simplex(points):
    return VPolytope(points)


def standard_simplex(n):
    return VPolytope(np.vstack([np.zeros(n), np.eye(n)]))


def regular_simplex(n):
    """Regular simplex with centroid at the origin and unit circumradius."""
    pts = np.eye(n + 1) - 1.0 / (n + 1)
    # orthonormal basis of the hyperplane sum(x) = 0
    q, _ = np.linalg.qr(pts.T)
    coords = pts @ q[:, :n]
    return VPolytope(coords / np.linalg.norm(coords[0]))


# ---------------------------------------------------------------------------
# smooth bodies
# ---------------------------------------------------------------------------


class Ellipsoid(ConvexBody):
    """``{x : (x - c)^T M (x - c) <= 1}`` with M symmetric positive definite."""

    kind = "ellipsoid"
    smooth = True

    def __init__(self, matrix, center=None):
        M = np.asarray(matrix, dtype=float)
        M = 0.5 * (M + M.T)
        self.dim = M.shape[0]
        if self.dim < 2:
            raise GeometryError("dimension must be at least 2")
        evals = np.linalg.eigvalsh(M)
        if evals[0] <= 0:
            raise GeometryError("ellipsoid matrix must be positive definite")
        self.M = M
        self.S = np.linalg.inv(M)
        self.center = np.zeros(self.dim) if center is None else np.asarray(center, dtype=float)
        if self.center.shape != (self.dim,):
            raise GeometryError("center has the wrong dimension")

    @classmethod
    def from_axes(cls, semi_axes, center=None, rotation=None):
        a = np.asarray(semi_axes, dtype=float)
        if np.any(a <= 0):
            raise GeometryError("semi-axes must be positive")
        R = np.eye(len(a)) if rotation is None else np.asarray(rotation, dtype=float)
        return cls(R @ np.diag(a**-2.0) @ R.T, center)

    @property
    def semi_axes(self):
        return np.linalg.eigvalsh(self.M)[::-1] ** -0.5

    def contains(self, x, tol=1e-12):
        d = np.asarray(x, dtype=float) - self.center
        return np.einsum("...i,ij,...j->...", d, self.M, d) <= 1.0 + tol

    def support(self, u):
        u = np.asarray(u, dtype=float)
        return u @ self.center + np.sqrt(np.einsum("...i,ij,...j->...", u, self.S, u))

    def support_point(self, u):
        u = np.asarray(u, dtype=float)
        Su = u @ self.S
        q = np.sqrt(np.einsum("...i,...i->...", u, Su))
        # u = 0: every point maximizes, return the center
        return self.center + Su / np.where(q > 0, q, 1.0)[..., None]

    @_batched
    def radial(self, u):
        u, norms = _unit_rows(u)
        Mc = self.M @ self.center
        alpha = np.einsum("ki,ij,kj->k", u, self.M, u)
        beta = u @ Mc
        gamma = self.center @ Mc - 1.0
        if gamma >= 0:
            raise GeometryError("radial function needs the origin inside the body")
        root = np.sqrt(beta * beta - alpha * gamma)
        s = np.where(beta >= 0, (beta + root) / alpha, -gamma / (root - beta))
        return s / norms

    @_batched
    def normal(self, x):
        g = (x - self.center) @ self.M
        return g / np.linalg.norm(g, axis=1)[:, None]

    def volume(self):
        return unit_ball_volume(self.dim) / math.sqrt(np.linalg.det(self.M))

    def moments(self):
        vol = self.volume()
        c = self.center
        second = vol * (self.S / (self.dim + 2) + np.outer(c, c))
        return vol, vol * c, second

    def polar(self):
        c = self.center
        P = self.S - np.outer(c, c)
        if np.linalg.eigvalsh(P)[0] <= 0:
            raise GeometryError("origin is not interior to the ellipsoid")
        Pinv_c = np.linalg.solve(P, c)
        return Ellipsoid(P / (1.0 + c @ Pinv_c), -Pinv_c)

    def translate(self, t):
        return Ellipsoid(self.M, self.center + np.asarray(t, float))

    def linear_image(self, T):
        T = np.asarray(T, float)
        Tinv = np.linalg.inv(T)
        return Ellipsoid(Tinv.T @ self.M @ Tinv, T @ self.center)

    def interior_point(self):
        return self.center.copy()

    def is_interior(self, z, tol=1e-10):
        d = np.asarray(z, float) - self.center
        return bool(d @ self.M @ d < 1.0 - tol)

    def to_dict(self):
        return {
            "dim": self.dim,
            "kind": self.kind,
            "matrix": self.M.tolist(),
            "center": self.center.tolist(),
        }


class Ball(Ellipsoid):
    kind = "ball"

    def __init__(self, dim, radius=1.0, center=None):
        if radius <= 0:
            raise GeometryError("radius must be positive")
        self.radius = float(radius)
        super().__init__(np.eye(dim) / self.radius**2, center)

    @_batched
    def radial(self, u):
        if np.any(self.center):
            return Ellipsoid.radial.__wrapped__(self, u)
        _, norms = _unit_rows(u)
        return self.radius / norms

    def support(self, u):
        u = np.asarray(u, dtype=float)
        return u @ self.center + self.radius * np.linalg.norm(u, axis=-1)

    def volume(self):
        return unit_ball_volume(self.dim) * self.radius**self.dim

    def polar(self):
        if not np.any(self.center):
            return Ball(self.dim, 1.0 / self.radius)
        return super().polar()

    def translate(self, t):
        return Ball(self.dim, self.radius, self.center + np.asarray(t, float))

    def to_dict(self):
        return {"dim": self.dim, "kind": self.kind, "radius": self.radius, "center": self.center.tolist()}


class LpBall(ConvexBody):
    """``{x : ||x||_p <= radius}`` for ``1 <= p <= inf``."""

    kind = "lp_ball"

    def __init__(self, dim, p, radius=1.0):
        p = float(p)
        if p < 1:
            raise GeometryError("p must be at least 1")
        if radius <= 0:
            raise GeometryError("radius must be positive")
        self.dim, self.p, self.radius = dim, p, float(radius)
        self.q = math.inf if p == 1 else (1.0 if math.isinf(p) else p / (p - 1.0))
        self.smooth = 1 < p < math.inf

    def _norm(self, x, p):
        return np.linalg.norm(np.asarray(x, dtype=float), ord=p, axis=-1)

    def contains(self, x, tol=1e-12):
        return self._norm(x, self.p) <= self.radius * (1.0 + tol)

    def support(self, u):
        return self.radius * self._norm(u, self.q)

    def support_point(self, u):
        u = np.asarray(u, dtype=float)
        if math.isinf(self.p):
            return self.radius * np.sign(u)
        if self.p == 1:
            idx = np.argmax(np.abs(u), axis=-1)
            out = np.zeros_like(u)
            np.put_along_axis(out, np.expand_dims(idx, -1), np.take_along_axis(np.sign(u), np.expand_dims(idx, -1), -1), -1)
            return self.radius * out
        w = np.sign(u) * np.abs(u) ** (self.q - 1.0)
        return self.radius * w / (self._norm(u, self.q) ** (self.q - 1.0))[..., None]

    @_batched
    def radial(self, u):
        return self.radius / self._norm(u, self.p)

    @_batched
    def gauge(self, x):
        return self._norm(x, self.p) / self.radius

    @_batched
    def normal(self, x):
        if not self.smooth:
            return ConvexBody.normal.__wrapped__(self, x)
        g = np.sign(x) * np.abs(x) ** (self.p - 1.0)
        return g / np.linalg.norm(g, axis=1)[:, None]

    def volume(self):
        n, p = self.dim, self.p
        if math.isinf(p):
            return (2.0 * self.radius) ** n
        return (2.0 * self.radius * math.gamma(1.0 + 1.0 / p)) ** n / math.gamma(1.0 + n / p)

    def moments(self):
        vol = self.volume()
        return vol, np.zeros(self.dim), None

    def polar(self):
        return LpBall(self.dim, self.q, 1.0 / self.radius)

    def interior_point(self):
        return np.zeros(self.dim)

    def to_dict(self):
        return {"dim": self.dim, "kind": self.kind, "p": self.p, "radius": self.radius}


# ---------------------------------------------------------------------------
# derived bodies
# ---------------------------------------------------------------------------


class LinearImage(ConvexBody):
    """The affine image ``{T y + shift : y in base}``."""

    kind = "linear_image"

    def __init__(self, base: ConvexBody, matrix, shift=None):
        T = np.asarray(matrix, dtype=float)
        if abs(np.linalg.det(T)) < 1e-14:
            raise GeometryError("linear map must be invertible")
        self.base = base
        self.dim = base.dim
        self.T = T
        self.Tinv = np.linalg.inv(T)
        self.shift = np.zeros(self.dim) if shift is None else np.asarray(shift, dtype=float)
        self.smooth = base.smooth

    def _pull(self, x):
        return (np.asarray(x, dtype=float) - self.shift) @ self.Tinv.T

    def contains(self, x, tol=1e-12):
        return self.base.contains(self._pull(x), tol=tol)

    def support(self, u):
        u = np.asarray(u, dtype=float)
        return self.base.support(u @ self.T) + u @ self.shift

    def support_point(self, u):
        u = np.asarray(u, dtype=float)
        return self.base.support_point(u @ self.T) @ self.T.T + self.shift

    @_batched
    def radial(self, u):
        if np.any(self.shift):
            return ConvexBody.radial.__wrapped__(self, u)
        u, norms = _unit_rows(u)
        v = u @ self.Tinv.T
        vn = np.linalg.norm(v, axis=1)
        return self.base.radial(v / vn[:, None]) / vn / norms

    @_batched
    def gauge(self, x):
        if np.any(self.shift):
            return ConvexBody.gauge.__wrapped__(self, x)
        return self.base.gauge(x @ self.Tinv.T)

    @_batched
    def normal(self, x):
        n = self.base.normal(self._pull(x)) @ self.Tinv
        return n / np.linalg.norm(n, axis=1)[:, None]

    def volume(self):
        return abs(np.linalg.det(self.T)) * self.base.volume()

    def polar(self):
        if np.any(self.shift):
            return PolarBody(self)
        return LinearImage(self.base.polar(), self.Tinv.T)

    def translate(self, t):
        return LinearImage(self.base, self.T, self.shift + np.asarray(t, float))

    def linear_image(self, T):
        T = np.asarray(T, float)
        return LinearImage(self.base, T @ self.T, T @ self.shift)

    def interior_point(self):
        return self.T @ self.base.interior_point() + self.shift

    def to_dict(self):
        return {
            "dim": self.dim,
            "kind": self.kind,
            "base": self.base.to_dict(),
            "matrix": self.T.tolist(),
            "shift": self.shift.tolist(),
        }


class PolarBody(ConvexBody):
    """Oracle polar ``L° = {y : h_L(y) <= 1}`` of a body with 0 interior."""

    kind = "polar"

    def __init__(self, base: ConvexBody):
        self.base = base
        self.dim = base.dim
        self.smooth = base.smooth

    def contains(self, x, tol=1e-12):
        return self.base.support(x) <= 1.0 + tol

    def support(self, u):
        return self.base.gauge(u)

    @_batched
    def support_point(self, u):
        u, _ = _unit_rows(u)
        x = self.base.radial(u)[:, None] * u
        nrm = self.base.normal(x)
        return nrm / np.einsum("ki,ki->k", nrm, x)[:, None]

    @_batched
    def radial(self, u):
        return 1.0 / self.base.support(u)

    def gauge(self, x):
        return np.maximum(self.base.support(x), 0.0)

    @_batched
    def normal(self, x):
        p = self.base.support_point(x)
        return p / np.linalg.norm(p, axis=1)[:, None]

    def polar(self):
        return self.base

    def interior_point(self):
        return np.zeros(self.dim)

    def to_dict(self):
        return {"dim": self.dim, "kind": self.kind, "base": self.base.to_dict()}


class CappedBody(ConvexBody):
    """Lazy intersection of a base body with cutting halfspaces."""

    kind = "capped"

    def __init__(self, base: ConvexBody, halfspaces):
        self.base = base
        self.halfspaces = tuple(halfspaces)
        if not self.halfspaces:
            raise GeometryError("CappedBody needs at least one halfspace")
        self.dim = base.dim
        self.A = np.array([h.normal for h in self.halfspaces])
        self.b = np.array([h.offset for h in self.halfspaces])

    @functools.cached_property
    def _inner(self):
        if len(self.halfspaces) == 1:
            return self.base
        return CappedBody(self.base, self.halfspaces[:-1])

    def interior_point(self):
        # slide from an interior point of the uncut body toward its deepest
        # point below the last cut; the open segment ends inside both sets
        inner = self._inner
        q = inner.interior_point()
        p = inner.support_point(-self.A[-1])
        for _ in range(80):
            if self.is_interior(q):
                return q
            q = 0.5 * (q + p)
        raise GeometryError("could not locate an interior point of the cut body")

    def contains(self, x, tol=1e-12):
        x = np.asarray(x, dtype=float)
        return self.base.contains(x, tol=tol) & np.all(x @ self.A.T <= self.b + tol, axis=-1)

    def _cut_gauge(self, x):
        if np.min(self.b) <= 0:
            raise GeometryError("origin is not interior to the capped body")
        return np.max(x @ self.A.T / self.b, axis=1)

    @_batched
    def gauge(self, x):
        return np.maximum(self.base.gauge(x), np.maximum(self._cut_gauge(x), 0.0))

    @_batched
    def radial(self, u):
        u, norms = _unit_rows(u)
        return 1.0 / np.maximum(1.0 / self.base.radial(u), self._cut_gauge(u)) / norms

    def _dual_multiplier(self, u):
        # h_{L ∩ H}(u) = min_{lam >= 0} h_L(u - lam a) + lam b, L the inner body
        inner = self._inner
        a, off = self.A[-1], self.b[-1]
        low = -inner.support(-a)
        if off - low <= 0:
            raise GeometryError("cut removes the whole body")
        lam_max = (inner.support(u) + inner.support(-u)) / (off - low) + 1e-12
        lam, val = golden_min(
            lambda lam: inner.support(u - lam[:, None] * a) + lam * off,
            np.zeros(len(u)),
            lam_max,
        )
        return lam, val

    @_batched
    def support(self, u):
        return self._dual_multiplier(u)[1]

    @_batched
    def support_point(self, u):
        lam, _ = self._dual_multiplier(u)
        return self._inner.support_point(u - lam[:, None] * self.A[-1])

    @_batched
    def normal(self, x):
        scale = 1.0 + np.max(np.abs(self.b))
        cut_active = np.abs(x @ self.A.T - self.b) <= BOUNDARY_TOL * scale
        try:
            on_base = np.abs(self.base.gauge(x) - 1.0) <= BOUNDARY_TOL
        except GeometryError:
            on_base = ~self.base.contains(x, tol=-BOUNDARY_TOL)
        counts = cut_active.sum(axis=1) + on_base
        if np.any(counts == 0):
            raise GeometryError("point is not on the boundary")
        if np.any(counts > 1):
            raise NonUniqueNormalError("point lies on the rim of a cut; normal is not unique")
        out = np.empty_like(x)
        if np.any(on_base):
            out[on_base] = self.base.normal(x[on_base])
        cut = ~on_base
        out[cut] = self.A[np.argmax(cut_active[cut], axis=1)]
        return out

    def polar(self):
        if np.min(self.b) <= 0:
            raise GeometryError("origin is not interior to the capped body")
        return ConedBody(self.base.polar(), self.A / self.b[:, None])

    def translate(self, t):
        return CappedBody(self.base.translate(t), [h.translate(t) for h in self.halfspaces])

    def linear_image(self, T):
        return CappedBody(self.base.linear_image(T), [h.linear_image(T) for h in self.halfspaces])

    def to_dict(self):
        return {
            "dim": self.dim,
            "kind": self.kind,
            "base": self.base.to_dict(),
            "halfspaces": [{"normal": h.normal.tolist(), "offset": h.offset} for h in self.halfspaces],
        }


class ConedBody(ConvexBody):
    """Lazy convex hull of a base body with apex points."""

    kind = "coned"

    def __init__(self, base: ConvexBody, apexes):
        self.base = base
        self.apexes = np.atleast_2d(np.asarray(apexes, dtype=float))
        if len(self.apexes) == 0:
            raise GeometryError("ConedBody needs at least one apex")
        self.dim = base.dim

    @functools.cached_property
    def _inner(self):
        if len(self.apexes) == 1:
            return self.base
        return ConedBody(self.base, self.apexes[:-1])

    def support(self, u):
        u = np.asarray(u, dtype=float)
        return np.maximum(self.base.support(u), np.max(u @ self.apexes.T, axis=-1))

    @_batched
    def support_point(self, u):
        hb = self.base.support(u)
        dots = u @ self.apexes.T
        best = np.argmax(dots, axis=1)
        use_apex = dots[np.arange(len(u)), best] > hb
        out = self.base.support_point(u)
        out[use_apex] = self.apexes[best[use_apex]]
        return out

    def _gauge_and_shift(self, x):
        # gauge of conv(L ∪ [0, p]) = min_{t >= 0} t + g_L(x - t p)  (inf-convolution)
        inner, p = self._inner, self.apexes[-1]
        g0 = inner.gauge(x)
        t, val = golden_min(lambda t: t + inner.gauge(x - t[:, None] * p), np.zeros(len(x)), g0)
        return val, t

    def _shadowed(self, u):
        """Directions whose base boundary point sees the apex beyond its tangent plane."""
        if len(self.apexes) > 1 or not self.base.smooth:
            return np.ones(len(u), dtype=bool)
        x = self.base.radial(u)[:, None] * u
        nrm = self.base.normal(x)
        return np.einsum("ki,ki->k", nrm, self.apexes[0] - x) > 0

    @_batched
    def gauge(self, x):
        norms = np.linalg.norm(x, axis=1)
        out = np.zeros(len(x))
        nz = norms > 0
        if not np.any(nz):
            return out
        u = x[nz] / norms[nz, None]
        g = 1.0 / self.base.radial(u)
        mask = self._shadowed(u)
        if np.any(mask):
            g[mask] = self._gauge_and_shift(u[mask])[0]
        out[nz] = g * norms[nz]
        return out

    @_batched
    def radial(self, u):
        u, norms = _unit_rows(u)
        return 1.0 / self.gauge(u) / norms

    def contains(self, x, tol=1e-12):
        return self.gauge(x) <= 1.0 + tol

    @_batched
    def normal(self, x):
        if len(self.apexes) > 1 or not self.base.smooth:
            return ConvexBody.normal.__wrapped__(self, x)
        g, t = self._gauge_and_shift(x)
        if np.any(np.abs(g - 1.0) > BOUNDARY_TOL):
            raise GeometryError("point is not on the boundary")
        p = self.apexes[0]
        if np.any(np.linalg.norm(x - p, axis=1) <= BOUNDARY_TOL * (1 + np.linalg.norm(p))):
            raise NonUniqueNormalError("apex of a cone has no unique normal")
        y = x - t[:, None] * p
        y = y / self.base.gauge(y)[:, None]
        return self.base.normal(y)

    def polar(self):
        norms = np.linalg.norm(self.apexes, axis=1)
        return CappedBody(
            self.base.polar(), [Halfspace(p / n, 1.0 / n) for p, n in zip(self.apexes, norms)]
        )

    def translate(self, t):
        t = np.asarray(t, float)
        return ConedBody(self.base.translate(t), self.apexes + t)

    def linear_image(self, T):
        T = np.asarray(T, float)
        return ConedBody(self.base.linear_image(T), self.apexes @ T.T)

    def interior_point(self):
        return self.base.interior_point()

    def to_dict(self):
        return {
            "dim": self.dim,
            "kind": self.kind,
            "base": self.base.to_dict(),
            "apexes": self.apexes.tolist(),
        }


def unit_ball_volume(k):
    """Volume of the Euclidean unit ball in R^k."""
    if k < 0:
        raise ValueError("dimension must be nonnegative")
    return math.exp(0.5 * k * math.log(math.pi) - math.lgamma(0.5 * k + 1.0))


# ---------------------------------------------------------------------------
# module-level operations
# ---------------------------------------------------------------------------


def polar_dual(K: ConvexBody, z=None) -> ConvexBody:
    """``K^z = {y : <y, x - z> <= 1 for all x in K}``, i.e. the polar of ``K - z``."""
    z = np.zeros(K.dim) if z is None else np.asarray(z, dtype=float)
    if not K.is_interior(z):
        raise GeometryError("polar center must be strictly interior to the body")
    return K.translate(-z).polar()


def intersect_halfspace(K: ConvexBody, h: Halfspace) -> ConvexBody:
    if isinstance(K, _Polytope):
        return K.intersect(h)
    low = -K.support(-h.normal)
    if h.offset - low <= MERGE_TOL:
        raise GeometryError("intersection is empty or lower-dimensional")
    if K.support(h.normal) <= h.offset:
        return K
    if isinstance(K, CappedBody):
        return CappedBody(K.base, K.halfspaces + (h,))
    return CappedBody(K, [h])


def hull_with_point(K: ConvexBody, p) -> ConvexBody:
    p = np.asarray(p, dtype=float)
    if np.all(K.contains(p, tol=0.0)):
        return K
    if isinstance(K, _Polytope):
        return K.hull_with(p)
    if isinstance(K, ConedBody):
        return ConedBody(K.base, np.vstack([K.apexes, p]))
    return ConedBody(K, [p])


def support(K: ConvexBody, u):
    return K.support(u)


def radial(K: ConvexBody, u):
    return K.radial(u)


def boundary_normal(K: ConvexBody, x):
    """Unit outer normal at a boundary point (errors off the boundary or at kinks)."""
    x = np.asarray(x, dtype=float)
    if not isinstance(K, _Polytope) and K.is_interior(np.zeros(K.dim)):
        inner = K.contains(x * (1 - BOUNDARY_TOL), tol=0.0)
        outer = K.contains(x * (1 + BOUNDARY_TOL), tol=0.0)
        if not np.all(inner) or np.any(outer):
            raise GeometryError("point is not on the boundary within tolerance")
    return K.normal(x)


def translate(K: ConvexBody, t) -> ConvexBody:
    return K.translate(t)


def linear_image(K: ConvexBody, T) -> ConvexBody:
    return K.linear_image(T)


def is_polytope(K) -> bool:
    return isinstance(K, _Polytope)
