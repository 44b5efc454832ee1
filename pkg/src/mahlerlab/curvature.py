"""Generalized curvature at boundary points.

The boundary near ``x0`` is written as a graph over the tangent plane and a
local polynomial is fitted to sampled heights; the quadratic part gives the
generalized Hessian, its eigenvalues the principal curvatures and their
product the Gauss-Kronecker curvature.  Also here: the transformation laws
for normals and curvature under linear maps, the standard approximating
ellipsoid, and the normalization that makes a point "round" (radial normal,
ball indicatrix, balanced volumes, unit norm).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .bodies import ConvexBody, boundary_along, boundary_normal
from .errors import (
    ConvexityViolationError,
    FlatPointError,
    GeometryError,
)

EIGEN_FLOOR = 1e-8
CONVEXITY_TOL = -1e-6
DEFAULT_POINTS = 200


@dataclass
class IndicatrixReport:
    point: np.ndarray
    normal: np.ndarray
    hessian_eigenvalues: np.ndarray
    principal_axes_b: np.ndarray
    kappa: float
    ellipsoid_axes_a: np.ndarray | None
    fit_residual: float
    principal_directions: np.ndarray  # (n, n-1), columns in ambient coordinates
    bandwidth: float

    def to_dict(self):
        def arr(a):
            return None if a is None else np.asarray(a, float).tolist()

        return {
            "point": arr(self.point),
            "normal": arr(self.normal),
            "hessian_eigenvalues": arr(self.hessian_eigenvalues),
            "principal_axes_b": arr(self.principal_axes_b),
            "kappa": float(self.kappa),
            "ellipsoid_axes_a": arr(self.ellipsoid_axes_a),
            "fit_residual": float(self.fit_residual),
            "bandwidth": float(self.bandwidth),
        }


@dataclass
class NormalizationCertificate:
    normal_angle: float  # (i) radians between the outer normal and the radial direction
    eigen_spread: float  # (ii) relative spread of the refitted principal curvatures
    volume_gap: float  # (iii) |T(K)| - |T(K)°|, both re-estimated
    volume_tolerance: float
    norm_error: float  # (iv) | ||T(x0)|| - 1 |

    @property
    def passed(self):
        return {
            "i": self.normal_angle < 1e-6,
            "ii": self.eigen_spread < 1e-4,
            "iii": abs(self.volume_gap) <= self.volume_tolerance,
            "iv": self.norm_error < 1e-8,
        }


@dataclass
class NormalizationResult:
    map_T: np.ndarray
    image_point: np.ndarray
    alpha: float
    lam: float
    body: ConvexBody = field(repr=False)
    certificate: NormalizationCertificate | None = None

    def to_dict(self):
        out = {
            "map_T": self.map_T.tolist(),
            "image_point": self.image_point.tolist(),
            "alpha": float(self.alpha),
            "lambda": float(self.lam),
        }
        if self.certificate is not None:
            c = self.certificate
            out["certificate"] = {
                "normal_angle": c.normal_angle,
                "eigen_spread": c.eigen_spread,
                "volume_gap": c.volume_gap,
                "volume_tolerance": c.volume_tolerance,
                "norm_error": c.norm_error,
                "passed": c.passed,
            }
        return out


def tangent_frame(normal):
    """Orthonormal basis (columns) of the hyperplane orthogonal to ``normal``."""
    N = np.asarray(normal, float)
    N = N / np.linalg.norm(N)
    q, _ = np.linalg.qr(np.column_stack([N, np.eye(len(N))]))
    return q[:, 1 : len(N)]


def _exit_distance(K, center, dirs):
    """Distance from an interior point to the boundary along unit directions."""
    t_out = K.support(dirs) - dirs @ center
    if np.any(t_out <= 0):
        raise GeometryError("slice center is not inside the body")
    return boundary_along(K, np.broadcast_to(center, dirs.shape), dirs, 0.0, t_out * (1 + 1e-6) + 1e-300)


def slice_radii(K, x0, N, E, t, coeffs):
    """Radii of the slice of K at depth ``t`` below the tangent plane at ``x0``.

    ``coeffs`` are tangent directions expressed in the basis ``E``.
    """
    center = np.asarray(x0, float) - t * np.asarray(N, float)
    if not np.all(K.contains(center, tol=0.0)):
        raise GeometryError(f"slice at depth {t} is empty")
    dirs = np.atleast_2d(coeffs) @ E.T
    dirs = dirs / np.linalg.norm(dirs, axis=1)[:, None]
    return _exit_distance(K, center, dirs)


def boundary_heights(K, x0, N, E, y, start):
    """Heights ``f(y)`` of the boundary graph over the tangent plane at x0."""
    p = x0 + y @ E.T
    down = -np.broadcast_to(N, p.shape)
    t_hi = np.full(len(p), float(start))
    for _ in range(60):
        inside = K.contains(p + t_hi[:, None] * down, tol=0.0)
        if np.all(inside):
            break
        t_hi = np.where(inside, t_hi, 2 * t_hi)
    else:
        raise GeometryError("could not bracket the boundary graph")
    return boundary_along(K, p, down, t_hi, 0.0)


def _tangent_samples(k, count, radius):
    if k == 1:
        return np.linspace(-radius, radius, count)[:, None]
    from .volume import sphere_directions

    half = (count + 1) // 2
    dirs = sphere_directions(k, half, seed=7)
    r = ((np.arange(half) + 0.5) / half) ** (1.0 / k)
    pts = dirs * (radius * r)[:, None]
    return np.vstack([pts, -pts])


def _monomials(k, degree):
    exps = []
    for deg in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(k), deg):
            e = np.zeros(k, dtype=int)
            for i in combo:
                e[i] += 1
            exps.append(e)
    return np.array(exps)


def default_bandwidth(K):
    from .volume import sphere_directions

    dirs = np.vstack([np.eye(K.dim), sphere_directions(K.dim, 64, seed=3, antithetic=True)])
    half_widths = 0.5 * (K.support(dirs) + K.support(-dirs))
    return 1e-2 * float(np.min(half_widths))


def fit_indicatrix(K: ConvexBody, x0, bandwidth=None, points=DEFAULT_POINTS, degree=4) -> IndicatrixReport:
    """Fit the generalized Hessian of the boundary at ``x0``.

    Heights are sampled on a tangent ball of radius ``bandwidth`` and fitted
    by a full polynomial of the given degree (the quadratic block is the
    Hessian; higher terms absorb the Taylor remainder).
    """
    x0 = np.asarray(x0, float)
    n = K.dim
    N = boundary_normal(K, x0)
    E = tangent_frame(N)
    h = default_bandwidth(K) if bandwidth is None else float(bandwidth)
    k = n - 1
    exps = _monomials(k, degree)
    count = max(points, 4 * len(exps))
    y = _tangent_samples(k, count, h)
    f = boundary_heights(K, x0, N, E, y, start=h)
    u = y / h
    design = np.prod(u[:, None, :] ** exps[None, :, :], axis=2)
    coef, *_ = np.linalg.lstsq(design, f, rcond=None)
    resid = float(np.sqrt(np.mean((design @ coef - f) ** 2)))

    Q = np.zeros((k, k))
    for c, e in zip(coef, exps):
        if e.sum() != 2:
            continue
        idx = np.flatnonzero(e)
        if len(idx) == 1:
            Q[idx[0], idx[0]] = 2 * c / h**2
        else:
            Q[idx[0], idx[1]] = Q[idx[1], idx[0]] = c / h**2
    evals, evecs = np.linalg.eigh(Q)
    if evals[0] < CONVEXITY_TOL:
        raise ConvexityViolationError(f"fitted Hessian is indefinite (min eigenvalue {evals[0]:.3g})")
    pos = evals > EIGEN_FLOOR
    b = np.where(pos, np.abs(evals) ** -0.5, np.inf)
    kappa = float(np.prod(np.clip(evals, 0.0, None)))
    a = approximating_ellipsoid(b) if np.all(pos) else None
    return IndicatrixReport(
        point=x0,
        normal=N,
        hessian_eigenvalues=evals,
        principal_axes_b=b,
        kappa=kappa,
        ellipsoid_axes_a=a,
        fit_residual=resid,
        principal_directions=E @ evecs,
        bandwidth=h,
    )


def approximating_ellipsoid(b):
    """Axes ``a_1..a_n`` of the standard approximating ellipsoid from indicatrix axes ``b``."""
    b = np.asarray(b, float)
    if np.any(~(b > 0)) or np.any(~np.isfinite(b)):
        raise GeometryError("indicatrix axes must be positive and finite")
    k = len(b)
    log_prod = float(np.sum(np.log(b)))
    a = np.exp(np.log(b) + log_prod / k)
    return np.append(a, math.exp(2 * log_prod / k))


def _check_invertible(T):
    T = np.asarray(T, float)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise GeometryError("map must be a square matrix")
    if np.linalg.matrix_rank(T) < T.shape[0]:
        raise GeometryError("map is singular")
    return T


def transform_normal(T, N):
    """Unit outer normal of T(K) at T(x) from the normal of K at x."""
    T = _check_invertible(T)
    v = np.linalg.solve(T.T, np.asarray(N, float))
    return v / np.linalg.norm(v)


def transform_curvature(T, N, kappa_image):
    """Curvature of K at x from the curvature of T(K) at T(x)."""
    T = _check_invertible(T)
    N = np.asarray(N, float)
    N = N / np.linalg.norm(N)
    n = len(N)
    scale = np.linalg.norm(np.linalg.solve(T.T, N)) ** (n + 1)
    return float(scale * np.linalg.det(T) ** 2 * kappa_image)


def _merge_close(evals, rel=1e-6):
    out = np.array(evals, float)
    order = np.argsort(out)
    groups = [[order[0]]]
    for i in order[1:]:
        if abs(out[i] - out[groups[-1][-1]]) <= rel * max(abs(out[i]), 1e-300):
            groups[-1].append(i)
        else:
            groups.append([i])
    for g in groups:
        out[g] = out[g].mean()
    return out


def normalize_at_point(
    K: ConvexBody,
    x0,
    bandwidth=None,
    certify=True,
    samples=200_000,
    seed=0,
) -> NormalizationResult:
    """Linear map T with radial normal, ball indicatrix, |T(K)| = |T(K)°| and ||T(x0)|| = 1.

    Built as a shear fixing the tangent plane, a volume-preserving stretch of
    the principal directions, a scaling balancing the volumes, and a
    determinant-one map pulling the point to the unit sphere.
    """
    from .volume import volume

    x0 = np.asarray(x0, float)
    n = K.dim
    if not K.is_interior(np.zeros(n)):
        raise GeometryError("the origin must be interior to the body")
    N = boundary_normal(K, x0)
    height = float(x0 @ N)
    if height <= 0:
        raise GeometryError("origin is not on the inner side of the tangent plane")

    # shear: fixes N-perp, sends x0 to height * N
    T1 = np.eye(n) - np.outer(x0 - height * N, N) / height
    K1 = K.linear_image(T1)
    x1 = height * N
    rep = fit_indicatrix(K1, x1, bandwidth=bandwidth)
    evals = rep.hessian_eigenvalues
    if np.any(evals <= EIGEN_FLOOR):
        raise FlatPointError("principal curvature vanishes at the point")
    evals = _merge_close(evals)
    b = evals**-0.5
    stretch = math.exp(float(np.mean(np.log(b)))) / b
    W = rep.principal_directions
    T2 = np.eye(n) + W @ np.diag(stretch - 1.0) @ W.T
    K2 = K1.linear_image(T2)

    vol = volume(K2, samples=samples, seed=seed).value
    vol_polar = volume(K2.polar(), samples=samples, seed=seed).value
    log_alpha = brentq(
        lambda la: 2 * n * la + math.log(vol) - math.log(vol_polar),
        math.log(1e-3),
        math.log(1e3),
        xtol=1e-15,
    )
    alpha = math.exp(log_alpha)
    lam = (alpha * height) ** (1.0 / (n - 1))
    T3 = lam * (np.eye(n) - np.outer(N, N)) + lam ** (1 - n) * np.outer(N, N)
    T = T3 @ (alpha * T2) @ T1
    body = K.linear_image(T)
    result = NormalizationResult(T, T @ x0, alpha, lam, body)
    if certify:
        result.certificate = certify_normalization(result, bandwidth=bandwidth, samples=samples, seed=seed + 1000)
    return result


def certify_normalization(result: NormalizationResult, bandwidth=None, samples=200_000, seed=1000):
    """Re-measure the four normalization properties with fresh probes."""
    from .volume import volume_radial

    body, x = result.body, result.image_point
    radial_dir = x / np.linalg.norm(x)
    # numerical gauge gradient, independent of the normal transformation law
    nrm = ConvexBody.normal(body, x)
    angle = math.acos(min(1.0, float(nrm @ radial_dir)))
    rep = fit_indicatrix(body, x, bandwidth=bandwidth)
    ev = rep.hessian_eigenvalues
    spread = float((ev.max() - ev.min()) / ev.mean())
    v = volume_radial(body, samples, seed)
    vp = volume_radial(body.polar(), samples, seed + 1)
    tol = 4 * math.hypot(v.stderr, vp.stderr) + 1e-12 * (v.value + vp.value)
    return NormalizationCertificate(
        normal_angle=angle,
        eigen_spread=spread,
        volume_gap=v.value - vp.value,
        volume_tolerance=tol,
        norm_error=abs(float(np.linalg.norm(x)) - 1.0),
    )


def sandwich_moduli(K: ConvexBody, x0, report: IndicatrixReport, deltas, directions=64):
    """Smallest phi(t) >= 1 with slice(E)/phi ⊆ slice(K) ⊆ phi * slice(E) per depth t.

    E is the standard approximating ellipsoid tangent at x0 in the principal
    frame of ``report``.
    """
    from .volume import EmpiricalModulus, sphere_directions

    b = np.asarray(report.principal_axes_b, float)
    if not np.all(np.isfinite(b)):
        raise FlatPointError("curvature must be positive for the sandwich")
    k = len(b)
    a_n = math.exp(2 * float(np.mean(np.log(b))))
    if k == 1:
        coeffs = np.array([[1.0], [-1.0]])
    elif k == 2:
        ang = 2 * np.pi * np.arange(directions) / directions
        coeffs = np.column_stack([np.cos(ang), np.sin(ang)])
    else:
        coeffs = sphere_directions(k, directions, seed=5)
    W = report.principal_directions
    out = EmpiricalModulus("phi")
    for t in sorted(deltas, reverse=True):
        rk = slice_radii(K, report.point, report.normal, W, t, coeffs)
        unit = coeffs / np.linalg.norm(coeffs, axis=1)[:, None]
        re = np.sqrt((2 * t - t * t / a_n) / np.sum(unit**2 / b**2, axis=1))
        phi = float(max(np.max(rk / re), np.max(re / rk)))
        out.add(t, phi, 1.0)
    return out
