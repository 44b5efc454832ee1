"""Centroids, volume products and the Santaló point.

The Santaló point minimizes the strictly convex function ``z -> |K^z|``.
Its gradient is ``(n+1) * int_{K^z} y dy`` and its Hessian is
``(n+1)(n+2) * int_{K^z} y y^T dy``, so the minimizer is characterized by
the centroid of ``K^z`` sitting at the origin.  We run damped Newton on
that condition: with exact moments when the polar has them (polytopes,
ellipsoids), and otherwise on a sphere-quadrature surrogate built from a
fixed direction set, which keeps the objective deterministic across
iterates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .bodies import ConvexBody, Ellipsoid, is_polytope, polar_dual, unit_ball_volume
from .errors import GeometryError, SantaloConvergenceError
from .volume import sphere_directions, volume

CENTROID_TOL = 1e-6
VP_CHANGE_TOL = 1e-10
DAMPING = 0.5
MAX_ITER = 60


@dataclass
class VolumeProductReport:
    vp_at_origin: float
    santalo_point: np.ndarray
    vp_at_santalo: float
    normalized_vp: float
    iterations: int

    def to_dict(self):
        vp0 = self.vp_at_origin
        return {
            "vp_at_origin": vp0 if math.isfinite(vp0) else None,
            "santalo_point": np.asarray(self.santalo_point, float).tolist(),
            "vp_at_santalo": self.vp_at_santalo,
            "normalized_vp": self.normalized_vp,
            "iterations": self.iterations,
        }


# ---------------------------------------------------------------------------
# centroids
# ---------------------------------------------------------------------------


def centroid_with_error(K: ConvexBody, samples=100_000, seed=0):
    """Centroid of K and a per-coordinate standard error (zero when exact)."""
    n = K.dim
    if is_polytope(K) or isinstance(K, Ellipsoid):
        vol, first, _ = K.moments()
        return first / vol, np.zeros(n)
    c = K.interior_point()
    shifted = K if np.allclose(c, 0) else K.translate(-c)
    u = sphere_directions(n, samples, seed, antithetic=True)
    r = shifted.radial(u)
    a = (r ** (n + 1))[:, None] * u
    b = r**n
    ratio = a.mean(axis=0) / b.mean()
    # delta method for a ratio of means
    resid = a - ratio[None, :] * b[:, None]
    err = resid.std(axis=0, ddof=1) / math.sqrt(len(b)) / b.mean()
    scale = n / (n + 1)
    return c + scale * ratio, scale * err


def centroid(K: ConvexBody, samples=100_000, seed=0):
    """Lebesgue centroid (exact for polytopes and ellipsoids)."""
    return centroid_with_error(K, samples, seed)[0]


def volume_product(K: ConvexBody, z=None, samples=1_000_000, seed=0, method="auto"):
    """``|K| * |K^z|`` with the best available volume method for each factor."""
    return volume_product_with_error(K, z, samples, seed, method)[0]


def volume_product_with_error(K: ConvexBody, z=None, samples=1_000_000, seed=0, method="auto"):
    z = np.zeros(K.dim) if z is None else np.asarray(z, float)
    v = volume(K, samples, seed, method=method)
    vp = volume(polar_dual(K, z), samples, seed + 1, method=method)
    err = math.hypot(v.stderr * vp.value, vp.stderr * v.value)
    return v.value * vp.value, err


# ---------------------------------------------------------------------------
# objective |K^z| with derivatives
# ---------------------------------------------------------------------------


class _ExactPolarObjective:
    """``|K^z|`` and its derivatives from exact moments of the polar."""

    def __init__(self, K):
        self.K = K
        self.n = K.dim
        self.U = sphere_directions(self.n, 256, seed=17, antithetic=True)

    def inside(self, z):
        return self.K.is_interior(z)

    def __call__(self, z):
        P = polar_dual(self.K, z)
        vol, first, second = P.moments()
        n = self.n
        grad = (n + 1) * first
        hess = (n + 1) * (n + 2) * second
        c = first / vol
        width = 2 * float(np.mean(P.support(self.U)))
        return vol, grad, hess, c, width


class _QuadratureObjective:
    """Sphere-quadrature surrogate on a fixed direction set.

    ``|K^z| = kappa_n * mean(rho^n)`` with ``rho(u) = 1 / (h_K(u) - <z,u>)``.
    """

    def __init__(self, K, samples, seed):
        self.K = K
        self.n = K.dim
        self.U = sphere_directions(self.n, samples, seed, antithetic=True)
        self.h = K.support(self.U)
        self.kn = unit_ball_volume(self.n)

    def inside(self, z):
        return bool(np.all(self.h - self.U @ z > 0))

    def __call__(self, z):
        n, U = self.n, self.U
        rho = 1.0 / (self.h - U @ z)
        r_n = rho**n
        r_n1 = r_n * rho
        vol = self.kn * float(np.mean(r_n))
        grad = self.kn * n * (r_n1[:, None] * U).mean(axis=0)
        hess = self.kn * n * (n + 1) * np.einsum("k,ki,kj->ij", r_n1 * rho, U, U) / len(rho)
        c = (n / (n + 1)) * (r_n1[:, None] * U).mean(axis=0) / float(np.mean(r_n))
        # h_{K^z}(u) is the gauge of K - z; bounded below by rho, so this
        # slightly underestimates the mean width and is conservative
        width = 2 * float(np.mean(rho))
        return vol, grad, hess, c, width


def _make_objective(K, samples, seed):
    try:
        P = polar_dual(K, K.interior_point())
        if hasattr(P, "moments") and P.moments()[2] is not None:
            return _ExactPolarObjective(K)
    except GeometryError:
        pass
    return _QuadratureObjective(K, samples, seed)


def _newton_step(grad, hess):
    try:
        return -np.linalg.solve(hess, grad)
    except np.linalg.LinAlgError:
        return -np.linalg.lstsq(hess, grad, rcond=None)[0]


def _line_search(obj, z, F, step):
    """Step halving (factor DAMPING) until the objective decreases."""
    t = 1.0
    for _ in range(50):
        zn = z + t * step
        if obj.inside(zn):
            out = obj(zn)
            if out[0] <= F:
                return zn, out
        t *= DAMPING
    return None, None


def santalo_point(
    K: ConvexBody,
    samples=1 << 15,
    seed=0,
    tol=CENTROID_TOL,
    max_iter=MAX_ITER,
    vp_samples=1_000_000,
    start=None,
) -> VolumeProductReport:
    """Minimize ``z -> |K^z|``; report volume products at 0 and at the minimizer.

    The iteration starts at the centroid of K unless ``start`` is given.
    """
    n = K.dim
    obj = _make_objective(K, samples, seed)
    z = centroid(K, samples, seed) if start is None else np.asarray(start, float)
    if not obj.inside(z):
        z = K.interior_point()
    F, g, H, c, w = obj(z)
    iterations = 0
    converged = False
    for _ in range(max_iter):
        if np.linalg.norm(c) < tol * w:
            converged = True
            break
        zn, out = _line_search(obj, z, F, _newton_step(g, H))
        if zn is None:
            break
        iterations += 1
        change = abs(F - out[0]) / F
        z, (F, g, H, c, w) = zn, out
        if change < VP_CHANGE_TOL:
            converged = True
            break

    if converged:
        # a couple of polishing steps: quadratic convergence makes them cheap
        for _ in range(3):
            step = _newton_step(g, H)
            if np.linalg.norm(step) <= 1e-15 * max(1.0, np.linalg.norm(z)):
                break
            zn, out = _line_search(obj, z, F, step)
            if zn is None or np.linalg.norm(out[3]) > np.linalg.norm(c):
                break
            z, (F, g, H, c, w) = zn, out
    else:
        z, F, c, w, extra = _simplex_fallback(obj, z, F)
        iterations += extra
        if np.linalg.norm(c) >= tol * w:
            raise SantaloConvergenceError(
                f"Santaló iteration stalled (centroid norm {np.linalg.norm(c):.3g})", z, F
            )

    vp_s = volume_product(K, z, vp_samples, seed)
    origin = np.zeros(n)
    if K.is_interior(origin):
        vp_0 = vp_s if np.allclose(z, origin, atol=0.0) else volume_product(K, origin, vp_samples, seed)
    else:
        vp_0 = math.inf
    return VolumeProductReport(
        vp_at_origin=vp_0,
        santalo_point=z,
        vp_at_santalo=vp_s,
        normalized_vp=vp_s / unit_ball_volume(n) ** 2,
        iterations=iterations,
    )


def _simplex_fallback(obj, z, F):
    def f(x):
        return obj(x)[0] if obj.inside(x) else math.inf

    res = minimize(f, z, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
    if res.fun < F:
        z = res.x
    F, _, _, c, w = obj(z)
    return z, F, c, w, int(res.nit)
