"""Volumes: exact polytope triangulation, sphere quadrature, rejection
sampling, and closed-form cap / cone-excess terms for Euclidean balls."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc, ndtri
from scipy.stats import qmc

from .bodies import (
    Ball,
    CappedBody,
    ConedBody,
    ConvexBody,
    Ellipsoid,
    LinearImage,
    LpBall,
    is_polytope,
    unit_ball_volume,
)
from .errors import GeometryError

SHARD_SIZE = 2**18


@dataclass(frozen=True)
class VolumeEstimate:
    value: float
    method: str
    stderr: float = 0.0
    samples: int = 0

    def __post_init__(self):
        if self.method not in ("exact", "radial_quadrature", "rejection"):
            raise ValueError(f"unknown volume method {self.method!r}")
        if not self.value > 0:
            raise GeometryError(f"volume must be positive, got {self.value}")
        if self.stderr < 0:
            raise ValueError("stderr must be nonnegative")
        if self.method == "exact" and self.stderr != 0:
            raise ValueError("exact volumes carry no standard error")


@dataclass(frozen=True)
class CapSpec:
    """Cap of height ``delta`` on a Euclidean ball of radius ``r`` in R^n."""

    r: float
    delta: float
    n: int

    def __post_init__(self):
        if self.r <= 0 or self.delta <= 0:
            raise GeometryError("cap radius and height must be positive")
        if self.n < 2:
            raise GeometryError("dimension must be at least 2")


@dataclass
class EmpiricalModulus:
    """Measured-over-leading ratios on a grid of t decreasing toward 0."""

    name: str
    rows: list = field(default_factory=list)  # (t, measured, leading)

    def add(self, t, measured, leading):
        if self.rows and not t < self.rows[-1][0]:
            raise ValueError("grid must be strictly decreasing")
        if not (measured > 0 and leading > 0):
            raise ValueError("modulus entries must be positive")
        self.rows.append((float(t), float(measured), float(leading)))

    @property
    def grid(self):
        return [(t, m / lead) for t, m, lead in self.rows]

    def ratios(self):
        return np.array([m / lead for _, m, lead in self.rows])

    def csv_rows(self):
        return [(t, m, lead, m / lead) for t, m, lead in self.rows]


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def sphere_directions(n, count, seed, antithetic=False):
    """Scrambled-Sobol points pushed to the unit sphere through the normal CDF.

    With ``antithetic=True`` the set is closed under ``u -> -u`` (count rounded
    up to even).
    """
    base = (count + 1) // 2 if antithetic else count
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        pts = qmc.Sobol(d=n, scramble=True, seed=seed).random(base)
    z = ndtri(np.clip(pts, 1e-15, 1 - 1e-15))
    z /= np.linalg.norm(z, axis=1)[:, None]
    return np.vstack([z, -z]) if antithetic else z


def _shards(count, seed, shard_size):
    n_shards = max(1, math.ceil(count / shard_size))
    return [(seed + i, min(shard_size, count - i * shard_size)) for i in range(n_shards)]


def _map_shards(fn, shards, jobs):
    if jobs and jobs > 1 and len(shards) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, shards))
    return [fn(s) for s in shards]


def _origin_centered(K: ConvexBody):
    if K.is_interior(np.zeros(K.dim)):
        return K
    return K.translate(-K.interior_point())


def volume_radial(K: ConvexBody, samples=100_000, seed=0, jobs=1, shard_size=SHARD_SIZE):
    """|K| ~ kappa_n * mean(r_K(u)^n) over quasi-random unit directions.

    Shard ``i`` uses seed ``seed + i``; shards are merged in order, so the
    result does not depend on ``jobs``.
    """
    K = _origin_centered(K)
    n = K.dim

    def shard(spec):
        s, m = spec
        vals = K.radial(sphere_directions(n, m, s)) ** n
        return vals.sum(), (vals * vals).sum(), m

    parts = _map_shards(shard, _shards(samples, seed, shard_size), jobs)
    total = sum(p[2] for p in parts)
    mean = sum(p[0] for p in parts) / total
    var = max(sum(p[1] for p in parts) / total - mean * mean, 0.0)
    kn = unit_ball_volume(n)
    return VolumeEstimate(kn * mean, "radial_quadrature", kn * math.sqrt(var / total), total)


def volume_difference_radial(outer: ConvexBody, inner: ConvexBody, samples=100_000, seed=0, jobs=1,
                             shard_size=SHARD_SIZE):
    """|outer| - |inner| with common directions (both must contain 0 inside)."""
    n = outer.dim

    def shard(spec):
        s, m = spec
        u = sphere_directions(n, m, s)
        vals = outer.radial(u) ** n - inner.radial(u) ** n
        return vals.sum(), (vals * vals).sum(), m

    parts = _map_shards(shard, _shards(samples, seed, shard_size), jobs)
    total = sum(p[2] for p in parts)
    mean = sum(p[0] for p in parts) / total
    var = max(sum(p[1] for p in parts) / total - mean * mean, 0.0)
    kn = unit_ball_volume(n)
    return kn * mean, kn * math.sqrt(var / total)


def volume_rejection(K: ConvexBody, samples=100_000, seed=0, chunk=2**18):
    lo, hi = K.bounding_box()
    box = float(np.prod(hi - lo))
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        pts = lo + (hi - lo) * rng.random((m, K.dim))
        hits += int(np.count_nonzero(K.contains(pts, tol=0.0)))
        done += m
    p = hits / samples
    return VolumeEstimate(box * p, "rejection", box * math.sqrt(p * (1 - p) / samples), samples)


# ---------------------------------------------------------------------------
# exact paths
# ---------------------------------------------------------------------------


def polytope_volume_exact(P) -> VolumeEstimate:
    if not is_polytope(P):
        raise GeometryError("exact volume needs a polytope")
    vol = P.moments()[0]
    if not vol > 0:
        raise GeometryError("degenerate polytope")
    return VolumeEstimate(float(vol), "exact")


def spherical_cap_volume_exact(c: CapSpec) -> float:
    """Volume of ``{x in B(r) : x_n >= r - delta}`` via the regularized incomplete beta."""
    n, r, h = c.n, c.r, c.delta
    if h > 2 * r:
        raise GeometryError("cap height exceeds the diameter")
    full = unit_ball_volume(n) * r**n
    if h > r:
        return full - spherical_cap_volume_exact(CapSpec(r, 2 * r - h, n)) if h < 2 * r else full
    x = h * (2 * r - h) / (r * r)
    return 0.5 * full * betainc(0.5 * (n + 1), 0.5, x)


def _log_leading(c: CapSpec):
    n = c.n
    return (
        0.5 * (n + 1) * math.log(2.0)
        + math.log(unit_ball_volume(n - 1))
        + 0.5 * (n + 1) * math.log(c.delta)
        + 0.5 * (n - 1) * math.log(c.r)
    )


def cap_leading_term(c: CapSpec) -> float:
    """``2^{(n+1)/2}/(n+1) * kappa_{n-1} * delta^{(n+1)/2} * r^{(n-1)/2}``."""
    return math.exp(_log_leading(c) - math.log(c.n + 1))


def cone_excess_leading_term(c: CapSpec) -> float:
    """``2^{(n+1)/2}/(n(n+1)) * kappa_{n-1} * delta^{(n+1)/2} * r^{(n-1)/2}``."""
    return math.exp(_log_leading(c) - math.log(c.n * (c.n + 1)))


def ball_cone_excess_exact(n, r, delta):
    """``|co[B(r), apex at distance r + delta] \\ B(r)|``: tangent cone minus cap."""
    d = r + delta
    # cancellation-free forms of d - r^2/d, 1 - r^2/d^2 and r - r^2/d
    axial = delta * (2 * r + delta) / d
    rho = r * math.sqrt(delta * (2 * r + delta)) / d
    cone = unit_ball_volume(n - 1) * rho ** (n - 1) * axial / n
    cap = spherical_cap_volume_exact(CapSpec(r, r * delta / d, n))
    return cone - cap


def _angle(a, b):
    c = float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))
    return math.acos(max(-1.0, min(1.0, c)))


def _capped_ball_exact(K: CappedBody):
    ball = K.base
    R, c = ball.radius, ball.center
    caps = []
    for h in K.halfspaces:
        dist = h.offset - h.normal @ c
        if dist >= R:
            continue
        if dist <= -R:
            raise GeometryError("cut removes the whole ball")
        caps.append((h.normal, math.acos(dist / R), R - dist))
    for i in range(len(caps)):
        for j in range(i):
            if _angle(caps[i][0], caps[j][0]) < caps[i][1] + caps[j][1]:
                return None
    return ball.volume() - sum(spherical_cap_volume_exact(CapSpec(R, h, K.dim)) for _, _, h in caps)


def _coned_ball_exact(K: ConedBody):
    ball = K.base
    R, c = ball.radius, ball.center
    cones = []
    for p in K.apexes:
        d = float(np.linalg.norm(p - c))
        if d <= R:
            continue
        cones.append((p - c, math.acos(R / d), d - R))
    for i in range(len(cones)):
        for j in range(i):
            if _angle(cones[i][0], cones[j][0]) < cones[i][1] + cones[j][1]:
                return None
    return ball.volume() + sum(ball_cone_excess_exact(K.dim, R, dl) for _, _, dl in cones)


def exact_volume(K: ConvexBody):
    """Closed-form or triangulated volume when one exists, else None."""
    if is_polytope(K):
        return polytope_volume_exact(K).value
    if isinstance(K, (Ellipsoid, LpBall)):
        return K.volume()
    if isinstance(K, LinearImage):
        base = exact_volume(K.base)
        return None if base is None else abs(np.linalg.det(K.T)) * base
    if isinstance(K, CappedBody) and isinstance(K.base, Ball):
        return _capped_ball_exact(K)
    if isinstance(K, ConedBody) and isinstance(K.base, Ball):
        return _coned_ball_exact(K)
    return None


def volume(K: ConvexBody, samples=100_000, seed=0, method="auto", jobs=1) -> VolumeEstimate:
    """Best available volume: exact when possible, sphere quadrature otherwise.

    ``method`` forces a path: ``"exact"``, ``"radial"`` or ``"rejection"``.
    """
    if method in ("auto", "exact"):
        v = exact_volume(K)
        if v is not None:
            return VolumeEstimate(float(v), "exact")
        if method == "exact":
            raise GeometryError(f"no exact volume for {type(K).__name__}")
    if method == "rejection":
        return volume_rejection(K, samples, seed)
    if method in ("auto", "radial", "mc"):
        return volume_radial(K, samples, seed, jobs=jobs)
    raise ValueError(f"unknown volume method {method!r}")


def cap_volume_numeric(K: ConvexBody, x0, normal, delta, heights=48, directions=256):
    """Volume of ``K ∩ {<y, N> >= <x0, N> - delta}`` by slice integration.

    Slices are integrated with Gauss-Legendre in ``s`` where ``t = delta s^2``
    (absorbs the ``t^{(n-1)/2}`` growth at the tip); slice areas come from the
    slice radial function about the point ``x0 - t N``.
    """
    from .curvature import tangent_frame, slice_radii

    n = K.dim
    x0 = np.asarray(x0, float)
    N = np.asarray(normal, float)
    E = tangent_frame(N)
    nodes, weights = np.polynomial.legendre.leggauss(heights)
    s = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    if n == 2:
        dirs = np.array([[1.0], [-1.0]])
    elif n == 3:
        ang = 2 * np.pi * np.arange(directions) / directions
        dirs = np.column_stack([np.cos(ang), np.sin(ang)])
    else:
        dirs = sphere_directions(n - 1, directions, 12345, antithetic=True)
    kn1 = unit_ball_volume(n - 1)
    total = 0.0
    for si, wi in zip(s, w):
        t = delta * si * si
        rad = slice_radii(K, x0, N, E, t, dirs)
        if n == 2:
            area = rad.sum()
        else:
            area = kn1 * np.mean(rad ** (n - 1))
        total += wi * area * 2 * delta * si
    return total
