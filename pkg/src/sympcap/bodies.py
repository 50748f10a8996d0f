"""Convex-body algebra through support-function oracles.

Primitive shapes (balls, ellipsoids, V-polytopes) plus the closure under
Cartesian product, p-sum, scaling, translation, rounding (Minkowski sum
with a small ball) and orthogonal linear images.  Every body exposes

  * ``support_batch(W)``     h_K(w) = sup_{x in K} <x, w>, vectorized,
  * ``argmax_batch(W)``      a maximizer point per direction,
  * ``gauge_batch(Z)``       the Minkowski functional j_K (0 interior),

and carries an explicit interior point.  Support values are exact for
primitives and recursive for composites; gauges are exact where a closed
form exists and fall back to maximizing <z, w>/h_K(w) over directions
(a quasiconcave ratio, so local ascent is global).

Bodies are immutable and safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.spatial

from .errors import DimensionMismatch, OriginNotInterior

_EPS = 1e-14


def _as_batch(w, dim: int):
    W = np.asarray(w, dtype=float)
    single = W.ndim == 1
    W = np.atleast_2d(W)
    if W.shape[1] != dim:
        raise DimensionMismatch(f"expected vectors of length {dim}, got {W.shape[1]}")
    return W, single


class ConvexBody:
    """Abstract base: a compact convex body with a support oracle."""

    dim: int
    interior_point: np.ndarray
    # True when the support function is differentiable away from 0,
    # i.e. the body is strictly convex; drives the solver's rounding ladder.
    is_smooth: bool = False

    # -- single-vector conveniences ---------------------------------------
    def support(self, w) -> float:
        W, _ = _as_batch(w, self.dim)
        return float(self.support_batch(W)[0])

    def support_argmax(self, w) -> np.ndarray:
        W, _ = _as_batch(w, self.dim)
        return self.argmax_batch(W)[0]

    def gauge(self, z) -> float:
        Z, _ = _as_batch(z, self.dim)
        return float(self.gauge_batch(Z)[0])

    # -- batch oracle (implemented by subclasses) --------------------------
    def support_batch(self, W: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def argmax_batch(self, W: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gauge_batch(self, Z: np.ndarray) -> np.ndarray:
        return _gauge_dual(self, Z)

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dim={self.dim})"


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

class Ball(ConvexBody):
    """Euclidean ball of given radius and center."""

    is_smooth = True

    def __init__(self, radius: float, center=None, dim: Optional[int] = None):
        if radius <= 0:
            raise ValueError("radius must be positive")
        if center is None:
            if dim is None:
                raise ValueError("need center or dim")
            center = np.zeros(dim)
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.dim = self.center.size
        self.interior_point = self.center.copy()

    def support_batch(self, W):
        return self.radius * np.linalg.norm(W, axis=1) + W @ self.center

    def argmax_batch(self, W):
        norms = np.linalg.norm(W, axis=1)
        safe = np.where(norms > _EPS, norms, 1.0)
        return self.center[None, :] + self.radius * W / safe[:, None]

    def gauge_batch(self, Z):
        c, r = self.center, self.radius
        cc = float(c @ c)
        if cc >= r * r:
            raise OriginNotInterior("ball does not contain the origin strictly")
        zc = Z @ c
        zz = np.einsum("ij,ij->i", Z, Z)
        disc = zc**2 + (r * r - cc) * zz
        return (-zc + np.sqrt(np.maximum(disc, 0.0))) / (r * r - cc)

    def to_dict(self):
        return {"kind": "ball", "radius": self.radius, "center": self.center.tolist()}


class Ellipsoid(ConvexBody):
    """{z : (1/2) <S z, z> <= 1} for symmetric positive definite S."""

    is_smooth = True

    def __init__(self, S: np.ndarray):
        S = np.asarray(S, dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise ValueError("S must be square")
        if np.max(np.abs(S - S.T)) > 1e-10:
            raise ValueError("S must be symmetric")
        evals = np.linalg.eigvalsh(S)
        if evals[0] <= 0:
            raise ValueError("S must be positive definite")
        self.S = 0.5 * (S + S.T)
        self.S_inv = np.linalg.inv(self.S)
        self.dim = S.shape[0]
        self.interior_point = np.zeros(self.dim)

    def support_batch(self, W):
        quad = np.einsum("ij,ij->i", W @ self.S_inv, W)
        return np.sqrt(2.0 * np.maximum(quad, 0.0))

    def argmax_batch(self, W):
        SW = W @ self.S_inv
        quad = np.einsum("ij,ij->i", SW, W)
        scale = np.sqrt(2.0 / np.maximum(quad, _EPS))
        return SW * scale[:, None]

    def gauge_batch(self, Z):
        quad = np.einsum("ij,ij->i", Z @ self.S, Z)
        return np.sqrt(0.5 * np.maximum(quad, 0.0))

    def to_dict(self):
        return {"kind": "ellipsoid", "S": self.S.tolist()}


class PolytopeV(ConvexBody):
    """Convex hull of a vertex list; support ties break at the lowest index."""

    is_smooth = False

    def __init__(self, vertices: np.ndarray, interior_point=None):
        V = np.asarray(vertices, dtype=float)
        if V.ndim != 2 or V.shape[0] < V.shape[1] + 1:
            raise ValueError("need at least dim+1 vertices")
        self.vertices = V
        self.dim = V.shape[1]
        self.interior_point = (
            np.asarray(interior_point, dtype=float)
            if interior_point is not None
            else V.mean(axis=0)
        )
        self._hull = None

    def _facets(self):
        # qhull facet normals/offsets; lazy since only the gauge needs them
        if self._hull is None:
            self._hull = scipy.spatial.ConvexHull(self.vertices)
        return self._hull.equations  # rows (a, b) with a.x + b <= 0 inside

    def support_batch(self, W):
        return np.max(W @ self.vertices.T, axis=1)

    def argmax_batch(self, W):
        idx = np.argmax(W @ self.vertices.T, axis=1)  # first max = lowest index
        return self.vertices[idx]

    def gauge_batch(self, Z):
        eqs = self._facets()
        A, b = eqs[:, :-1], eqs[:, -1]
        offs = -b
        if np.any(offs <= 1e-12):
            raise OriginNotInterior("polytope does not contain the origin strictly")
        ratios = (Z @ A.T) / offs[None, :]
        return np.maximum(np.max(ratios, axis=1), 0.0)

    def to_dict(self):
        return {"kind": "polytope", "vertices": self.vertices.tolist()}


def polytope_from_halfspaces(A: np.ndarray, b: np.ndarray, interior_point) -> PolytopeV:
    """Vertex enumeration of {x : A x <= b}; supported in dims <= 4."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.shape[1] > 4:
        raise ValueError("halfspace conversion supported only for dims <= 4")
    halfspaces = np.hstack([A, -b[:, None]])
    hs = scipy.spatial.HalfspaceIntersection(halfspaces, np.asarray(interior_point, float))
    verts = hs.intersections
    hull = scipy.spatial.ConvexHull(verts)
    return PolytopeV(verts[hull.vertices], interior_point)


# ---------------------------------------------------------------------------
# composites
# ---------------------------------------------------------------------------

class Product(ConvexBody):
    """Cartesian product: first the left block of coordinates, then the right."""

    def __init__(self, left: ConvexBody, right: ConvexBody):
        self.left, self.right = left, right
        self.dim = left.dim + right.dim
        self.interior_point = np.concatenate([left.interior_point, right.interior_point])
        self.is_smooth = False  # corners along the boundary product

    def _split(self, W):
        return W[:, : self.left.dim], W[:, self.left.dim :]

    def support_batch(self, W):
        W1, W2 = self._split(W)
        return self.left.support_batch(W1) + self.right.support_batch(W2)

    def argmax_batch(self, W):
        W1, W2 = self._split(W)
        return np.hstack([self.left.argmax_batch(W1), self.right.argmax_batch(W2)])

    def gauge_batch(self, Z):
        Z1, Z2 = self._split(Z)
        return np.maximum(self.left.gauge_batch(Z1), self.right.gauge_batch(Z2))

    def to_dict(self):
        return {"kind": "product", "left": self.left.to_dict(), "right": self.right.to_dict()}


class PSum(ConvexBody):
    """Firey p-sum: support (h_D^p + h_K^p)^{1/p}; p = 1 is the Minkowski sum."""

    def __init__(self, left: ConvexBody, right: ConvexBody, p: float = 1.0):
        if left.dim != right.dim:
            raise DimensionMismatch("p-sum factors must share a dimension")
        if p < 1.0:
            raise ValueError("p must be >= 1")
        self.left, self.right, self.p = left, right, float(p)
        self.dim = left.dim
        self.interior_point = np.zeros(self.dim)  # requires 0 interior to both
        self.is_smooth = left.is_smooth and right.is_smooth

    def support_batch(self, W):
        h1 = np.maximum(self.left.support_batch(W), 0.0)
        h2 = np.maximum(self.right.support_batch(W), 0.0)
        if self.p == 1.0:
            return h1 + h2
        return (h1**self.p + h2**self.p) ** (1.0 / self.p)

    def argmax_batch(self, W):
        # gradient of the combined support where differentiable
        h1 = np.maximum(self.left.support_batch(W), _EPS)
        h2 = np.maximum(self.right.support_batch(W), _EPS)
        x1 = self.left.argmax_batch(W)
        x2 = self.right.argmax_batch(W)
        if self.p == 1.0:
            return x1 + x2
        h = (h1**self.p + h2**self.p) ** (1.0 / self.p)
        w1 = (h1 / h) ** (self.p - 1.0)
        w2 = (h2 / h) ** (self.p - 1.0)
        return w1[:, None] * x1 + w2[:, None] * x2

    def to_dict(self):
        return {
            "kind": "psum",
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
            "p": self.p,
        }


class Scaled(ConvexBody):
    """alpha * K for alpha > 0."""

    def __init__(self, body: ConvexBody, alpha: float):
        if alpha <= 0:
            raise ValueError("scale must be positive")
        self.body, self.alpha = body, float(alpha)
        self.dim = body.dim
        self.interior_point = self.alpha * body.interior_point
        self.is_smooth = body.is_smooth

    def support_batch(self, W):
        return self.alpha * self.body.support_batch(W)

    def argmax_batch(self, W):
        return self.alpha * self.body.argmax_batch(W)

    def gauge_batch(self, Z):
        return self.body.gauge_batch(Z) / self.alpha

    def to_dict(self):
        return {"kind": "scaled", "alpha": self.alpha, "body": self.body.to_dict()}


class Translated(ConvexBody):
    """K + v."""

    def __init__(self, body: ConvexBody, shift):
        self.body = body
        self.shift = np.asarray(shift, dtype=float)
        if self.shift.size != body.dim:
            raise DimensionMismatch("shift dimension mismatch")
        self.dim = body.dim
        self.interior_point = body.interior_point + self.shift
        self.is_smooth = body.is_smooth

    def support_batch(self, W):
        return self.body.support_batch(W) + W @ self.shift

    def argmax_batch(self, W):
        return self.body.argmax_batch(W) + self.shift[None, :]

    def to_dict(self):
        return {"kind": "translated", "shift": self.shift.tolist(), "body": self.body.to_dict()}


class Rounded(ConvexBody):
    """K + eps * B, the outer parallel body; support h_K + eps |w|."""

    def __init__(self, body: ConvexBody, eps: float):
        if eps < 0:
            raise ValueError("rounding radius must be >= 0")
        self.body, self.eps = body, float(eps)
        self.dim = body.dim
        self.interior_point = body.interior_point.copy()
        self.is_smooth = body.is_smooth

    def support_batch(self, W):
        return self.body.support_batch(W) + self.eps * np.linalg.norm(W, axis=1)

    def argmax_batch(self, W):
        norms = np.linalg.norm(W, axis=1)
        safe = np.where(norms > _EPS, norms, 1.0)
        return self.body.argmax_batch(W) + self.eps * W / safe[:, None]

    def to_dict(self):
        return {"kind": "rounded", "eps": self.eps, "body": self.body.to_dict()}


class LinearImage(ConvexBody):
    """T K for an orthogonal matrix T (permutations, rotations)."""

    def __init__(self, T: np.ndarray, body: ConvexBody):
        T = np.asarray(T, dtype=float)
        if np.max(np.abs(T.T @ T - np.eye(T.shape[0]))) > 1e-10:
            raise ValueError("LinearImage requires an orthogonal matrix")
        if T.shape[1] != body.dim:
            raise DimensionMismatch("matrix/body dimension mismatch")
        self.T, self.body = T, body
        self.dim = T.shape[0]
        self.interior_point = T @ body.interior_point
        self.is_smooth = body.is_smooth

    def support_batch(self, W):
        return self.body.support_batch(W @ self.T)

    def argmax_batch(self, W):
        return self.body.argmax_batch(W @ self.T) @ self.T.T

    def gauge_batch(self, Z):
        return self.body.gauge_batch(Z @ self.T)

    def to_dict(self):
        return {"kind": "linear_image", "T": self.T.tolist(), "body": self.body.to_dict()}


# ---------------------------------------------------------------------------
# module-level operations (spec surface)
# ---------------------------------------------------------------------------

def support(K: ConvexBody, w) -> float:
    """h_K(w) = sup over K of <x, w>."""
    return K.support(w)


def support_argmax(K: ConvexBody, w) -> np.ndarray:
    """A point of K attaining h_K(w); lexicographic tie-break on polytopes."""
    return K.support_argmax(w)


def gauge(K: ConvexBody, z) -> float:
    """Minkowski functional j_K(z); requires 0 in the interior of K."""
    return K.gauge(z)


def translate(K: ConvexBody, shift) -> ConvexBody:
    return Translated(K, shift)


def _unit_directions(dim: int, count: int, rng=None) -> np.ndarray:
    """Deterministic well-spread unit directions (axes + seeded Gaussian)."""
    rng = rng or np.random.default_rng(1234)
    axes = np.vstack([np.eye(dim), -np.eye(dim)])
    extra = rng.standard_normal((count, dim))
    extra /= np.linalg.norm(extra, axis=1, keepdims=True)
    return np.vstack([axes, extra])


def _refine_direction(fun, u0: np.ndarray, minimize: bool, iters: int = 80) -> float:
    """Local golden refinement of a direction objective around u0.

    Perturbs u0 in random tangent planes; adequate for the documented
    heuristic width/diameter search (tolerance ~1e-6 on desk-scale bodies).
    """
    sign = 1.0 if minimize else -1.0
    u = u0 / np.linalg.norm(u0)
    best = fun(u)
    rng = np.random.default_rng(99)
    step = 0.5
    for _ in range(iters):
        t = rng.standard_normal(u.size)
        t -= (t @ u) * u
        nt = np.linalg.norm(t)
        if nt < _EPS:
            continue
        t /= nt
        improved = False
        for s in (step, -step):
            cand = u * np.cos(s) + t * np.sin(s)
            cand /= np.linalg.norm(cand)
            val = fun(cand)
            if sign * (val - best) < -1e-15 * max(1.0, abs(best)):
                u, best, improved = cand, val, True
                break
        if not improved:
            step *= 0.7
            if step < 1e-8:
                break
    return best


@dataclass(frozen=True)
class BodyStats:
    """Inradius/circumradius about a point plus width and diameter."""

    inradius: float
    circumradius: float
    width: float
    diameter: float


def stats(K: ConvexBody, center=None, samples: int = 512) -> BodyStats:
    """Geometric statistics via sampled directions with local refinement.

    Width/diameter minimization over directions is a documented heuristic
    (512 samples + local descent, refinement tolerance ~1e-6).
    """
    c = np.asarray(center, dtype=float) if center is not None else K.interior_point
    U = _unit_directions(K.dim, samples)
    h = K.support_batch(U) - U @ c
    h_opp = K.support_batch(-U) + U @ c

    def sup_c(u):
        return K.support(u) - float(u @ c)

    def slab(u):
        return K.support(u) + K.support(-np.asarray(u))

    inr = _refine_direction(sup_c, U[np.argmin(h)], minimize=True)
    cir = _refine_direction(sup_c, U[np.argmax(h)], minimize=False)
    wid = _refine_direction(slab, U[np.argmin(h + h_opp)], minimize=True)
    dia = _refine_direction(slab, U[np.argmax(h + h_opp)], minimize=False)
    return BodyStats(inr, cir, wid, dia)


def inradius(K: ConvexBody, center=None, samples: int = 512) -> float:
    return stats(K, center, samples).inradius


def hausdorff(K1: ConvexBody, K2: ConvexBody, samples: int = 512) -> float:
    """Hausdorff distance as the sup of |h_1 - h_2| over unit directions."""
    if K1.dim != K2.dim:
        raise DimensionMismatch("bodies must share a dimension")
    U = _unit_directions(K1.dim, samples)
    diff = np.abs(K1.support_batch(U) - K2.support_batch(U))

    def gap(u):
        return abs(K1.support(u) - K2.support(np.asarray(u)))

    return _refine_direction(gap, U[np.argmax(diff)], minimize=False)


# ---------------------------------------------------------------------------
# generic gauge: maximize <z, w>/h(w) over unit directions
# ---------------------------------------------------------------------------

_SEED_CACHE: dict[int, np.ndarray] = {}


def _seed_dirs(dim: int) -> np.ndarray:
    if dim not in _SEED_CACHE:
        _SEED_CACHE[dim] = _unit_directions(dim, 256, np.random.default_rng(7))
    return _SEED_CACHE[dim]


def _gauge_dual_2d(K: ConvexBody, Z: np.ndarray) -> np.ndarray:
    """Planar generic gauge: golden search on the support direction angle.

    <z, w(a)>/h_K(w(a)) is unimodal in the angle a (its superlevel sets are
    arcs of the circle), so a coarse scan plus golden refinement is exact.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    m = Z.shape[0]
    out = np.zeros(m)
    norms = np.linalg.norm(Z, axis=1)
    active = norms > _EPS
    if not np.any(active):
        return out
    Za = Z[active]

    n_seed = 256
    angles = 2.0 * np.pi * np.arange(n_seed) / n_seed
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    h = K.support_batch(dirs)
    if np.any(h <= _EPS):
        raise OriginNotInterior("support nonpositive in some direction")
    ratios = (Za @ dirs.T) / h[None, :]
    best_idx = np.argmax(ratios, axis=1)

    def ratio_at(a: np.ndarray) -> np.ndarray:
        w = np.stack([np.cos(a), np.sin(a)], axis=1)
        return np.einsum("ij,ij->i", Za, w) / K.support_batch(w)

    delta = 2.0 * np.pi / n_seed
    a = angles[best_idx] - delta
    b = angles[best_idx] + delta
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    for _ in range(45):
        c = b - invphi * (b - a)
        d2 = a + invphi * (b - a)
        fc, fd = ratio_at(c), ratio_at(d2)
        left = fc > fd  # maximize
        b = np.where(left, d2, b)
        a = np.where(left, a, c)
    out[active] = np.maximum(ratio_at(0.5 * (a + b)), np.max(ratios, axis=1))
    return out


def _gauge_dual(K: ConvexBody, Z: np.ndarray) -> np.ndarray:
    """j_K(z) = max_w <z, w>/h_K(w): seeded sampling plus ascent.

    The ratio is quasiconcave on the cone <z, w> > 0, so the local ascent
    from the best seed converges to the global value.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    m, d = Z.shape
    if d == 2:
        return _gauge_dual_2d(K, Z)
    out = np.zeros(m)
    norms = np.linalg.norm(Z, axis=1)
    active = norms > _EPS
    if not np.any(active):
        return out

    seeds = _seed_dirs(d)
    h_seeds = K.support_batch(seeds)
    if np.any(h_seeds <= _EPS):
        raise OriginNotInterior("support nonpositive in some direction")

    Za = Z[active]
    ratios = (Za @ seeds.T) / h_seeds[None, :]
    W = seeds[np.argmax(ratios, axis=1)].copy()
    best = np.max(ratios, axis=1)
    # include z itself as a candidate direction
    zdir = Za / np.linalg.norm(Za, axis=1, keepdims=True)
    hz = K.support_batch(zdir)
    rz = np.einsum("ij,ij->i", Za, zdir) / hz
    upd = rz > best
    W[upd] = zdir[upd]
    best = np.maximum(best, rz)

    step = np.full(Za.shape[0], 0.25)
    for _ in range(120):
        h = K.support_batch(W)
        g = K.argmax_batch(W)
        # gradient of <z,w>/h(w) wrt w
        grad = (Za * h[:, None] - best[:, None] * h[:, None] * g) / (h**2)[:, None]
        grad -= W * np.einsum("ij,ij->i", grad, W)[:, None]
        gn = np.linalg.norm(grad, axis=1)
        move = gn > 1e-12
        if not np.any(move):
            break
        cand = W + step[:, None] * grad
        cn = np.linalg.norm(cand, axis=1)
        cand /= np.maximum(cn, _EPS)[:, None]
        hc = K.support_batch(cand)
        rc = np.einsum("ij,ij->i", Za, cand) / np.maximum(hc, _EPS)
        good = (rc > best) & move
        W[good] = cand[good]
        best[good] = rc[good]
        step[~good & move] *= 0.5
        step[good] *= 1.1
        if np.all(step < 1e-10):
            break

    out[active] = best
    return out


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def body_from_dict(spec: dict) -> ConvexBody:
    """Parse the JSON body description used by the CLI."""
    kind = spec.get("kind")
    if kind == "ball":
        return Ball(spec["radius"], spec["center"])
    if kind == "ellipsoid":
        return Ellipsoid(np.asarray(spec["S"], dtype=float))
    if kind == "polytope":
        return PolytopeV(np.asarray(spec["vertices"], dtype=float))
    if kind == "halfspaces":
        return polytope_from_halfspaces(
            np.asarray(spec["A"], dtype=float),
            np.asarray(spec["b"], dtype=float),
            np.asarray(spec["interior"], dtype=float),
        )
    if kind == "product":
        return Product(body_from_dict(spec["left"]), body_from_dict(spec["right"]))
    if kind == "psum":
        return PSum(body_from_dict(spec["left"]), body_from_dict(spec["right"]), spec["p"])
    if kind == "scaled":
        return Scaled(body_from_dict(spec["body"]), spec["alpha"])
    if kind == "translated":
        return Translated(body_from_dict(spec["body"]), spec["shift"])
    if kind == "rounded":
        return Rounded(body_from_dict(spec["body"]), spec["eps"])
    if kind == "linear_image":
        return LinearImage(np.asarray(spec["T"], dtype=float), body_from_dict(spec["body"]))
    raise ValueError(f"unknown body kind: {kind!r}")


def body_to_dict(K: ConvexBody) -> dict:
    return K.to_dict()
