"""Brute-force planar oracle: capacity under a rotation as a swept sector.

For a convex D in the plane with 0 interior and Psi = R(theta), every
boundary curve with velocity in J x (normal cone) runs counterclockwise,
so a characteristic from z0 to R(theta) z0 is a ccw boundary arc and its
action is the swept sector area (1/2) oint (x dy - y dx).

Minimizing the window G(phi) = F(phi + theta) - F(phi) of the cumulative
sector area F over all start angles is exact: at an interior minimum
G'(phi) = (r(phi + theta)^2 - r(phi)^2)/2 = 0, which is precisely the
boundary-matching condition |R(theta) z0| = r(angle(z0) + theta).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bodies import ConvexBody, PolytopeV, Rounded, Scaled, Translated
from .closedform import CapacityResult
from .errors import DimensionMismatch, OriginNotInterior

TWO_PI = 2.0 * np.pi


def _vertex_angles(D: ConvexBody) -> np.ndarray:
    """Polar angles of polytope vertices anywhere in the body tree.

    Including them in the sample makes the polyline exact on polygon edges
    (the shoelace sector integral is then exact for polygonal bodies).
    """
    if isinstance(D, PolytopeV):
        return np.arctan2(D.vertices[:, 1], D.vertices[:, 0])
    if isinstance(D, (Rounded, Scaled)):
        return _vertex_angles(D.body)
    if isinstance(D, Translated):
        return np.array([])  # shifted vertices no longer share angles
    for attr in ("left", "right"):
        if hasattr(D, attr):
            return np.concatenate([_vertex_angles(getattr(D, attr))])
    return np.array([])


@dataclass(frozen=True, eq=False)
class BoundaryPolyline:
    """Counterclockwise boundary sample of a planar body containing 0."""

    angles: np.ndarray   # (K,), strictly increasing in [0, 2pi)
    radii: np.ndarray    # (K,), distance to the boundary along each angle
    points: np.ndarray   # (K, 2)
    origin_interior: bool = True

    @classmethod
    def from_body(cls, D: ConvexBody, count: int = 4096) -> "BoundaryPolyline":
        if D.dim != 2:
            raise DimensionMismatch("boundary polyline requires a planar body")
        base = TWO_PI * np.arange(count) / count
        extra = np.mod(_vertex_angles(D), TWO_PI)
        angles = np.unique(np.concatenate([base, extra]))
        dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        g = D.gauge_batch(dirs)
        if np.any(g <= 1e-12):
            raise OriginNotInterior("gauge vanished along a ray")
        radii = 1.0 / g
        points = radii[:, None] * dirs
        return cls(angles, radii, points)

    def area(self) -> float:
        """Enclosed (shoelace) area of the closed polyline."""
        P = self.points
        Q = np.roll(P, -1, axis=0)
        return 0.5 * float(np.sum(P[:, 0] * Q[:, 1] - P[:, 1] * Q[:, 0]))


def _cumulative_sector(poly: BoundaryPolyline) -> np.ndarray:
    """Sector area swept from angle[0] to angle[i] (shoelace chords)."""
    P = poly.points
    Q = np.roll(P, -1, axis=0)
    seg = 0.5 * (P[:, 0] * Q[:, 1] - P[:, 1] * Q[:, 0])
    out = np.zeros(P.shape[0] + 1)
    out[1:] = np.cumsum(seg)
    return out   # out[i] = area from angles[0] up to angles[i]; out[-1] = total


class _SectorTable:
    """F(phi): sector area swept ccw from angle 0, for arbitrary phi."""

    def __init__(self, D: ConvexBody, count: int):
        self.D = D
        self.poly = BoundaryPolyline.from_body(D, count)
        self.cum = _cumulative_sector(self.poly)
        self.total = self.cum[-1]

    def _point(self, phi: float) -> np.ndarray:
        d = np.array([np.cos(phi), np.sin(phi)])
        return d / self.D.gauge_batch(d[None, :])[0]

    def F_batch(self, phis: np.ndarray) -> np.ndarray:
        """Sector areas from the first sample angle to each phi (>= 0)."""
        phis = np.asarray(phis, dtype=float)
        wraps, phi_red = np.divmod(phis, TWO_PI)
        ang = self.poly.angles
        idx = np.searchsorted(ang, phi_red, side="right") - 1
        dirs = np.stack([np.cos(phi_red), np.sin(phi_red)], axis=1)
        pts = dirs / self.D.gauge_batch(dirs)[:, None]
        prev = self.poly.points[idx]  # idx = -1 wraps to the last point
        base = np.where(idx >= 0, self.cum[np.maximum(idx, 0)], 0.0)
        partial = 0.5 * (prev[:, 0] * pts[:, 1] - prev[:, 1] * pts[:, 0])
        return wraps * self.total + base + partial

    def F(self, phi: float) -> float:
        return float(self.F_batch(np.array([phi]))[0])

    def window(self, phi: float, theta: float) -> float:
        return self.F(phi + theta) - self.F(phi)


def _golden_min_scalar(f, a: float, b: float, iters: int = 80) -> tuple[float, float]:
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def arc_capacity_2d(
    D: ConvexBody,
    theta: float,
    count: int = 4096,
    refine_margin: float = 1e-3,
) -> CapacityResult:
    """Minimal swept sector area over boundary arcs z0 -> R(theta) z0.

    theta must lie in (0, 2pi].  All near-minimal grid starts are refined
    by golden section; counterclockwise arcs only (the positive-action
    orientation for convex bodies containing 0).
    """
    if not (0.0 < theta <= TWO_PI + 1e-12):
        raise ValueError("theta must lie in (0, 2pi]")
    theta = min(theta, TWO_PI)
    table = _SectorTable(D, count)
    ang = table.poly.angles
    K = ang.size

    # F at grid angles is the cumulative table itself; only the shifted
    # endpoints need fresh boundary points.
    windows = table.F_batch(ang + theta) - table.cum[: K]
    vmin = float(np.min(windows))
    span = max(float(np.max(windows)) - vmin, 1e-15)
    near = np.flatnonzero(windows <= vmin + refine_margin * span)

    # group consecutive near-minimal samples into clusters; refine each
    splits = np.flatnonzero(np.diff(near) > 2) + 1
    clusters = np.split(near, splits)
    centers = [int(cl[np.argmin(windows[cl])]) for cl in clusters]
    centers.sort(key=lambda i: windows[i])
    centers = centers[:8]

    dphi = TWO_PI / K
    best_val, best_phi = float(windows[int(np.argmin(windows))]), float(ang[int(np.argmin(windows))])
    for i in centers:
        center = ang[i]
        phi, val = _golden_min_scalar(
            lambda t: table.window(t, theta), center - 2 * dphi, center + 2 * dphi
        )
        if val < best_val:
            best_val, best_phi = val, phi

    return CapacityResult(
        float(best_val),
        "oracle_2d",
        diagnostics={
            "theta": theta,
            "start_angle": float(np.mod(best_phi, TWO_PI)),
            "samples": int(K),
            "full_area": table.total,
        },
    )
