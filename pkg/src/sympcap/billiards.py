"""Generalized A-billiards via the capacity of the configuration product.

xi^A_Lambda(Delta) is the capacity of Delta x Lambda under the lift
Psi_A = diag(A, (A^t)^{-1}).  Carriers on the product boundary alternate
q-moving segments (free flight, momentum on the Lambda boundary) with
bounce segments (position pinned to the Delta boundary while the momentum
crosses Lambda), and the action equals sum_j h_Lambda(q_j - q_{j+1}) over
the bounce points with q_{m+1} = A q_0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bodies import Ball, ConvexBody, LinearImage, Product, Translated, _unit_directions, stats
from .closedform import CapacityResult
from .dualsolver import Carrier, SolverOptions, minimize_capacity
from .errors import AssumptionViolated, ClassificationAmbiguous
from .spectrum import t_psi
from .symplin import SymplecticMap, psi_A, theta_permutation

__all__ = [
    "psi_A",
    "interleaved_product",
    "xi",
    "BounceDecomposition",
    "extract_bounces",
    "validate_A_billiard",
    "billiard_bounds",
]


def interleaved_product(left: ConvexBody, right: ConvexBody) -> ConvexBody:
    """Product of two symplectic-block bodies in interleaved coordinates.

    left lives in R^{2 n1}(q, p), right in R^{2 n2}(q, p); the result lives
    in R^{2n}(q_1..q_n, p_1..p_n) and is invariant under interleaved direct
    sums of the factor maps.
    """
    if left.dim % 2 or right.dim % 2:
        raise ValueError("factors must be even-dimensional")
    n1, n2 = left.dim // 2, right.dim // 2
    theta = theta_permutation(n1, n2)
    return LinearImage(theta.T, Product(left, right))


def _fixed_point_in_interior(M: np.ndarray, K: ConvexBody, n_dirs: int = 256):
    """A point of ker(M - I) strictly inside K, or None."""
    _, s, Vt = np.linalg.svd(M - np.eye(M.shape[0]))
    mask = s <= 1e-8 * max(s[0] if s.size else 0.0, 1.0)
    B = Vt[mask].T
    pt = B @ (B.T @ K.interior_point) if B.shape[1] else np.zeros(K.dim)
    U = _unit_directions(K.dim, n_dirs)
    margin = float(np.min(K.support_batch(U) - U @ pt))
    scale = float(np.max(np.abs(K.support_batch(U)))) + 1.0
    if margin <= 1e-9 * scale:
        return None
    return pt


def xi(
    A: np.ndarray,
    delta: ConvexBody,
    lam: Optional[ConvexBody] = None,
    opts: Optional[SolverOptions] = None,
    **kwargs,
) -> CapacityResult:
    """xi^A_Lambda(Delta): capacity of Delta x Lambda under Psi_A.

    Requires a fixed point of A inside Delta and one of A^t inside Lambda;
    raises AssumptionViolated naming the failed condition.  Lambda defaults
    to the unit ball.  The carrier is reported in the original coordinates.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if delta.dim != n:
        raise AssumptionViolated("Delta must live in the domain of A")
    if lam is None:
        lam = Ball(1.0, dim=n)
    if lam.dim != n:
        raise AssumptionViolated("Lambda must live in the domain of A^t")

    q_bar = _fixed_point_in_interior(A, delta)
    if q_bar is None:
        raise AssumptionViolated("Fix(A) does not meet the interior of Delta")
    p_bar = _fixed_point_in_interior(A.T, lam)
    if p_bar is None:
        raise AssumptionViolated("Fix(A^t) does not meet the interior of Lambda")

    D = Product(Translated(delta, -q_bar), Translated(lam, -p_bar))
    psi = psi_A(A)
    res = minimize_capacity(psi, D, opts=opts, **kwargs)
    if res.carrier is not None:
        shift = np.concatenate([q_bar, p_bar])
        if np.any(shift != 0.0):
            res.carrier = Carrier(
                samples_t=res.carrier.samples_t,
                samples_x=res.carrier.samples_x + shift[None, :],
                action=res.carrier.action,
                period_param=res.carrier.period_param,
                a0=res.carrier.a0,
                boundary_residual=res.carrier.boundary_residual,
                closure_residual=res.carrier.closure_residual,
                diagnostics=res.carrier.diagnostics,
            )
    res.diagnostics["q_bar"] = q_bar.tolist()
    res.diagnostics["p_bar"] = p_bar.tolist()
    return res


@dataclass(frozen=True, eq=False)
class BounceDecomposition:
    """Bounce points of a product-boundary carrier with its chord action."""

    bounce_points: np.ndarray   # (m+2, n): q_0, interior bounces, A q_0
    segment_tags: np.ndarray    # (S,) of 'q' (free flight) / 'b' (bounce)
    total_h_length: float       # sum_j h_Lambda(q_j - q_{j+1})
    interior_bounces: int       # m
    proper: bool                # some interior sample on both boundaries
    diagnostics: dict = field(default_factory=dict)


def extract_bounces(
    carrier: Carrier,
    delta: ConvexBody,
    lam: ConvexBody,
    delta_act: float = 1e-4,
    A: Optional[np.ndarray] = None,
) -> BounceDecomposition:
    """Classify carrier samples by active constraint and read bounce points.

    A sample is q-moving when only the Lambda constraint is active and a
    bounce candidate when the Delta constraint is active; consecutive
    bounce candidates merge into one event and the event's position is
    projected onto the Delta boundary, where bounce points live.  Samples
    activating neither constraint within 5x the tolerance raise
    ClassificationAmbiguous.  For closed carriers (x(T) = x(0)) the time
    origin is rolled into a free-flight segment so that bounce events are
    not split across the endpoints.  When ``A`` is given the final point
    is A q_0 exactly.
    """
    n = delta.dim
    Q = carrier.samples_x[:, :n].copy()
    P = carrier.samples_x[:, n:].copy()
    jq = delta.gauge_batch(Q)
    jp = lam.gauge_batch(P)

    closed = float(np.linalg.norm(carrier.samples_x[-1] - carrier.samples_x[0])) <= max(
        10 * carrier.closure_residual, 1e-8
    )
    if closed and abs(jq[0] - 1.0) < delta_act:
        # start mid-bounce: roll so the loop opens inside a q-moving segment
        off = np.flatnonzero(np.abs(jq - 1.0) >= delta_act)
        if off.size:
            k = int(off[off.size // 2])
            Q = np.vstack([Q[k:-1], Q[: k + 1]])
            P = np.vstack([P[k:-1], P[: k + 1]])
            jq = np.concatenate([jq[k:-1], jq[: k + 1]])
            jp = np.concatenate([jp[k:-1], jp[: k + 1]])

    on_delta = np.abs(jq - 1.0) < delta_act
    on_lam = np.abs(jp - 1.0) < delta_act

    neither = ~(on_delta | on_lam)
    if np.any(neither):
        near = np.abs(np.maximum(jq, jp) - 1.0) < 5 * delta_act
        bad = neither & ~near
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise ClassificationAmbiguous(
                f"sample {i}: j_Delta={jq[i]:.6f}, j_Lambda={jp[i]:.6f}"
            )
        # nudge borderline samples onto the nearest constraint
        on_delta = on_delta | (neither & (jq >= jp))
        on_lam = on_lam | (neither & (jp > jq))

    tags = np.where(on_delta, "b", "q")

    # maximal runs of bounce samples
    S = tags.size
    runs = []
    i = 0
    while i < S:
        if tags[i] == "b":
            j = i
            while j + 1 < S and tags[j + 1] == "b":
                j += 1
            runs.append((i, j))
            i = j + 1
        else:
            i += 1

    q0 = Q[0]
    interior = [(a, b) for a, b in runs if a > 0 and b < S - 1]
    bounce_q = []
    for a, b in interior:
        q_mean = Q[a : b + 1].mean(axis=0)
        bounce_q.append(q_mean / delta.gauge(q_mean))  # bounce points lie on the boundary
    q_end = np.asarray(A, dtype=float) @ q0 if A is not None else Q[-1]
    points = np.vstack([q0[None, :], *([np.vstack(bounce_q)] if bounce_q else []), q_end[None, :]])

    diffs = points[:-1] - points[1:]
    total = float(np.sum(lam.support_batch(diffs)))
    proper = bool(np.any(on_delta & on_lam & (np.arange(S) > 0) & (np.arange(S) < S - 1)))

    return BounceDecomposition(
        bounce_points=points,
        segment_tags=tags,
        total_h_length=total,
        interior_bounces=len(interior),
        proper=proper,
        diagnostics={
            "action": carrier.action,
            "h_length_vs_action": abs(total - carrier.action) / max(carrier.action, 1e-15),
            "runs": len(runs),
            "rolled": bool(closed),
        },
    )


def _outward_normal(delta: ConvexBody, q: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Unit outward normal at a boundary point from gauge differences."""
    g = np.zeros_like(q)
    for i in range(q.size):
        e = np.zeros_like(q)
        e[i] = h
        g[i] = (delta.gauge(q + e) - delta.gauge(q - e)) / (2 * h)
    nrm = np.linalg.norm(g)
    if nrm < 1e-12:
        raise ValueError("degenerate normal")
    return g / nrm


def _is_outward_support(delta: ConvexBody, q: np.ndarray, nu: np.ndarray, tol: float) -> bool:
    """nu supports Delta at q: h_Delta(nu) <= <q, nu> + tol (scaled)."""
    nn = np.linalg.norm(nu)
    if nn < 1e-12:
        return True
    scale = max(1.0, float(np.linalg.norm(q)))
    return delta.support(nu) - float(q @ nu) <= tol * nn * scale


def validate_A_billiard(points, A: np.ndarray, delta: ConvexBody, tol: float = 1e-6) -> dict:
    """Report-style check of the generalized A-billiard conditions.

    points = (q_0, ..., q_m) with q_m expected to equal A q_0.  Returns a
    dict of per-condition passes; does not raise on failures.  Endpoint
    auxiliary directions are built by reflecting at the boundary normal
    (smooth points); conditions are tried in their stated order.
    """
    A = np.asarray(A, dtype=float)
    pts = [np.asarray(p, dtype=float) for p in points]
    m = len(pts) - 1
    report: dict = {"m": m}
    report["AGBi"] = m >= 2 and all(
        abs(delta.gauge(pts[i]) - 1.0) <= 10 * tol for i in range(1, m)
    )
    report["AGBii"] = (
        len({tuple(np.round(p, 9)) for p in pts[:-1]}) == m
        and len({tuple(np.round(p, 9)) for p in pts[1:]}) == m
    )
    report["endpoint_matches"] = bool(np.linalg.norm(pts[-1] - A @ pts[0]) <= 10 * tol)

    ok = True
    for i in range(1, m):
        d_in = pts[i] - pts[i - 1]
        d_out = pts[i] - pts[i + 1]
        nu = d_in / np.linalg.norm(d_in) + d_out / np.linalg.norm(d_out)
        if not _is_outward_support(delta, pts[i], nu, tol):
            ok = False
    report["AGBiii"] = ok

    q, Aq = pts[0], A @ pts[0]
    d0 = (pts[1] - pts[0]) / np.linalg.norm(pts[1] - pts[0])
    dm = (pts[-1] - pts[-2]) / np.linalg.norm(pts[-1] - pts[-2])
    q_int = delta.gauge(q) < 1.0 - 10 * tol
    Aq_int = delta.gauge(Aq) < 1.0 - 10 * tol

    def bill10() -> bool:
        return bool(np.linalg.norm(A @ d0 - dm) <= 100 * tol)

    conditions = [("bill10", bill10())]
    if not q_int:
        nrm0 = _outward_normal(delta, q)
        b0 = d0 - 2 * float(d0 @ nrm0) * nrm0
        conditions.append(("bill11", bool(np.linalg.norm(A @ b0 - dm) <= 100 * tol)))
    if not Aq_int:
        nrm_m = _outward_normal(delta, Aq)
        bm = dm - 2 * float(dm @ nrm_m) * nrm_m
        conditions.append(("bill12", bool(np.linalg.norm(A @ d0 - bm) <= 100 * tol)))
    if not q_int and not Aq_int:
        conditions.append(("bill13", bool(np.linalg.norm(A @ b0 - bm) <= 100 * tol)))

    if q_int and Aq_int:
        case = "AGBiv"
    elif not q_int and Aq_int:
        case = "AGBv"
    elif q_int and not Aq_int:
        case = "AGBvi"
    else:
        case = "AGBvii"
    report["endpoint_case"] = case
    report["endpoint_condition"] = next((nm for nm, okc in conditions if okc), None)
    report["endpoint_pass"] = report["endpoint_condition"] is not None
    report["pass"] = bool(
        report["AGBi"] and report["AGBii"] and report["AGBiii"]
        and report["endpoint_matches"] and report["endpoint_pass"]
    )
    return report


def billiard_bounds(A: np.ndarray, delta: ConvexBody, r: float, R: float):
    """(lower, upper, width_upper) for xi^A(Delta) given B(qbar, r) in Delta in B(qbar, R).

    lower = r t(Psi_A)/2, upper = t(Psi_A) R; width_upper = 2 width(Delta)
    applies only when A is the identity (returned as None otherwise).
    """
    A = np.asarray(A, dtype=float)
    if r <= 0 or R < r:
        raise AssumptionViolated("need 0 < r <= R")
    t = t_psi(psi_A(A))
    lower = 0.5 * r * t
    upper = t * R
    width_upper = None
    if np.allclose(A, np.eye(A.shape[0])):
        width_upper = 2.0 * stats(delta).width
    return lower, upper, width_upper
