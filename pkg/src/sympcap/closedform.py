"""Closed-form and semi-closed-form capacities.

Balls scale the minimal time t(Psi); ellipsoids reduce to the first
positive root of det(exp(T J S) - Psi); products take the minimum over
factors; orthogonal maps give the cylinder-type value t(Psi)/2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import NoZeroFound, NotOrthogonal
from .spectrum import t_psi, zeros_in_period, _golden_min
from .symplin import SymplecticMap, make_symplectic, standard_J


@dataclass
class CapacityResult:
    """A capacity value with its provenance and numeric diagnostics."""

    value: float
    method: str                     # closed_form | root_find | dual_solver | oracle_2d
    carrier: Optional[object] = None
    diagnostics: dict = field(default_factory=dict)


def capacity_ball(psi: SymplecticMap, r: float = 1.0) -> CapacityResult:
    """Capacity of the ball of radius r: r^2 t(Psi) / 2."""
    if r <= 0:
        raise ValueError("radius must be positive")
    t = t_psi(psi)
    return CapacityResult(0.5 * r * r * t, "closed_form", diagnostics={"t_psi": t})


def _first_return_sigma(psi: SymplecticMap, S: np.ndarray):
    """First T > 0 where exp(T J S) - Psi becomes singular.

    exp(T J S) is evaluated from the eigen-decomposition of J S (similar to
    a real skew-symmetric matrix, hence diagonalizable with imaginary
    spectrum), so a dense T-grid is cheap.
    """
    dim = S.shape[0]
    JS = standard_J(dim // 2) @ S
    evals, V = np.linalg.eig(JS)
    V_inv = np.linalg.inv(V)

    def exp_TJS(T: np.ndarray) -> np.ndarray:
        phases = np.exp(np.multiply.outer(np.asarray(T, dtype=float), evals))
        return np.real(np.einsum("ij,tj,jk->tik", V, phases, V_inv))

    def sig(T) -> np.ndarray:
        mats = exp_TJS(np.atleast_1d(T)) - psi.psi[None, :, :]
        return np.linalg.svd(mats, compute_uv=False)[..., -1]

    return sig


def capacity_ellipsoid(
    psi: SymplecticMap,
    S: np.ndarray,
    phi: Optional[SymplecticMap] = None,
    grid_size: int = 4096,
    safety: float = 4.0,
    accept_tol: float = 1e-8,
) -> CapacityResult:
    """Capacity of E = {z : (1/2) <S z, z> < 1} for positive definite S.

    Found as the smallest T > 0 with det(exp(T J S) - Psi) = 0, by a
    sigma_min grid scan on (0, T_cap] with golden refinement.  When a
    diagonalizing symplectic ``phi`` is supplied, the diagnostics report
    the upper bound (r_n^2 / 2) t(phi Psi phi^{-1}).
    """
    S = np.asarray(S, dtype=float)
    if np.max(np.abs(S - S.T)) > 1e-10 or np.linalg.eigvalsh(S)[0] <= 0:
        raise ValueError("S must be symmetric positive definite")
    sig = _first_return_sigma(psi, S)

    lam_min = np.linalg.eigvalsh(S)[0]
    T_cap = 2.0 * np.pi / lam_min * safety
    total = int(grid_size * safety)
    grid = T_cap * np.arange(1, total + 1) / total
    sv = sig(grid)

    spacing = T_cap / total
    # slope of sigma_min in T is bounded by |J S| = |S|
    slope = np.linalg.eigvalsh(S)[-1]
    coarse = max(1e-4, 2.0 * spacing * slope)

    # T = 0 is excluded; when Psi has eigenvalue 1 the singularity of
    # exp(0) - Psi leaks into the left edge and must be rejected.
    zero_at_origin = float(
        np.linalg.svd(np.eye(psi.dim) - psi.psi, compute_uv=False)[-1]
    ) <= 10 * accept_tol
    origin_floor = spacing

    best_T = None
    for i in range(total):
        if sv[i] > coarse:
            continue
        left = sv[i - 1] if i > 0 else np.inf
        right = sv[i + 1] if i < total - 1 else np.inf
        if sv[i] <= left and sv[i] <= right:
            a = grid[i - 1] if i > 0 else 1e-12
            b = grid[i + 1] if i < total - 1 else T_cap

            def f(T: float) -> float:
                return float(sig(T)[0])

            T_star = _golden_min(f, a, b, 1e-12 * max(T_cap, 1.0))
            if f(T_star) <= accept_tol and not (zero_at_origin and T_star < origin_floor):
                best_T = T_star
                break
    if best_T is None:
        raise NoZeroFound("no singular time of exp(T J S) - Psi in (0, T_cap]")

    diag = {"T_cap": T_cap, "residual": float(sig(best_T)[0])}
    if phi is not None:
        Sp = np.linalg.inv(phi.psi).T @ S @ np.linalg.inv(phi.psi)
        r_n = float(np.sqrt(2.0 / np.linalg.eigvalsh(Sp)[0]))
        conj = make_symplectic(phi.psi @ psi.psi @ np.linalg.inv(phi.psi), 1e-7)
        diag["upper_bound"] = 0.5 * r_n**2 * t_psi(conj)
    return CapacityResult(float(best_T), "root_find", diagnostics=diag)


def capacity_product(
    pairs: list[tuple[SymplecticMap, object]],
    cap_fn: Optional[Callable] = None,
    boundary: bool = False,
) -> CapacityResult:
    """min_i cap_fn(Psi_i, D_i) over symplectic-block product factors.

    The boundary-product variant (partial boundaries of every factor) has
    the same value, so ``boundary`` only tags the diagnostics.  Ties break
    toward the lowest index; every argmin index is reported.
    """
    if cap_fn is None:
        cap_fn = _default_cap_fn
    results = [cap_fn(psi_i, D_i) for psi_i, D_i in pairs]
    values = np.array([r.value for r in results])
    best = int(np.argmin(values))
    argmins = [int(i) for i in np.flatnonzero(values <= values[best] * (1 + 1e-12))]
    return CapacityResult(
        float(values[best]),
        results[best].method,
        diagnostics={
            "argmin": best,
            "argmin_indices": argmins,
            "factor_values": values.tolist(),
            "boundary_variant": boundary,
        },
    )


def _default_cap_fn(psi: SymplecticMap, D) -> CapacityResult:
    from .bodies import Ball, Ellipsoid, Scaled
    if isinstance(D, Ball) and np.allclose(D.center, 0.0):
        return capacity_ball(psi, D.radius)
    if isinstance(D, Scaled) and isinstance(D.body, Ball) and np.allclose(D.body.center, 0.0):
        return capacity_ball(psi, D.alpha * D.body.radius)
    if isinstance(D, Ellipsoid):
        return capacity_ellipsoid(psi, D.S)
    from .dualsolver import minimize_capacity
    return minimize_capacity(psi, D)


def capacity_orth_cylinder(psi: SymplecticMap, tol_orth: float = 1e-9) -> CapacityResult:
    """Cylinder-type capacity t(Psi)/2 for orthogonal symplectic Psi."""
    defect = float(np.max(np.abs(psi.psi.T @ psi.psi - np.eye(psi.dim))))
    if defect > tol_orth:
        raise NotOrthogonal(f"|Psi^t Psi - I|_inf = {defect:.3e} > {tol_orth:.1e}")
    t = t_psi(psi)
    return CapacityResult(0.5 * t, "closed_form", diagnostics={"t_psi": t})
