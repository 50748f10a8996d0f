"""Zeros of det(Psi - e^{sJ}), the minimal time t(Psi), and the eigenbasis.

The boundary condition x(1) = Psi x(0) turns -J d/dt into a self-adjoint
operator whose eigenvalues form the lattice {t_l + 2 k pi} over the zeros
t_l of s -> det(Psi - e^{sJ}) in (0, 2pi].  Eigenfunctions have the closed
form e(t) = exp(lambda t J) X with X in ker(e^{t_l J} - Psi), so a truncated
basis is assembled from kernel seeds and evaluated exactly.

Zeros can be tangential (the determinant is >= 0 for orthogonal Psi), so
they are found as near-zero minima of the smallest singular value of
Psi - e^{sJ}, not by sign-change bracketing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NoZeroFound, SingularMatrix
from .symplin import SymplecticMap, exp_sJ, exp_sJ_batch, standard_J

TWO_PI = 2.0 * np.pi

# Zero detection constants; grid density and thresholds are chosen so that
# tangential zeros on a 2pi period are caught and refined to ~1e-12.
# sigma_min(Psi - e^{sJ}) is 1-Lipschitz in s, so a true zero shows up on the
# grid as a dip no larger than half the grid spacing; the coarse threshold
# must dominate that.
GRID_SIZE = 4096
COARSE_TOL = max(1e-4, 2.0 * TWO_PI / GRID_SIZE)
ACCEPT_TOL = 1e-9
MERGE_TOL = 1e-6
BRACKET_WIDTH = 1e-12
MULT_THRESH = 1e-6

DEFAULT_PERIODS = 32


def g_psi(psi: SymplecticMap, s) -> np.ndarray | float:
    """det(Psi - exp(sJ)); accepts a scalar or an array of times."""
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    mats = psi.psi - exp_sJ_batch(s_arr, psi.n)
    vals = np.linalg.det(mats)
    return float(vals[0]) if np.isscalar(s) or np.ndim(s) == 0 else vals


def sigma_min(psi: SymplecticMap, s) -> np.ndarray | float:
    """Smallest singular value of Psi - exp(sJ); batched over s."""
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    mats = psi.psi - exp_sJ_batch(s_arr, psi.n)
    sv = np.linalg.svd(mats, compute_uv=False)[..., -1]
    return float(sv[0]) if np.isscalar(s) or np.ndim(s) == 0 else sv


def _golden_min(f, a: float, b: float, xatol: float) -> float:
    """Golden-section minimizer of f on [a, b] down to bracket width xatol."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > xatol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


@dataclass(frozen=True, eq=False)
class ZeroSet:
    """Sorted zeros of det(Psi - e^{sJ}) in (0, 2pi] with kernel dimensions."""

    zeros: np.ndarray           # (m,), strictly increasing
    multiplicities: np.ndarray  # (m,), kernel dims dim ker(e^{t J} - Psi)
    residuals: np.ndarray       # (m,), refined sigma_min at each zero


def zeros_in_period(
    psi: SymplecticMap,
    grid_size: int = GRID_SIZE,
    coarse_tol: float | None = None,
    accept_tol: float = ACCEPT_TOL,
    merge_tol: float = MERGE_TOL,
) -> ZeroSet:
    """All s in (0, 2pi] with det(Psi - e^{sJ}) = 0.

    Scans sigma_min(Psi - e^{sJ}) on a uniform grid, refines each candidate
    local minimum by golden section, accepts refined values <= accept_tol and
    merges zeros closer than merge_tol.  Raises NoZeroFound if nothing is
    accepted (existence is guaranteed for symplectic Psi, so this signals a
    numerical failure).
    """
    if coarse_tol is None:
        coarse_tol = max(1e-4, 2.0 * TWO_PI / grid_size)
    grid = TWO_PI * np.arange(1, grid_size + 1) / grid_size
    sv = sigma_min(psi, grid)

    # The domain is open at 0.  When Psi has eigenvalue 1 the zero at s = 0
    # shows up as a dip at the left edge; candidates collapsing onto the
    # origin must be discarded (the period representative is s = 2pi).
    zero_at_origin = float(np.linalg.svd(psi.psi - np.eye(psi.dim), compute_uv=False)[-1]) <= 10 * accept_tol
    origin_floor = 1e-5

    def f(s: float) -> float:
        return sigma_min(psi, s)

    candidates = []
    for i in range(grid_size):
        if sv[i] > coarse_tol:
            continue
        left = sv[i - 1] if i > 0 else np.inf
        right = sv[i + 1] if i < grid_size - 1 else np.inf
        if sv[i] <= left and sv[i] <= right:
            a = grid[i - 1] if i > 0 else grid[0] - TWO_PI / grid_size
            b = grid[i + 1] if i < grid_size - 1 else TWO_PI
            candidates.append((max(a, 1e-12), min(b, TWO_PI)))
    # The right endpoint 2pi can be a boundary minimum (e.g. Psi = I).
    if sv[-1] <= coarse_tol and sv[-1] < sv[-2]:
        candidates.append((grid[-2], TWO_PI))

    refined = []
    for a, b in candidates:
        s_star = _golden_min(f, a, b, BRACKET_WIDTH)
        val = f(s_star)
        # keep the endpoint itself when it beats the interior refinement
        if f(b) < val:
            s_star, val = b, f(b)
        if val <= accept_tol and not (zero_at_origin and s_star < origin_floor):
            refined.append((s_star, val))

    if not refined:
        raise NoZeroFound("no zero of det(Psi - e^{sJ}) detected in (0, 2pi]")

    refined.sort()
    merged: list[tuple[float, float]] = []
    for s_star, val in refined:
        if merged and abs(s_star - merged[-1][0]) < merge_tol:
            if val < merged[-1][1]:
                merged[-1] = (s_star, val)
            continue
        merged.append((s_star, val))

    zeros = np.array([s for s, _ in merged])
    residuals = np.array([v for _, v in merged])
    mults = np.array([kernel_dim(psi, s) for s in zeros], dtype=int)
    return ZeroSet(zeros, mults, residuals)


def kernel_dim(psi: SymplecticMap, s: float, thresh: float = MULT_THRESH) -> int:
    """dim ker(e^{sJ} - Psi) by singular-value thresholding."""
    sv = np.linalg.svd(psi.psi - exp_sJ(s, psi.n), compute_uv=False)
    return int(np.sum(sv <= thresh * max(sv[0], 1.0)))


def kernel_basis(psi: SymplecticMap, s: float, thresh: float = MULT_THRESH) -> np.ndarray:
    """Orthonormal basis (columns) of ker(e^{sJ} - Psi)."""
    _, sv, Vt = np.linalg.svd(psi.psi - exp_sJ(s, psi.n))
    mask = sv <= thresh * max(sv[0], 1.0)
    return Vt[mask].T


def t_psi(psi: SymplecticMap) -> float:
    """Smallest zero of det(Psi - e^{sJ}) in (0, 2pi]."""
    return float(zeros_in_period(psi).zeros[0])


def g_psi_A(A: np.ndarray, s) -> np.ndarray | float:
    """det(I + (A^t)^{-1} A - cos(s) (A + (A^t)^{-1})) for invertible A.

    For orthogonal A this equals |det(A - e^{-i s} I)|^2, so its zeros in
    (0, 2pi] are exactly the zeros of det(Psi_A - e^{sJ}).
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if abs(np.linalg.det(A)) < 1e-12:
        raise SingularMatrix("matrix is numerically singular")
    Ait = np.linalg.inv(A.T)
    base = np.eye(n) + Ait @ A
    slope = A + Ait
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    vals = np.linalg.det(base[None, :, :] - np.cos(s_arr)[:, None, None] * slope[None, :, :])
    return float(vals[0]) if np.isscalar(s) or np.ndim(s) == 0 else vals


@dataclass(frozen=True, eq=False)
class EigenBasis:
    """Truncated eigenbasis of -J d/dt under x(1) = Psi x(0).

    Each mode k has eigenvalue lambdas[k] = t_l + 2 pi k' and a unit seed
    X = seeds[k] in ker(e^{t_l J} - Psi); the eigenfunction is
    e_k(t) = exp(lambdas[k] t J) X = cos(lambda t) X + sin(lambda t) (J X),
    pointwise of unit norm.  Seeds sharing an eigenvalue are orthonormal,
    so the family is L2-orthonormal.  The zero eigenvalue (constants in
    ker(Psi - I)) is excluded; it lives in FixedSpace.
    """

    psi: SymplecticMap
    lambdas: np.ndarray   # (K,)
    seeds: np.ndarray     # (K, 2n)
    zero_set: ZeroSet = field(repr=False)
    lambda_max: float = 0.0

    @property
    def size(self) -> int:
        return int(self.lambdas.size)

    def evaluate(self, ts: np.ndarray) -> np.ndarray:
        """Eigenfunction table e_k(t); shape (len(ts), K, 2n)."""
        ts = np.asarray(ts, dtype=float)
        J = standard_J(self.psi.n)
        JX = self.seeds @ J.T          # rows J X_k
        phase = np.outer(ts, self.lambdas)        # (T, K)
        return (
            np.cos(phase)[:, :, None] * self.seeds[None, :, :]
            + np.sin(phase)[:, :, None] * JX[None, :, :]
        )

    def curve(self, coeffs: np.ndarray, ts: np.ndarray) -> np.ndarray:
        """x(t) = sum_k coeffs_k e_k(t); shape (len(ts), 2n)."""
        table = self.evaluate(ts)
        return np.tensordot(table, np.asarray(coeffs, dtype=float), axes=([1], [0]))


def eigenbasis(
    psi: SymplecticMap,
    lambda_max: float | None = None,
    zero_set: ZeroSet | None = None,
) -> EigenBasis:
    """All modes with |t_l + 2 k pi| <= lambda_max, sorted by eigenvalue.

    The default lambda_max covers DEFAULT_PERIODS lattice periods per zero
    family.  Zero eigenvalues are skipped (handled by FixedSpace).
    """
    if lambda_max is None:
        lambda_max = TWO_PI * (DEFAULT_PERIODS + 1)
    zs = zero_set if zero_set is not None else zeros_in_period(psi)

    lambdas: list[float] = []
    seeds: list[np.ndarray] = []
    for t_l in zs.zeros:
        basis = kernel_basis(psi, t_l)
        if basis.shape[1] == 0:
            continue
        k_min = int(np.ceil((-lambda_max - t_l) / TWO_PI))
        k_max = int(np.floor((lambda_max - t_l) / TWO_PI))
        for k in range(k_min, k_max + 1):
            lam = t_l + TWO_PI * k
            if abs(lam) < 1e-12:
                continue
            for col in range(basis.shape[1]):
                lambdas.append(lam)
                seeds.append(basis[:, col])

    order = np.lexsort((np.arange(len(lambdas)), np.asarray(lambdas)))
    lam_arr = np.asarray(lambdas, dtype=float)[order]
    seed_arr = np.asarray(seeds, dtype=float)[order]
    return EigenBasis(psi, lam_arr, seed_arr, zs, float(lambda_max))
