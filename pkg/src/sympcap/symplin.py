"""Symplectic linear algebra over R^{2n}.

Validated symplectic matrices, the standard complex structure J, matrix
exponentials, fixed subspaces and the interleaved direct sum of symplectic
blocks.  Everything here is a pure function of its inputs; all returned
objects are immutable and safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NotSymplectic, SingularMatrix


def standard_J(n: int) -> np.ndarray:
    """Block matrix [[0, -I_n], [I_n, 0]] on R^{2n}."""
    if n < 1:
        raise ValueError("half-dimension must be >= 1")
    J = np.zeros((2 * n, 2 * n))
    J[:n, n:] = -np.eye(n)
    J[n:, :n] = np.eye(n)
    return J


def expm(M: np.ndarray) -> np.ndarray:
    """General matrix exponential (scaling-and-squaring with Pade core)."""
    return scipy.linalg.expm(np.asarray(M, dtype=float))


def exp_sJ(s: float, n: int) -> np.ndarray:
    """Closed form of exp(sJ): block rotation by the angle s.

    Returns [[cos(s) I, -sin(s) I], [sin(s) I, cos(s) I]].
    """
    c, si = np.cos(s), np.sin(s)
    E = np.zeros((2 * n, 2 * n))
    E[:n, :n] = c * np.eye(n)
    E[n:, n:] = c * np.eye(n)
    E[:n, n:] = -si * np.eye(n)
    E[n:, :n] = si * np.eye(n)
    return E


def exp_sJ_batch(s: np.ndarray, n: int) -> np.ndarray:
    """exp(sJ) for an array of angles; shape (len(s), 2n, 2n)."""
    s = np.asarray(s, dtype=float)
    c, si = np.cos(s), np.sin(s)
    out = np.zeros(s.shape + (2 * n, 2 * n))
    idx = np.arange(n)
    out[..., idx, idx] = c[..., None]
    out[..., n + idx, n + idx] = c[..., None]
    out[..., idx, n + idx] = -si[..., None]
    out[..., n + idx, idx] = si[..., None]
    return out


@dataclass(frozen=True, eq=False)
class SymplecticMap:
    """A validated 2n x 2n symplectic matrix with its half-dimension."""

    n: int
    psi: np.ndarray
    tol_sympl: float = 1e-9

    @property
    def dim(self) -> int:
        return 2 * self.n

    @property
    def J(self) -> np.ndarray:
        return standard_J(self.n)

    def inverse(self) -> "SymplecticMap":
        # Psi^{-1} = -J Psi^t J, exact for symplectic matrices.
        J = self.J
        return SymplecticMap(self.n, -J @ self.psi.T @ J, self.tol_sympl)

    def is_orthogonal(self, tol: float = 1e-9) -> bool:
        return bool(
            np.max(np.abs(self.psi.T @ self.psi - np.eye(self.dim))) <= tol
        )

    def key(self) -> bytes:
        """Stable hashable identity of the underlying matrix."""
        return self.psi.tobytes()


def make_symplectic(M: np.ndarray, tol: float = 1e-9) -> SymplecticMap:
    """Validate M against Psi^t J Psi = J and det = 1.

    Raises NotSymplectic when the max-norm defect exceeds ``tol``.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] % 2 != 0:
        raise NotSymplectic(f"matrix must be square of even order, got {M.shape}")
    n = M.shape[0] // 2
    J = standard_J(n)
    defect = np.max(np.abs(M.T @ J @ M - J))
    if defect > tol:
        raise NotSymplectic(f"|Psi^t J Psi - J|_inf = {defect:.3e} > {tol:.1e}")
    det = np.linalg.det(M)
    if abs(det - 1.0) > 100 * tol:
        raise NotSymplectic(f"det Psi = {det:.12f} differs from 1")
    M = M.copy()
    M.setflags(write=False)
    return SymplecticMap(n, M, tol)


@dataclass(frozen=True, eq=False)
class FixedSpace:
    """Orthonormal bases of E1 = ker(Psi - I) and its orthogonal complement."""

    basis_fix: np.ndarray    # (2n, rank_fix)
    basis_perp: np.ndarray   # (2n, 2n - rank_fix)
    rank_fix: int

    def project_fix(self, v: np.ndarray) -> np.ndarray:
        """Orthogonal projection of v onto E1 (zero vector if E1 = {0})."""
        if self.rank_fix == 0:
            return np.zeros_like(np.asarray(v, dtype=float))
        B = self.basis_fix
        return B @ (B.T @ np.asarray(v, dtype=float))


def fixed_space(psi: SymplecticMap, tol_rank: float = 1e-8) -> FixedSpace:
    """Split R^{2n} into ker(Psi - I) and its complement via SVD thresholding.

    The kernel threshold is relative: sigma <= tol_rank * max(sigma_max, 1).
    """
    A = psi.psi - np.eye(psi.dim)
    _, s, Vt = np.linalg.svd(A)
    thresh = tol_rank * max(s[0] if s.size else 0.0, 1.0)
    kernel_mask = s <= thresh
    basis_fix = Vt[kernel_mask].T
    basis_perp = Vt[~kernel_mask].T
    return FixedSpace(basis_fix, basis_perp, int(kernel_mask.sum()))


def oplus(psi1: SymplecticMap, psi2: SymplecticMap) -> SymplecticMap:
    """Interleaved direct sum: q-blocks first, then p-blocks.

    For S_i = [[A_i, B_i], [C_i, D_i]] the result is
    [[A1, 0, B1, 0], [0, A2, 0, B2], [C1, 0, D1, 0], [0, C2, 0, D2]].
    """
    n1, n2 = psi1.n, psi2.n
    P = theta_permutation(n1, n2)
    block = np.zeros((2 * (n1 + n2), 2 * (n1 + n2)))
    block[: 2 * n1, : 2 * n1] = psi1.psi
    block[2 * n1 :, 2 * n1 :] = psi2.psi
    M = P.T @ block @ P
    return make_symplectic(M, max(psi1.tol_sympl, psi2.tol_sympl))


def theta_permutation(n1: int, n2: int) -> np.ndarray:
    """Permutation Theta splitting (q; p) coordinates into two symplectic blocks.

    Theta maps (q_1..q_n, p_1..p_n) to (q_1..q_{n1}, p_1..p_{n1},
    q_{n1+1}..q_n, p_{n1+1}..p_n).  Orthogonal, and conjugates the
    interleaved direct sum into a plain block diagonal.
    """
    n = n1 + n2
    P = np.zeros((2 * n, 2 * n))
    for i in range(n1):
        P[i, i] = 1.0               # q_i of block 1
        P[n1 + i, n + i] = 1.0      # p_i of block 1
    for i in range(n2):
        P[2 * n1 + i, n1 + i] = 1.0         # q_{n1+i} of block 2
        P[2 * n1 + n2 + i, n + n1 + i] = 1.0  # p_{n1+i} of block 2
    return P


def psi_A(A: np.ndarray, tol: float = 1e-9) -> SymplecticMap:
    """Symplectic lift diag(A, (A^t)^{-1}) of an invertible n x n matrix."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise SingularMatrix(f"matrix must be square, got {A.shape}")
    n = A.shape[0]
    if abs(np.linalg.det(A)) < 1e-12:
        raise SingularMatrix("matrix is numerically singular")
    M = np.zeros((2 * n, 2 * n))
    M[:n, :n] = A
    M[n:, n:] = np.linalg.inv(A.T)
    return make_symplectic(M, tol)


def rotation2(theta: float) -> SymplecticMap:
    """The rotation R(theta) in Sp(2)."""
    c, s = np.cos(theta), np.sin(theta)
    return make_symplectic(np.array([[c, -s], [s, c]]))


def random_symplectic(n: int, rng: np.random.Generator, scale: float = 0.5) -> SymplecticMap:
    """Random symplectic matrix exp(J S) with S symmetric of moderate norm."""
    B = rng.standard_normal((2 * n, 2 * n))
    S = scale * (B + B.T) / 2.0
    return make_symplectic(expm(standard_J(n) @ S), 1e-8)


def random_orthogonal_symplectic(n: int, rng: np.random.Generator):
    """Random orthogonal symplectic matrix built from a Haar-ish unitary.

    Returns (map, phases) where phases are the eigenvalue angles of the
    underlying unitary in (0, 2pi], sorted ascending.
    """
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    Q = Q @ np.diag(np.diag(R) / np.abs(np.diag(R)))
    U, V = Q.real, Q.imag
    M = np.zeros((2 * n, 2 * n))
    M[:n, :n] = U
    M[:n, n:] = -V
    M[n:, :n] = V
    M[n:, n:] = U
    ev = np.linalg.eigvals(Q)
    phases = np.angle(ev)
    phases = np.where(phases <= 1e-14, phases + 2 * np.pi, phases)
    return make_symplectic(M, 1e-8), np.sort(phases)
