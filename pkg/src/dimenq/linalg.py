"""Dense complex linear algebra used by every other module.

Matrices are plain ``numpy`` arrays. Bipartite operators use the ordering
``A ⊗ B`` with ``dims = (dA, dB)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

RANK_TOL = 1e-8


class EigenError(ArithmeticError):
    """Raised when the Hermitian eigensolver fails to converge."""


def as_matrix(a) -> np.ndarray:
    """Return ``a`` as a finite complex 2-d array."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def hermitian(a) -> np.ndarray:
    """Symmetrize ``a`` to ``(a + a^†)/2``."""
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"Hermitian operator must be square, got {m.shape}")
    return 0.5 * (m + m.conj().T)


def dag(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(np.conj(a), -1, -2)


def tensor(*mats) -> np.ndarray:
    """Kronecker product of the arguments, left to right."""
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, np.asarray(m, dtype=complex))
    return out


def _check_dims(h: np.ndarray, dims) -> tuple[int, int]:
    da, db = int(dims[0]), int(dims[1])
    if h.shape[-1] != da * db or h.shape[-2] != da * db:
        raise ValueError(f"operator of size {h.shape[-2:]} does not match dims {da}x{db}")
    return da, db


def partial_trace(h, dims, side: str = "B") -> np.ndarray:
    """Trace out subsystem ``side`` ("A" or "B") of a bipartite operator.

    Works on a single matrix or a stack ``(..., n, n)``.
    """
    h = np.asarray(h)
    da, db = _check_dims(h, dims)
    lead = h.shape[:-2]
    t = h.reshape(lead + (da, db, da, db))
    if side == "B":
        return np.einsum("...ajbj->...ab", t)
    if side == "A":
        return np.einsum("...iaib->...ab", t)
    raise ValueError(f"side must be 'A' or 'B', got {side!r}")


def partial_transpose(h, dims) -> np.ndarray:
    """Transpose the A factor of a bipartite operator (stack-aware)."""
    h = np.asarray(h)
    da, db = _check_dims(h, dims)
    lead = h.shape[:-2]
    t = h.reshape(lead + (da, db, da, db))
    t = np.swapaxes(t, -4, -2)
    return t.reshape(lead + (da * db, da * db))


def eigh(h) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix."""
    m = hermitian(h)
    try:
        w, v = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise EigenError(str(exc)) from exc
    return w, v


def eigvalsh(h) -> np.ndarray:
    return eigh(h)[0]


def min_eig(h) -> float:
    return float(eigvalsh(h)[0])


def numerical_rank(h, rel_tol: float = RANK_TOL) -> int:
    """Number of eigenvalues with ``|λ| > rel_tol * max(|λ_max|, 1)``."""
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    w = np.abs(eigvalsh(h))
    if w.size == 0:
        return 0
    return int(np.sum(w > rel_tol * max(w.max(), 1.0)))


def psd_sqrt(h, pinv: bool = False, cutoff: float = 1e-10) -> np.ndarray:
    """Square root (or pseudo-inverse square root) of a PSD matrix.

    Eigenvalues at or below ``cutoff`` are treated as kernel.
    """
    w, v = eigh(h)
    keep = w > cutoff
    if pinv:
        s = np.zeros_like(w)
        s[keep] = 1.0 / np.sqrt(w[keep])
    else:
        s = np.sqrt(np.clip(w, 0.0, None))
    return (v * s) @ v.conj().T


def ket(d: int, k: int) -> np.ndarray:
    v = np.zeros(d, dtype=complex)
    v[k] = 1.0
    return v


def proj(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).ravel()
    return np.outer(v, v.conj())


def max_entangled(d: int) -> np.ndarray:
    """|Φ⁺_d⟩ = Σ_i |ii⟩ / √d."""
    return np.eye(d, dtype=complex).ravel() / np.sqrt(d)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a Ginibre matrix."""
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (g + g.conj().T)


@dataclass(frozen=True)
class PureState:
    """Normalized bipartite pure state on ``dim_a ⊗ dim_b``."""

    dim_a: int
    dim_b: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex).ravel()
        if amp.size != self.dim_a * self.dim_b:
            raise ValueError(
                f"amplitude vector of length {amp.size} does not match {self.dim_a}x{self.dim_b}"
            )
        norm = float(np.vdot(amp, amp).real)
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"state is not normalized: norm^2 = {norm!r}")
        object.__setattr__(self, "amplitudes", amp)

    @classmethod
    def from_vector(cls, v, dims) -> "PureState":
        v = np.asarray(v, dtype=complex).ravel()
        return cls(int(dims[0]), int(dims[1]), v / np.linalg.norm(v))

    def density(self) -> np.ndarray:
        return proj(self.amplitudes)


def schmidt_decompose(psi: PureState, rel_tol: float = RANK_TOL):
    """Schmidt coefficients (descending) and the left/right bases as columns.

    Goes through the reduced state on A rather than an SVD, so only the
    Hermitian eigensolver is needed.
    """
    c = psi.amplitudes.reshape(psi.dim_a, psi.dim_b)
    rho_a = c @ c.conj().T
    w, v = eigh(rho_a)
    order = np.argsort(w)[::-1]
    w, v = w[order], v[:, order]
    keep = w > rel_tol * max(w[0], 1.0) if w.size else w > 0
    lam = np.sqrt(w[keep])
    left = v[:, keep]
    # f_i = (e_i^† ⊗ 1)|ψ⟩ / λ_i
    right = (left.conj().T @ c).T / lam
    return lam, left, right


def support(h, rel_tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (as columns) of the range of a PSD matrix."""
    w, v = eigh(h)
    scale = max(np.abs(w).max(initial=0.0), 1.0)
    return v[:, w > rel_tol * scale]


def support_intersection(mats, rel_tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis of the intersection of the ranges of PSD matrices."""
    mats = list(mats)
    n = np.asarray(mats[0]).shape[0]
    outside = np.zeros((n, n), dtype=complex)
    for m in mats:
        s = support(m, rel_tol)
        outside += np.eye(n) - s @ s.conj().T
    w, v = eigh(outside)
    return v[:, w < 1e-8]


def product_vectors_in_span(basis, dims, tol: float = 1e-9):
    """Product vectors a ⊗ b lying in the column span of ``basis``, for 2 ⊗ n.

    Returns a list of normalized vectors when the span holds finitely many
    product directions (possibly none), or None when it holds a continuous
    family. Writing a = (a₀, a₁), the condition Q†(a ⊗ b) = 0 for the
    orthogonal complement Q is the linear pencil (a₀B₀ + a₁B₁) b = 0, so
    the candidates are its generalized eigenvalues.
    """
    basis = np.asarray(basis, dtype=complex)
    da, db = int(dims[0]), int(dims[1])
    if min(da, db) == 1:
        return None
    if min(da, db) != 2:
        raise ValueError(f"product vector search needs a 2 x n split, got {da}x{db}")
    swap = da != 2
    if swap:
        # reorder to C^2 ⊗ C^n
        basis = basis.reshape(da, db, -1).transpose(1, 0, 2).reshape(da * db, -1)
        da, db = db, da
    n = db
    proj_s = basis @ basis.conj().T
    w, v = eigh(np.eye(2 * n) - proj_s)
    Q = v[:, w > 0.5]
    q = Q.shape[1]
    if q < n:
        return None
    B0 = Q[:n].conj().T  # Q†(e₀ ⊗ 𝟙)
    B1 = Q[n:].conj().T
    scale = max(np.linalg.norm(B0), np.linalg.norm(B1), 1.0)

    def kernel(a):
        m = a[0] * B0 + a[1] * B1
        _, s, vh = np.linalg.svd(m)
        return s[-1], vh[-1].conj(), (s[-2] if n > 1 else np.inf)

    # a pencil that drops rank everywhere means a continuous family
    probe = np.random.default_rng(0).normal(size=(3, 2)) @ np.array([1, 1j])
    if all(kernel(np.array([1.0, p]))[0] <= tol * scale for p in probe):
        return None
    # square down with a fixed random mix, then verify each candidate on the full pencil
    R = np.random.default_rng(1).normal(size=(n, q)) if q > n else np.eye(n)
    lam = sla.eigvals(R @ B0, -(R @ B1))
    cands = [np.array([1.0, l]) if np.isfinite(l) and abs(l) < 1e8 else np.array([0.0, 1.0]) for l in lam]
    found = []
    for a in cands:
        a = a / np.linalg.norm(a)
        smin, b, snext = kernel(a)
        if smin > tol * scale:
            continue
        if snext <= tol * scale:
            return None  # a whole product subspace a ⊗ (2-dim)
        vec = np.kron(a, b)
        if swap:
            vec = vec.reshape(2, n).T.ravel()
        if all(abs(np.vdot(f, vec)) < 1 - 1e-8 for f in found):
            found.append(vec / np.linalg.norm(vec))
    return found
