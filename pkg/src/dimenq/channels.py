"""Channels in Kraus and Choi form, and the channel dimension measure.

Choi matrices are trace-one states (𝟙 ⊗ E)(|Φ⁺⟩⟨Φ⁺|) with the input copy
as the first tensor factor.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import linalg as la
from .conic import MeasureResult, SdpProblem, solve_or_raise
from .states import separable_below

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1.0, -1.0]).astype(complex),
}


@dataclass(frozen=True)
class Channel:
    d_in: int
    d_out: int
    kraus: tuple

    def __post_init__(self):
        ks = tuple(la.as_matrix(k) for k in self.kraus)
        if not ks:
            raise ValueError("a channel needs at least one Kraus operator")
        for i, k in enumerate(ks):
            if k.shape != (self.d_out, self.d_in):
                raise ValueError(f"Kraus operator {i} has shape {k.shape}, expected {(self.d_out, self.d_in)}")
        tp = sum(k.conj().T @ k for k in ks)
        err = np.abs(tp - np.eye(self.d_in)).max()
        if err > 1e-9:
            raise ValueError(f"Kraus operators are not trace preserving: residual {err:.3g}")
        object.__setattr__(self, "kraus", ks)

    def __call__(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        return sum(k @ rho @ k.conj().T for k in self.kraus)

    def then(self, other: "Channel") -> "Channel":
        """Composite channel: apply ``self`` first, then ``other``."""
        if other.d_in != self.d_out:
            raise ValueError("dimension mismatch in composition")
        return Channel(self.d_in, other.d_out, tuple(b @ a for b in other.kraus for a in self.kraus))


@dataclass(frozen=True)
class ChoiMatrix:
    d_in: int
    d_out: int
    operator: np.ndarray

    def __post_init__(self):
        op = la.hermitian(self.operator)
        n = self.d_in * self.d_out
        if op.shape != (n, n):
            raise ValueError(f"Choi matrix of shape {op.shape} does not match {self.d_in}x{self.d_out}")
        lo = la.min_eig(op)
        if lo < -1e-9:
            raise ValueError(f"Choi matrix is not positive: min eigenvalue {lo:.3g}")
        marg = la.partial_trace(op, (self.d_in, self.d_out), "B")
        err = np.abs(marg - np.eye(self.d_in) / self.d_in).max()
        if err > 1e-8:
            raise ValueError(f"Choi matrix is not trace preserving: Tr_B residual {err:.3g}")
        object.__setattr__(self, "operator", op)


def mix(channels, weights) -> Channel:
    """Convex combination of channels with equal dimensions."""
    weights = np.asarray(weights, dtype=float)
    ks = [np.sqrt(w) * k for w, ch in zip(weights, channels) if w > 0 for k in ch.kraus]
    first = channels[0]
    return Channel(first.d_in, first.d_out, tuple(ks))


def unitary_channel(u) -> Channel:
    u = la.as_matrix(u)
    return Channel(u.shape[1], u.shape[0], (u,))


def choi_of(ch: Channel) -> ChoiMatrix:
    # (𝟙 ⊗ K)|Φ⁺⟩ reshaped as (d_in, d_out) is Kᵀ/√d_in
    vecs = [k.T.ravel() / np.sqrt(ch.d_in) for k in ch.kraus]
    op = sum(np.outer(v, v.conj()) for v in vecs)
    return ChoiMatrix(ch.d_in, ch.d_out, op)


def kraus_from_choi(choi: ChoiMatrix, cutoff: float = 1e-12) -> Channel:
    """Canonical Kraus family from the eigendecomposition of the Choi matrix.

    Eigenpair (μ_i, v_i) gives K_i = √(d μ_i) V_iᵀ with V_i the eigenvector
    reshaped to (d_in, d_out); its weight is μ_i = Tr(K_i†K_i)/d_in.
    """
    w, v = la.eigh(choi.operator)
    keep = w > cutoff
    ks = []
    for mu, vec in zip(w[keep][::-1], v[:, keep].T[::-1]):
        ks.append(np.sqrt(choi.d_in * mu) * vec.reshape(choi.d_in, choi.d_out).T)
    kraus = tuple(ks)
    # repair the tiny trace-preservation drift from dropping the cutoff eigenvalues
    tp = sum(k.conj().T @ k for k in kraus)
    if np.abs(tp - np.eye(choi.d_in)).max() > 1e-9:
        fix = la.psd_sqrt(tp, pinv=True)
        kraus = tuple(k @ fix for k in kraus)
    return Channel(choi.d_in, choi.d_out, kraus)


def kraus_weights(ch: Channel) -> np.ndarray:
    return np.array([np.trace(k.conj().T @ k).real / ch.d_in for k in ch.kraus])


def _check_param(p):
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"channel parameter must be in [0, 1], got {p}")


def named_channel(family: str, param: float = 0.0) -> Channel:
    """depolarizing, amplitude_damping, erasure, identity or dephasing.

    - depolarizing(p): ρ ↦ (1 − p)ρ + p𝟙/2
    - amplitude_damping(γ): |1⟩ ↦ √γ|0⟩ + √(1−γ)|1⟩
    - erasure(q): ρ ↦ (1 − q)ρ ⊕ q|2⟩⟨2| on a qutrit output
    - dephasing(p): ρ ↦ (1 − p)ρ + p·diag(ρ)
    """
    fam = family.replace("-", "_")
    if fam == "identity":
        return Channel(2, 2, (PAULI["I"],))
    _check_param(param)
    p = float(param)
    if fam == "depolarizing":
        ks = [np.sqrt(1 - 3 * p / 4) * PAULI["I"]] + [np.sqrt(p / 4) * PAULI[s] for s in "XYZ"]
        return Channel(2, 2, tuple(ks))
    if fam == "amplitude_damping":
        k0 = np.diag([1.0, np.sqrt(1 - p)]).astype(complex)
        k1 = np.array([[0, np.sqrt(p)], [0, 0]], dtype=complex)
        return Channel(2, 2, (k0, k1))
    if fam == "erasure":
        keep = np.sqrt(1 - p) * np.eye(3, 2, dtype=complex)
        e0 = np.zeros((3, 2), dtype=complex)
        e0[2, 0] = np.sqrt(p)
        e1 = np.zeros((3, 2), dtype=complex)
        e1[2, 1] = np.sqrt(p)
        return Channel(2, 3, (keep, e0, e1))
    if fam == "dephasing":
        return Channel(2, 2, (np.sqrt(1 - p / 2) * PAULI["I"], np.sqrt(p / 2) * PAULI["Z"]))
    raise ValueError(f"unknown channel family {family!r}")


def _in_regime(d_in, d_out) -> bool:
    return d_in * d_out <= 6 and min(d_in, d_out) == 2


def is_entanglement_breaking(ch: Channel) -> bool:
    """PPT test on the Choi matrix; exact when d_in·d_out ≤ 6.

    Outside that regime only the negative answer is conclusive and a
    warning says so.
    """
    c = choi_of(ch)
    ppt = la.min_eig(la.partial_transpose(c.operator, (c.d_in, c.d_out))) >= -1e-9
    if not _in_regime(ch.d_in, ch.d_out) and ppt:
        warnings.warn("PPT Choi matrix outside 2x2/2x3: entanglement breaking not certified", stacklevel=2)
    return bool(ppt)


def dimension_measure(ch: Channel | ChoiMatrix, gap_tol: float = 1e-7, feas_tol: float = 1e-8) -> MeasureResult:
    """Dimension measure (bits) of a channel with d_in·d_out ≤ 6.

    min α  s.t.  χ − σ ⪰ 0,  σ ⪰ 0,  σ^{T_A} ⪰ 0,  (α − 1)𝟙 + d_in Tr_B σ ⪰ 0.
    """
    choi = ch if isinstance(ch, ChoiMatrix) else choi_of(ch)
    d_in, d_out = choi.d_in, choi.d_out
    if not _in_regime(d_in, d_out):
        raise ValueError(f"channel dimension measure needs d_in*d_out <= 6 with a qubit side, got {d_in}->{d_out}")
    dims = (d_in, d_out)
    prob = SdpProblem()
    sigma, supp, read = separable_below(prob, choi.operator, dims)
    alpha = prob.scalar("alpha")
    prob.add_psd(choi.operator - sigma, "below_choi", support=supp)
    marg = sigma.map(lambda a: la.partial_trace(a, dims, "B"))
    prob.add_psd(alpha * np.eye(d_in) - np.eye(d_in) + d_in * marg, "closure")
    prob.minimize(alpha)
    sol = solve_or_raise(prob, gap_tol, feas_tol)
    value = float(np.clip(sol.primal_value, 0.0, 1.0))
    return MeasureResult(value, {"sigma": read(sol), "alpha": sol["alpha"]}, sol, prob)
