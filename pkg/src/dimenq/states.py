"""Bipartite states: Schmidt rank, PPT test and the 2⊗n Schmidt measure."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg as la
from .conic import Expr, MeasureResult, SdpProblem, solve_or_raise


@dataclass(frozen=True)
class DensityMatrix:
    dims: tuple[int, int]
    operator: np.ndarray

    def __post_init__(self):
        dims = (int(self.dims[0]), int(self.dims[1]))
        op = la.hermitian(self.operator)
        if op.shape[0] != dims[0] * dims[1]:
            raise ValueError(f"operator of size {op.shape[0]} does not match dims {dims[0]}x{dims[1]}")
        tr = np.trace(op).real
        if abs(tr - 1.0) > 1e-10:
            raise ValueError(f"density matrix trace is {tr!r}, expected 1")
        lo = la.min_eig(op)
        if lo < -1e-10:
            raise ValueError(f"density matrix has negative eigenvalue {lo:.3g}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "operator", op)


def werner(lam: float) -> DensityMatrix:
    """λ|Φ⁺⟩⟨Φ⁺| + (1 − λ)𝟙/4."""
    bell = la.proj(la.max_entangled(2))
    return DensityMatrix((2, 2), lam * bell + (1 - lam) * np.eye(4) / 4)


def product(rho_a, rho_b) -> DensityMatrix:
    rho_a, rho_b = np.asarray(rho_a), np.asarray(rho_b)
    return DensityMatrix((rho_a.shape[0], rho_b.shape[0]), la.tensor(rho_a, rho_b))


def is_ppt(rho: DensityMatrix, tol: float = 1e-9) -> bool:
    return la.min_eig(la.partial_transpose(rho.operator, rho.dims)) >= -tol


def schmidt_rank(psi: la.PureState, rel_tol: float = la.RANK_TOL) -> int:
    return len(la.schmidt_decompose(psi, rel_tol)[0])


def separable_below(prob: SdpProblem, op: np.ndarray, dims, name: str = "sigma"):
    """Declare σ ranging over the separable operators supported on supp(op).

    For 2 ⊗ n the separable cone is the PPT cone. When supp(op) holds only
    finitely many product directions p_i, that cone restricted to the support
    is spanned by the projectors onto them, so σ = Σ w_i |p_i⟩⟨p_i| with
    w_i ≥ 0. This keeps the problem strictly feasible where the PPT form has
    an empty interior. Returns the expression and a function reading σ
    from a solution.
    """
    n = op.shape[0]
    supp = la.support(op)
    gens = la.product_vectors_in_span(supp, dims)
    if gens is None:
        sigma = prob.hermitian(name, n, support=supp)
        prob.add_psd(sigma, f"{name}_psd", support=supp)
        prob.add_psd(sigma.map(lambda a: la.partial_transpose(a, dims)), f"{name}_ppt")
        return sigma, supp, lambda sol: sol[name]
    projs = [la.proj(p) for p in gens]
    sigma = Expr(np.zeros((n, n)))
    for i, pr in enumerate(projs):
        w = prob.scalar(f"{name}_w{i}")
        prob.add_psd(w, f"{name}_w{i}_nonneg")
        sigma = sigma + w * pr

    def read(sol):
        return sum((sol[f"{name}_w{i}"] * pr for i, pr in enumerate(projs)), np.zeros((n, n), dtype=complex))

    return sigma, supp, read


def schmidt_measure_2xn(rho: DensityMatrix, gap_tol: float = 1e-7, feas_tol: float = 1e-8) -> MeasureResult:
    """Schmidt measure (bits) of a 2⊗2 or 2⊗3 state.

    Every entangled pure state here has Schmidt rank 2, so the measure is
    the weight left over after removing the largest separable part, found
    as a PPT subnormalized state below ρ.
    """
    if rho.dims[0] != 2 or rho.dims[1] not in (2, 3):
        raise ValueError(f"Schmidt measure is only exact for 2x2 and 2x3, got {rho.dims}")
    prob = SdpProblem()
    # σ ⪯ ρ forces supp σ ⊆ supp ρ; parameterizing on that support keeps the
    # problem strictly feasible for rank-deficient ρ
    sigma, supp, read = separable_below(prob, rho.operator, rho.dims)
    prob.add_psd(rho.operator - sigma, "below_rho", support=supp)
    prob.maximize(sigma.trace())
    sol = solve_or_raise(prob, gap_tol, feas_tol)
    value = float(np.clip(1.0 - sol.primal_value, 0.0, 1.0))
    return MeasureResult(value, {"sigma": read(sol)}, sol, prob)
