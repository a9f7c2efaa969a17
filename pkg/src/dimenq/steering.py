"""Steering assemblages and their Schmidt measure."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import linalg as la
from .conic import MeasureResult, SdpProblem, solve_or_raise
from .measurements import PovmSet, dimension_measure_qubit, enumerate_strategies
from .states import DensityMatrix


@dataclass(frozen=True, eq=False)
class Assemblage:
    """Subnormalized states σ_{a|x}, shape (n_inputs, n_outcomes, d, d), with a common unit-trace marginal."""

    elements: np.ndarray = field(repr=False)

    def __post_init__(self):
        e = np.asarray(self.elements, dtype=complex)
        if e.ndim != 4 or e.shape[-1] != e.shape[-2]:
            raise ValueError(f"elements must have shape (inputs, outcomes, d, d), got {e.shape}")
        e = 0.5 * (e + np.swapaxes(e.conj(), -1, -2))
        for x in range(e.shape[0]):
            for a in range(e.shape[1]):
                lo = la.min_eig(e[x, a])
                if lo < -1e-10:
                    raise ValueError(f"element sigma[{a}|{x}] is not positive: min eigenvalue {lo:.3g}")
        marg = e.sum(axis=1)
        err = np.abs(marg - marg[0]).max()
        if err > 1e-9:
            raise ValueError(f"marginal depends on the input (signalling): residual {err:.3g}")
        tr = np.trace(marg[0]).real
        if abs(tr - 1.0) > 1e-9:
            raise ValueError(f"marginal has trace {tr!r}, expected 1")
        object.__setattr__(self, "elements", e)

    @property
    def dim(self) -> int:
        return self.elements.shape[-1]

    @property
    def n_inputs(self) -> int:
        return self.elements.shape[0]

    @property
    def n_outcomes(self) -> int:
        return self.elements.shape[1]

    @property
    def marginal(self) -> np.ndarray:
        return self.elements[0].sum(axis=0)

    def __repr__(self):
        return f"Assemblage(dim={self.dim}, n_inputs={self.n_inputs}, n_outcomes={self.n_outcomes})"


def mix_assemblages(s1: Assemblage, s2: Assemblage, t: float) -> Assemblage:
    return Assemblage(t * s1.elements + (1 - t) * s2.elements)


def from_state_and_povms(rho: DensityMatrix, m: PovmSet) -> Assemblage:
    """σ_{a|x} = Tr_A[(M_{a|x} ⊗ 𝟙) ρ_AB]."""
    if rho.dims[0] != m.dim:
        raise ValueError(f"POVMs act on dimension {m.dim}, state has Alice dimension {rho.dims[0]}")
    eye_b = np.eye(rho.dims[1])
    ops = np.einsum("xaij,kl->xaikjl", m.effects, eye_b).reshape(m.n_inputs, m.n_outcomes, *rho.operator.shape)
    return Assemblage(la.partial_trace(ops @ rho.operator, rho.dims, "A"))


def from_povms(m: PovmSet) -> Assemblage:
    """σ_{a|x} = M_{a|x}/d, the assemblage with maximally mixed marginal."""
    return Assemblage(m.effects / m.dim)


def _lhs_problem(s: Assemblage, gap_tol, feas_tol):
    """max Tr Σ_λ τ_λ  s.t.  τ_λ ⪰ 0,  Σ_{λ(x)=a} τ_λ ⪯ σ_{a|x}."""
    d = s.dim
    prob = SdpProblem()
    taus, names = {}, {}
    zero = np.zeros((d, d))
    for lam in enumerate_strategies(s.n_inputs, s.n_outcomes):
        name = names[lam] = "tau_" + "_".join(map(str, lam))
        supp = la.support_intersection([s.elements[x, a] for x, a in enumerate(lam)])
        if supp.shape[1] == 0:
            continue
        taus[lam] = prob.hermitian(name, d, support=supp)
        prob.add_psd(taus[lam], f"{name}_psd", support=supp)
    for x in range(s.n_inputs):
        for a in range(s.n_outcomes):
            parts = [t for lam, t in taus.items() if lam[x] == a]
            prob.add_psd(
                s.elements[x, a] - sum(parts, zero), f"below_sigma_{a}_{x}", support=la.support(s.elements[x, a])
            )
    prob.maximize(sum(taus.values(), zero).trace())
    sol = solve_or_raise(prob, gap_tol, feas_tol)
    lhs = {lam: sol[names[lam]] for lam in taus}
    return prob, sol, lhs


def steering_weight(s: Assemblage, gap_tol: float = 1e-7, feas_tol: float = 1e-8) -> MeasureResult:
    """1 − (largest LHS weight below σ)."""
    prob, sol, lhs = _lhs_problem(s, gap_tol, feas_tol)
    value = float(np.clip(1.0 - sol.primal_value, 0.0, 1.0))
    return MeasureResult(value, {"tau": lhs}, sol, prob)


def is_unsteerable(s: Assemblage, tol: float = 1e-6) -> bool:
    return steering_weight(s).value <= tol


def schmidt_measure_qubit_assemblage(s: Assemblage, gap_tol: float = 1e-7, feas_tol: float = 1e-8) -> MeasureResult:
    """Schmidt measure (bits) of a qubit assemblage; equals its steering weight."""
    if s.dim != 2:
        raise ValueError(f"exact assemblage measure needs a qubit assemblage, got d = {s.dim}")
    return steering_weight(s, gap_tol, feas_tol)


def schmidt_measure_upper_bound(s: Assemblage, gap_tol: float = 1e-7, feas_tol: float = 1e-8) -> MeasureResult:
    """log₂ d times the steering weight."""
    r = steering_weight(s, gap_tol, feas_tol)
    return MeasureResult(r.value * math.log2(s.dim), r.certificate, r.solution, r.problem)


# ---------------------------------------------------------------------------
# the log d versus 1 example
# ---------------------------------------------------------------------------


def _pm_proj(d, a, sign):
    """|±_a⟩⟨±_a| with |±_a⟩ = (|a⟩ ± |a⊕1⟩)/√2, as exact fractions."""
    m = np.full((d, d), Fraction(0), dtype=object)
    b = (a + 1) % d
    half = Fraction(1, 2)
    m[a, a] += half
    m[b, b] += half
    m[a, b] += sign * half
    m[b, a] += sign * half
    return m


def _basis_proj(d, a):
    m = np.full((d, d), Fraction(0), dtype=object)
    m[a, a] = Fraction(1)
    return m


def _gap_exact(d):
    """Assemblage and its qubit components τ^a, all with exact rational entries."""
    zero = lambda: np.full((d, d), Fraction(0), dtype=object)
    w = Fraction(1, 2 * d)
    sigma = [[zero() for _ in range(d)] for _ in range(2)]
    for a in range(d):
        sigma[0][a] = _basis_proj(d, a) * Fraction(1, d)
        sigma[1][a] = (_pm_proj(d, a, 1) + _pm_proj(d, (a + 1) % d, -1)) * w
    comps = []
    for a in range(d):
        tau = [[zero() for _ in range(d)] for _ in range(2)]
        tau[0][a] = tau[0][a] + _basis_proj(d, a) * w
        tau[0][(a + 1) % d] = tau[0][(a + 1) % d] + _basis_proj(d, (a + 1) % d) * w
        tau[1][a] = tau[1][a] + _pm_proj(d, a, 1) * w
        tau[1][(a - 1) % d] = tau[1][(a - 1) % d] + _pm_proj(d, a, -1) * w
        comps.append(tau)
    return sigma, comps


def _to_array(nested):
    return np.array([[np.array(m, dtype=float) for m in row] for row in nested], dtype=complex)


@dataclass
class GapExample:
    assemblage: Assemblage
    true_value: float
    weights: list[float]
    decomposition: list[Assemblage]
    residual: float


def gap_example(d: int) -> GapExample:
    """Assemblage whose log₂ d bound is loose: it is an average of qubit assemblages.

    σ_{a|0} = |a⟩⟨a|/d and σ_{a|1} = (|+_a⟩⟨+_a| + |−_{a⊕1}⟩⟨−_{a⊕1}|)/2d.
    Component a lives on span{|a⟩, |a⊕1⟩} and carries weight 1/d. The
    decomposition is checked in exact rational arithmetic before returning.
    """
    if d < 2:
        raise ValueError(f"d must be at least 2, got {d}")
    sigma, comps = _gap_exact(d)
    # exact check: Σ_a τ^a = σ entry by entry
    for x in range(2):
        for b in range(d):
            total = sum((c[x][b] for c in comps), np.full((d, d), Fraction(0), dtype=object))
            if not np.all(total == sigma[x][b]):
                raise AssertionError(f"decomposition does not reproduce sigma[{b}|{x}]")
    s = Assemblage(_to_array(sigma))
    parts = [Assemblage(d * _to_array(c)) for c in comps]
    weights = [1.0 / d] * d
    recon = sum(w * p.elements for w, p in zip(weights, parts))
    residual = float(np.abs(recon - s.elements).max())
    if residual > 1e-10:
        raise AssertionError(f"floating point decomposition residual {residual:.3g}")
    return GapExample(s, 1.0, weights, parts, residual)


# ---------------------------------------------------------------------------
# pretty good measurements
# ---------------------------------------------------------------------------


def pretty_good_measurements(s: Assemblage, cutoff: float = 1e-10) -> PovmSet:
    """M_{a|x} = ρ^{−1/2} σ_{a|x} ρ^{−1/2}, with the kernel projector of ρ added to outcome 0."""
    rho = s.marginal
    w, v = la.eigh(rho)
    keep = w > cutoff
    inv_sqrt = (v[:, keep] / np.sqrt(w[keep])) @ v[:, keep].conj().T
    kernel = v[:, ~keep] @ v[:, ~keep].conj().T
    eff = inv_sqrt @ s.elements @ inv_sqrt
    eff[:, 0] += kernel
    return PovmSet(eff)


@dataclass
class PgmBound:
    s_m_assemblage: float
    d_m_pgm_bound: float
    holds: bool


def schmidt_measure_pgm_bound(s: Assemblage, tol: float = 2e-7) -> PgmBound:
    """Assemblage measure next to the dimension measure of its pretty good measurements."""
    if s.dim != 2:
        raise ValueError("both sides are only exact for qubits")
    lhs = schmidt_measure_qubit_assemblage(s).value
    rhs = dimension_measure_qubit(pretty_good_measurements(s)).value
    return PgmBound(lhs, rhs, lhs <= rhs + tol)
