"""Measurement sets: joint measurability, dimension measure and MUB symmetry.

Effects are stored as an array of shape ``(n_inputs, n_outcomes, d, d)``
indexed ``[x, a]``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import linalg as la
from .conic import MeasureResult, SdpProblem, solve_or_raise

MAX_STRATEGIES = 10_000


def _effects_array(effects) -> np.ndarray:
    e = np.asarray(effects, dtype=complex)
    if e.ndim != 4 or e.shape[-1] != e.shape[-2]:
        raise ValueError(f"effects must have shape (inputs, outcomes, d, d), got {e.shape}")
    if not np.all(np.isfinite(e)):
        raise ValueError("effects have non-finite entries")
    return 0.5 * (e + np.swapaxes(e.conj(), -1, -2))


class _EffectFamily:
    effects: np.ndarray

    @property
    def dim(self) -> int:
        return self.effects.shape[-1]

    @property
    def n_inputs(self) -> int:
        return self.effects.shape[0]

    @property
    def n_outcomes(self) -> int:
        return self.effects.shape[1]

    def __getitem__(self, xa):
        return self.effects[xa]

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim}, n_inputs={self.n_inputs}, n_outcomes={self.n_outcomes})"


@dataclass(frozen=True, eq=False, repr=False)
class PovmSet(_EffectFamily):
    """POVMs {M_{a|x}} with Σ_a M_{a|x} = 𝟙 for every input x."""

    effects: np.ndarray

    def __post_init__(self):
        e = _effects_array(self.effects)
        for x in range(e.shape[0]):
            for a in range(e.shape[1]):
                lo = la.min_eig(e[x, a])
                if lo < -1e-10:
                    raise ValueError(f"effect M[{a}|{x}] is not positive: min eigenvalue {lo:.3g}")
            err = np.abs(e[x].sum(axis=0) - np.eye(e.shape[-1])).max()
            if err > 1e-9:
                raise ValueError(f"effects of input {x} do not sum to identity: residual {err:.3g}")
        object.__setattr__(self, "effects", e)


@dataclass(frozen=True, eq=False, repr=False)
class PseudoMeasurement(_EffectFamily):
    """Effects A_{a|x} ⪰ 0 with an input-independent marginal, not necessarily 𝟙."""

    effects: np.ndarray

    def __post_init__(self):
        e = _effects_array(self.effects)
        for x in range(e.shape[0]):
            for a in range(e.shape[1]):
                lo = la.min_eig(e[x, a])
                if lo < -1e-10:
                    raise ValueError(f"effect A[{a}|{x}] is not positive: min eigenvalue {lo:.3g}")
        marg = e.sum(axis=1)
        err = np.abs(marg - marg[0]).max()
        if err > 1e-9:
            raise ValueError(f"marginal depends on the input: residual {err:.3g}")
        object.__setattr__(self, "effects", e)

    @property
    def marginal(self) -> np.ndarray:
        return self.effects[0].sum(axis=0)


def enumerate_strategies(n_inputs: int, n_outcomes: int) -> list[tuple[int, ...]]:
    """All deterministic assignments x ↦ λ(x), in lexicographic order."""
    count = n_outcomes**n_inputs
    if count > MAX_STRATEGIES:
        raise ValueError(f"{count} deterministic strategies exceed the limit of {MAX_STRATEGIES}")
    return list(itertools.product(range(n_outcomes), repeat=n_inputs))


# ---------------------------------------------------------------------------
# strategy SDPs
# ---------------------------------------------------------------------------


def _strategy_problem(m: _EffectFamily, closure: str, gap_tol, feas_tol):
    """Shared builder for the parent-POVM SDPs.

    ``closure`` is "measure" ((α − 1)𝟙 + ΣG ⪰ 0, min α) or "weight"
    ((γ − 1)𝟙 + ΣG = 0, min γ). Both keep Σ_{λ(x)=a} G_λ ⪯ M_{a|x}.
    Each G_λ lives on the intersection of the supports of the effects it
    feeds, which the constraints force anyway.
    """
    d = m.dim
    strategies = enumerate_strategies(m.n_inputs, m.n_outcomes)
    supports = {
        (x, a): la.support(m.effects[x, a]) for x in range(m.n_inputs) for a in range(m.n_outcomes)
    }
    prob = SdpProblem()
    G, names = {}, {}
    for lam in strategies:
        name = names[lam] = "G_" + "_".join(map(str, lam))
        supp = la.support_intersection([m.effects[x, a] for x, a in enumerate(lam)])
        if supp.shape[1] == 0:
            continue
        G[lam] = prob.hermitian(name, d, support=supp)
        prob.add_psd(G[lam], f"{name}_psd", support=supp)
    zero = np.zeros((d, d))
    for x in range(m.n_inputs):
        for a in range(m.n_outcomes):
            parts = [g for lam, g in G.items() if lam[x] == a]
            prob.add_psd(m.effects[x, a] - sum(parts, zero), f"below_M_{a}_{x}", support=supports[x, a])
    total = sum(G.values(), zero)
    s = prob.scalar("alpha" if closure == "measure" else "gamma")
    shifted = s * np.eye(d) - np.eye(d) + total
    if closure == "measure":
        prob.add_psd(shifted, "closure")
    else:
        prob.add_zero(shifted, "closure")
    prob.minimize(s)
    sol = solve_or_raise(prob, gap_tol, feas_tol)
    parents = {lam: sol[names[lam]] for lam in G}
    return prob, sol, parents


def dimension_measure_qubit(m: PovmSet, gap_tol: float = 1e-7, feas_tol: float = 1e-8) -> MeasureResult:
    """Exact dimension measure (bits) of a qubit measurement set."""
    if m.dim != 2:
        raise ValueError(f"exact measure needs qubit effects, got d = {m.dim}; use dimension_measure_upper_bound")
    prob, sol, parents = _strategy_problem(m, "measure", gap_tol, feas_tol)
    value = float(np.clip(sol.primal_value, 0.0, 1.0))
    return MeasureResult(value, {"G": parents, "alpha": sol["alpha"]}, sol, prob)


def dimension_measure_upper_bound(m: _EffectFamily, gap_tol: float = 1e-7, feas_tol: float = 1e-8) -> MeasureResult:
    """α·log₂ d with α from the parent SDP run with 𝟙_d."""
    prob, sol, parents = _strategy_problem(m, "measure", gap_tol, feas_tol)
    alpha = float(np.clip(sol.primal_value, 0.0, 1.0))
    return MeasureResult(alpha * math.log2(m.dim), {"G": parents, "alpha": sol["alpha"]}, sol, prob)


def incompatibility_weight(m: PovmSet, gap_tol: float = 1e-7, feas_tol: float = 1e-8) -> MeasureResult:
    """Smallest incompatible fraction γ in M = γ·N + (1 − γ)·J with J jointly measurable."""
    prob, sol, parents = _strategy_problem(m, "weight", gap_tol, feas_tol)
    value = float(np.clip(sol.primal_value, 0.0, 1.0))
    return MeasureResult(value, {"G": parents, "gamma": sol["gamma"]}, sol, prob)


@dataclass
class JointMeasurability:
    jointly_measurable: bool
    robustness: float
    result: MeasureResult


def joint_measurability(m: PovmSet, tol: float = 1e-6, gap_tol: float = 1e-7, feas_tol: float = 1e-8) -> JointMeasurability:
    """White-noise robustness: max t ≤ 1 with t·M + (1 − t)·Tr(M)𝟙/d jointly measurable."""
    d = m.dim
    prob = SdpProblem()
    t = prob.scalar("t")
    G = {}
    for lam in enumerate_strategies(m.n_inputs, m.n_outcomes):
        name = "G_" + "_".join(map(str, lam))
        G[lam] = prob.hermitian(name, d)
        prob.add_psd(G[lam], f"{name}_psd")
    zero = np.zeros((d, d))
    for x in range(m.n_inputs):
        for a in range(m.n_outcomes):
            eff = m.effects[x, a]
            noise = np.trace(eff).real / d * np.eye(d)
            target = t * (eff - noise) + noise
            prob.add_zero(sum((g for lam, g in G.items() if lam[x] == a), zero) - target, f"marginal_{a}_{x}")
    prob.add_psd(1.0 - t, "t_at_most_one")
    prob.maximize(t)
    sol = solve_or_raise(prob, gap_tol, feas_tol)
    r = float(min(sol.primal_value, 1.0))
    parents = {lam: sol["G_" + "_".join(map(str, lam))] for lam in G}
    res = MeasureResult(r, {"G": parents, "t": r}, sol, prob)
    return JointMeasurability(r >= 1.0 - tol, r, res)


def tensor_povm(m1: PovmSet, m2: PovmSet) -> PovmSet:
    """{M_{a|x} ⊗ N_{b|y}} with (x, y) and (a, b) flattened lexicographically."""
    X1, A1 = m1.n_inputs, m1.n_outcomes
    X2, A2 = m2.n_inputs, m2.n_outcomes
    d = m1.dim * m2.dim
    out = np.zeros((X1 * X2, A1 * A2, d, d), dtype=complex)
    for x, y in itertools.product(range(X1), range(X2)):
        for a, b in itertools.product(range(A1), range(A2)):
            out[x * X2 + y, a * A2 + b] = np.kron(m1.effects[x, a], m2.effects[y, b])
    return PovmSet(out)


def mix_povms(m1: PovmSet, m2: PovmSet, t: float) -> PovmSet:
    return PovmSet(t * m1.effects + (1 - t) * m2.effects)


def drop_input(m: PovmSet, x: int) -> PovmSet:
    return PovmSet(np.delete(m.effects, x, axis=0))


# ---------------------------------------------------------------------------
# Weyl operators and the MUB pair
# ---------------------------------------------------------------------------


def is_prime(n: int) -> bool:
    return n >= 2 and all(n % k for k in range(2, math.isqrt(n) + 1))


def shift(d: int) -> np.ndarray:
    """X|k⟩ = |k + 1 mod d⟩."""
    return np.roll(np.eye(d, dtype=complex), 1, axis=0)


def clock(d: int) -> np.ndarray:
    """Z|k⟩ = ω^k |k⟩."""
    return np.diag(np.exp(2j * np.pi * np.arange(d) / d))


def fourier(d: int) -> np.ndarray:
    """F|k⟩ = Σ_j ω^{jk}|j⟩ / √d."""
    j = np.arange(d)
    return np.exp(2j * np.pi * np.outer(j, j) / d) / np.sqrt(d)


def multiplier(d: int, alpha: int) -> np.ndarray:
    """P_α|k⟩ = |αk mod d⟩ for α coprime to d."""
    p = np.zeros((d, d), dtype=complex)
    for k in range(d):
        p[(alpha * k) % d, k] = 1.0
    return p


def weyl_twirl(rho) -> np.ndarray:
    """Average of Z^{−j} X^{−i} ρ X^i Z^j over all i, j."""
    rho = np.asarray(rho, dtype=complex)
    d = rho.shape[0]
    X, Z = shift(d), clock(d)
    out = np.zeros_like(rho)
    for i in range(d):
        Xi = np.linalg.matrix_power(X, i)
        for j in range(d):
            W = Xi @ np.linalg.matrix_power(Z, j)
            out += W.conj().T @ rho @ W
    return out / d**2


def mub_vectors(d: int) -> np.ndarray:
    """Basis vectors ``[x, a]``: x = 0 the eigenbasis of X (F|a⟩), x = 1 the computational basis."""
    return np.stack([fourier(d).T, np.eye(d, dtype=complex)])


def mub_pair(d: int, p: float) -> PovmSet:
    """M^p_{a|x} = p|e^x_a⟩⟨e^x_a| + (1 − p)𝟙/d for the X and Z eigenbases."""
    if not is_prime(d):
        raise ValueError(f"mub_pair needs a prime dimension, got {d}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"visibility must be in [0, 1], got {p}")
    vecs = mub_vectors(d)
    sharp = np.einsum("xai,xaj->xaij", vecs, vecs.conj())
    return PovmSet(p * sharp + (1 - p) * np.eye(d) / d)


@dataclass(frozen=True, eq=False)
class SymmetryGroup:
    """Unitaries with input and per-input output relabelings.

    Element j satisfies U_j† M_{a|x} U_j = M_{out[j][x][a] | inp[j][x]}.
    """

    unitaries: np.ndarray
    input_perms: np.ndarray  # (N, X)
    output_perms: np.ndarray  # (N, X, A)

    def __len__(self):
        return len(self.unitaries)


def _match_permutations(U, sharp):
    X, A = sharp.shape[:2]
    flat = sharp.reshape(X * A, -1)
    inp = np.zeros(X, dtype=int)
    out = np.zeros((X, A), dtype=int)
    for x in range(X):
        ys = set()
        for a in range(A):
            img = (U.conj().T @ sharp[x, a] @ U).ravel()
            k = int(np.argmin(np.abs(flat - img).max(axis=1)))
            if np.abs(flat[k] - img).max() > 1e-8:
                raise ValueError("unitary does not permute the measurement set")
            ys.add(k // A)
            out[x, a] = k % A
        if len(ys) != 1:
            raise ValueError("unitary mixes inputs within one measurement")
        inp[x] = ys.pop()
    return inp, out


@lru_cache(maxsize=None)
def mub_group(d: int) -> SymmetryGroup:
    """The 2d²(d−1) elements F^f P_α X^i Z^j with their induced relabelings."""
    if not is_prime(d):
        raise ValueError(f"mub_group needs a prime dimension, got {d}")
    X, Z, F = shift(d), clock(d), fourier(d)
    vecs = mub_vectors(d)
    sharp = np.einsum("xai,xaj->xaij", vecs, vecs.conj())
    us, inps, outs = [], [], []
    for f in range(2):
        Ff = np.linalg.matrix_power(F, f)
        for alpha in range(1, d):
            Pa = multiplier(d, alpha)
            for i in range(d):
                Xi = np.linalg.matrix_power(X, i)
                for j in range(d):
                    U = Ff @ Pa @ Xi @ np.linalg.matrix_power(Z, j)
                    inp, out = _match_permutations(U, sharp)
                    us.append(U)
                    inps.append(inp)
                    outs.append(out)
    return SymmetryGroup(np.array(us), np.array(inps), np.array(outs))


def twirl(m, g: SymmetryGroup):
    """Group average (1/N) Σ_j U_j A_{π_{j,x}(a) | π_j(x)} U_j†; returns the input's type."""
    eff = m.effects
    X, A = eff.shape[:2]
    if g.input_perms.shape[1] != X or g.output_perms.shape[2] != A:
        raise ValueError(f"group acts on {g.input_perms.shape[1]} inputs x {g.output_perms.shape[2]} outcomes, set has {X} x {A}")
    return type(m)(_twirl_array(eff, g))


def _visibility(effects: np.ndarray, d: int) -> float:
    vecs = mub_vectors(d)
    sharp = np.einsum("xai,xaj->xaij", vecs, vecs.conj())
    X, A = effects.shape[:2]
    overlap = np.einsum("xaij,xaji->", sharp, effects).real
    return d * overlap / ((d - 1) * X * A) - 1.0 / (d - 1)


def extract_visibility(m: _EffectFamily, d: int | None = None, tol: float = 1e-6) -> float:
    """Visibility p of a set of the form M^p; raises if the set is not of that form."""
    d = m.dim if d is None else d
    if m.dim != d or m.effects.shape[:2] != (2, d):
        raise ValueError(f"expected a pair of {d}-outcome measurements on C^{d}")
    p = _visibility(m.effects, d)
    resid = np.abs(m.effects - _mub_form(d, p)).max()
    if resid > tol:
        raise ValueError(f"set is not of white-noise MUB form: residual {resid:.3g}")
    return float(p)


def _mub_form(d, p):
    vecs = mub_vectors(d)
    sharp = np.einsum("xai,xaj->xaij", vecs, vecs.conj())
    return p * sharp + (1 - p) * np.eye(d) / d


# ---------------------------------------------------------------------------
# heuristic rank-k constructions
# ---------------------------------------------------------------------------


def _top_projector(S: np.ndarray, k: int, prefer: np.ndarray) -> tuple[np.ndarray, bool]:
    """Projector on the k largest eigenvalues of S.

    Inside a degenerate eigenspace straddling the cutoff, vectors with the
    largest weight on span(prefer) win.
    """
    w, v = la.eigh(S)
    w, v = w[::-1], v[:, ::-1]
    d = len(w)
    if k >= d:
        return np.eye(d, dtype=complex), False
    cut = w[k - 1]
    tie = abs(w[k] - cut) <= 1e-9 * max(1.0, abs(cut))
    if not tie:
        top = v[:, :k]
        return top @ top.conj().T, False
    above = v[:, w > cut + 1e-9 * max(1.0, abs(cut))]
    band = v[:, np.abs(w - cut) <= 1e-9 * max(1.0, abs(cut))]
    # rotate the degenerate band so its leading vectors maximize overlap with span(prefer)
    pq = prefer @ prefer.conj().T
    bw, bv = la.eigh(band.conj().T @ pq @ band)
    band = band @ bv[:, ::-1]
    top = np.concatenate([above, band[:, : k - above.shape[1]]], axis=1)
    return top @ top.conj().T, True


@dataclass
class HeuristicConstruction:
    pseudo: PovmSet
    p_k: float
    subsets: tuple[tuple[int, ...], tuple[int, ...]]
    tie: bool


def _raw_construction(d, k, o1, o2):
    vecs = mub_vectors(d)
    S = sum(la.proj(vecs[0, a]) for a in o1) + sum(la.proj(vecs[1, a]) for a in o2)
    prefer = vecs[1, list(o2)].T
    Pi, tie = _top_projector(S, k, prefer)
    A = np.zeros((2, d, d, d), dtype=complex)
    for x, subset in enumerate((o1, o2)):
        for a in subset:
            A[x, a] = Pi @ la.proj(vecs[x, a]) @ Pi
    total = np.trace(A.sum(axis=1), axis1=-2, axis2=-1).real.mean()
    if total <= 1e-12:
        raise ValueError("construction is identically zero")
    return A * (d / total), tie


def _canonical_subsets(d, k):
    seen, reps = set(), []
    for s in itertools.combinations(range(d), k):
        key = min(tuple(sorted((a + c) % d for a in s)) for c in range(d))
        if key not in seen:
            seen.add(key)
            reps.append(key)
    return reps


def heuristic_mub_construction(d: int, k: int, subsets=None) -> HeuristicConstruction:
    """Rank-k pseudo-measurement built from S_k, twirled into the M^p family.

    Without ``subsets`` the pair (O₁, O₂) is searched exhaustively (O₁ up to
    cyclic shifts) for the largest visibility. This is a heuristic: nothing
    guarantees the best possible p for the given rank.
    """
    if not is_prime(d):
        raise ValueError(f"heuristic construction needs a prime dimension, got {d}")
    if not 1 <= k <= d:
        raise ValueError(f"k must lie in [1, {d}], got {k}")
    if subsets is None:
        best = None
        for o1 in _canonical_subsets(d, k):
            for o2 in itertools.combinations(range(d), k):
                A, _ = _raw_construction(d, k, o1, o2)
                # the visibility functional is invariant under the twirl
                p = _visibility(A, d)
                if best is None or p > best[0] + 1e-12:
                    best = (p, o1, o2)
        subsets = best[1:]
    o1, o2 = (tuple(sorted(int(a) for a in s)) for s in subsets)
    if len(o1) != k or len(o2) != k or not set(o1 + o2) <= set(range(d)):
        raise ValueError(f"subsets must be size-{k} subsets of 0..{d - 1}")
    A, tie = _raw_construction(d, k, o1, o2)
    pseudo = PovmSet(_twirl_array(A, mub_group(d)))
    return HeuristicConstruction(pseudo, extract_visibility(pseudo, d), (o1, o2), tie)


def _twirl_array(eff, g):
    out = np.zeros_like(eff)
    for U, inp, outp in zip(g.unitaries, g.input_perms, g.output_perms):
        Ud = U.conj().T
        for x in range(eff.shape[0]):
            out[x] += U @ eff[inp[x], outp[x]] @ Ud
    return out / len(g)


@lru_cache(maxsize=None)
def jm_visibility_construction(d: int) -> float:
    """Best k = 1 visibility of the heuristic construction."""
    return heuristic_mub_construction(d, 1).p_k


def dimension_measure_curve_from_constructions(d: int, p: float) -> float:
    """Upper bound from mixing the best k = 1 construction with the sharp pair."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"visibility must be in [0, 1], got {p}")
    p1 = jm_visibility_construction(d)
    if p <= p1:
        return 0.0
    return math.log2(d) * (p - p1) / (1 - p1)
