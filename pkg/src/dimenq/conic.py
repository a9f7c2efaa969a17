"""Small dense SDP solver for block-Hermitian linear matrix inequalities.

Problems are written with affine matrix expressions::

    prob = SdpProblem()
    t = prob.scalar("t")
    prob.add_psd(t * np.eye(2) - pauli_z)
    prob.minimize(t)
    sol = solve(prob)

Every Hermitian variable is expanded into real parameters, equality
constraints are eliminated by a null-space parameterization, and the
remaining problem ``min c·z  s.t.  F0_j + Σ z_i F_ij ⪰ 0`` is solved on the
realified blocks by an infeasible primal-dual path-following method
(Nesterov-Todd scaling, Mehrotra predictor-corrector). When the iteration stalls
because the feasible set has no interior, the blocks are restricted to
their minimal face and the problem is solved again; constraint residuals
after that fallback are typically around 1e-7 rather than 1e-9.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla

log = logging.getLogger(__name__)

MAX_BLOCK_DIM = 512


class SolverError(RuntimeError):
    """A measure could not be computed because the SDP did not solve."""

    def __init__(self, message: str, solution: "SdpSolution | None" = None):
        super().__init__(message)
        self.solution = solution


# ---------------------------------------------------------------------------
# expressions
# ---------------------------------------------------------------------------


def _hermitian_basis(n: int) -> np.ndarray:
    """Real basis of n×n Hermitian matrices, shape (n², n, n)."""
    basis = np.zeros((n * n, n, n), dtype=complex)
    k = 0
    for i in range(n):
        basis[k, i, i] = 1.0
        k += 1
    for i in range(n):
        for j in range(i + 1, n):
            basis[k, i, j] = basis[k, j, i] = 1.0
            k += 1
            basis[k, i, j] = 1j
            basis[k, j, i] = -1j
            k += 1
    return basis


class Expr:
    """Affine matrix-valued expression ``const + Σ_v Σ_k y_{v,k} coef_{v,k}``."""

    __array_ufunc__ = None

    def __init__(self, const: np.ndarray, terms: dict[str, np.ndarray] | None = None):
        self.const = np.asarray(const, dtype=complex)
        self.terms = dict(terms or {})

    @property
    def shape(self) -> tuple[int, int]:
        return self.const.shape

    @property
    def dim(self) -> int:
        return self.const.shape[0]

    @staticmethod
    def wrap(other) -> "Expr":
        if isinstance(other, Expr):
            return other
        m = np.asarray(other, dtype=complex)
        if m.ndim == 0:
            m = m.reshape(1, 1)
        return Expr(m)

    def _combine(self, other, sign: float) -> "Expr":
        other = Expr.wrap(other)
        if other.shape != self.shape:
            if other.shape == (1, 1) and not other.terms:
                other = Expr(other.const[0, 0] * np.eye(self.dim))
            else:
                raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")
        terms = dict(self.terms)
        for name, coef in other.terms.items():
            terms[name] = terms[name] + sign * coef if name in terms else sign * coef
        return Expr(self.const + sign * other.const, terms)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __radd__(self, other):
        if isinstance(other, (int, float)) and other == 0:
            return self
        return Expr.wrap(other)._combine(self, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __rsub__(self, other):
        return Expr.wrap(other)._combine(self, -1.0)

    def __neg__(self):
        return self * -1.0

    def __mul__(self, other):
        if np.isscalar(other):
            return Expr(self.const * other, {k: v * other for k, v in self.terms.items()})
        m = np.asarray(other, dtype=complex)
        if self.shape != (1, 1):
            raise ValueError("only scalar expressions can multiply a matrix")
        return Expr(self.const[0, 0] * m, {k: v[:, 0, 0, None, None] * m for k, v in self.terms.items()})

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1.0 / other)

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "Expr":
        """Apply a linear map that accepts stacks ``(..., n, n)``."""
        return Expr(fn(self.const), {k: fn(v) for k, v in self.terms.items()})

    def trace(self) -> "Expr":
        return self.map(lambda a: np.trace(a, axis1=-2, axis2=-1)[..., None, None])

    def __matmul__(self, other):
        m = np.asarray(other, dtype=complex)
        return self.map(lambda a: a @ m)

    def __rmatmul__(self, other):
        m = np.asarray(other, dtype=complex)
        return self.map(lambda a: m @ a)

    def evaluate(self, values: dict[str, np.ndarray]) -> np.ndarray:
        out = self.const.copy()
        for name, coef in self.terms.items():
            out = out + np.tensordot(values[name], coef, axes=1)
        return out


def realify(h) -> np.ndarray:
    """Real symmetric embedding ``[[Re H, -Im H], [Im H, Re H]]`` (stack-aware)."""
    h = np.asarray(h, dtype=complex)
    re, im = h.real, h.imag
    top = np.concatenate([re, -im], axis=-1)
    bot = np.concatenate([im, re], axis=-1)
    return np.concatenate([top, bot], axis=-2)


def _derealify(x: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`realify`: ``Re tr(H Z) = tr(realify(H) X)``."""
    n = x.shape[0] // 2
    a, b, c, d = x[:n, :n], x[:n, n:], x[n:, :n], x[n:, n:]
    z = (a + d) + 1j * (c - b)
    return 0.5 * (z + z.conj().T)


# ---------------------------------------------------------------------------
# problem container
# ---------------------------------------------------------------------------


@dataclass
class Constraint:
    name: str
    kind: str  # "psd" or "zero"
    expr: Expr


class SdpProblem:
    """Declared Hermitian/scalar variables, a linear objective and LMIs."""

    def __init__(self):
        self.blocks: list[tuple[str, int]] = []
        self.scalars: list[str] = []
        self.constraints: list[Constraint] = []
        self.objective: Expr = Expr(np.zeros((1, 1)))
        self.sense = "min"
        self._nparams: dict[str, int] = {}
        self._basis: dict[str, np.ndarray] = {}

    def _declare(self, name: str, nparams: int):
        if name in self._nparams:
            raise ValueError(f"variable {name!r} declared twice")
        self._nparams[name] = nparams

    def hermitian(self, name: str, dim: int, support: np.ndarray | None = None) -> Expr:
        """Hermitian variable; with ``support`` (dim × r isometry) it is V τ V† for r×r τ."""
        if support is None:
            basis = _hermitian_basis(dim)
        else:
            v = np.asarray(support, dtype=complex).reshape(dim, -1)
            small = _hermitian_basis(v.shape[1])
            basis = v @ small @ v.conj().T
        self._declare(name, basis.shape[0])
        self.blocks.append((name, dim))
        self._basis[name] = basis
        return Expr(np.zeros((dim, dim)), {name: basis})

    def scalar(self, name: str) -> Expr:
        self._declare(name, 1)
        self.scalars.append(name)
        return Expr(np.zeros((1, 1)), {name: np.ones((1, 1, 1), dtype=complex)})

    def _check(self, expr: Expr):
        for name in expr.terms:
            if name not in self._nparams:
                raise ValueError(f"expression references undeclared variable {name!r}")

    def minimize(self, expr):
        self._set_objective(expr, "min")

    def maximize(self, expr):
        self._set_objective(expr, "max")

    def _set_objective(self, expr, sense):
        expr = Expr.wrap(expr)
        if expr.shape != (1, 1):
            raise ValueError("objective must be scalar; use .trace()")
        self._check(expr)
        self.objective, self.sense = expr, sense

    def add_psd(self, expr, name: str | None = None, support: np.ndarray | None = None) -> int:
        """Require ``expr ⪰ 0``.

        When the range of ``expr`` is known to lie in span(support), the
        constraint is compressed to ``support† expr support``, which keeps a
        strictly feasible point when the full-size matrix is singular.
        """
        if support is not None:
            v = np.asarray(support, dtype=complex)
            if v.shape[1] == 0:
                return -1
            expr = v.conj().T @ Expr.wrap(expr) @ v
        return self._add(expr, "psd", name)

    def add_zero(self, expr, name: str | None = None) -> int:
        return self._add(expr, "zero", name)

    def _add(self, expr, kind, name):
        expr = Expr.wrap(expr)
        self._check(expr)
        c = expr.const
        if c.shape[0] != c.shape[1] or np.abs(c - c.conj().T).max(initial=0.0) > 1e-9:
            raise ValueError("constant term of a constraint must be Hermitian")
        name = name or f"{kind}{len(self.constraints)}"
        self.constraints.append(Constraint(name, kind, expr))
        return len(self.constraints) - 1

    def values_from_params(self, y: dict[str, np.ndarray]) -> dict:
        out = {}
        for name, dim in self.blocks:
            h = np.tensordot(y[name], self._basis[name], axes=1)
            out[name] = 0.5 * (h + h.conj().T)
        for name in self.scalars:
            out[name] = float(y[name][0])
        return out

    def params_from_values(self, values: dict) -> dict[str, np.ndarray]:
        y = {}
        for name, dim in self.blocks:
            # coordinates in the (possibly restricted) basis; the basis is orthogonal
            # under the trace inner product
            h = np.asarray(values[name], dtype=complex)
            basis = self._basis[name]
            norms = np.einsum("kij,kij->k", basis.conj(), basis).real
            y[name] = np.einsum("kij,ij->k", basis.conj(), h).real / np.where(norms > 0, norms, 1.0)
        for name in self.scalars:
            y[name] = np.array([float(values[name])])
        return y

    def listing(self) -> str:
        """Plain-text dump: one declaration or constraint per line."""

        def enc(m):
            m = np.asarray(m)
            return [[[float(v.real), float(v.imag)] for v in row] for row in m]

        lines = [f"sense {self.sense}"]
        lines += [f"hermitian {n} {d}" for n, d in self.blocks]
        lines += [f"scalar {n}" for n in self.scalars]

        def expr_line(head, e):
            parts = {"const": enc(e.const)}
            for v, coef in e.terms.items():
                parts[v] = [enc(c) for c in coef]
            return f"{head} {json.dumps(parts, separators=(',', ':'))}"

        lines.append(expr_line("objective", self.objective))
        for c in self.constraints:
            lines.append(expr_line(f"{c.kind} {c.name}", c.expr))
        return "\n".join(lines) + "\n"


@dataclass
class SdpSolution:
    status: str  # optimal | infeasible | unbounded | max_iterations | ill_posed
    primal_value: float
    dual_value: float
    gap: float
    variable_values: dict
    iterations: int
    duals: dict[str, np.ndarray] = field(default_factory=dict)
    certificate: dict | None = None

    @property
    def value(self) -> float:
        return self.primal_value

    def __getitem__(self, name):
        return self.variable_values[name]


# ---------------------------------------------------------------------------
# compilation
# ---------------------------------------------------------------------------


@dataclass
class _Block:
    cidx: int
    idx: np.ndarray  # indices into z
    F0: np.ndarray
    F: np.ndarray  # (k, n, n) real symmetric


@dataclass
class _Compiled:
    c: np.ndarray
    c0: float
    y0: np.ndarray
    N: np.ndarray | None
    blocks: list[_Block]
    const_blocks: list[tuple[int, np.ndarray]]
    offsets: dict[str, tuple[int, int]]
    m_full: int


def _compile(problem: SdpProblem) -> _Compiled:
    offsets, m = {}, 0
    names = [n for n, _ in problem.blocks] + list(problem.scalars)
    # deterministic parameter layout regardless of declaration order
    for name in sorted(names):
        k = problem._nparams[name]
        offsets[name] = (m, m + k)
        m += k

    sign = 1.0 if problem.sense == "min" else -1.0
    c = np.zeros(m)
    for name, coef in problem.objective.terms.items():
        a, b = offsets[name]
        c[a:b] += sign * coef[:, 0, 0].real
    c0 = sign * float(problem.objective.const[0, 0].real)

    eq_rows, eq_rhs = [], []
    psd = []
    for ci, con in enumerate(problem.constraints):
        e = con.expr
        n = e.dim
        if con.kind == "zero":
            iu = np.triu_indices(n)
            iu1 = np.triu_indices(n, 1)
            rows = np.zeros((len(iu[0]) + len(iu1[0]), m))
            rhs = np.concatenate([-e.const[iu].real, -e.const[iu1].imag])
            for name, coef in e.terms.items():
                a, b = offsets[name]
                rows[: len(iu[0]), a:b] += coef[:, iu[0], iu[1]].real.T
                rows[len(iu[0]) :, a:b] += coef[:, iu1[0], iu1[1]].imag.T
            eq_rows.append(rows)
            eq_rhs.append(rhs)
        else:
            if 2 * n > MAX_BLOCK_DIM:
                raise ValueError(f"constraint {con.name!r}: realified dimension {2 * n} > {MAX_BLOCK_DIM}")
            idx, fs = [], []
            for name, coef in e.terms.items():
                a, b = offsets[name]
                idx.append(np.arange(a, b))
                fs.append(realify(coef))
            idx = np.concatenate(idx) if idx else np.zeros(0, dtype=int)
            F = np.concatenate(fs) if fs else np.zeros((0, 2 * n, 2 * n))
            psd.append((ci, idx, realify(e.const), F))

    N = None
    y0 = np.zeros(m)
    if eq_rows:
        A = np.vstack(eq_rows)
        b = np.concatenate(eq_rhs)
        scale = np.maximum(np.abs(A).max(axis=1), 1e-300)
        A, b = A / scale[:, None], b / scale
        U, s, Vt = np.linalg.svd(A, full_matrices=True)
        tol = max(A.shape) * np.finfo(float).eps * (s[0] if s.size else 1.0) * 10
        r = int(np.sum(s > tol))
        y0 = Vt[:r].T @ ((U[:, :r].T @ b) / s[:r])
        resid = np.abs(A @ y0 - b).max(initial=0.0)
        if resid > 1e-9 * (1 + np.abs(b).max(initial=0.0)):
            raise _Infeasible("equality constraints are inconsistent", resid)
        N = Vt[r:].T
        c0 += float(c @ y0)
        c = N.T @ c

    blocks, const_blocks = [], []
    nz = m if N is None else N.shape[1]
    for ci, idx, F0, F in psd:
        if N is not None:
            F0 = F0 + np.tensordot(y0[idx], F, axes=1) if idx.size else F0
            if idx.size and nz:
                F = np.tensordot(N[idx].T, F, axes=1)
                idx = np.arange(nz)
            else:
                F = np.zeros((0,) + F0.shape)
                idx = np.zeros(0, dtype=int)
        if idx.size == 0 or not np.any(F):
            const_blocks.append((ci, F0))
            continue
        order = np.argsort(idx, kind="stable")
        blocks.append(_Block(ci, idx[order], F0, F[order]))
    return _Compiled(c, c0, y0, N, blocks, const_blocks, offsets, m)


class _Infeasible(Exception):
    def __init__(self, msg, resid):
        super().__init__(msg)
        self.resid = resid


# ---------------------------------------------------------------------------
# interior point method
# ---------------------------------------------------------------------------


def _nullspace_solution(A: np.ndarray, b: np.ndarray, rtol: float | None = None):
    """Least-squares particular solution, null-space basis and residual of A y = b."""
    U, s, Vt = np.linalg.svd(A, full_matrices=True)
    if rtol is None:
        rtol = max(A.shape) * np.finfo(float).eps * 10
    tol = rtol * (s[0] if s.size else 1.0)
    r = int(np.sum(s > tol))
    y0 = Vt[:r].T @ ((U[:, :r].T @ b) / s[:r])
    resid = np.abs(A @ y0 - b).max(initial=0.0)
    return y0, Vt[r:].T, resid


def _facial_reduction(comp: _Compiled, slater_tol: float = 1e-7, max_rounds: int = 6):
    """Restrict every block to the smallest face that still holds all feasible points.

    Each round solves ``max t  s.t.  F0_j + F_j*(z) ⪰ t𝟙,  t ≤ 1``. A positive
    optimum means a strictly feasible point exists. Otherwise the optimal
    dual blocks W_j expose the face: every feasible S_j satisfies S_j W_j = 0,
    which becomes a set of linear equalities plus a compression of block j
    onto the kernel of W_j.

    Returns ``(reduced, z0, Nr, V)`` with ``z = z0 + Nr z'`` and
    ``V[j]`` the isometry of the surviving part of block j, or None when
    nothing was reduced.
    """
    nz = comp.c.size
    F0s, Fs, Vs = {}, {}, {}
    for j, b in enumerate(comp.blocks):
        F = np.zeros((nz,) + b.F0.shape)
        F[b.idx] = b.F
        F0s[j], Fs[j], Vs[j] = b.F0, F, np.eye(b.F0.shape[0])
    z0, Nr = np.zeros(nz), np.eye(nz)
    reduced = False
    for _ in range(max_rounds):
        m = Nr.shape[1]
        alive = sorted(F0s)
        aux_blocks = [
            _Block(j, np.arange(m + 1), F0s[j], np.concatenate([Fs[j], -np.eye(F0s[j].shape[0])[None]]))
            for j in alive
        ]
        aux_blocks.append(_Block(-1, np.array([m]), np.ones((1, 1)), -np.ones((1, 1, 1))))
        c = np.zeros(m + 1)
        c[-1] = -1.0
        aux = _Compiled(c, 0.0, np.zeros(m + 1), None, aux_blocks, [], {}, m + 1)
        status, za, Wa, _, _ = _ipm(aux, 1e-10, 1e-10, 100)
        log.debug("facial reduction: auxiliary status %s, t = %.3g", status, za[-1] if za.size else math.nan)
        if status != "optimal" or za[-1] > slater_tol:
            break
        wmax = max(np.linalg.eigvalsh(W)[-1] for W in Wa[:-1])
        rows, rhs, cut = [], [], {}
        for j, W in zip(alive, Wa[:-1]):
            w, U = np.linalg.eigh(W)
            expo = w > 1e-6 * wmax
            if not np.any(expo):
                continue
            Ue = U[:, expo]
            # Ue^T S_j = 0, linear in z'
            rows.append(np.einsum("kab,ar->kbr", Fs[j], Ue).reshape(m, -1).T)
            rhs.append(-(F0s[j] @ Ue).ravel())
            cut[j] = U[:, ~expo]
        if not cut:
            break
        zeq, Neq, resid = _nullspace_solution(np.vstack(rows), np.concatenate(rhs), rtol=1e-3)
        if resid > 1e-6:
            log.debug("facial reduction: exposed face inconsistent (residual %.3g)", resid)
            break
        for j in alive:
            F0s[j] = F0s[j] + np.tensordot(zeq, Fs[j], axes=1)
            Fs[j] = np.tensordot(Neq.T, Fs[j], axes=1)
            if j in cut:
                V = cut[j]
                F0s[j] = V.T @ F0s[j] @ V
                Fs[j] = np.einsum("ai,kab,bj->kij", V, Fs[j], V)
                Vs[j] = Vs[j] @ V
            if F0s[j].shape[0] == 0 or not np.any(Fs[j]):
                del F0s[j], Fs[j]
        z0, Nr = z0 + Nr @ zeq, Nr @ Neq
        reduced = True
        if not F0s or Nr.shape[1] == 0:
            break
    if not reduced:
        return None
    m = Nr.shape[1]
    blocks = [_Block(comp.blocks[j].cidx, np.arange(m), F0s[j], Fs[j]) for j in sorted(F0s)]
    sub = _Compiled(Nr.T @ comp.c, comp.c0 + float(comp.c @ z0), comp.y0, comp.N, blocks, [], comp.offsets, comp.m_full)
    return sub, z0, Nr, {j: Vs[j] for j in sorted(F0s)}


def _nt_scaling(X, S):
    """(G, λ, G⁻¹) with G⁻¹ X G⁻ᵀ = Gᵀ S G = diag(λ)."""
    LX = np.linalg.cholesky(X)
    LS = np.linalg.cholesky(S)
    U, lam, Vt = np.linalg.svd(LS.T @ LX)
    if lam[-1] <= 0:
        raise np.linalg.LinAlgError("singular scaling")
    r = 1.0 / np.sqrt(lam)
    G = (LX @ Vt.T) * r
    Gi = (U.T @ LS.T) * r[:, None]
    return G, lam, Gi


def _scaled_step(lam, d) -> float:
    """Largest α with diag(λ) + α d ⪰ 0."""
    r = 1.0 / np.sqrt(lam)
    lo = np.linalg.eigvalsh((d * r[:, None]) * r[None, :])[0]
    return math.inf if lo >= 0 else -1.0 / lo


def _centred(X, S, ntot, theta=1e-4) -> bool:
    """λ_min(X S) ≥ θ·μ on every block."""
    mu = sum(np.vdot(x, s) for x, s in zip(X, S)) / ntot
    for x, s in zip(X, S):
        try:
            L = np.linalg.cholesky(x)
        except np.linalg.LinAlgError:
            return False
        if np.linalg.eigvalsh(L.T @ s @ L)[0] < theta * mu:
            return False
    return True


def _ipm(comp: _Compiled, gap_tol: float, feas_tol: float, max_iter: int):
    blocks = comp.blocks
    c = comp.c
    nz = c.size
    ntot = sum(b.F0.shape[0] for b in blocks)

    def Fstar(dz, b):
        return np.tensordot(dz[b.idx], b.F, axes=1)

    def Aop(Ys):
        out = np.zeros(nz)
        for b, Y in zip(blocks, Ys):
            out[b.idx] += b.F.reshape(len(b.idx), -1) @ Y.ravel()
        return out

    # Gram check: directions of z that touch no LMI must not improve the objective
    G = np.zeros((nz, nz))
    for b in blocks:
        Fv = b.F.reshape(len(b.idx), -1)
        G[np.ix_(b.idx, b.idx)] += Fv @ Fv.T
    w, V = np.linalg.eigh(G)
    null = w <= 1e-12 * max(w[-1], 1.0)
    if np.any(null):
        cn = V[:, null].T @ c
        if np.abs(cn).max() > 1e-9 * (1 + np.abs(c).max()):
            return "unbounded", np.zeros(nz), None, 0, {"direction": V[:, null] @ cn}
        # restrict z to the range of the Gram matrix
        R = V[:, ~null]
        sub = [
            _Block(b.cidx, np.arange(R.shape[1]), b.F0, np.tensordot(R[b.idx].T, b.F, axes=1))
            for b in blocks
        ]
        sub_comp = _Compiled(R.T @ c, comp.c0, comp.y0, comp.N, sub, comp.const_blocks, comp.offsets, comp.m_full)
        status, z, Xs, it, cert = _ipm(sub_comp, gap_tol, feas_tol, max_iter)
        if cert and "direction" in cert:
            cert["direction"] = R @ cert["direction"]
        return status, R @ z, Xs, it, cert
    tau = [1.0 + max(np.abs(b.F0).max(), 1.0) for b in blocks]
    tau_c = 1.0 + np.abs(c).max(initial=0.0)
    X = [t * tau_c * np.eye(b.F0.shape[0]) / max(1.0, math.sqrt(b.F0.shape[0])) for t, b in zip(tau, blocks)]
    S = [t * np.eye(b.F0.shape[0]) for t, b in zip(tau, blocks)]
    z = np.zeros(nz)

    normc = 1.0 + np.linalg.norm(c)
    normF = [np.linalg.norm(b.F) for b in blocks]
    normF0 = 1.0 + math.sqrt(sum(np.sum(b.F0**2) for b in blocks))
    status = "max_iterations"
    cert = None
    stall = 0
    it = 0
    for it in range(1, max_iter + 1):
        Fz = [b.F0 + Fstar(z, b) for b in blocks]
        Rd = [f - s for f, s in zip(Fz, S)]
        rp = c - Aop(X)
        mu = sum(np.vdot(x, s) for x, s in zip(X, S)) / ntot
        pobj = float(c @ z)
        dobj = -float(sum(np.vdot(b.F0, x) for b, x in zip(blocks, X)))
        # A(X) = c residual relative to the size of the terms summed in A(X):
        # near-ill-posed problems have large dual optima and round-off grows with them
        pinf = np.linalg.norm(rp) / (normc + sum(f * np.linalg.norm(x) for f, x in zip(normF, X)))
        dinf = math.sqrt(sum(np.sum(r**2) for r in Rd)) / normF0
        gap = abs(pobj - dobj)
        log.debug("it %3d pobj=% .9e dobj=% .9e pinf=%.2e dinf=%.2e mu=%.2e", it, pobj + comp.c0, dobj + comp.c0, pinf, dinf, mu)
        if pinf <= feas_tol and dinf <= feas_tol and gap <= 0.5 * gap_tol * max(1.0, abs(pobj + comp.c0)):
            status = "optimal"
            # remove the last round-off in A(X) = c so the reported dual value
            # belongs to a feasible point; the correction X F*(u) X stays inside
            # the range of X, and is kept only if X stays PSD
            H = np.zeros((nz, nz))
            for b, x in zip(blocks, X):
                k = len(b.idx)
                H[np.ix_(b.idx, b.idx)] += (b.F @ x).reshape(k, -1) @ (x @ b.F).reshape(k, -1).T
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", sla.LinAlgWarning)
                    u = sla.solve(0.5 * (H + H.T), rp, assume_a="pos")
            except (np.linalg.LinAlgError, ValueError):
                break
            Xp = [x + x @ Fstar(u, b) @ x for x, b in zip(X, blocks)]
            Xp = [0.5 * (x + x.T) for x in Xp]
            better = np.linalg.norm(c - Aop(Xp)) < np.linalg.norm(rp)
            if better and all(np.linalg.eigvalsh(x)[0] >= 0 for x in Xp):
                X = Xp
            break
        # infeasibility: X ⪰ 0 with A(X) ≈ 0 and <F0, X> < 0
        if dobj > 0:
            ax = np.linalg.norm(Aop(X))
            if dobj > 1e6 and ax / dobj < 1e-9 * normc:
                status = "infeasible"
                cert = {"ray": [x / dobj for x in X]}
                break
        # unboundedness: F*(dz) ⪰ 0 with c·dz < 0
        if pobj < -1e6 * normc:
            dz = z / -pobj
            lo = min(np.linalg.eigvalsh(Fstar(dz, b))[0] for b in blocks)
            if lo > -1e-8:
                status = "unbounded"
                cert = {"direction": dz}
                break

        # Nesterov-Todd scaling per block: with L_X, L_S the Cholesky factors and
        # L_Sᵀ L_X = U Λ Vᵀ, G = L_X V Λ^{-1/2} gives G⁻¹ X G⁻ᵀ = Gᵀ S G = Λ
        try:
            scal = [_nt_scaling(x, s) for x, s in zip(X, S)]
        except np.linalg.LinAlgError:
            status = "ill_posed"
            break
        Ft = [np.einsum("ji,kjl,lm->kim", g, b.F, g, optimize=True) for (g, _, _), b in zip(scal, blocks)]
        M = np.zeros((nz, nz))
        for b, ft in zip(blocks, Ft):
            P = ft.reshape(len(b.idx), -1)
            if len(b.idx) == nz:  # idx is sorted, so this is arange(nz)
                M += P @ P.T
            else:
                M[np.ix_(b.idx, b.idx)] += P @ P.T
        reg = 1e-14 * max(np.abs(np.diag(M)).max(initial=1.0), 1.0)
        try:
            cf = sla.cho_factor(M + reg * np.eye(nz), lower=True, check_finite=False)
            solve_0 = lambda r: sla.cho_solve(cf, r, check_finite=False)
        except np.linalg.LinAlgError:
            lu = sla.lu_factor(M + 1e3 * reg * np.eye(nz))
            solve_0 = lambda r: sla.lu_solve(lu, r)

        def solve_M(r):
            # one refinement step; M is badly conditioned close to the optimum
            x = solve_0(r)
            return x + solve_0(r - M @ x)

        def At(Ys):
            out = np.zeros(nz)
            for b, ft, Y in zip(blocks, Ft, Ys):
                out[b.idx] += ft.reshape(len(b.idx), -1) @ Y.ravel()
            return out

        Rdt = [g.T @ r @ g for (g, _, _), r in zip(scal, Rd)]

        qr = []

        def solve_qr(v, r):
            # (PᵀP) dz = Pᵀ v − r with P the stacked vec(F̃_i); QR of P works
            # with cond(P) where the Cholesky route of M = PᵀP sees cond(P)²
            if not qr:
                rows = []
                for b, ft in zip(blocks, Ft):
                    blk = np.zeros((ft.shape[1] * ft.shape[2], nz))
                    blk[:, b.idx] = ft.reshape(len(b.idx), -1).T
                    rows.append(blk)
                qr.extend(np.linalg.qr(np.vstack(rows)))
            Qf, Rf = qr
            y = sla.solve_triangular(Rf, Qf.T @ v, lower=False)
            w = sla.solve_triangular(Rf, sla.solve_triangular(Rf, r, trans="T", lower=False), lower=False)
            return y - w

        def direction(Rc):
            # scaled complementarity (Λ T + T Λ)/2 = Rc with T = dX̃ + dS̃
            T = [2 * rc / (lam[:, None] + lam[None, :]) for rc, (_, lam, _) in zip(Rc, scal)]
            TR = [t - r for t, r in zip(T, Rdt)]
            target = 1e-3 * feas_tol * normc
            for use_qr in (False, True):
                if use_qr:
                    v = np.concatenate([y.ravel() for y in TR])
                    dz = solve_qr(v, rp)
                else:
                    dz = solve_M(At(TR) - rp)
                for _ in range(2):
                    dSt = [r + np.tensordot(dz[b.idx], ft, axes=1) for r, b, ft in zip(Rdt, blocks, Ft)]
                    dXt = [t - d for t, d in zip(T, dSt)]
                    e = rp - At(dXt)
                    if np.linalg.norm(e) <= target:
                        return dz, dXt, dSt
                    # dz → dz + δ moves A(dX) by −Mδ
                    dz = dz - (solve_qr(np.zeros(v.size), e) if use_qr else solve_M(e))
            dSt = [r + np.tensordot(dz[b.idx], ft, axes=1) for r, b, ft in zip(Rdt, blocks, Ft)]
            dXt = [t - d for t, d in zip(T, dSt)]
            return dz, dXt, dSt

        def steps(dXt, dSt):
            ap = min(_scaled_step(lam, d) for (_, lam, _), d in zip(scal, dXt))
            ad = min(_scaled_step(lam, d) for (_, lam, _), d in zip(scal, dSt))
            return ap, ad

        lam2 = [np.diag(lam**2) for _, lam, _ in scal]
        # predictor
        dz_a, dXt_a, dSt_a = direction([-l2 for l2 in lam2])
        ap, ad = steps(dXt_a, dSt_a)
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_a = sum(
            np.vdot(np.diag(lam) + ap * dx, np.diag(lam) + ad * ds) for (_, lam, _), dx, ds in zip(scal, dXt_a, dSt_a)
        ) / ntot
        sigma = min(1.0, max(0.0, (mu_a / mu) ** 3)) if mu > 0 else 0.0
        # corrector
        Rc = []
        for l2, dx, ds in zip(lam2, dXt_a, dSt_a):
            q = dx @ ds
            Rc.append(sigma * mu * np.eye(l2.shape[0]) - l2 - 0.5 * (q + q.T))
        dz, dXt, dSt = direction(Rc)
        ap, ad = steps(dXt, dSt)
        gamma = 0.98 if it > 3 else 0.9
        ap, ad = min(1.0, gamma * ap), min(1.0, gamma * ad)
        dX = [g @ d @ g.T for (g, _, _), d in zip(scal, dXt)]
        dS = [gi.T @ d @ gi for (_, _, gi), d in zip(scal, dSt)]
        log.debug("    sigma=%.2e ap=%.2e ad=%.2e", sigma, ap, ad)
        if ap < 1e-12 and ad < 1e-12:
            stall += 1
            if stall >= 3:
                status = "ill_posed"
                break
        else:
            stall = 0
        # stay in a wide neighbourhood of the central path: an eigenvalue of X
        # or S racing to zero ahead of mu is lost to round-off and stalls the run
        for _ in range(30):
            Xn = [x + ap * d for x, d in zip(X, dX)]
            Sn = [s + ad * d for s, d in zip(S, dS)]
            Xn = [0.5 * (x + x.T) for x in Xn]
            Sn = [0.5 * (s + s.T) for s in Sn]
            if _centred(Xn, Sn, ntot):
                break
            ap, ad = 0.8 * ap, 0.8 * ad
        X, S = Xn, Sn
        z = z + ad * dz
    return status, z, X, it, cert


def solve(
    problem: SdpProblem,
    gap_tol: float = 1e-7,
    feas_tol: float = 1e-8,
    max_iter: int = 200,
) -> SdpSolution:
    """Solve ``problem``; see :class:`SdpSolution` for the returned fields."""
    sign = 1.0 if problem.sense == "min" else -1.0
    try:
        comp = _compile(problem)
    except _Infeasible as exc:
        return SdpSolution("infeasible", math.nan, math.nan, math.nan, {}, 0, certificate={"equality_residual": exc.resid})

    for ci, F0 in comp.const_blocks:
        lo = np.linalg.eigvalsh(F0)[0] if F0.size else 0.0
        if lo < -feas_tol:
            name = problem.constraints[ci].name
            return SdpSolution(
                "infeasible", math.nan, math.nan, math.nan, {}, 0, certificate={"constant_block": name, "min_eig": lo}
            )

    used = comp
    if comp.blocks:
        status, z, X, iters, cert = _ipm(comp, gap_tol, feas_tol, max_iter)
        if status in ("ill_posed", "max_iterations"):
            # no strictly feasible point: retry on the minimal face
            red = _facial_reduction(comp)
            if red is not None:
                sub, z0, Nr, Vs = red
                if sub.blocks:
                    st2, z2, X2, it2, cert2 = _ipm(sub, gap_tol, feas_tol, max_iter)
                else:
                    st2, z2, X2, it2, cert2 = "optimal", np.zeros(Nr.shape[1]), [], 0, None
                log.debug("facial reduction retry: %s after %d iterations", st2, it2)
                iters += it2
                if st2 == "optimal":
                    status, z, X, cert, used = st2, z0 + Nr @ z2, X2, cert2, sub
    else:
        # nothing left to optimize; objective must be constant on the affine set
        nz = comp.c.size
        if np.abs(comp.c).max(initial=0.0) > 1e-12:
            status, z, X, iters, cert = "unbounded", np.zeros(nz), [], 0, {"direction": -comp.c}
        else:
            status, z, X, iters, cert = "optimal", np.zeros(nz), [], 0, None

    y = comp.y0 + (comp.N @ z if comp.N is not None else z)
    params = {name: y[a:b] for name, (a, b) in comp.offsets.items()}
    values = problem.values_from_params(params)
    pobj = float(comp.c @ z) + comp.c0
    if X:
        dobj = -float(sum(np.vdot(b.F0, x) for b, x in zip(used.blocks, X))) + used.c0
    else:
        dobj = pobj
    duals = {}
    if used is not comp:
        # lift the face-restricted duals back to the full blocks
        lifted = {b.cidx: Vs[j] @ x @ Vs[j].T for (j, b), x in zip(((j, comp.blocks[j]) for j in Vs), X)}
        X = [lifted.get(b.cidx, np.zeros_like(b.F0)) for b in comp.blocks]
    for b, x in zip(comp.blocks, X or []):
        duals[problem.constraints[b.cidx].name] = _derealify(x)
    for ci, F0 in comp.const_blocks:
        n = F0.shape[0] // 2
        duals[problem.constraints[ci].name] = np.zeros((n, n), dtype=complex)
    if status == "infeasible" and cert and "ray" in cert:
        cert = {
            problem.constraints[b.cidx].name: _derealify(r) for b, r in zip(comp.blocks, cert["ray"])
        }
        cert = {"ray": cert}
    primal, dual = sign * pobj, sign * dobj
    sol = SdpSolution(status, primal, dual, abs(primal - dual), values, iters, duals, cert)
    log.debug("sdp %s in %d iterations: primal=%.10g dual=%.10g", status, iters, primal, dual)
    return sol


@dataclass
class CertificateReport:
    feasibility_residuals: dict[str, float]
    dual_residuals: dict[str, float]
    gap: float
    complementarity: float
    verdict: bool

    def summary(self) -> dict:
        return {
            "min_constraint_residual": min(self.feasibility_residuals.values(), default=0.0),
            "gap": self.gap,
            "complementarity": self.complementarity,
            "verdict": "pass" if self.verdict else "fail",
        }


def check_certificate(
    problem: SdpProblem, sol: SdpSolution, gap_tol: float = 1e-7, feas_tol: float = 1e-8
) -> CertificateReport:
    """Re-evaluate every constraint at ``sol.variable_values`` and recompute the gap.

    PSD constraints report their minimum eigenvalue, zero constraints minus
    their largest absolute entry.
    """
    if sol.status != "optimal":
        raise ValueError(f"certificate check needs an optimal solution, got {sol.status!r}")
    values = sol.variable_values
    params = problem.params_from_values(values)
    resid, dres = {}, {}
    comp = 0.0
    for con in problem.constraints:
        m = con.expr.evaluate(params)
        m = 0.5 * (m + m.conj().T)
        if con.kind == "psd":
            resid[con.name] = float(np.linalg.eigvalsh(m)[0])
            z = sol.duals.get(con.name)
            if z is not None:
                dres[con.name] = float(np.linalg.eigvalsh(z)[0])
                comp += float(np.real(np.trace(m @ z)))
        else:
            resid[con.name] = -float(np.abs(m).max(initial=0.0))
    primal = float(problem.objective.evaluate(params)[0, 0].real)
    gap = abs(primal - sol.dual_value)
    ok = all(r >= -feas_tol for r in resid.values()) and gap <= 10 * gap_tol * max(1.0, abs(primal))
    return CertificateReport(resid, dres, gap, comp, ok)


@dataclass
class MeasureResult:
    """A measure value together with the SDP that produced it."""

    value: float
    certificate: dict
    solution: SdpSolution
    problem: SdpProblem

    def check(self, gap_tol: float = 1e-7, feas_tol: float = 1e-8) -> CertificateReport:
        return check_certificate(self.problem, self.solution, gap_tol, feas_tol)

    def __float__(self):
        return float(self.value)


def solve_or_raise(problem: SdpProblem, gap_tol: float = 1e-7, feas_tol: float = 1e-8, max_iter: int = 200):
    sol = solve(problem, gap_tol=gap_tol, feas_tol=feas_tol, max_iter=max_iter)
    if sol.status != "optimal":
        raise SolverError(f"SDP finished with status {sol.status!r}", sol)
    return sol
