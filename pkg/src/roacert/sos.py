"""Sum-of-squares program construction and compilation to one SDP.

An :class:`SosProgram` collects polynomial unknowns (coefficient vectors),
scalar unknowns, PSD matrix unknowns, SOS membership assertions, point-value
equalities and parity restrictions, and compiles everything into a single
standard-form semidefinite program over Gram matrices and free coefficients.

Each SOS assertion owns one :class:`GramBlock`. When the asserted
polynomial's possible support is entirely of even total degree, the monomial
basis is split into even and odd sub-blocks (a sound symmetry reduction: the
Gram matrix of a sign-symmetric polynomial can always be chosen block
diagonal across parity classes). Basis monomials are further pruned by
half-degree and per-variable half-degree bounds derived from the support, a
relaxation of the Newton polytope rule that never cuts off decompositions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .poly import Polynomial, VarSet, monomial_key, monomials_upto, norm_power
from .sdp import SQRT2, ColKey, SdpProblem, SdpSolution, solve, svec_index

DEFAULT_EPSILON = 1e-6  # strict-positivity shift coefficient
GRAM_RESIDUAL_TOL = 1e-6  # round-trip tolerance on the (scale-normalized) identity


class SosError(ValueError):
    pass


def gram_basis(varset: VarSet, half_degree: int, parity: str = "none") -> list[tuple[int, ...]]:
    """Graded-lex monomial basis of total degree <= half_degree.

    parity "none" keeps every monomial; "even"/"odd" keep one parity class
    (the two classes together parameterize Gram decompositions of
    sign-symmetric polynomials).
    """
    if half_degree < 0:
        raise ValueError("half_degree must be nonnegative")
    return monomials_upto(len(varset), half_degree, parity=parity)


@dataclass
class PolyExpr:
    """Polynomial with coefficients affine in scalar decision variables."""

    varset: VarSet
    const: Polynomial
    lin: dict[ColKey, Polynomial] = field(default_factory=dict)

    @classmethod
    def known(cls, p: Polynomial) -> "PolyExpr":
        return cls(p.varset, p)

    def _merge(self, other: "PolyExpr", sign: float) -> "PolyExpr":
        lin = dict(self.lin)
        for k, p in other.lin.items():
            lin[k] = lin.get(k, Polynomial.zero(self.varset)) + sign * p
        return PolyExpr(self.varset, self.const + sign * other.const, lin)

    def __add__(self, other):
        if isinstance(other, Polynomial):
            other = PolyExpr.known(other)
        if isinstance(other, PolyExpr):
            return self._merge(other, 1.0)
        return self + Polynomial.constant(self.varset, other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Polynomial):
            other = PolyExpr.known(other)
        if isinstance(other, PolyExpr):
            return self._merge(other, -1.0)
        return self - Polynomial.constant(self.varset, other)

    def __neg__(self):
        return PolyExpr(
            self.varset, -self.const, {k: -p for k, p in self.lin.items()}
        )

    def __mul__(self, g):
        """Multiply by a known polynomial or scalar (keeps affinity)."""
        if isinstance(g, PolyExpr):
            raise SosError("product of two unknown expressions is not affine")
        return PolyExpr(
            self.varset,
            self.const * g,
            {k: p * g for k, p in self.lin.items()},
        )

    __rmul__ = __mul__

    def map_linear(self, fn) -> "PolyExpr":
        """Apply a linear polynomial operator to every coefficient polynomial."""
        return PolyExpr(
            self.varset, fn(self.const), {k: fn(p) for k, p in self.lin.items()}
        )

    def support(self) -> set[tuple[int, ...]]:
        supp = set(self.const.terms)
        for p in self.lin.values():
            supp.update(p.terms)
        return supp

    def coefficient(self, mono) -> tuple[float, dict[ColKey, float]]:
        """Constant part and per-variable coefficients of one monomial."""
        lin = {}
        for k, p in self.lin.items():
            c = p.terms.get(mono, 0.0)
            if c != 0.0:
                lin[k] = c
        return self.const.terms.get(mono, 0.0), lin

    def value(self, values: dict[ColKey, float]) -> Polynomial:
        p = self.const
        for k, coefpoly in self.lin.items():
            p = p + values.get(k, 0.0) * coefpoly
        return p

    def evaluate_expr(self, point) -> tuple[float, dict[ColKey, float]]:
        """Value at a point as (constant, affine coefficients)."""
        lin = {}
        for k, p in self.lin.items():
            v = p.evaluate(point)
            if v != 0.0:
                lin[k] = v
        return self.const.evaluate(point), lin


@dataclass
class PolyUnknown:
    name: str
    monos: tuple[tuple[int, ...], ...]
    cols: tuple[ColKey, ...]
    degree: int
    parity: str
    expr: PolyExpr
    restricted_parity: str | None = None


@dataclass
class MatrixUnknown:
    name: str
    n: int
    block: int


@dataclass
class GramBlock:
    """Handle for one SOS assertion: sub-block bases + scale normalization."""

    name: str
    sub_blocks: list[tuple[list[tuple[int, ...]], int]]  # (basis, sdp block id)
    scale: float
    expr: PolyExpr  # the asserted expression divided by `scale`

    @property
    def basis_sizes(self) -> list[int]:
        return [len(b) for b, _ in self.sub_blocks]


class SosProgram:
    """Declarative SOS/positivity program over one variable set."""

    def __init__(self, varset: VarSet, prune_basis: bool = True, split_parity: bool = True):
        self.varset = varset
        self.prune_basis = prune_basis
        self.split_parity = split_parity
        self.prob = SdpProblem()
        self.scalars: dict[str, ColKey] = {}
        self.polys: dict[str, PolyUnknown] = {}
        self.matrices: dict[str, MatrixUnknown] = {}
        self.gram_blocks: list[GramBlock] = []
        self._obj: dict[ColKey, float] = {}
        self._maximize = False

    # -- unknowns -------------------------------------------------------------

    def new_scalar(self, name: str) -> ColKey:
        if name in self.scalars:
            raise SosError(f"scalar {name!r} already declared")
        col = self.prob.new_free()
        self.scalars[name] = col
        return col

    def scalar_expr(self, col: ColKey) -> PolyExpr:
        one = Polynomial.constant(self.varset, 1.0)
        return PolyExpr(self.varset, Polynomial.zero(self.varset), {col: one})

    def new_poly(self, name: str, degree: int, parity: str = "none") -> PolyUnknown:
        """Free polynomial unknown with one scalar variable per monomial."""
        if name in self.polys:
            raise SosError(f"polynomial {name!r} already declared")
        monos = tuple(monomials_upto(len(self.varset), degree, parity=parity))
        cols = tuple(self.prob.new_free() for _ in monos)
        lin = {c: Polynomial.monomial(self.varset, m) for m, c in zip(monos, cols)}
        unk = PolyUnknown(
            name, monos, cols, degree, parity,
            PolyExpr(self.varset, Polynomial.zero(self.varset), lin),
        )
        self.polys[name] = unk
        return unk

    def new_psd_matrix(self, name: str, n: int) -> MatrixUnknown:
        """Symmetric PSD matrix unknown (used for the ellipsoid shape matrix)."""
        if name in self.matrices:
            raise SosError(f"matrix {name!r} already declared")
        block = self.prob.new_psd_block(n)
        unk = MatrixUnknown(name, n, block)
        self.matrices[name] = unk
        return unk

    def quadratic_form(self, M: MatrixUnknown) -> PolyExpr:
        """x' M x as an expression in M's svec coordinates."""
        lin: dict[ColKey, Polynomial] = {}
        n = len(self.varset)
        if M.n != n:
            raise SosError("matrix dimension must match the variable count")
        for j in range(n):
            for i in range(j + 1):
                key = ("s", M.block, svec_index(i, j))
                e = [0] * n
                e[i] += 1
                e[j] += 1
                coeff = 1.0 if i == j else SQRT2  # 2*Q_ij with Q_ij = svec/sqrt2
                lin[key] = Polynomial.monomial(self.varset, tuple(e), coeff)
        return PolyExpr(self.varset, Polynomial.zero(self.varset), lin)

    def trace_terms(self, M: MatrixUnknown) -> dict[ColKey, float]:
        return {("s", M.block, svec_index(i, i)): 1.0 for i in range(M.n)}

    # -- assertions -------------------------------------------------------------

    def _as_expr(self, p) -> PolyExpr:
        if isinstance(p, PolyUnknown):
            return p.expr
        if isinstance(p, Polynomial):
            return PolyExpr.known(p)
        if isinstance(p, PolyExpr):
            return p
        raise SosError(f"cannot interpret {type(p).__name__} as a polynomial expression")

    def _gram_candidate_basis(self, support) -> tuple[list, str]:
        n = len(self.varset)
        if not support:
            return [], "none"
        degs = [sum(m) for m in support]
        dmax, dmin = max(degs), min(degs)
        hi = dmax // 2
        lo = (dmin + 1) // 2
        if self.prune_basis:
            caps = [max(m[i] for m in support) // 2 for i in range(n)]
        else:
            caps = [hi] * n
            lo = 0
        cand = [
            m
            for m in monomials_upto(n, hi)
            if sum(m) >= lo and all(m[i] <= caps[i] for i in range(n))
        ]
        parity = "even" if all(d % 2 == 0 for d in degs) else "none"
        return cand, parity

    def assert_sos(self, p, name: str = "") -> GramBlock:
        """Assert that the expression is a sum of squares.

        Raises :class:`SosError` when the known part's top total degree is odd
        (such a polynomial can never be SOS); odd-degree monomials reachable
        only through unknown coefficients are forced to zero by the generated
        coefficient-matching equalities instead.
        """
        expr = self._as_expr(p)
        support = expr.support()
        name = name or f"sos{len(self.gram_blocks)}"

        if support:
            dmax = max(sum(m) for m in support)
            const_max = max((sum(m) for m in expr.const.terms), default=-1)
            if dmax % 2 == 1 and const_max == dmax:
                raise SosError(
                    f"assertion {name!r}: known part has odd degree {dmax}"
                )

        # scale-normalize: SOS membership is invariant under positive scaling
        scale = max(
            expr.const.max_coeff(),
            max((p.max_coeff() for p in expr.lin.values()), default=0.0),
        )
        scale = scale if scale > 0 else 1.0
        nexpr = expr * (1.0 / scale)

        cand, parity = self._gram_candidate_basis(support)
        if parity == "even" and self.split_parity:
            bases = [
                [m for m in cand if sum(m) % 2 == 0],
                [m for m in cand if sum(m) % 2 == 1],
            ]
            bases = [b for b in bases if b]
        else:
            bases = [cand] if cand else []

        sub_blocks = []
        gram_cols: dict[tuple[int, ...], list[tuple[ColKey, float]]] = {}
        for basis in bases:
            blk = self.prob.new_psd_block(len(basis))
            sub_blocks.append((basis, blk))
            for a in range(len(basis)):
                for b in range(a, len(basis)):
                    mono = tuple(x + y for x, y in zip(basis[a], basis[b]))
                    # z_a z_b contributes (2 - delta_ab) Q_ab; svec = sqrt2*Q offdiag
                    w = 1.0 if a == b else SQRT2
                    gram_cols.setdefault(mono, []).append(
                        (("s", blk, svec_index(a, b)), w)
                    )

        block = GramBlock(name, sub_blocks, scale, nexpr)
        self.gram_blocks.append(block)

        # coefficient matching on the union of supports
        for mono in sorted(set(support) | set(gram_cols), key=monomial_key):
            c0, lin = nexpr.coefficient(mono)
            row: dict[ColKey, float] = {}
            for col, w in gram_cols.get(mono, ()):
                row[col] = row.get(col, 0.0) + w
            for col, v in lin.items():
                row[col] = row.get(col, 0.0) - v
            self.prob.add_eq(row, c0)
        return block

    def assert_strict_sos(self, p, eps: float = DEFAULT_EPSILON, name: str = "") -> GramBlock:
        """Assert p - eps*||x||^2 in SOS (strict positive definiteness)."""
        if eps <= 0:
            raise SosError("eps must be positive")
        expr = self._as_expr(p)
        return self.assert_sos(expr - eps * norm_power(self.varset, 1), name=name)

    def assert_point_value(self, p, point, value) -> None:
        """Pin the expression's value at a point to a constant or a scalar unknown."""
        expr = self._as_expr(p)
        if len(point) != len(self.varset):
            raise SosError("point length must match the variable count")
        c0, lin = expr.evaluate_expr(point)
        row = dict(lin)
        if isinstance(value, tuple):  # a scalar unknown's column key
            row[value] = row.get(value, 0.0) - 1.0
            self.prob.add_eq(row, -c0)
        else:
            self.prob.add_eq(row, float(value) - c0)

    def restrict_parity(self, unknown: PolyUnknown, parity: str = "even") -> int:
        """Zero every coefficient of the wrong parity; returns the count zeroed."""
        if parity not in ("even", "odd"):
            raise SosError("parity must be 'even' or 'odd'")
        want = 0 if parity == "even" else 1
        count = 0
        for mono, col in zip(unknown.monos, unknown.cols):
            if sum(mono) % 2 != want:
                self.prob.add_eq({col: 1.0}, 0.0)
                count += 1
        unknown.restricted_parity = parity
        return count

    def add_linear_eq(self, coeffs: dict[ColKey, float], rhs: float) -> None:
        self.prob.add_eq(coeffs, rhs)

    def add_upper_bound(self, col: ColKey, bound: float) -> None:
        """col <= bound via a nonnegative slack."""
        slack = self.prob.new_nonneg()
        self.prob.add_eq({col: 1.0, slack: 1.0}, bound)

    def set_objective(self, terms: dict[ColKey, float], maximize: bool = False) -> None:
        self._obj = dict(terms)
        self._maximize = maximize

    # -- solving ---------------------------------------------------------------

    def compile(self) -> SdpProblem:
        sign = -1.0 if self._maximize else 1.0
        self.prob.objective = {k: sign * v for k, v in self._obj.items()}
        return self.prob

    def solve(self, solver: str = "auto", residual_tol: float = GRAM_RESIDUAL_TOL,
              **opts) -> "SosSolution":
        prob = self.compile()
        raw = solve(prob, solver=solver, **opts)
        sol = SosSolution(self, raw)
        if raw.ok and self._maximize and raw.objective is not None:
            raw.objective = -raw.objective
        if raw.ok:
            worst = sol.max_gram_residual()
            if worst > residual_tol:
                raw.status = "numerical_failure"
                raw.diagnostics = f"gram residual {worst:.3e} exceeds {residual_tol:.1e}"
        return sol

    @property
    def n_decision_vars(self) -> int:
        return self.prob.n_vars


class SosSolution:
    """Solved program: value extraction plus independent round-trip checks."""

    def __init__(self, prog: SosProgram, raw: SdpSolution):
        self.prog = prog
        self.raw = raw
        self._values: dict[ColKey, float] = {}
        if raw.ok:
            for name, col in prog.scalars.items():
                self._values[col] = raw.free[col[1]]
            for unk in prog.polys.values():
                for col in unk.cols:
                    self._values[col] = raw.free[col[1]]
            for m in prog.matrices.values():
                M = raw.psd[m.block]
                for j in range(m.n):
                    for i in range(j + 1):
                        k = ("s", m.block, svec_index(i, j))
                        v = M[i, j] if i == j else SQRT2 * M[i, j]
                        self._values[k] = v

    @property
    def status(self) -> str:
        return self.raw.status

    @property
    def ok(self) -> bool:
        return self.raw.ok

    @property
    def objective(self) -> float | None:
        return self.raw.objective

    def value(self, col: ColKey) -> float:
        return self._values[col]

    def poly(self, unknown: PolyUnknown, zero_tol: float = 0.0) -> Polynomial:
        want = {"even": 0, "odd": 1}.get(unknown.restricted_parity)
        terms = {}
        for mono, col in zip(unknown.monos, unknown.cols):
            if want is not None and sum(mono) % 2 != want:
                continue  # pinned to zero; read back exactly
            c = self.raw.free[col[1]]
            if abs(c) > zero_tol:
                terms[mono] = c
        return Polynomial(self.prog.varset, terms)

    def matrix(self, unknown: MatrixUnknown) -> np.ndarray:
        return self.raw.psd[unknown.block]

    def gram(self, block: GramBlock) -> list[tuple[list, np.ndarray]]:
        """(basis, Q) pairs with p(x) = sum of z'Qz over sub-blocks."""
        return [(basis, block.scale * self.raw.psd[b]) for basis, b in block.sub_blocks]

    def gram_polynomial(self, block: GramBlock) -> Polynomial:
        """Reconstruct the asserted polynomial from its Gram matrices."""
        total = Polynomial.zero(self.prog.varset)
        for basis, Q in self.gram(block):
            terms: dict[tuple, float] = {}
            for a in range(len(basis)):
                for c in range(len(basis)):
                    mono = tuple(x + y for x, y in zip(basis[a], basis[c]))
                    terms[mono] = terms.get(mono, 0.0) + Q[a, c]
            total = total + Polynomial(self.prog.varset, terms)
        return total

    def asserted_polynomial(self, block: GramBlock) -> Polynomial:
        """The asserted expression evaluated at the solution."""
        return block.scale * block.expr.value(self._values)

    def gram_residual(self, block: GramBlock) -> float:
        """Coefficient round-trip residual, relative to the assertion's scale."""
        if not self.raw.ok:
            return math.inf
        diff = self.gram_polynomial(block) - self.asserted_polynomial(block)
        return diff.max_coeff() / block.scale

    def max_gram_residual(self) -> float:
        return max((self.gram_residual(b) for b in self.prog.gram_blocks), default=0.0)
