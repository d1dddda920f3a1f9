"""Sparse multivariate polynomial arithmetic over a fixed, ordered variable set.

Polynomials are the common currency of the toolkit: Lyapunov candidates,
S-procedure multipliers and vector-field components are all instances of
:class:`Polynomial`. Terms are stored sparsely as a map from dense exponent
tuples to coefficients. Coefficients are ordinarily floats; `fractions.Fraction`
coefficients are supported and stay exact under +, -, * and differentiation
(float mode rounds to nearest according to IEEE double arithmetic).

Monomials are ordered graded-lexicographically: first by total degree, then
lexicographically with earlier variables more significant, so for (x, y):
1 < x < y < x^2 < x*y < y^2 < ...
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

Exponents = tuple[int, ...]


class VarSet:
    """An ordered set of named state variables with stable indices."""

    __slots__ = ("names", "_index")

    def __init__(self, names: Iterable[str]):
        names = tuple(names)
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate variable names in {names}")
        self.names = names
        self._index = {n: i for i, n in enumerate(names)}

    def index(self, name: str) -> int:
        return self._index[name]

    def __len__(self) -> int:
        return len(self.names)

    def __iter__(self):
        return iter(self.names)

    def __eq__(self, other) -> bool:
        return isinstance(other, VarSet) and self.names == other.names

    def __hash__(self) -> int:
        return hash(self.names)

    def __repr__(self) -> str:
        return f"VarSet({list(self.names)!r})"


def monomial_key(exps: Exponents) -> tuple:
    """Graded-lex sort key (earlier variables more significant within a degree)."""
    return (sum(exps), tuple(-e for e in exps))


def monomials_upto(n_vars: int, max_degree: int, parity: str = "none") -> list[Exponents]:
    """All exponent tuples with total degree <= max_degree, graded-lex ordered.

    parity="even"/"odd" keeps only monomials of even/odd total degree.
    """
    out: list[Exponents] = []

    def rec(prefix: list[int], remaining: int, pos: int):
        if pos == n_vars - 1:
            prefix.append(remaining)
            out.append(tuple(prefix))
            prefix.pop()
            return
        for e in range(remaining + 1):
            prefix.append(e)
            rec(prefix, remaining - e, pos + 1)
            prefix.pop()

    degrees = range(max_degree + 1)
    if parity == "even":
        degrees = range(0, max_degree + 1, 2)
    elif parity == "odd":
        degrees = range(1, max_degree + 1, 2)
    elif parity != "none":
        raise ValueError(f"unknown parity {parity!r}")
    for d in degrees:
        start = len(out)
        rec([], d, 0)
        out[start:] = sorted(out[start:], key=monomial_key)
    return out


class Polynomial:
    """Immutable sparse polynomial over a :class:`VarSet`.

    Canonical form: no stored term has a zero coefficient. The zero polynomial
    has an empty term map and degree 0 by convention.
    """

    __slots__ = ("varset", "terms")

    def __init__(self, varset: VarSet, terms: Mapping[Exponents, float] | None = None):
        self.varset = varset
        clean = {}
        if terms:
            n = len(varset)
            for exps, c in terms.items():
                if len(exps) != n:
                    raise ValueError(f"exponent tuple {exps} has wrong length for {varset}")
                if c != 0:
                    clean[tuple(exps)] = c
        self.terms = clean

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, varset: VarSet) -> "Polynomial":
        return cls(varset)

    @classmethod
    def constant(cls, varset: VarSet, c) -> "Polynomial":
        return cls(varset, {(0,) * len(varset): c})

    @classmethod
    def variable(cls, varset: VarSet, name: str) -> "Polynomial":
        e = [0] * len(varset)
        e[varset.index(name)] = 1
        return cls(varset, {tuple(e): 1.0})

    @classmethod
    def monomial(cls, varset: VarSet, exps: Exponents, c=1.0) -> "Polynomial":
        return cls(varset, {tuple(exps): c})

    # -- basic queries -------------------------------------------------------

    @property
    def degree(self) -> int:
        if not self.terms:
            return 0
        return max(sum(e) for e in self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def is_even(self) -> bool:
        return all(sum(e) % 2 == 0 for e in self.terms)

    def is_odd(self) -> bool:
        return all(sum(e) % 2 == 1 for e in self.terms)

    def coefficient(self, exps: Exponents):
        return self.terms.get(tuple(exps), 0.0)

    def max_coeff(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Polynomial)
            and self.varset == other.varset
            and self.terms == other.terms
        )

    def __hash__(self):
        return hash((self.varset, frozenset(self.terms.items())))

    # -- arithmetic ----------------------------------------------------------

    def _check(self, other: "Polynomial"):
        if self.varset != other.varset:
            raise ValueError("polynomials have different variable sets")

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            return self + Polynomial.constant(self.varset, other)
        self._check(other)
        terms = dict(self.terms)
        for e, c in other.terms.items():
            terms[e] = terms.get(e, 0) + c
        return Polynomial(self.varset, terms)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.varset, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(self.varset, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            if other == 0:
                return Polynomial.zero(self.varset)
            return Polynomial(self.varset, {e: c * other for e, c in self.terms.items()})
        self._check(other)
        terms: dict[Exponents, float] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                terms[e] = terms.get(e, 0) + c1 * c2
        return Polynomial(self.varset, terms)

    __rmul__ = __mul__

    def __truediv__(self, c):
        if isinstance(c, Polynomial):
            raise TypeError("polynomial division is not supported")
        if c == 0:
            raise ZeroDivisionError("division of polynomial by zero")
        return Polynomial(self.varset, {e: v / c for e, v in self.terms.items()})

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("polynomial power requires a nonnegative integer")
        result = Polynomial.constant(self.varset, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base if k > 1 else base
            k >>= 1
        return result

    # -- evaluation ----------------------------------------------------------

    def evaluate(self, point: Sequence[float]) -> float:
        if len(point) != len(self.varset):
            raise ValueError(
                f"point has {len(point)} coordinates, expected {len(self.varset)}"
            )
        total = 0.0
        for exps, c in self.terms.items():
            v = c
            for x, e in zip(point, exps):
                if e:
                    v *= x**e
            total += v
        return total

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        """Vectorized evaluation on an (m, n_vars) array of points."""
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != len(self.varset):
            raise ValueError(f"expected (m, {len(self.varset)}) array, got {points.shape}")
        total = np.zeros(points.shape[0])
        for exps, c in self.terms.items():
            v = np.full(points.shape[0], float(c))
            for i, e in enumerate(exps):
                if e:
                    v *= points[:, i] ** e
            total += v
        return total

    # -- calculus ------------------------------------------------------------

    def diff(self, var: int | str) -> "Polynomial":
        i = var if isinstance(var, int) else self.varset.index(var)
        terms: dict[Exponents, float] = {}
        for exps, c in self.terms.items():
            e = exps[i]
            if e == 0:
                continue
            new = list(exps)
            new[i] = e - 1
            key = tuple(new)
            terms[key] = terms.get(key, 0) + c * e
        return Polynomial(self.varset, terms)

    def gradient(self) -> list["Polynomial"]:
        return [self.diff(i) for i in range(len(self.varset))]

    # -- structural transforms ------------------------------------------------

    def substitute(self, substitutions: Mapping[str, "Polynomial"]) -> "Polynomial":
        """Replace variables by polynomials; unnamed variables map to themselves.

        The substituting polynomials must all share one variable set, which
        becomes the variable set of the result.
        """
        if not substitutions:
            return self
        target = next(iter(substitutions.values())).varset
        images = []
        for name in self.varset:
            if name in substitutions:
                img = substitutions[name]
                if img.varset != target:
                    raise ValueError("substitution polynomials must share one varset")
            else:
                img = Polynomial.variable(target, name)
            images.append(img)
        result = Polynomial.zero(target)
        for exps, c in self.terms.items():
            term = Polynomial.constant(target, c)
            for img, e in zip(images, exps):
                if e:
                    term = term * img**e
            result = result + term
        return result

    def rename(self, varset: VarSet) -> "Polynomial":
        """Reinterpret over a varset with the same arity (positional identity)."""
        if len(varset) != len(self.varset):
            raise ValueError("varset arity mismatch")
        return Polynomial(varset, self.terms)

    # -- text serialization ----------------------------------------------------

    def to_text(self) -> str:
        """Sorted term list, e.g. ``2.0 + -1.5*x^2*y``.

        Coefficients are printed with `repr` so the float round-trip is
        bit-identical. Terms are joined with ' + ' in graded-lex order.
        """
        if not self.terms:
            return "0"
        parts = []
        for exps in sorted(self.terms, key=monomial_key):
            c = self.terms[exps]
            factors = [repr(float(c)) if isinstance(c, float) else repr(c)]
            for name, e in zip(self.varset, exps):
                if e == 1:
                    factors.append(name)
                elif e > 1:
                    factors.append(f"{name}^{e}")
            parts.append("*".join(factors))
        return " + ".join(parts)

    @classmethod
    def parse(cls, text: str, varset: VarSet) -> "Polynomial":
        text = text.strip()
        if text in ("", "0"):
            return cls.zero(varset)
        terms: dict[Exponents, float] = {}
        for part in text.split(" + "):
            factors = part.strip().split("*")
            c = float(factors[0])
            exps = [0] * len(varset)
            for f in factors[1:]:
                if "^" in f:
                    name, e = f.split("^")
                    exps[varset.index(name)] += int(e)
                else:
                    exps[varset.index(f)] += 1
            key = tuple(exps)
            terms[key] = terms.get(key, 0.0) + c
        return cls(varset, terms)

    def __repr__(self) -> str:
        return f"Polynomial({self.to_text()!r})"


@dataclass(frozen=True)
class PolyVectorField:
    """Polynomial dynamics: one component polynomial per state variable."""

    varset: VarSet
    components: tuple[Polynomial, ...]

    def __post_init__(self):
        if len(self.components) != len(self.varset):
            raise ValueError("one component per variable is required")
        for p in self.components:
            if p.varset != self.varset:
                raise ValueError("all components must share the field's varset")
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def degree(self) -> int:
        return max(p.degree for p in self.components)

    def __call__(self, point: Sequence[float]) -> np.ndarray:
        return np.array([p.evaluate(point) for p in self.components])

    def is_odd(self) -> bool:
        return all(p.is_odd() or p.is_zero() for p in self.components)


def lie_derivative(V: Polynomial, f: PolyVectorField) -> Polynomial:
    """Derivative of V along f: sum_i (dV/dx_i) * f_i."""
    if V.varset != f.varset:
        raise ValueError("V and f have different variable sets")
    result = Polynomial.zero(V.varset)
    for i, fi in enumerate(f.components):
        dVi = V.diff(i)
        if not dVi.is_zero():
            result = result + dVi * fi
    return result


def linear_part(f: PolyVectorField, tol: float = 0.0) -> np.ndarray:
    """Jacobian at the origin: A[i][j] = coefficient of x_j in f_i.

    Raises if any component carries a constant term larger than tol (the
    origin must be an equilibrium).
    """
    n = len(f.varset)
    zero = (0,) * n
    A = np.zeros((n, n))
    for i, p in enumerate(f.components):
        c0 = p.terms.get(zero, 0.0)
        if abs(c0) > tol:
            raise ValueError(
                f"component {f.varset.names[i]} has nonzero constant term {c0}"
            )
        for j in range(n):
            e = [0] * n
            e[j] = 1
            A[i, j] = p.terms.get(tuple(e), 0.0)
    return A


def scale(p: Polynomial, c: float) -> Polynomial:
    """p / c (used for level-set normalization). c must be nonzero."""
    return p / c


def norm_power(varset: VarSet, d: int) -> Polynomial:
    """(x_1^2 + ... + x_n^2)^d; the S-procedure origin-validity factor."""
    n = len(varset)
    s = Polynomial(varset, {tuple(2 if j == i else 0 for j in range(n)): 1.0 for i in range(n)})
    return s**d


def map_components(
    varset: VarSet, exprs: Iterable[Polynomial]
) -> PolyVectorField:
    return PolyVectorField(varset, tuple(exprs))
