"""Sparse multivariate polynomials in named counting variables.

Matrix entries of a process carry factors such as ``0.5 * w0**2``.  A
:class:`Poly` maps monomials to real coefficients, where a monomial is a
sorted tuple of ``(name, exponent)`` pairs with positive exponents.  The
empty monomial ``()`` is the constant term.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from numbers import Number

Monomial = tuple[tuple[str, int], ...]

ONE: Monomial = ()


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    exps = dict(a)
    for name, e in b:
        exps[name] = exps.get(name, 0) + e
    return tuple(sorted(exps.items()))


class Poly:
    """Immutable polynomial with float coefficients.

    Exact zeros are dropped on construction so that structural sparsity of a
    matrix is preserved through additions that cancel exactly.
    """

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[Monomial, float] | None = None):
        self._terms: dict[Monomial, float] = {
            m: float(c) for m, c in (terms or {}).items() if c != 0
        }
        self._hash = None

    @classmethod
    def const(cls, c: float) -> Poly:
        return cls({ONE: c})

    @classmethod
    def var(cls, name: str, exponent: int = 1, coeff: float = 1.0) -> Poly:
        if exponent < 0:
            raise ValueError("negative exponent")
        mono = ((name, exponent),) if exponent else ONE
        return cls({mono: coeff})

    @classmethod
    def monomial(cls, exps: Mapping[str, int], coeff: float = 1.0) -> Poly:
        mono = tuple(sorted((n, int(e)) for n, e in exps.items() if e))
        if any(e < 0 for _, e in mono):
            raise ValueError("negative exponent")
        return cls({mono: coeff})

    @property
    def terms(self) -> dict[Monomial, float]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(m == ONE for m in self._terms)

    @property
    def constant(self) -> float:
        return self._terms.get(ONE, 0.0)

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(n for m in self._terms for n, _ in m)

    def degree(self, name: str | None = None) -> int:
        """Maximum exponent of ``name``, or maximum total degree if ``None``."""
        best = 0
        for m in self._terms:
            if name is None:
                d = sum(e for _, e in m)
            else:
                d = dict(m).get(name, 0)
            best = max(best, d)
        return best

    def __call__(self, values: Mapping[str, complex] | None = None) -> complex | float:
        return self.evaluate(values)

    def evaluate(self, values: Mapping[str, complex] | None = None) -> complex | float:
        """Evaluate with the given bindings; unbound variables default to 1."""
        values = values or {}
        total = 0.0
        for m, c in self._terms.items():
            v = c
            for name, e in m:
                x = values.get(name, 1.0)
                v = v * x**e
            total = total + v
        return total

    def substitute(self, values: Mapping[str, float]) -> Poly:
        """Bind some variables to numbers, keeping the others symbolic."""
        out: dict[Monomial, float] = {}
        for m, c in self._terms.items():
            keep = []
            for name, e in m:
                if name in values:
                    c = c * values[name] ** e
                else:
                    keep.append((name, e))
            key = tuple(keep)
            out[key] = out.get(key, 0.0) + c
        return Poly(out)

    def _coerce(self, other) -> Poly:
        if isinstance(other, Poly):
            return other
        if isinstance(other, Number):
            return Poly.const(float(other))
        return NotImplemented

    def __add__(self, other) -> Poly:
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for m, c in other._terms.items():
            out[m] = out.get(m, 0.0) + c
        return Poly(out)

    __radd__ = __add__

    def __neg__(self) -> Poly:
        return Poly({m: -c for m, c in self._terms.items()})

    def __sub__(self, other) -> Poly:
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other) -> Poly:
        return (-self) + other

    def __mul__(self, other) -> Poly:
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out: dict[Monomial, float] = {}
        for ma, ca in self._terms.items():
            for mb, cb in other._terms.items():
                m = _mono_mul(ma, mb)
                out[m] = out.get(m, 0.0) + ca * cb
        return Poly(out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> Poly:
        if n < 0:
            raise ValueError("negative power")
        result = Poly.const(1.0)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other) -> bool:
        other = self._coerce(other)
        if other is NotImplemented:
            return False
        return self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def isclose(self, other: Poly, atol: float = 1e-12) -> bool:
        """Coefficient-wise comparison within ``atol``."""
        keys = set(self._terms) | set(other._terms)
        return all(
            abs(self._terms.get(k, 0.0) - other._terms.get(k, 0.0)) <= atol for k in keys
        )

    def __repr__(self) -> str:
        if not self._terms:
            return "Poly(0)"
        parts = []
        for m, c in sorted(self._terms.items()):
            mono = "*".join(f"{n}^{e}" if e > 1 else n for n, e in m)
            parts.append(f"{c:g}*{mono}" if mono else f"{c:g}")
        return "Poly(" + " + ".join(parts) + ")"


def poly_sum(polys: Iterable[Poly]) -> Poly:
    out: dict[Monomial, float] = {}
    for p in polys:
        for m, c in p.items():
            out[m] = out.get(m, 0.0) + c
    return Poly(out)
