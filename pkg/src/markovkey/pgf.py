"""Probability generating functions of absorbing processes and their residues.

The PGF ``f(z) = sum_t p_t z**t`` of a process is rational in ``z``.  Writing
``f_j`` for the PGF when started from state ``j``, the vector ``f`` spans the
null space of ``z M^T + diag(I) - 1`` once every terminal component is
pinned to 1.  That linear system is solved here by fraction-free (Bareiss)
elimination over integer polynomials, so inputs given as doubles are handled
exactly until the final demotion to floating point for root finding.

From the simple poles ``z_i`` and residues ``r_i`` of ``f``:

    p_t      = -sum_i r_i / z_i**(t+1)
    E[T]     = -sum_i r_i / (1 - z_i)**2
    P(T<=t)  =  sum_i r_i (1 - z_i**(-t-1)) / (1 - z_i)
    E[T^2]   =  sum_i r_i (1 + z_i) / (1 - z_i)**3

These hold for ``t > t0 = deg(num) - deg(den)``; the first ``t0 + 1``
coefficients are taken from the power series of ``f`` and the formulas are
corrected by the difference.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm

import mpmath
import numpy as np
from numpy.polynomial import polynomial as P
from sympy.polys.densearith import dup_exquo, dup_mul, dup_sub
from sympy.polys.densebasic import dup_strip
from sympy.polys.domains import ZZ, ZZ_I
from sympy.polys.euclidtools import dup_inner_gcd

from .exceptions import (
    DegenerateNullSpace,
    MultiplePoleDetected,
    NonTerminating,
    ResidualImaginary,
)
from .markov import CountedMatrix

POLE_CLUSTER_TOL = 1e-8
UNIT_ROOT_TOL = 1e-9
IMAG_TOL = 1e-9
NORMALIZATION_TOL = 1e-9

__all__ = [
    "Polynomial",
    "RationalFunction",
    "PoleSet",
    "pgf",
    "poles_and_residues",
    "pmf",
    "cdf",
    "mean",
    "variance",
    "second_moment",
]


class Polynomial:
    """Dense complex polynomial, coefficients lowest degree first."""

    __slots__ = ("coef",)

    def __init__(self, coef):
        c = np.atleast_1d(np.asarray(coef, dtype=complex))
        nz = np.flatnonzero(c)
        self.coef = c[: nz[-1] + 1] if nz.size else np.zeros(1, dtype=complex)

    @property
    def degree(self) -> int:
        return len(self.coef) - 1 if np.any(self.coef) else -1

    def is_zero(self) -> bool:
        return self.degree < 0

    def __call__(self, z):
        return P.polyval(z, self.coef)

    def deriv(self) -> Polynomial:
        return Polynomial(P.polyder(self.coef)) if len(self.coef) > 1 else Polynomial([0])

    def roots(self) -> np.ndarray:
        if self.degree < 1:
            return np.zeros(0, dtype=complex)
        # companion-matrix eigenvalues; np.roots wants highest degree first
        return np.roots(self.coef[::-1]).astype(complex)

    def __repr__(self) -> str:
        return f"Polynomial({np.array2string(self.coef, precision=6)})"


@dataclass(frozen=True)
class RationalFunction:
    """``numerator / denominator``, normalized so that ``denominator(0) == 1``.

    ``exact`` optionally holds integer (or Gaussian-integer) coefficient
    pairs ``(re, im)``, lowest degree first, for numerator and denominator
    sharing one common scale.  When present they are used to refine poles
    and residues in extended precision.
    """

    numerator: Polynomial
    denominator: Polynomial
    exact: tuple[tuple[tuple[int, int], ...], tuple[tuple[int, int], ...]] | None = field(
        default=None, compare=False, repr=False
    )

    def __post_init__(self):
        if self.denominator.is_zero():
            raise ZeroDivisionError("zero denominator")

    def __call__(self, z):
        return self.numerator(z) / self.denominator(z)

    @property
    def t0(self) -> int:
        """Last index not covered by the residue formulas."""
        return max(0, self.numerator.degree - self.denominator.degree)

    def series(self, n: int) -> np.ndarray:
        """First ``n`` power-series coefficients (requires ``den(0) != 0``)."""
        num, den = self.numerator.coef, self.denominator.coef
        if den[0] == 0:
            raise ZeroDivisionError("denominator vanishes at z = 0")
        out = np.zeros(n, dtype=complex)
        for t in range(n):
            acc = num[t] if t < len(num) else 0.0
            for k in range(1, min(t, len(den) - 1) + 1):
                acc -= den[k] * out[t - k]
            out[t] = acc / den[0]
        return out


@dataclass(frozen=True)
class PoleSet:
    """Simple poles and residues of a PGF plus its leading series terms."""

    poles: np.ndarray
    residues: np.ndarray
    head: np.ndarray

    @property
    def t0(self) -> int:
        return len(self.head) - 1

    def __len__(self) -> int:
        return len(self.poles)


# -- exact elimination -------------------------------------------------------


def _to_fraction(x: complex) -> tuple[Fraction, Fraction]:
    x = complex(x)
    return Fraction(x.real), Fraction(x.imag)


def _row_to_dups(row: list[list[tuple[Fraction, Fraction]]], gaussian: bool) -> list:
    """Scale a row of exact polynomials to integer coefficients and convert to dups."""
    dens = [c.denominator for poly in row for pair in poly for c in pair]
    scale = lcm(*dens) if dens else 1
    out = []
    for poly in row:
        coeffs = []
        for re, im in reversed(poly):
            re_i, im_i = int(re * scale), int(im * scale)
            coeffs.append(ZZ_I(re_i, im_i) if gaussian else ZZ(re_i))
        out.append(dup_strip(coeffs))
    return out


def _bareiss_last(a: list[list], domain) -> tuple[list, list]:
    """Fraction-free elimination of an ``n x (n+1)`` augmented matrix.

    Returns the final pivot and augmented entry, i.e. ``det(A)`` and the
    determinant of ``A`` with its last column replaced by the right-hand
    side (both up to the same sign).
    """
    n = len(a)
    prev = [domain.one]
    for k in range(n - 1):
        if not a[k][k]:
            for r in range(k + 1, n):
                if a[r][k]:
                    a[k], a[r] = a[r], a[k]
                    break
            else:
                raise DegenerateNullSpace("singular elimination: null space is not one-dimensional")
        piv = a[k][k]
        rowk = a[k]
        for i in range(k + 1, n):
            rowi = a[i]
            lead = rowi[k]
            for j in range(k + 1, n + 1):
                v = dup_sub(dup_mul(piv, rowi[j], domain), dup_mul(lead, rowk[j], domain), domain)
                rowi[j] = dup_exquo(v, prev, domain) if prev != [domain.one] else v
            rowi[k] = []
        prev = piv
    if not a[n - 1][n - 1]:
        raise DegenerateNullSpace("singular elimination: null space is not one-dimensional")
    return a[n - 1][n - 1], a[n - 1][n]


def _dup_to_complex(f: list, scale, gaussian: bool) -> np.ndarray:
    """Lowest-first complex coefficients of ``f / scale`` (exact until the last step)."""
    out = []
    if gaussian:
        s = complex(int(scale.x), int(scale.y))
        norm = int(scale.x) ** 2 + int(scale.y) ** 2
        for c in reversed(f):
            # c * conj(s) / |s|^2 with exact integers
            cr, ci = int(c.x), int(c.y)
            sr, si = int(s.real), int(s.imag)
            out.append(complex(Fraction(cr * sr + ci * si, norm), Fraction(ci * sr - cr * si, norm)))
    else:
        for c in reversed(f):
            out.append(complex(Fraction(int(c), int(scale))))
    return np.array(out or [0j], dtype=complex)


def _dup_to_pairs(f: list, gaussian: bool) -> tuple[tuple[int, int], ...]:
    if gaussian:
        return tuple((int(c.x), int(c.y)) for c in reversed(f))
    return tuple((int(c), 0) for c in reversed(f))


def pgf(m: CountedMatrix, values: Mapping[str, complex] | None = None) -> RationalFunction:
    """Rational PGF of the completion time of ``m`` with counters bound.

    Parameters
    ----------
    m : CountedMatrix
        Valid process matrix.
    values : mapping, optional
        Complex value for each counter; unbound counters are set to 1.

    Raises
    ------
    DegenerateNullSpace
        If the pinned null-space system is singular (no terminals, or a
        malformed matrix).
    NonTerminating
        If, with all counters at 1, ``f(1)`` differs from 1.
    """
    values = dict(values or {})
    if not m.terminals:
        raise DegenerateNullSpace("process has no terminal state")
    if m.start in m.terminals:
        return RationalFunction(Polynomial([1.0]), Polynomial([1.0]))

    gaussian = any(complex(v).imag != 0 for v in values.values())
    domain = ZZ_I if gaussian else ZZ

    # unknowns: non-terminal PGFs, ordered so the start state comes last
    nonterm = [j for j in range(m.dim) if j not in m.terminals and j != m.start] + [m.start]
    col = {j: c for c, j in enumerate(nonterm)}
    n = len(nonterm)
    numeric = {ij: complex(p.evaluate(values)) for ij, p in m.entries.items()}

    zero = (Fraction(0), Fraction(0))
    one = (Fraction(1), Fraction(0))
    rows = []
    for r, j in enumerate(nonterm):
        row = [[zero] for _ in range(n + 1)]
        row[r] = [one]
        rhs = Fraction(0), Fraction(0)
        for (i, jj), v in numeric.items():
            if jj != j or v == 0:
                continue
            re, im = _to_fraction(v)
            if i in col:
                c = col[i]
                c0 = row[c][0]
                row[c] = [c0, (row[c][1][0] - re, row[c][1][1] - im) if len(row[c]) > 1 else (-re, -im)]
            else:
                rhs = (rhs[0] + re, rhs[1] + im)
        row[n] = [zero, rhs]
        rows.append(_row_to_dups(row, gaussian))

    den, num = _bareiss_last(rows, domain)
    if num:
        _, num, den = dup_inner_gcd(num, den, domain)
    else:
        den = [domain.one]
    scale = den[-1]  # den(0), nonzero because det(I - z A) = 1 at z = 0
    f = RationalFunction(
        Polynomial(_dup_to_complex(num, scale, gaussian)),
        Polynomial(_dup_to_complex(den, scale, gaussian)),
        (_dup_to_pairs(num, gaussian), _dup_to_pairs(den, gaussian)),
    )
    if all(complex(v) == 1 for v in values.values()):
        n1 = sum(a for a, _ in f.exact[0])
        d1 = sum(a for a, _ in f.exact[1])
        if d1 == 0 or abs(Fraction(n1, d1) - 1) > NORMALIZATION_TOL:
            raise NonTerminating("absorption is not certain: f(1) != 1")
    return f


# -- poles and residues ------------------------------------------------------


EXTRA_DPS = 40


def _polish(d: Polynomial, dd: Polynomial, z: complex, iters: int = 3) -> complex:
    best, best_err = z, abs(d(z))
    for _ in range(iters):
        slope = dd(z)
        if slope == 0:
            break
        z = z - d(z) / slope
        err = abs(d(z))
        if err < best_err:
            best, best_err = z, err
        else:
            break
    return best


def _refine_exact(exact, poles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Newton-polish poles against exact coefficients and evaluate residues.

    Clustered poles make both the double-precision denominator and the
    residue sums ill-conditioned; working at ``EXTRA_DPS`` digits on the
    exact coefficients returns correctly rounded poles and residues.
    """
    num_pairs, den_pairs = exact
    with mpmath.workdps(EXTRA_DPS):
        num = [mpmath.mpc(a, b) for a, b in reversed(num_pairs)] or [mpmath.mpc(0)]
        den = [mpmath.mpc(a, b) for a, b in reversed(den_pairs)]
        tol = mpmath.mpf(10) ** (-EXTRA_DPS + 5)
        zs, rs = [], []
        for z0 in poles:
            z = mpmath.mpc(z0.real, z0.imag)
            for _ in range(60):
                v, dv = mpmath.polyval(den, z, derivative=True)
                if dv == 0:
                    raise MultiplePoleDetected(f"denominator and its derivative vanish at {complex(z):.12g}")
                step = v / dv
                z -= step
                if abs(step) <= tol * abs(z):
                    break
            _, dv = mpmath.polyval(den, z, derivative=True)
            if dv == 0:
                raise MultiplePoleDetected(f"denominator and its derivative vanish at {complex(z):.12g}")
            zs.append(complex(z))
            rs.append(complex(mpmath.polyval(num, z) / dv))
    return np.array(zs, dtype=complex), np.array(rs, dtype=complex)


def _clustered(poles: np.ndarray) -> tuple[complex, complex] | None:
    for a in range(len(poles)):
        for b in range(a + 1, len(poles)):
            if abs(poles[a] - poles[b]) < POLE_CLUSTER_TOL * max(1.0, abs(poles[a])):
                return poles[a], poles[b]
    return None


def _extended_roots(den_pairs) -> np.ndarray:
    with mpmath.workdps(EXTRA_DPS):
        coeffs = [mpmath.mpc(a, b) for a, b in reversed(den_pairs)]
        try:
            roots = mpmath.polyroots(coeffs, maxsteps=200, extraprec=4 * EXTRA_DPS)
        except mpmath.libmp.libhyper.NoConvergence as exc:
            raise MultiplePoleDetected("root finding did not separate the poles") from exc
    return np.array([complex(r) for r in roots], dtype=complex)


def _lift_floats(f: RationalFunction):
    """Integer coefficient pairs equal to the float coefficients of ``f`` up to one scale.

    Doubles are dyadic rationals, so this is exact.
    """
    coefs = (f.numerator.coef, f.denominator.coef)
    if not all(np.all(np.isfinite(c)) for c in coefs):
        return None
    fracs = [[_to_fraction(c) for c in poly] for poly in coefs]
    scale = lcm(*(x.denominator for poly in fracs for pair in poly for x in pair))
    return tuple(
        tuple((int(re * scale), int(im * scale)) for re, im in poly) for poly in fracs
    )


def poles_and_residues(f: RationalFunction) -> PoleSet:
    """Locate the (simple) poles of ``f`` and their residues.

    Raises
    ------
    MultiplePoleDetected
        If two poles are closer than ``1e-8`` (relative); callers should then
        fall back to matrix powers.
    NonTerminating
        If a pole lies on or inside the unit circle.
    """
    den, num = f.denominator, f.numerator
    dd = den.deriv()
    poles = np.array([_polish(den, dd, z) for z in den.roots()], dtype=complex)
    exact = f.exact if f.exact is not None else _lift_floats(f)
    if not len(poles):
        residues = np.zeros(0, dtype=complex)
    elif exact is not None:
        poles, residues = _refine_exact(exact, poles)
        if _clustered(poles) is not None:
            # Newton from poor companion guesses can land two seeds on one
            # root; retry with roots computed at extended precision
            poles, residues = _refine_exact(exact, _extended_roots(exact[1]))
    else:
        residues = num(poles) / dd(poles)
    pair = _clustered(poles)
    if pair is not None:
        a, b = pair
        raise MultiplePoleDetected(f"poles {a:.12g} and {b:.12g} coincide within tolerance")
    if np.any(np.abs(poles - 1.0) < UNIT_ROOT_TOL):
        raise NonTerminating("pole at z = 1: the process need not terminate")
    if np.any(np.abs(poles) <= 1.0 - UNIT_ROOT_TOL):
        raise NonTerminating("pole inside the unit disk: probabilities would diverge")
    head = f.series(f.t0 + 1)
    return PoleSet(poles, np.asarray(residues, dtype=complex), head)


def _real(x, what: str):
    x = np.asarray(x)
    if np.any(np.abs(x.imag) > IMAG_TOL):
        raise ResidualImaginary(f"{what} has imaginary part {np.max(np.abs(x.imag)):.3g}")
    return x.real


def _tail(ps: PoleSet, t) -> np.ndarray:
    """Strictly-proper part ``-sum_i r_i z_i**(-t-1)`` for each ``t``."""
    t = np.asarray(t, dtype=float)
    if not len(ps.poles):
        return np.zeros(t.shape, dtype=complex)
    inv = 1.0 / ps.poles
    powers = inv[None, :] ** (t.reshape(-1, 1) + 1.0)
    return -(powers @ ps.residues).reshape(t.shape)


def _head_correction(ps: PoleSet) -> np.ndarray:
    """Polynomial-part coefficients ``q_s = p_s - tail_s`` for ``s <= t0``."""
    s = np.arange(ps.t0 + 1)
    return ps.head - _tail(ps, s)


def pmf(ps: PoleSet, t, real: bool = True):
    """Probability of completing at exactly step ``t`` (scalar or array).

    With ``real=False`` the complex coefficient is returned, which is what
    a PGF with complex counter bindings produces.
    """
    t_arr = np.asarray(t)
    vals = _tail(ps, t_arr).astype(complex)
    early = t_arr <= ps.t0
    if np.any(early):
        vals = np.where(early, ps.head[np.minimum(t_arr, ps.t0)], vals)
    out = _real(vals, "pmf") if real else vals
    return out.item() if out.ndim == 0 else out


def cdf(ps: PoleSet, t):
    """Probability of completing at or before step ``t``."""
    t_arr = np.asarray(t, dtype=float)
    z, r = ps.poles, ps.residues
    if len(z):
        inv = 1.0 / z
        powers = inv[None, :] ** (t_arr.reshape(-1, 1) + 1.0)
        vals = ((1.0 - powers) * (r / (1.0 - z))[None, :]).sum(axis=1).reshape(t_arr.shape)
    else:
        vals = np.zeros(t_arr.shape, dtype=complex)
    q = _head_correction(ps)
    cum = np.cumsum(q)
    vals = vals + cum[np.clip(t_arr.astype(int), 0, ps.t0)] * (t_arr >= 0)
    out = _real(vals, "cdf")
    return out.item() if out.ndim == 0 else out


def mean(ps: PoleSet) -> float:
    """Expected completion time."""
    z, r = ps.poles, ps.residues
    val = -np.sum(r / (1.0 - z) ** 2) if len(z) else 0j
    s = np.arange(ps.t0 + 1)
    val = val + np.sum(s * _head_correction(ps))
    return float(_real(val, "mean"))


def second_moment(ps: PoleSet) -> float:
    z, r = ps.poles, ps.residues
    val = np.sum(r * (1.0 + z) / (1.0 - z) ** 3) if len(z) else 0j
    s = np.arange(ps.t0 + 1)
    val = val + np.sum(s**2 * _head_correction(ps))
    return float(_real(val, "second moment"))


def variance(ps: PoleSet) -> float:
    """Variance of the completion time (clipped at zero against round-off)."""
    mu = mean(ps)
    return max(0.0, second_moment(ps) - mu * mu)
