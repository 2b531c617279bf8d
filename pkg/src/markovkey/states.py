"""Bell-diagonal two-qubit states and the operations applied to them.

Coefficients are ordered ``(a, b, c, d)`` on ``Phi+, Psi-, Psi+, Phi-``.
Every operation here also accepts stacked coefficient arrays of shape
``(..., 4)`` through the ``*_coeffs`` helpers, which the Monte Carlo code
uses to process many samples at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateDistill

TRACE_TOL = 1e-12
DISTILL_FLOOR = 1e-12


@dataclass(frozen=True)
class BellDiagonalState:
    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        vals = (self.a, self.b, self.c, self.d)
        if any(v < -TRACE_TOL for v in vals):
            raise ValueError(f"negative Bell coefficient in {vals}")
        if abs(sum(vals) - 1.0) > TRACE_TOL:
            raise ValueError(f"coefficients sum to {sum(vals)!r}, not 1")

    @classmethod
    def from_array(cls, x) -> BellDiagonalState:
        return cls(*(float(v) for v in np.asarray(x, dtype=float)))

    def to_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d])

    @property
    def fidelity(self) -> float:
        return self.a

    def twirl(self) -> BellDiagonalState:
        """Werner state of the same fidelity."""
        return werner_state(self.a)


def werner_state(f: float) -> BellDiagonalState:
    if not 0.25 <= f <= 1.0:
        raise ValueError("Werner fidelity must lie in [0.25, 1]")
    r = (1.0 - f) / 3.0
    return BellDiagonalState(f, r, r, r)


def decay_coeffs(x: np.ndarray, eps) -> np.ndarray:
    eps = np.asarray(eps, dtype=float)[..., None]
    return (1.0 - eps) * x + eps / 4.0


def decay_state(rho: BellDiagonalState, eps: float) -> BellDiagonalState:
    """Depolarize: mix with the maximally mixed state with weight ``eps``."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    return BellDiagonalState.from_array(decay_coeffs(rho.to_array(), eps))


def dejmps_coeffs(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized DEJMPS: returns ``(output, success_prob)``.

    Where the success probability vanishes the output is set to the
    maximally mixed state so that it never contributes key.
    """
    a1, b1, c1, d1 = np.moveaxis(x, -1, 0)
    a2, b2, c2, d2 = np.moveaxis(y, -1, 0)
    norm = (a1 + b1) * (a2 + b2) + (c1 + d1) * (c2 + d2)
    out = np.stack(
        [a1 * a2 + b1 * b2, c2 * d1 + c1 * d2, c1 * c2 + d1 * d2, a1 * b2 + a2 * b1], axis=-1
    )
    safe = np.where(norm > DISTILL_FLOOR, norm, 1.0)
    out = np.where((norm > DISTILL_FLOOR)[..., None], out / safe[..., None], 0.25)
    return out, norm


def dejmps(r1: BellDiagonalState, r2: BellDiagonalState) -> tuple[BellDiagonalState, float]:
    """Distill two pairs into one; returns the output state and success probability."""
    out, norm = dejmps_coeffs(r1.to_array(), r2.to_array())
    if norm < DISTILL_FLOOR:
        raise DegenerateDistill(f"success probability {norm:.3g} is zero")
    return BellDiagonalState.from_array(out), float(norm)


def swap_coeffs(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    a1, b1, c1, d1 = np.moveaxis(x, -1, 0)
    a2, b2, c2, d2 = np.moveaxis(y, -1, 0)
    return np.stack(
        [
            a1 * a2 + b1 * b2 + c1 * c2 + d1 * d2,
            a1 * b2 + a2 * b1 + c1 * d2 + c2 * d1,
            a1 * c2 + a2 * c1 + b1 * d2 + b2 * d1,
            a1 * d2 + a2 * d1 + b1 * c2 + b2 * c1,
        ],
        axis=-1,
    )


def swap(r1: BellDiagonalState, r2: BellDiagonalState) -> BellDiagonalState:
    """Entanglement swapping (CNOT + X measurement), deterministic."""
    return BellDiagonalState.from_array(swap_coeffs(r1.to_array(), r2.to_array()))


def bit_error_coeffs(x: np.ndarray) -> np.ndarray:
    b, c, d = x[..., 1], x[..., 2], x[..., 3]
    return ((b + c) + (b + d)) / 2.0


def bit_error(rho: BellDiagonalState) -> float:
    """Bit error averaged over Z- and X-basis measurements."""
    return float(bit_error_coeffs(rho.to_array()))


def binary_entropy(x):
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -x * np.log2(x) - (1.0 - x) * np.log2(1.0 - x)
    h = np.where((x == 0.0) | (x == 1.0), 0.0, h)
    return h.item() if h.ndim == 0 else h


def key_fraction_coeffs(x: np.ndarray) -> np.ndarray:
    """Secret fraction ``max(0, 1 - 2 h2(e))`` of each pair."""
    return np.maximum(0.0, 1.0 - 2.0 * binary_entropy(bit_error_coeffs(x)))


def key_fraction(rho: BellDiagonalState) -> float:
    return float(key_fraction_coeffs(rho.to_array()))
