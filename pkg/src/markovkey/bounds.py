"""Order-statistics bounds for many-section repeaters.

Waiting times are replaced by upper bounds on expected order statistics of
geometric completion times, and every state is twirled to a Werner state so
the whole repeater reduces to a recursion on one fidelity.  Searching for
the largest per-step memory error that keeps the final fidelity secure gives
the minimum memory lifetime.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

from scipy.optimize import brentq

from .exceptions import FidelityCollapse, NeverSecure
from .states import binary_entropy

SPEED_OF_LIGHT_FIBER = 2.0e5  # km/s
BISECT_RTOL = 1e-6

__all__ = [
    "BoundsConfig",
    "harmonic",
    "k_last",
    "k_adjacent",
    "expected_gap_bound",
    "decay_fidelity",
    "dejmps_werner",
    "connect_fidelity",
    "fidelity_trace",
    "final_fidelity",
    "secure_fidelity",
    "max_secure_eps",
    "min_memory_lifetime",
]


@dataclass(frozen=True)
class BoundsConfig:
    """Minimum-resource repeater over ``n_sections`` sections with ``2**n_sections`` pairs each."""

    n_sections: int = 8
    p: float = 0.5
    f_init: float = 0.95
    eps_l: float = 0.0
    L: float = 25.0
    c: float = SPEED_OF_LIGHT_FIBER
    statistical: bool = True

    def __post_init__(self):
        n = self.n_sections
        if n < 1 or n & (n - 1):
            raise ValueError("n_sections must be a power of two")
        if not 0.0 < self.p < 1.0:
            raise ValueError("p must lie in (0, 1)")
        if not 0.25 <= self.f_init <= 1.0:
            raise ValueError("f_init must lie in [0.25, 1]")
        if not 0.0 <= self.eps_l <= 1.0:
            raise ValueError("eps_l must lie in [0, 1]")
        if self.L <= 0 or self.c <= 0:
            raise ValueError("L and c must be positive")

    @property
    def q0(self) -> int:
        return 2**self.n_sections


def harmonic(n: int) -> float:
    if n < 1:
        raise ValueError("n must be at least 1")
    return math.fsum(1.0 / m for m in range(1, n + 1))


def _rate(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    return abs(math.log1p(-p))


def k_last(q: int, p: float) -> float:
    """Bound on the expected last completion among ``q`` geometric links."""
    if q < 1:
        raise ValueError("q must be at least 1")
    return ((q - 1) / math.sqrt(2 * q - 1) + 1.0) / _rate(p) + 1.0


def k_adjacent(l: int, n_sections: int, p: float, statistical: bool = True) -> float:
    """Bound on the wait between two adjacent blocks at level ``l``.

    ``l = 0`` is accepted because the recursion asks for ``k_{A, l-1}``.
    Without statistics every block is assumed to take exactly ``2**l``.
    """
    if not 0 <= l <= n_sections:
        raise ValueError("l must lie in [0, n_sections]")
    if not statistical:
        return float(2**l)
    return 2**l * (harmonic(2 ** (n_sections - l + 1)) / _rate(p) + 1.0)


def expected_gap_bound(q: int, p: float) -> float:
    """Bound on ``E|x - y|`` for two draws of the last-of-``q`` completion time."""
    if q < 1:
        raise ValueError("q must be at least 1")
    return harmonic(2 * q) / _rate(p)


def decay_fidelity(f: float, eps: float, k: float) -> float:
    keep = (1.0 - eps) ** k
    return keep * f + (1.0 - keep) / 4.0


def dejmps_werner(f: float) -> float:
    """Output fidelity of two Werner pairs distilled and twirled."""
    return (10 * f * f - 2 * f + 1) / (8 * f * f - 4 * f + 5)


def connect_fidelity(fa: float, fb: float, eps_l: float) -> float:
    """Fidelity after swapping two Werner pairs and one local-error step."""
    return decay_fidelity((1.0 - fa) * (1.0 - fb) / 3.0 + fa * fb, eps_l, 1)


def fidelity_trace(cfg: BoundsConfig, eps_w: float) -> list[float]:
    """Fidelities ``F_0, ..., F_{n_sections}`` of the recursion."""
    if not 0.0 <= eps_w < 1.0:
        raise ValueError("eps_w must lie in [0, 1)")
    kl = k_last(cfg.q0, cfg.p)
    f = dejmps_werner(decay_fidelity(cfg.f_init, eps_w, kl))
    trace = [f]
    for l in range(1, cfg.n_sections + 1):
        wait = k_adjacent(l - 1, cfg.n_sections, cfg.p, cfg.statistical)
        f_tilde = decay_fidelity(f, eps_w, wait)
        f = dejmps_werner(connect_fidelity(f, f_tilde, cfg.eps_l))
        trace.append(f)
    return trace


def final_fidelity(cfg: BoundsConfig, eps_w: float) -> float:
    """Fidelity of the end-to-end pair; warns if any level drops below 1/2."""
    trace = fidelity_trace(cfg, eps_w)
    if min(trace) < 0.5:
        warnings.warn(
            f"fidelity fell to {min(trace):.4f}; distillation no longer helps",
            FidelityCollapse,
            stacklevel=2,
        )
    return trace[-1]


@lru_cache(maxsize=1)
def secure_fidelity() -> float:
    """Werner fidelity at which ``1 - 2 h2(2(1 - F)/3)`` vanishes."""
    return brentq(lambda f: 1.0 - 2.0 * binary_entropy(2.0 * (1.0 - f) / 3.0), 0.5, 1.0, xtol=1e-15)


def _secure(cfg: BoundsConfig, eps: float, target: float) -> bool:
    return fidelity_trace(cfg, eps)[-1] > target


def max_secure_eps(cfg: BoundsConfig) -> float:
    """Largest per-step memory error still giving a secure final pair.

    Bisects geometrically to relative tolerance ``1e-6``.

    Raises
    ------
    NeverSecure
        If the final fidelity is insecure even without memory errors.
    """
    target = secure_fidelity()
    if not _secure(cfg, 0.0, target):
        raise NeverSecure(
            f"final fidelity {fidelity_trace(cfg, 0.0)[-1]:.6f} is below {target:.6f} without memory errors"
        )
    hi = 0.5
    while _secure(cfg, hi, target):
        hi = (1.0 + hi) / 2.0
        if 1.0 - hi < 1e-15:
            return hi
    lo = hi / 2.0
    while not _secure(cfg, lo, target):
        hi, lo = lo, lo / 2.0
        if lo < 1e-300:
            raise NeverSecure("no positive memory error is tolerable")
    while hi / lo - 1.0 > BISECT_RTOL:
        mid = math.sqrt(lo * hi)
        if _secure(cfg, mid, target):
            lo = mid
        else:
            hi = mid
    return lo


def min_memory_lifetime(cfg: BoundsConfig) -> float:
    """Shortest memory lifetime (seconds) for which the repeater stays secure."""
    eps = max_secure_eps(cfg)
    return -4.0 * cfg.L / (cfg.c * math.log1p(-eps))
