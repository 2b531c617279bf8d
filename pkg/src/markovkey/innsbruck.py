"""Two-section repeater with bunches of ``q0`` pairs, distillation and swapping.

Each section generates ``q0`` pairs in parallel (lumped to ``q0 + 1``
states, counter ``w0`` on one representative pair's waiting steps), then
spends one step on a first distillation round that succeeds with a floor
probability ``1 - (1 - lam)**(q0 // 2)`` or restarts the section.  The full
process runs two such sections in parallel; ``w1`` counts the steps the
first finished section waits for the other.

Key rates are estimated by Monte Carlo over the error distribution.  The
joint table ``p(t, k0, k1)`` is never materialized: the two sections are
independent, so it factorizes into a one-section table ``P_A(T, k0)`` and
the one-section completion pmf, from which ``(T_A, T_B)`` and hence
``t = max``, ``k1 = |T_A - T_B|`` are sampled directly.
"""

from __future__ import annotations

import itertools
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .counting import error_table
from .exceptions import BadBlockForm, InsufficientSamples, LambdaOutOfRange
from .lumping import lumped_section_matrix
from .markov import CountedMatrix, compose_and, completion_pmf
from .poly import Poly
from .states import (
    BellDiagonalState,
    bit_error,
    decay_coeffs,
    decay_state,
    dejmps,
    dejmps_coeffs,
    key_fraction_coeffs,
    swap,
    swap_coeffs,
    werner_state,
)

SPEED_OF_LIGHT_FIBER = 2.0e5  # km/s
DEFAULT_LAMBDA_GRID = (0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9)
TRUNCATION = 1e-6
BLOCK = 4096
EXHAUSTIVE_MAX = 6
KMAX_UNBOUNDED = 2**31 - 1

__all__ = [
    "BellDiagonalState",
    "RepeaterConfig",
    "KeyRate",
    "ErrorTables",
    "section_matrix",
    "distillation_matrix",
    "full_matrix",
    "werner_state",
    "decay_state",
    "dejmps",
    "swap",
    "bit_error",
    "kmax",
    "eps_from_lifetime",
    "q1_distribution",
    "error_tables",
    "postselect_pmf",
    "conditional_key_rate",
    "normalized_key_rate",
    "simplified_key_rate",
]


@dataclass(frozen=True)
class RepeaterConfig:
    """Parameters of one bunch of the two-section repeater.

    ``eps_w`` is the per-step memory error; ``eps_w1`` defaults to it.
    ``lam`` fixes the distillation floor when set; otherwise rates are
    maximized over ``lambda_grid``.
    """

    q0: int
    p: float
    f_init: float = 0.95
    eps_w: float = 1e-4
    eps_w1: float | None = None
    eps_l: float = 0.0
    lam: float | None = None
    lambda_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    L: float = 25.0
    c: float = SPEED_OF_LIGHT_FIBER
    samples: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.q0 < 2:
            raise ValueError("q0 must be at least 2 (distillation needs a pair)")
        if not 0.0 < self.p <= 1.0:
            raise ValueError("p must lie in (0, 1]")
        if not 0.25 < self.f_init <= 1.0:
            raise ValueError("f_init must lie in (0.25, 1]")
        for name in ("eps_w", "eps_l"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")
        if self.eps_w1 is not None and not 0.0 <= self.eps_w1 < 1.0:
            raise ValueError("eps_w1 must lie in [0, 1)")
        for lam in self.lambdas:
            if not 0.5 < lam <= 1.0:
                raise LambdaOutOfRange(f"lambda {lam} outside (0.5, 1]")
        if self.samples < 1:
            raise ValueError("samples must be positive")

    @property
    def lambdas(self) -> tuple[float, ...]:
        return (self.lam,) if self.lam is not None else tuple(self.lambda_grid)

    @property
    def eps_w0(self) -> float:
        return self.eps_w

    @property
    def eps_w1_value(self) -> float:
        return self.eps_w if self.eps_w1 is None else self.eps_w1

    @property
    def step_seconds(self) -> float:
        return 2.0 * self.L / self.c

    @classmethod
    def from_lifetime(cls, tau: float, **kw) -> RepeaterConfig:
        L = kw.get("L", 25.0)
        c = kw.get("c", SPEED_OF_LIGHT_FIBER)
        return cls(eps_w=eps_from_lifetime(tau, L, c), **kw)


def eps_from_lifetime(tau: float, L: float, c: float = SPEED_OF_LIGHT_FIBER) -> float:
    """Per-step memory error for lifetime ``tau`` (two memories per pair)."""
    if tau <= 0:
        raise ValueError("lifetime must be positive")
    return -math.expm1(-4.0 * L / (c * tau))


# -- matrices ----------------------------------------------------------------


def section_matrix(q0: int, p: float, w0: str | None = "w0") -> CountedMatrix:
    """Lumped process for one section: ``q0`` pairs connecting in parallel."""
    return lumped_section_matrix(q0, p, w0 if q0 > 1 else None)


def distillation_matrix(sect: CountedMatrix, lam: float, q0: int) -> CountedMatrix:
    """Append the first distillation round to a section process.

    From the section's completion, the round succeeds with probability
    ``s = 1 - (1 - lam)**(q0 // 2)`` (absorbing in the new state) and
    otherwise restarts the section.
    """
    n = sect.dim
    if sect.terminals != frozenset({n - 1}) or sect.start != 0:
        raise BadBlockForm("expected start 0 and the last state as the only terminal")
    if not 0.0 < lam <= 1.0:
        raise ValueError("lambda must lie in (0, 1]")
    if q0 < 2:
        raise ValueError("q0 must be at least 2")
    fail = (1.0 - lam) ** (q0 // 2)
    entries = dict(sect.entries)
    entries[(n, n - 1)] = Poly.const(1.0 - fail)
    if fail > 0.0:
        entries[(0, n - 1)] = Poly.const(fail)
    return CountedMatrix(n + 1, entries, {n}, 0)


def full_matrix(dist: CountedMatrix, w1: str = "w1") -> CountedMatrix:
    """Both sections in parallel; ``w1`` counts the first finisher's waiting steps.

    ``w0`` is kept on the first copy only so that one representative pair is
    tracked.
    """
    other = dist.substitute({name: 1.0 for name in dist.counters})
    return compose_and(dist, other, hold_a=w1, hold_b=w1)


# -- distillation bookkeeping -------------------------------------------------


def _kmax_raw(lam: float, f_init: float, eps_w0: float) -> float:
    if lam <= 0.5:
        raise LambdaOutOfRange("lambda must exceed 1/2")
    if f_init <= 0.25:
        raise ValueError("f_init must exceed 1/4")
    num = math.log(3.0 * math.sqrt(2.0 * lam - 1.0) / (4.0 * f_init - 1.0))
    if eps_w0 <= 0.0:
        return math.inf if num <= 0 else -math.inf
    return num / math.log1p(-eps_w0)


def kmax(lam: float, f_init: float, eps_w0: float) -> int:
    """Largest tolerated waiting time before a pair is discarded (floored at 0).

    With ``eps_w0 == 0`` nothing decays and the bound is unlimited
    (``KMAX_UNBOUNDED``).
    """
    raw = _kmax_raw(lam, f_init, eps_w0)
    if math.isinf(raw):
        return KMAX_UNBOUNDED if raw > 0 else 0
    return max(0, math.floor(raw + 1e-12))


def _side_law(m: int, lam: float, conditioned: bool) -> np.ndarray:
    law = np.array([math.comb(m, x) * lam**x * (1.0 - lam) ** (m - x) for x in range(m + 1)])
    if conditioned:
        law[0] = 0.0
        law /= law.sum()
    return law


def q1_distribution(q0: int, lam: float, conditioned: bool = False) -> np.ndarray:
    """``P(q1 = x)`` for ``x = 0..q0 // 2``, with ``q1`` the smaller side's successes.

    Each side runs ``q0 // 2`` independent distillations that succeed with
    probability ``lam``.  ``conditioned=True`` conditions each side on at
    least one success, which is what a completed process guarantees.
    """
    if q0 < 2:
        raise ValueError("q0 must be at least 2")
    law = _side_law(q0 // 2, lam, conditioned)
    tail = np.cumsum(law[::-1])[::-1]  # P(side >= x)
    return 2.0 * law * tail - law * law


# -- error tables -------------------------------------------------------------


@dataclass(frozen=True)
class ErrorTables:
    """Factorized error statistics of the full process for one ``lam``.

    ``pa[T, k]`` is the probability that a section finishes at ``T`` with
    ``k`` waiting steps on its tracked pair; ``sec[T]`` its completion pmf.
    """

    q0: int
    lam: float
    pa: np.ndarray
    sec: np.ndarray
    t_max: int
    _derived: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def sec_cdf(self) -> np.ndarray:
        return self._cached("sec_cdf", lambda: np.cumsum(self.sec))

    @property
    def pmf(self) -> np.ndarray:
        """Completion pmf of the full process (max of the two sections)."""

        def build():
            c = self.sec_cdf
            prev = np.concatenate([[0.0], c[:-1]])
            return self.sec * c + self.sec * prev

        return self._cached("pmf", build)

    @property
    def k0_marginal(self) -> np.ndarray:
        """Unnormalized ``P(t, k0)`` for the full process."""

        def build():
            c = self.sec_cdf
            before = np.cumsum(self.pa, axis=0)
            before = np.vstack([np.zeros((1, self.pa.shape[1])), before[:-1]])
            return self.pa * c[:, None] + self.sec[:, None] * before

        return self._cached("k0", build)

    def _cached(self, key, build):
        if key not in self._derived:
            self._derived[key] = build()
        return self._derived[key]

    def joint(self, t: int) -> np.ndarray:
        """Unnormalized ``P(t, k0, k1)`` as a ``(K, t + 1)`` array."""
        K = self.pa.shape[1]
        out = np.zeros((K, t + 1))
        out[:, 0] = self.pa[t] * self.sec[t]
        for d in range(1, t + 1):
            out[:, d] = self.pa[t] * self.sec[t - d] + self.pa[t - d] * self.sec[t]
        return out

    def keep_probability(self, kmax_value: int) -> np.ndarray:
        """``P(k0 <= kmax | t)`` for every ``t``."""
        marg = self.k0_marginal
        kept = marg[:, : kmax_value + 1].sum(axis=1)
        total = self.pmf
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(total > 0, kept / np.where(total > 0, total, 1.0), 0.0)
        return np.clip(out, 0.0, 1.0)


def _truncation_time(dist: CountedMatrix, tol: float = TRUNCATION) -> int:
    """Smallest ``t`` with full-process CDF above ``1 - tol``."""
    t_max = 64
    while True:
        cdf = np.cumsum(completion_pmf(dist, t_max))
        full = cdf**2
        hit = np.flatnonzero(full > 1.0 - tol)
        if hit.size:
            return int(hit[0])
        if t_max > 2**16:
            raise ValueError("completion time distribution too heavy to truncate")
        t_max *= 2


@lru_cache(maxsize=64)
def error_tables(q0: int, p: float, lam: float) -> ErrorTables:
    """One-section error table and completion pmf up to the truncation time."""
    dist = distillation_matrix(section_matrix(q0, p), lam, q0)
    t_max = max(_truncation_time(dist), 2)
    if "w0" in dist.counters:
        pa, sec = error_table(dist, t_max, "w0")
    else:
        sec = completion_pmf(dist, t_max)
        pa = np.zeros((t_max + 1, t_max + 2))
        pa[:, 0] = sec
    return ErrorTables(q0, lam, pa, np.asarray(sec, dtype=float), t_max)


def postselect_pmf(pmf: np.ndarray, keep: np.ndarray, q0: int) -> np.ndarray:
    """Weight each completion time by the chance all ``q0`` tracked waits stay within bounds.

    ``keep[t]`` is ``P(k <= kmax | t)``.
    """
    return np.asarray(pmf) * np.asarray(keep) ** q0


# -- Monte Carlo --------------------------------------------------------------


def _inverse_cdf(cdf_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Row-wise inverse CDF: smallest index with ``cdf >= u``."""
    return np.minimum((cdf_rows < u[:, None]).sum(axis=1), cdf_rows.shape[1] - 1)


def _involutions(n: int) -> list[tuple[tuple[tuple[int, int], ...], tuple[int, ...]]]:
    """All partial matchings of ``range(n)`` as (pairs, singles)."""

    def rec(items):
        if not items:
            yield (), ()
            return
        first, rest = items[0], items[1:]
        for pairs, singles in rec(rest):
            yield pairs, (first,) + singles
        for i, other in enumerate(rest):
            remaining = rest[:i] + rest[i + 1 :]
            for pairs, singles in rec(remaining):
                yield ((first, other),) + pairs, singles

    return list(rec(tuple(range(n))))


_INVOLUTIONS = {n: _involutions(n) for n in range(EXHAUSTIVE_MAX + 1)}


def best_final_key(states: np.ndarray) -> np.ndarray:
    """Best total key over optional pairwise distillations of the given pairs.

    ``states`` has shape ``(B, n, 4)``.  Every partial matching is tried for
    ``n <= 6``; above that, pairs are sorted by fidelity and adjacent ones
    are distilled whenever that helps.
    """
    B, n, _ = states.shape
    if n == 0:
        return np.zeros(B)
    single = key_fraction_coeffs(states)
    if n <= EXHAUSTIVE_MAX:
        iu, ju = np.triu_indices(n, 1)
        pair_key = np.zeros((B, n, n))
        if iu.size:
            out, _ = dejmps_coeffs(states[:, iu], states[:, ju])
            pair_key[:, iu, ju] = key_fraction_coeffs(out)
        best = np.full(B, -np.inf)
        for pairs, singles in _INVOLUTIONS[n]:
            score = single[:, list(singles)].sum(axis=1) if singles else np.zeros(B)
            for i, j in pairs:
                score = score + pair_key[:, i, j]
            best = np.maximum(best, score)
        return best
    order = np.argsort(-states[..., 0], axis=1, kind="stable")
    s = np.take_along_axis(states, order[..., None], axis=1)
    k = np.take_along_axis(single, order, axis=1)
    total = np.zeros(B)
    for i in range(0, n - 1, 2):
        out, _ = dejmps_coeffs(s[:, i], s[:, i + 1])
        merged = key_fraction_coeffs(out)
        total += np.maximum(merged, k[:, i] + k[:, i + 1])
    if n % 2:
        total += k[:, n - 1]
    return total


def _decay_for(k: np.ndarray, eps: float) -> np.ndarray:
    return -np.expm1(np.asarray(k, dtype=float) * math.log1p(-eps)) if eps > 0 else np.zeros(np.shape(k))


def _first_round(
    side: np.ndarray, lam: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Random DEJMPS pairing within one section.

    Returns the surviving states ``(B, m + odd, 4)`` in random order and their
    counts; the number of successful distillations is binomial in ``lam``,
    conditioned on at least one success.
    """
    B, q0, _ = side.shape
    m, odd = q0 // 2, q0 % 2
    perm = np.argsort(rng.random((B, q0)), axis=1)
    x = np.take_along_axis(side, perm[..., None], axis=1)
    out, _ = dejmps_coeffs(x[:, 0 : 2 * m : 2], x[:, 1 : 2 * m : 2])
    law = np.cumsum(_side_law(m, lam, conditioned=True))
    succ = np.minimum(np.searchsorted(law, rng.random(B) * law[-1], side="left"), m)
    pool = np.concatenate([out, x[:, q0 - 1 : q0]], axis=1) if odd else out
    valid = np.arange(m + odd)[None, :] < succ[:, None]
    if odd:
        valid[:, m] = True
    keys = np.where(valid, rng.random((B, m + odd)), 2.0)
    order = np.argsort(keys, axis=1)
    pool = np.take_along_axis(pool, order[..., None], axis=1)
    return pool, succ + odd


def _key_block(
    cfg: RepeaterConfig,
    lam: float,
    tables: ErrorTables | None,
    kmax_value: int,
    n: int,
    rng: np.random.Generator,
    t_probs: np.ndarray | None,
) -> np.ndarray:
    """Per-sample ``(K, t)`` draws for one block; waits are zero when ``tables`` is None."""
    q0 = cfg.q0
    if tables is None:
        t = np.ones(n, dtype=int)
        k_other = np.zeros((n, 2 * q0 - 1), dtype=int)
        k0 = np.zeros(n, dtype=int)
        k1 = np.zeros(n, dtype=int)
        left_waits = np.zeros(n, dtype=bool)
        right_waits = np.zeros(n, dtype=bool)
    else:
        t = np.searchsorted(t_probs, rng.random(n) * t_probs[-1], side="left")
        t = np.minimum(t, len(t_probs) - 1)
        # waits of the 2*q0 - 1 untracked pairs, restricted to <= kmax
        marg = tables.k0_marginal[:, : kmax_value + 1]
        cdf = np.cumsum(marg, axis=1)
        rows = cdf[t] / cdf[t, -1:]
        k_other = np.stack([_inverse_cdf(rows, rng.random(n)) for _ in range(2 * q0 - 1)], axis=1)
        # tracked pair: draw (T_A, T_B) given max = t, then k0 given T_A
        sec, csec = tables.sec, tables.sec_cdf
        prev = np.where(t > 0, csec[np.maximum(t - 1, 0)], 0.0)
        m_a_last = sec[t] * csec[t]
        m_b_last = sec[t] * prev
        a_last = rng.random(n) * (m_a_last + m_b_last) < m_a_last
        u = rng.random(n)
        other_b = np.searchsorted(csec, u * csec[t], side="left")
        other_a = np.searchsorted(csec, u * prev, side="left")
        ta = np.where(a_last, t, np.minimum(other_a, t - 1))
        tb = np.where(a_last, np.minimum(other_b, t), t)
        pa_rows = np.cumsum(tables.pa[ta], axis=1)
        k0 = _inverse_cdf(pa_rows / pa_rows[:, -1:], rng.random(n))
        k1 = np.abs(ta - tb)
        left_waits = ta < tb
        right_waits = tb < ta

    f0 = werner_state(cfg.f_init).to_array()
    waits = np.concatenate([k0[:, None], k_other], axis=1)
    states = decay_coeffs(np.broadcast_to(f0, (n, 2 * q0, 4)), _decay_for(waits, cfg.eps_w0))

    left, n_left = _first_round(states[:, :q0], lam, rng)
    right, n_right = _first_round(states[:, q0:], lam, rng)
    eps1 = _decay_for(k1, cfg.eps_w1_value)
    left = np.where(left_waits[:, None, None], decay_coeffs(left, eps1[:, None]), left)
    right = np.where(right_waits[:, None, None], decay_coeffs(right, eps1[:, None]), right)

    q1 = np.minimum(n_left, n_right)
    swapped = decay_coeffs(swap_coeffs(left, right), cfg.eps_l)
    key = np.zeros(n)
    for size in np.unique(q1):
        idx = np.flatnonzero(q1 == size)
        key[idx] = best_final_key(swapped[idx, :size])
    return key, t


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("MARKOVKEY_MAX_WORKERS", "1")))
    except ValueError:
        return 1


def _run_blocks(cfg, lam, tables, kmax_value, t_probs, stream: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``cfg.samples`` samples in fixed-size blocks with independent substreams.

    Each block's generator depends only on ``(seed, stream, block index)``,
    so the result is independent of the worker count.
    """
    n_blocks = -(-cfg.samples // BLOCK)
    root = np.random.SeedSequence(cfg.seed, spawn_key=(stream,))
    seqs = root.spawn(n_blocks)

    def run(b):
        size = min(BLOCK, cfg.samples - b * BLOCK)
        rng = np.random.Generator(np.random.Philox(seqs[b]))
        return _key_block(cfg, lam, tables, kmax_value, size, rng, t_probs)

    workers = min(_workers(), n_blocks)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, range(n_blocks)))
    else:
        parts = [run(b) for b in range(n_blocks)]
    return np.concatenate([k for k, _ in parts]), np.concatenate([t for _, t in parts])


@dataclass(frozen=True)
class KeyRate:
    """A Monte Carlo key-rate estimate at the best distillation floor."""

    value: float
    stderr: float
    lam: float
    t_truncation: int
    samples: int
    by_lambda: dict = field(default_factory=dict, compare=False)


def conditional_key_rate(cfg: RepeaterConfig, t: int, lam: float | None = None) -> tuple[float, float]:
    """Mean key ``K(t)`` (pairs' secret fractions summed) and its standard error at fixed ``t``."""
    lam = lam if lam is not None else cfg.lambdas[0]
    tables = error_tables(cfg.q0, cfg.p, lam)
    if not 1 <= t <= tables.t_max:
        raise ValueError(f"t must lie in [1, {tables.t_max}]")
    probs = np.zeros(tables.t_max + 1)
    probs[t] = 1.0
    km = min(kmax(lam, cfg.f_init, cfg.eps_w0), tables.pa.shape[1] - 1)
    if tables.keep_probability(km)[t] == 0:
        return 0.0, 0.0
    key, _ = _run_blocks(cfg, lam, tables, km, np.cumsum(probs), stream=0)
    return float(key.mean()), float(key.std(ddof=1) / math.sqrt(len(key))) if len(key) > 1 else 0.0


def _check_samples(value: float, stderr: float) -> None:
    if value > 0 and stderr > 0.05 * value:
        warnings.warn(
            f"standard error {stderr:.3g} exceeds 5% of the estimate {value:.3g}",
            InsufficientSamples,
            stacklevel=3,
        )


def _normalized_for(cfg: RepeaterConfig, lam: float, index: int) -> tuple[float, float, int] | None:
    raw = _kmax_raw(lam, cfg.f_init, cfg.eps_w0)
    if raw < 0:
        return None  # even fresh pairs fall below the distillation floor
    tables = error_tables(cfg.q0, cfg.p, lam)
    km = min(kmax(lam, cfg.f_init, cfg.eps_w0), tables.pa.shape[1] - 1)
    weighted = postselect_pmf(tables.pmf, tables.keep_probability(km), cfg.q0)
    weighted[0] = 0.0
    z = weighted.sum()
    if z <= 0:
        return 0.0, 0.0, tables.t_max
    key, t = _run_blocks(cfg, lam, tables, km, np.cumsum(weighted), stream=2 * index)
    est = z * key / (cfg.q0 * t)
    se = est.std(ddof=1) / math.sqrt(len(est)) if len(est) > 1 else 0.0
    return float(est.mean()), float(se), tables.t_max


def _simplified_for(cfg: RepeaterConfig, lam: float, index: int) -> tuple[float, float, int] | None:
    if _kmax_raw(lam, cfg.f_init, cfg.eps_w0) < 0:
        return None
    tables = error_tables(cfg.q0, cfg.p, lam)
    t = np.arange(tables.t_max + 1)
    factor = float(np.sum(tables.pmf[1:] / (t[1:] + 1.0 / cfg.p))) / cfg.q0
    key, _ = _run_blocks(cfg, lam, None, 0, None, stream=2 * index + 1)
    se = key.std(ddof=1) / math.sqrt(len(key)) if len(key) > 1 else 0.0
    return factor * float(key.mean()), factor * float(se), tables.t_max


def _best(cfg: RepeaterConfig, fn) -> KeyRate:
    results = {}
    for i, lam in enumerate(cfg.lambdas):
        r = fn(cfg, lam, i)
        if r is not None:
            results[lam] = r
    if not results:
        return KeyRate(0.0, 0.0, float("nan"), 0, cfg.samples, {})
    lam = max(results, key=lambda x: (results[x][0], -x))
    value, se, t_max = results[lam]
    _check_samples(value, se)
    return KeyRate(value, se, lam, t_max, cfg.samples, {k: v[0] for k, v in results.items()})


def normalized_key_rate(cfg: RepeaterConfig) -> KeyRate:
    """Key rate per use and per pair, ``(1/q0) sum_t p_t K(t) / t``, best over lambda.

    ``p_t`` is post-selected on every tracked wait staying within ``kmax``.
    Completion times are sampled from the post-selected pmf (truncated once
    the CDF passes ``1 - 1e-6``) so one Monte Carlo run covers all ``t``.
    """
    return _best(cfg, _normalized_for)


def simplified_key_rate(cfg: RepeaterConfig) -> KeyRate:
    """Key rate if every link connected after exactly ``1/p`` with no waiting errors.

    ``(1/q0) sum_t p_t K0 / (t + 1/p)`` where ``K0`` is the key of a bunch
    whose pairs never wait; independent of ``eps_w``.
    """
    return _best(cfg, _simplified_for)
