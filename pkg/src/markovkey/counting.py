"""Distributions of edge-traversal counts via roots-of-unity sampling.

Attaching a counting variable ``w`` to an edge turns ``p_t`` into a
polynomial ``p_t(w) = sum_k c_k w**k`` whose coefficient ``c_k`` is the
probability of finishing at ``t`` having used the edge ``k`` times.  The
polynomial is sampled on ``N`` roots of unity and the coefficients are read
off with an FFT; ``N`` exceeds the degree bound so nothing aliases.
"""

from __future__ import annotations

import os
import warnings
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .exceptions import GridTooLarge, NegativeMassWarning, UnknownEdge, ZeroMass
from .markov import CountedMatrix, pmf_grid
from .poly import Poly

GRID_BUDGET = 2**24
ZERO_MASS = 1e-300
CLAMP_FLOOR = -1e-12
CHUNK = 4096

__all__ = [
    "ErrorDistribution",
    "attach_counter",
    "grid_size",
    "error_pmf",
    "error_table",
    "joint_error_pmf",
    "joint_error_table",
    "heralded_error",
    "nonheralded_error",
]


@dataclass(frozen=True)
class ErrorDistribution:
    """Conditional distribution of traversal counts given completion at ``t``.

    ``counts[k]`` (or ``counts[k1, k2, ...]`` for several counters, axes in
    the order of ``counters``) is ``p(k | t)``; ``total`` is ``p_t``.
    """

    t: int
    counts: np.ndarray
    total: float
    counters: tuple[str, ...]

    def __getitem__(self, k) -> float:
        k = k if isinstance(k, tuple) else (k,)
        if any(i < 0 or i >= n for i, n in zip(k, self.counts.shape)):
            return 0.0
        return float(self.counts[k])

    def as_dict(self) -> dict:
        out = {}
        for idx in np.ndindex(self.counts.shape):
            val = float(self.counts[idx])
            if val:
                out[idx[0] if len(idx) == 1 else idx] = val
        return out

    def marginal(self, counter: str) -> np.ndarray:
        axis = self.counters.index(counter)
        other = tuple(a for a in range(self.counts.ndim) if a != axis)
        return self.counts.sum(axis=other) if other else self.counts

    def mean(self, counter: str | None = None) -> float:
        name = counter or self.counters[0]
        p = self.marginal(name)
        return float(np.arange(len(p)) @ p)


def attach_counter(m: CountedMatrix, edges: Iterable[tuple[int, int]], var: str) -> CountedMatrix:
    """Multiply each listed entry ``(row, col)`` by the counter ``var``."""
    entries = dict(m.entries)
    w = Poly.var(var)
    for ij in edges:
        ij = (int(ij[0]), int(ij[1]))
        if ij not in entries:
            raise UnknownEdge(f"entry {ij} is structurally zero")
        entries[ij] = entries[ij] * w
    return CountedMatrix(m.dim, entries, m.terminals, m.start)


def grid_size(m: CountedMatrix, t: int, counter: str) -> int:
    """Smallest power of two exceeding the degree of ``p_t`` in ``counter``."""
    bound = t * max(m.degree(counter), 1) + 1
    return 1 << (bound - 1).bit_length()


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("MARKOVKEY_MAX_WORKERS", "1")))
    except ValueError:
        return 1


def _sample(m: CountedMatrix, t_max: int, points: Mapping[str, np.ndarray]) -> np.ndarray:
    """``pmf_grid`` over a large flat grid, chunked (optionally threaded) in fixed order."""
    g = len(next(iter(points.values())))
    bounds = [(a, min(a + CHUNK, g)) for a in range(0, g, CHUNK)]

    def run(ab):
        a, b = ab
        return pmf_grid(m, t_max, {k: v[a:b] for k, v in points.items()})

    workers = min(_workers(), len(bounds))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, bounds))
    else:
        parts = [run(ab) for ab in bounds]
    return np.concatenate(parts, axis=1)


def _clamp(coeffs: np.ndarray) -> np.ndarray:
    worst = coeffs.min() if coeffs.size else 0.0
    if worst < CLAMP_FLOOR:
        warnings.warn(
            f"coefficient {worst:.3g} below the round-off floor", NegativeMassWarning, stacklevel=3
        )
    return np.where(coeffs < 0.0, 0.0, coeffs)


def _resolve_counters(m: CountedMatrix, counters: Sequence[str] | None, minimum: int) -> tuple[str, ...]:
    names = tuple(counters) if counters is not None else m.counters
    if len(names) < minimum:
        raise ValueError(f"need at least {minimum} counter(s), matrix has {m.counters}")
    missing = set(names) - set(m.counters)
    if missing:
        raise ValueError(f"unknown counters {sorted(missing)}")
    return names


def error_table(
    m: CountedMatrix, t_max: int, counter: str | None = None, size: int | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalized coefficients for every ``t <= t_max`` from one sweep.

    Returns ``(coeffs, totals)`` where ``coeffs[t, k]`` is the probability of
    finishing at ``t`` with ``k`` traversals and ``totals[t] = p_t``.  Other
    counters are set to 1.  ``size`` overrides the number of grid points.
    """
    if counter is None:
        counter = _resolve_counters(m, None, 1)[0]
    n = size if size is not None else grid_size(m, t_max, counter)
    if n > GRID_BUDGET:
        raise GridTooLarge(f"{n} grid points exceed the budget of {GRID_BUDGET}")
    roots = np.exp(2j * np.pi * np.arange(n) / n)
    vals = _sample(m, t_max, {counter: roots})
    coeffs = np.fft.fft(vals, axis=1).real / n
    totals = vals[:, 0].real
    return _clamp(coeffs), totals


def error_pmf(m: CountedMatrix, t: int, counter: str | None = None) -> ErrorDistribution:
    """``p(k | t)`` for a single counter (other counters are set to 1).

    Raises
    ------
    ZeroMass
        If ``p_t(1) < 1e-300``.
    """
    if t < 1:
        raise ValueError("t must be at least 1")
    names = (counter,) if counter is not None else _resolve_counters(m, None, 1)
    if counter is None and len(names) > 1:
        raise ValueError(f"matrix has counters {names}; choose one")
    coeffs, totals = error_table(m, t, names[0])
    total = float(totals[t])
    if total < ZERO_MASS:
        raise ZeroMass(f"p_{t} = {total:.3g}: cannot condition on an impossible time")
    return ErrorDistribution(t, coeffs[t] / total, total, names)


def joint_error_table(
    m: CountedMatrix,
    t_max: int,
    counters: Sequence[str] | None = None,
    budget: int = GRID_BUDGET,
) -> tuple[np.ndarray, np.ndarray]:
    """Multi-counter analogue of :func:`error_table`.

    ``coeffs[t, k1, k2, ...]`` has one axis per counter in ``counters``.
    """
    names = _resolve_counters(m, counters, 1)
    sizes = [grid_size(m, t_max, c) for c in names]
    total_pts = int(np.prod(sizes))
    if total_pts > budget:
        raise GridTooLarge(f"{total_pts} grid points exceed the budget of {budget}")
    axes = [np.exp(2j * np.pi * np.arange(n) / n) for n in sizes]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = {c: g.ravel() for c, g in zip(names, mesh)}
    vals = _sample(m, t_max, points).reshape((t_max + 1, *sizes))
    coeffs = np.fft.fftn(vals, axes=tuple(range(1, len(sizes) + 1))).real / total_pts
    totals = vals[(slice(None),) + (0,) * len(sizes)].real
    return _clamp(coeffs), totals


def joint_error_pmf(
    m: CountedMatrix,
    t: int,
    counters: Sequence[str] | None = None,
    budget: int = GRID_BUDGET,
) -> ErrorDistribution:
    """``p(k_1, ..., k_m | t)`` by a multi-dimensional DFT.

    Raises
    ------
    GridTooLarge
        If the evaluation grid would exceed ``budget`` points.
    ZeroMass
        If ``p_t(1) < 1e-300``.
    """
    if t < 1:
        raise ValueError("t must be at least 1")
    names = _resolve_counters(m, counters, 1)
    coeffs, totals = joint_error_table(m, t, names, budget)
    total = float(totals[t])
    if total < ZERO_MASS:
        raise ZeroMass(f"p_{t} = {total:.3g}: cannot condition on an impossible time")
    return ErrorDistribution(t, coeffs[t] / total, total, names)


def heralded_error(k, eps: float):
    """Probability that at least one of ``k`` independent events errs."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    return 1.0 - (1.0 - eps) ** np.asarray(k) if np.ndim(k) else 1.0 - (1.0 - eps) ** k


def nonheralded_error(m: CountedMatrix, t: int, eps: float, counter: str | None = None) -> float:
    """Error probability at time ``t`` averaged over the unseen count.

    Evaluates ``1 - p_t(1 - eps) / p_t(1)`` directly.
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    names = (counter,) if counter is not None else _resolve_counters(m, None, 1)
    if counter is None and len(names) > 1:
        raise ValueError(f"matrix has counters {names}; choose one")
    vals = pmf_grid(m, t, {names[0]: np.array([1.0, 1.0 - eps])})[t]
    if vals[0] < ZERO_MASS:
        raise ZeroMass(f"p_{t} = {vals[0]:.3g}: cannot condition on an impossible time")
    return float(1.0 - vals[1] / vals[0])
