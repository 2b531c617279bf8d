"""Process graphs, counted Markov matrices and their compositions.

Matrices follow the column convention: entry ``(i, j)`` is the weight of
the edge leading *from* node ``j`` *to* node ``i``.  Absorbing (terminal)
nodes have all-zero columns rather than self-loops, so the probability of
completing at step ``t`` is the terminal mass of ``M**t`` applied to the
start vector.

Indices are zero-based throughout; the start node is index 0 unless a
matrix says otherwise.
"""

from __future__ import annotations

import json
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from functools import cached_property
from os import PathLike
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .exceptions import (
    InvalidProcess,
    InvalidSplit,
    NonStochasticGraph,
    SelfLoopOnTerminal,
)
from .poly import ONE, Monomial, Poly, poly_sum

STOCHASTIC_TOL = 1e-12

__all__ = [
    "Edge",
    "ProcessGraph",
    "CountedMatrix",
    "build_process",
    "compose_or",
    "compose_and",
    "compose_seq",
    "rescale_timing",
    "pmf_by_power",
    "completion_pmf",
    "pmf_grid",
    "load_graph",
]


class Edge(NamedTuple):
    src: str
    dst: str
    prob: float
    counters: Mapping[str, int] = {}


@dataclass(frozen=True)
class ProcessGraph:
    """Directed graph of a discrete-time process; ``nodes[0]`` is the start."""

    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]
    terminals: frozenset[str]

    def __init__(self, nodes: Iterable[str], edges: Iterable, terminals: Iterable[str]):
        object.__setattr__(self, "nodes", tuple(nodes))
        object.__setattr__(self, "edges", tuple(Edge(*e) for e in edges))
        object.__setattr__(self, "terminals", frozenset(terminals))
        self.validate()

    @classmethod
    def from_dict(cls, doc: Mapping) -> ProcessGraph:
        try:
            nodes = [str(n) for n in doc["nodes"]]
            edges = [
                Edge(
                    str(e["from"]),
                    str(e["to"]),
                    float(e["prob"]),
                    {str(k): int(v) for k, v in (e.get("counters") or {}).items()},
                )
                for e in doc["edges"]
            ]
            terminals = [str(t) for t in doc["terminals"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidProcess(f"malformed process graph document: {exc}") from exc
        return cls(nodes, edges, terminals)

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "edges": [
                {"from": e.src, "to": e.dst, "prob": e.prob, "counters": dict(e.counters)}
                for e in self.edges
            ],
            "terminals": sorted(self.terminals, key=self.nodes.index),
        }

    def validate(self) -> None:
        if not self.nodes:
            raise InvalidProcess("graph has no nodes")
        if len(set(self.nodes)) != len(self.nodes):
            raise InvalidProcess("duplicate node identifiers")
        if not self.terminals:
            raise InvalidProcess("graph needs at least one terminal node")
        known = set(self.nodes)
        if not self.terminals <= known:
            raise InvalidProcess(f"unknown terminal nodes {sorted(self.terminals - known)}")
        out_mass = dict.fromkeys(self.nodes, 0.0)
        for e in self.edges:
            if e.src not in known or e.dst not in known:
                raise InvalidProcess(f"edge {e.src}->{e.dst} references an unknown node")
            if not 0.0 <= e.prob <= 1.0 or math.isnan(e.prob):
                raise InvalidProcess(f"edge {e.src}->{e.dst} has probability {e.prob}")
            if any(v < 0 for v in e.counters.values()):
                raise InvalidProcess(f"edge {e.src}->{e.dst} has a negative counter exponent")
            if e.src in self.terminals:
                raise SelfLoopOnTerminal(f"terminal node {e.src!r} has an outgoing edge")
            out_mass[e.src] += e.prob
        for node, mass in out_mass.items():
            if node not in self.terminals and abs(mass - 1.0) > STOCHASTIC_TOL:
                raise NonStochasticGraph(
                    f"outgoing probabilities of node {node!r} sum to {mass!r}, not 1"
                )


@dataclass(frozen=True, eq=False)
class CountedMatrix:
    """Square column-substochastic matrix with polynomial entries.

    Parameters
    ----------
    dim : int
        Number of states.
    entries : mapping
        Sparse ``(row, col) -> Poly`` map; missing entries are zero.
    terminals : iterable of int
        Indices of absorbing states (zero columns).
    start : int
        Index of the initial state.
    """

    dim: int
    entries: Mapping[tuple[int, int], Poly]
    terminals: frozenset[int]
    start: int = 0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        clean = {}
        for (i, j), p in self.entries.items():
            if not isinstance(p, Poly):
                p = Poly.const(p)
            if not (0 <= i < self.dim and 0 <= j < self.dim):
                raise InvalidProcess(f"entry ({i}, {j}) outside a {self.dim}x{self.dim} matrix")
            if not p.is_zero():
                clean[(int(i), int(j))] = p
        object.__setattr__(self, "entries", clean)
        object.__setattr__(self, "terminals", frozenset(int(t) for t in self.terminals))
        if not 0 <= self.start < self.dim:
            raise InvalidProcess("start index out of range")
        if any(not 0 <= t < self.dim for t in self.terminals):
            raise InvalidProcess("terminal index out of range")

    def __getitem__(self, ij: tuple[int, int]) -> Poly:
        return self.entries.get(ij, Poly())

    @property
    def shape(self) -> tuple[int, int]:
        return (self.dim, self.dim)

    @cached_property
    def counters(self) -> tuple[str, ...]:
        names: set[str] = set()
        for p in self.entries.values():
            names |= p.variables
        return tuple(sorted(names))

    @property
    def terminal_mask(self) -> np.ndarray:
        mask = np.zeros(self.dim, dtype=bool)
        mask[list(self.terminals)] = True
        return mask

    def degree(self, name: str | None = None) -> int:
        """Largest exponent of ``name`` (or total degree) over all entries."""
        return max((p.degree(name) for p in self.entries.values()), default=0)

    def column_sums(self, values: Mapping[str, complex] | None = None) -> np.ndarray:
        sums = np.zeros(self.dim, dtype=complex if _is_complex(values) else float)
        for (_, j), p in self.entries.items():
            sums[j] += p.evaluate(values)
        return sums

    def validate(self, tol: float = STOCHASTIC_TOL) -> None:
        """Check column sums at counters = 1 and coefficient signs."""
        for (i, j), p in self.entries.items():
            if any(c < 0 for _, c in p.items()):
                raise InvalidProcess(f"entry ({i}, {j}) has a negative coefficient")
        sums = self.column_sums()
        for j, s in enumerate(sums):
            target = 0.0 if j in self.terminals else 1.0
            if abs(s - target) > tol:
                if j in self.terminals:
                    raise SelfLoopOnTerminal(f"terminal column {j} sums to {s!r}")
                raise NonStochasticGraph(f"column {j} sums to {s!r}, expected 1")

    def substitute(self, values: Mapping[str, float]) -> CountedMatrix:
        """Bind counters to numbers, returning a matrix in the remaining ones."""
        return CountedMatrix(
            self.dim,
            {ij: p.substitute(values) for ij, p in self.entries.items()},
            self.terminals,
            self.start,
        )

    def drop_counters(self) -> CountedMatrix:
        return self.substitute(dict.fromkeys(self.counters, 1.0))

    def monomial_parts(self) -> list[tuple[Monomial, sp.csr_matrix]]:
        """Decompose as ``sum(mono(w) * C_mono)`` with sparse real ``C_mono``."""
        if "parts" not in self._cache:
            buckets: dict[Monomial, tuple[list, list, list]] = {}
            for (i, j), p in self.entries.items():
                for mono, c in p.items():
                    rows, cols, vals = buckets.setdefault(mono, ([], [], []))
                    rows.append(i)
                    cols.append(j)
                    vals.append(c)
            self._cache["parts"] = [
                (mono, sp.csr_matrix((v, (r, c)), shape=self.shape))
                for mono, (r, c, v) in sorted(buckets.items())
            ]
        return self._cache["parts"]

    def evaluate(self, values: Mapping[str, complex] | None = None) -> sp.csr_matrix:
        """Sparse numeric matrix with counters bound (unbound counters = 1)."""
        dtype = complex if _is_complex(values) else float
        out = sp.csr_matrix(self.shape, dtype=dtype)
        for mono, mat in self.monomial_parts():
            out = out + _mono_value(mono, values or {}) * mat
        return out

    def to_dense(self, values: Mapping[str, complex] | None = None) -> np.ndarray:
        return self.evaluate(values).toarray()

    def __matmul__(self, other: CountedMatrix) -> CountedMatrix:
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        by_row: dict[int, list[tuple[int, Poly]]] = {}
        for (k, j), p in other.entries.items():
            by_row.setdefault(k, []).append((j, p))
        acc: dict[tuple[int, int], list[Poly]] = {}
        for (i, k), p in self.entries.items():
            for j, q in by_row.get(k, ()):
                acc.setdefault((i, j), []).append(p * q)
        entries = {ij: poly_sum(ps) for ij, ps in acc.items()}
        return CountedMatrix(self.dim, entries, self.terminals, self.start)

    def __add__(self, other: CountedMatrix) -> CountedMatrix:
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        entries = dict(self.entries)
        for ij, p in other.entries.items():
            entries[ij] = entries[ij] + p if ij in entries else p
        return CountedMatrix(self.dim, entries, self.terminals, self.start)

    def with_terminals(self, terminals: Iterable[int], start: int | None = None) -> CountedMatrix:
        return CountedMatrix(
            self.dim, self.entries, frozenset(terminals), self.start if start is None else start
        )

    def __repr__(self) -> str:
        return (
            f"CountedMatrix(dim={self.dim}, nnz={len(self.entries)}, "
            f"terminals={sorted(self.terminals)}, counters={list(self.counters)})"
        )


def _is_complex(values: Mapping[str, complex] | None) -> bool:
    return bool(values) and any(isinstance(v, complex) or np.iscomplexobj(v) for v in values.values())


def _mono_value(mono: Monomial, values: Mapping[str, complex]):
    v = 1.0
    for name, e in mono:
        v = v * np.asarray(values.get(name, 1.0)) ** e
    return v


def build_process(g: ProcessGraph) -> CountedMatrix:
    """Adjacency matrix of a process graph, counters attached as monomials."""
    g.validate()
    index = {n: i for i, n in enumerate(g.nodes)}
    acc: dict[tuple[int, int], list[Poly]] = {}
    for e in g.edges:
        if e.prob == 0.0:
            continue
        term = Poly.monomial(e.counters, e.prob)
        acc.setdefault((index[e.dst], index[e.src]), []).append(term)
    entries = {ij: poly_sum(ps) for ij, ps in acc.items()}
    m = CountedMatrix(len(g.nodes), entries, frozenset(index[t] for t in g.terminals), 0)
    m.validate()
    return m


def load_graph(path: str | PathLike) -> ProcessGraph:
    """Read a process graph from a JSON document."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidProcess(f"{path}: not valid JSON ({exc})") from exc
    return ProcessGraph.from_dict(doc)


def _kron(a: CountedMatrix, b: CountedMatrix) -> dict[tuple[int, int], Poly]:
    nb = b.dim
    out = {}
    for (ia, ja), pa in a.entries.items():
        for (ib, jb), pb in b.entries.items():
            out[(ia * nb + ib, ja * nb + jb)] = pa * pb
    return out


def _as_poly(h) -> Poly:
    if h is None:
        return Poly.const(1.0)
    if isinstance(h, str):
        return Poly.var(h)
    if isinstance(h, Poly):
        return h
    return Poly.const(float(h))


def compose_or(a: CountedMatrix, b: CountedMatrix) -> CountedMatrix:
    """Run both processes independently; finish when either finishes."""
    nb = b.dim
    terminals = {
        ia * nb + ib for ia in range(a.dim) for ib in range(nb)
        if ia in a.terminals or ib in b.terminals
    }
    return CountedMatrix(a.dim * nb, _kron(a, b), terminals, a.start * nb + b.start)


def _with_hold(m: CountedMatrix, hold: Poly) -> CountedMatrix:
    entries = dict(m.entries)
    for t in m.terminals:
        entries[(t, t)] = hold
    return CountedMatrix(m.dim, entries, m.terminals, m.start)


def compose_and(
    a: CountedMatrix,
    b: CountedMatrix,
    hold_a: str | Poly | None = None,
    hold_b: str | Poly | None = None,
) -> CountedMatrix:
    """Run both processes independently; finish when both have finished.

    A factor that finishes first stays on its terminal node.  ``hold_a`` and
    ``hold_b`` optionally weight each such holding step with a counter, e.g.
    ``hold_a="w0"`` counts the steps ``a`` spends waiting for ``b``.
    """
    ha, hb = _as_poly(hold_a), _as_poly(hold_b)
    nb = b.dim
    entries = _kron(_with_hold(a, ha), _with_hold(b, hb))
    terminals = set()
    for ta in a.terminals:
        for tb in b.terminals:
            idx = ta * nb + tb
            terminals.add(idx)
            rest = entries.pop((idx, idx), Poly()) - ha * hb
            if not rest.is_zero():
                entries[(idx, idx)] = rest
    return CountedMatrix(a.dim * nb, entries, terminals, a.start * nb + b.start)


def compose_seq(a: CountedMatrix, b: CountedMatrix) -> CountedMatrix:
    """Run ``a`` then ``b``; each terminal of ``a`` steps to the start of ``b``."""
    na = a.dim
    entries = dict(a.entries)
    for (i, j), p in b.entries.items():
        entries[(i + na, j + na)] = p
    for t in a.terminals:
        entries[(b.start + na, t)] = Poly.const(1.0)
    return CountedMatrix(na + b.dim, entries, {t + na for t in b.terminals}, a.start)


def _identity_on(indices: Iterable[int], dim: int, weights=None) -> dict:
    weights = weights or {}
    return {(i, i): Poly.const(weights.get(i, 1.0)) for i in indices if weights.get(i, 1.0) != 0}


def rescale_timing(
    fast: CountedMatrix, slow: CountedMatrix, k1: float, k2: float
) -> CountedMatrix:
    """Merge events of unequal duration into one step of the slow events.

    ``fast`` holds the edges taking time ``k1`` and ``slow`` those taking
    ``k2 >= k1``.  One step of the result performs the slow part once and
    then ``ceil(k2 / k1)`` rounds of the fast part.  Probability mass with
    nowhere to go in a sub-step stays on its node.  Apply this before any
    tensor composition.
    """
    if fast.dim != slow.dim:
        raise InvalidSplit("fast and slow parts differ in dimension")
    if not 0 < k1 <= k2:
        raise InvalidSplit(f"need 0 < k1 <= k2, got k1={k1}, k2={k2}")
    terminals = fast.terminals | slow.terminals
    total = (fast + slow).with_terminals(terminals, fast.start)
    try:
        total.validate()
    except InvalidProcess as exc:
        raise InvalidSplit(f"fast + slow is not a valid process: {exc}") from exc

    n = fast.dim
    r = math.ceil(k2 / k1 - 1e-12)
    nonterm = [j for j in range(n) if j not in terminals]

    step = fast + CountedMatrix(n, _identity_on(terminals, n), terminals)
    power = CountedMatrix(n, _identity_on(range(n), n), terminals)
    for _ in range(r):
        power = step @ power
    sums = power.column_sums()
    leftover = {j: 1.0 - sums[j].real for j in nonterm if 1.0 - sums[j].real > STOCHASTIC_TOL}
    fast_block = power + CountedMatrix(n, _identity_on(leftover, n, leftover), terminals)

    ssum = slow.column_sums()
    hold = {j: 1.0 - ssum[j].real for j in nonterm if 1.0 - ssum[j].real > STOCHASTIC_TOL}
    slow_block = slow + CountedMatrix(n, _identity_on(hold, n, hold), terminals)

    out = (fast_block @ slow_block).with_terminals(terminals, fast.start)
    # terminal columns are empty in slow_block, so they stay empty here
    out.validate(tol=1e-10)
    return out


def pmf_grid(
    m: CountedMatrix,
    t_max: int,
    points: Mapping[str, np.ndarray] | None = None,
) -> np.ndarray:
    """Completion pmf for ``t = 0..t_max`` at many counter bindings at once.

    ``points`` maps counter names to equal-length arrays of values; entry
    ``[t, g]`` of the result is ``p_t`` evaluated at the ``g``-th binding.
    Only the start column is propagated, one sparse product per monomial and
    step.
    """
    points = {k: np.asarray(v) for k, v in (points or {}).items()}
    sizes = {v.shape for v in points.values()}
    if len(sizes) > 1:
        raise ValueError("all counter grids must have the same shape")
    g = next(iter(sizes))[0] if sizes else 1
    is_complex = any(np.iscomplexobj(v) for v in points.values())
    dtype = complex if is_complex else float

    parts = []
    for mono, mat in m.monomial_parts():
        coef = np.ones(g, dtype=dtype)
        for name, e in mono:
            if name in points:
                coef = coef * points[name] ** e
        parts.append((mat.astype(dtype), coef))

    v = np.zeros((m.dim, g), dtype=dtype)
    v[m.start, :] = 1.0
    term = np.fromiter(sorted(m.terminals), dtype=int)
    out = np.empty((t_max + 1, g), dtype=dtype)
    out[0] = v[term].sum(axis=0)
    for t in range(1, t_max + 1):
        nxt = np.zeros_like(v)
        for mat, coef in parts:
            nxt += (mat @ v) * coef
        v = nxt
        out[t] = v[term].sum(axis=0)
    return out


def completion_pmf(
    m: CountedMatrix, t_max: int, values: Mapping[str, complex] | None = None
) -> np.ndarray:
    """``p_t`` for ``t = 0..t_max`` by repeated products with the start column."""
    points = {k: np.array([v]) for k, v in (values or {}).items()}
    return pmf_grid(m, t_max, points)[:, 0]


def pmf_by_power(
    m: CountedMatrix, t: int, values: Mapping[str, complex] | None = None
) -> complex | float:
    """Probability (or counter-weighted polynomial value) of finishing at step ``t``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    return completion_pmf(m, t, values)[t].item()
