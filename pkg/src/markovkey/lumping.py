"""State lumping for process matrices with permutation symmetry.

A counter attached to one representative sub-process breaks the symmetry
that makes a matrix lumpable.  Mixing the state uniformly within each block
before every step restores it: the effective step matrix is
``m @ mixing_matrix(part)``, which leaves the block marginals of a lumpable
chain unchanged.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass
from math import comb

from .exceptions import InvalidProcess, NotLumpable
from .markov import CountedMatrix
from .poly import Poly, poly_sum

LUMP_TOL = 1e-12


@dataclass(frozen=True)
class Partition:
    """Ordered, disjoint blocks of state indices covering ``0..n-1``."""

    blocks: tuple[tuple[int, ...], ...]

    def __init__(self, blocks: Iterable[Iterable[int]]):
        object.__setattr__(self, "blocks", tuple(tuple(sorted(b)) for b in blocks))

    @classmethod
    def singletons(cls, dim: int) -> Partition:
        return cls([i] for i in range(dim))

    @property
    def size(self) -> int:
        return sum(len(b) for b in self.blocks)

    def block_of(self, index: int) -> int:
        for k, b in enumerate(self.blocks):
            if index in b:
                return k
        raise KeyError(index)

    def validate(self, m: CountedMatrix | None = None, dim: int | None = None) -> None:
        dim = m.dim if m is not None else dim
        seen = [i for b in self.blocks for i in b]
        if any(not b for b in self.blocks):
            raise InvalidProcess("partition has an empty block")
        if len(seen) != len(set(seen)):
            raise InvalidProcess("partition blocks overlap")
        if dim is not None and sorted(seen) != list(range(dim)):
            raise InvalidProcess("partition does not cover the state space")
        if m is not None:
            for b in self.blocks:
                kinds = {i in m.terminals for i in b}
                if len(kinds) > 1:
                    raise InvalidProcess(f"block {b} mixes terminal and non-terminal states")


def count_partition(q: int) -> Partition:
    """Group the ``2**q`` states of ``q`` parallel pairs by how many are connected.

    State ``s`` encodes pair ``k`` (first pair = most significant bit) as
    connected when the corresponding bit is set, matching the index layout
    produced by repeated :func:`~markovkey.markov.compose_and`.
    """
    blocks: list[list[int]] = [[] for _ in range(q + 1)]
    for s in range(2**q):
        blocks[bin(s).count("1")].append(s)
    return Partition(blocks)


def _block_sums(m: CountedMatrix, part: Partition) -> dict[tuple[int, int], Poly]:
    """``sum_{i in block a} m[i, j]`` keyed by ``(a, j)``."""
    where = {i: k for k, b in enumerate(part.blocks) for i in b}
    acc: dict[tuple[int, int], list[Poly]] = {}
    for (i, j), p in m.entries.items():
        acc.setdefault((where[i], j), []).append(p)
    return {key: poly_sum(ps) for key, ps in acc.items()}


def check_lumpable(m: CountedMatrix, part: Partition, atol: float = LUMP_TOL) -> bool:
    """True iff block-row sums agree (coefficient-wise) for every state of each block."""
    part.validate(m)
    sums = _block_sums(m, part)
    zero = Poly()
    for a in range(len(part.blocks)):
        for b in part.blocks:
            ref = sums.get((a, b[0]), zero)
            if any(not ref.isclose(sums.get((a, j), zero), atol) for j in b[1:]):
                return False
    return True


def mixing_matrix(part: Partition, dim: int) -> CountedMatrix:
    """Block-diagonal matrix with every entry of an ``n``-block equal to ``1/n``."""
    part.validate(dim=dim)
    entries = {}
    for b in part.blocks:
        w = Poly.const(1.0 / len(b))
        for i in b:
            for j in b:
                entries[(i, j)] = w
    return CountedMatrix(dim, entries, frozenset())


def lump(m: CountedMatrix, part: Partition, mix: bool = True) -> CountedMatrix:
    """Collapse each block to one state.

    With ``mix=True`` (the default) the matrix is first combined with the
    in-block mixing matrix, which is what makes counter-carrying matrices
    lumpable.
    """
    part.validate(m)
    eff = m @ mixing_matrix(part, m.dim) if mix else m
    if not check_lumpable(eff, part):
        raise NotLumpable("block-row sums differ within a block")
    sums = _block_sums(eff, part)
    entries = {}
    for b_idx, b in enumerate(part.blocks):
        for a_idx in range(len(part.blocks)):
            p = sums.get((a_idx, b[0]))
            if p is not None and not p.is_zero():
                entries[(a_idx, b_idx)] = p
    terminals = {k for k, b in enumerate(part.blocks) if b[0] in m.terminals}
    return CountedMatrix(len(part.blocks), entries, terminals, part.block_of(m.start))


def lumped_section_matrix(q: int, p: float, w: str | None = "w0") -> CountedMatrix:
    """Closed-form lumped matrix of ``q`` pairs connecting in parallel.

    State ``j`` is the number of connected pairs and state ``q`` is terminal.
    The transition ``j -> i`` has weight
    ``C(q-j, q-i) p**(i-j) (1-p)**(q-i) * ((q-j) + j*w) / q``, i.e. the
    counter ``w`` fires with the probability ``j/q`` that a typical pair is
    among those already waiting.
    """
    if q < 1:
        raise ValueError("need at least one pair")
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0, 1]")
    entries = {}
    for j in range(q):
        if w is None or j == 0:
            weight = Poly.const(1.0)
        else:
            weight = Poly({(): (q - j) / q, ((w, 1),): j / q})
        for i in range(j, q + 1):
            prob = comb(q - j, q - i) * p ** (i - j) * (1.0 - p) ** (q - i)
            if prob:
                entries[(i, j)] = weight * prob
    return CountedMatrix(q + 1, entries, {q}, 0)


def parallel_pairs_matrix(
    q: int, p: float, w: str | None = "w0", pair_matrix: CountedMatrix | None = None
) -> CountedMatrix:
    """Unlumped ``2**q``-state AND composition of ``q`` single pairs.

    The counter ``w`` weights the holding steps of the first pair only.
    """
    from .markov import compose_and

    bell = pair_matrix if pair_matrix is not None else _bell(p)
    rest = bell
    for _ in range(q - 2):
        rest = compose_and(bell, rest)
    if q == 1:
        return bell
    return compose_and(bell, rest, hold_a=w)


def _bell(p: float) -> CountedMatrix:
    entries = {(1, 0): Poly.const(p)}
    if p < 1.0:
        entries[(0, 0)] = Poly.const(1.0 - p)
    return CountedMatrix(2, entries, {1}, 0)

