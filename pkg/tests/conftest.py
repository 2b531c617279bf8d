from __future__ import annotations

import numpy as np
import pytest

from markovkey.markov import CountedMatrix
from markovkey.poly import Poly

ACCEPTANCE_LINES: list[str] = []


def bell(p: float) -> CountedMatrix:
    """Single pair: stay with 1 - p, connect with p."""
    entries = {(1, 0): Poly.const(p)}
    if p < 1:
        entries[(0, 0)] = Poly.const(1 - p)
    return CountedMatrix(2, entries, {1}, 0)


def random_chain(rng: np.random.Generator, dim: int, n_term: int = 1, denom: int = 10) -> CountedMatrix:
    """Absorbing chain with rational probabilities k/denom.

    Every transient state has an edge to the next state (the last one to a
    terminal), so absorption is certain.
    """
    n_trans = dim - n_term
    entries: dict[tuple[int, int], Poly] = {}
    for j in range(n_trans):
        forced = j + 1 if j + 1 < dim else dim - 1
        fanout = int(rng.integers(1, min(dim, 4) + 1))
        targets = set(int(x) for x in rng.choice(dim, size=fanout, replace=False)) | {forced}
        targets = sorted(targets)
        weights = rng.multinomial(denom - len(targets), np.ones(len(targets)) / len(targets)) + 1
        for i, w in zip(targets, weights):
            entries[(i, j)] = Poly.const(w / denom)
    return CountedMatrix(dim, entries, set(range(n_trans, dim)), 0)


def enumerate_paths(m: CountedMatrix, t: int, counters: tuple[str, ...]) -> dict:
    """Sum over all walks of length <= ``t``: ``{(s, k...): prob}`` for absorption at step ``s``.

    Walks are merged by (node, counts) after every step, which keeps the
    sum exact without listing each walk separately.
    """
    steps: dict[int, list] = {}
    for (i, j), p in m.entries.items():
        for mono, c in p.items():
            exps = dict(mono)
            steps.setdefault(j, []).append((i, c, tuple(exps.get(n, 0) for n in counters)))

    out: dict = {}
    front = {(m.start, (0,) * len(counters)): 1.0}
    for s in range(t + 1):
        nxt: dict = {}
        for (node, ks), prob in front.items():
            if node in m.terminals:
                key = (s, *ks)
                out[key] = out.get(key, 0.0) + prob
                continue
            for i, c, e in steps.get(node, ()):
                key = (i, tuple(a + b for a, b in zip(ks, e)))
                nxt[key] = nxt.get(key, 0.0) + prob * c
        front = nxt
    return out


def max_pmf(pa: np.ndarray, pb: np.ndarray) -> np.ndarray:
    ca, cb = np.cumsum(pa), np.cumsum(pb)
    return np.diff(np.concatenate([[0.0], ca * cb]))


def min_pmf(pa: np.ndarray, pb: np.ndarray) -> np.ndarray:
    sa, sb = 1 - np.cumsum(pa), 1 - np.cumsum(pb)
    surv = sa * sb
    return np.diff(np.concatenate([[0.0], 1 - surv]))


def record_acceptance(line: str) -> None:
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
