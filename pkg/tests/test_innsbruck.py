import numpy as np
import pytest

from conftest import bell, enumerate_paths, max_pmf
from markovkey.counting import error_pmf, joint_error_pmf
from markovkey.exceptions import BadBlockForm, LambdaOutOfRange
from markovkey.innsbruck import (
    RepeaterConfig,
    best_final_key,
    conditional_key_rate,
    distillation_matrix,
    eps_from_lifetime,
    error_tables,
    full_matrix,
    kmax,
    normalized_key_rate,
    postselect_pmf,
    q1_distribution,
    section_matrix,
    simplified_key_rate,
)
from markovkey.markov import CountedMatrix, compose_and, completion_pmf
from markovkey.states import dejmps_coeffs, key_fraction_coeffs, werner_state


# -- matrices -----------------------------------------------------------------


def test_single_pair_section_has_no_counter():
    m = section_matrix(1, 0.3)
    assert m.counters == ()
    np.testing.assert_allclose(m.to_dense(), bell(0.3).to_dense())


@pytest.mark.parametrize("q0", [1, 2, 3, 4])
def test_section_is_max_of_geometrics(q0):
    p = 0.3
    t = np.arange(60)
    cdf = (1 - (1 - p) ** t) ** q0
    got = completion_pmf(section_matrix(q0, p), 59, {"w0": 1.0})
    np.testing.assert_allclose(np.cumsum(got), cdf, atol=1e-12)


def test_distillation_success_probability():
    sect = section_matrix(4, 1.0)
    d = distillation_matrix(sect, 0.5, 4)
    assert d[d.dim - 1, d.dim - 2].evaluate() == pytest.approx(0.75)
    assert d[0, d.dim - 2].evaluate() == pytest.approx(0.25)
    d1 = distillation_matrix(sect, 1.0, 4)
    assert d1[d1.dim - 1, d1.dim - 2].evaluate() == 1.0
    assert completion_pmf(d1, 3).tolist() == [0, 0, 1, 0]


def test_distillation_rejects_other_shapes():
    bad = CountedMatrix(3, {(1, 0): 0.5, (2, 0): 0.5}, {1, 2}, 0)
    with pytest.raises(BadBlockForm):
        distillation_matrix(bad, 0.8, 2)


def test_full_matrix_is_max_of_two_sections():
    dist = distillation_matrix(section_matrix(3, 0.4), 0.7, 3)
    full = full_matrix(dist)
    assert full.dim == dist.dim**2
    side = completion_pmf(dist, 80)
    np.testing.assert_allclose(completion_pmf(full, 80), max_pmf(side, side), atol=1e-13)


def test_joint_counts_match_enumeration():
    p, lam = 0.5, 0.8
    full = full_matrix(distillation_matrix(section_matrix(2, p), lam, 2))
    for t in range(2, 9):
        paths = enumerate_paths(full, t, ("w0", "w1"))
        total = sum(v for (s, *_), v in paths.items() if s == t)
        joint = joint_error_pmf(full, t, ("w0", "w1"))
        for (s, k0, k1), v in paths.items():
            if s == t:
                assert joint[k0, k1] == pytest.approx(v / total, abs=1e-9)


def test_factorized_tables_match_full_matrix():
    q0, p, lam = 2, 0.5, 0.8
    tables = error_tables(q0, p, lam)
    full = full_matrix(distillation_matrix(section_matrix(q0, p), lam, q0))
    for t in range(2, 9):
        ref = joint_error_pmf(full, t, ("w0", "w1"))
        got = tables.joint(t) / tables.pmf[t]
        k0, k1 = ref.counts.shape
        padded = np.zeros((max(k0, got.shape[0]), max(k1, got.shape[1])))
        padded[: got.shape[0], : got.shape[1]] += got
        padded[:k0, :k1] -= ref.counts
        assert np.abs(padded).max() < 1e-12
    np.testing.assert_allclose(tables.pmf, completion_pmf(full, tables.t_max), atol=1e-13)


# -- distillation bookkeeping -------------------------------------------------


def test_kmax_examples():
    assert kmax(1.0, 1.0, 0.01) == 0
    assert kmax(0.9, 0.95, 0.01) == 4
    with pytest.raises(LambdaOutOfRange):
        kmax(0.5, 0.95, 0.01)


def test_q1_examples():
    np.testing.assert_allclose(q1_distribution(2, 1.0), [0.0, 1.0])
    for q0, lam in [(4, 0.6), (8, 0.75), (6, 0.9)]:
        assert q1_distribution(q0, lam).sum() == pytest.approx(1.0)


def test_q1_against_sampling():
    rng = np.random.default_rng(2024)
    n = 1_000_000
    q1 = np.minimum(rng.binomial(2, 0.5, n), rng.binomial(2, 0.5, n))
    freq = np.bincount(q1, minlength=3) / n
    law = q1_distribution(4, 0.5)
    sigma = np.sqrt(law * (1 - law) / n)
    assert np.all(np.abs(freq - law) <= 3 * sigma + 1e-12)


def test_postselection_examples():
    pmf = completion_pmf(compose_and(bell(0.5), bell(0.5)), 10)
    assert np.array_equal(postselect_pmf(pmf, np.ones_like(pmf), 4), pmf)
    keep = np.zeros_like(pmf)
    keep[2] = error_pmf(compose_and(bell(0.5), bell(0.5), hold_a="w"), 2)[0]
    assert postselect_pmf(pmf, keep, 2)[2] == pytest.approx(0.1125)


def test_keep_probability_is_one_for_large_kmax():
    tables = error_tables(2, 0.4, 0.8)
    np.testing.assert_allclose(tables.keep_probability(tables.t_max + 1)[2:], 1.0, atol=1e-12)


def test_lifetime_conversion():
    assert eps_from_lifetime(1.0, 25.0, 2e5) == pytest.approx(1 - np.exp(-4 * 25 / 2e5))
    cfg = RepeaterConfig.from_lifetime(0.01, q0=2, p=0.5)
    assert cfg.eps_w == pytest.approx(1 - np.exp(-0.05))


# -- key rates ----------------------------------------------------------------


def _perfect(q0):
    return RepeaterConfig(q0=q0, p=1.0, f_init=1.0, eps_w=0.0, lam=1.0, samples=500)


@pytest.mark.parametrize("q0", [2, 4, 8])
def test_perfect_pipeline(q0):
    value, se = conditional_key_rate(_perfect(q0), 2)
    assert value == pytest.approx(q0 / 2)
    assert se == 0.0
    assert normalized_key_rate(_perfect(q0)).value == pytest.approx(0.25)
    assert simplified_key_rate(_perfect(q0)).value == pytest.approx(1 / 6)


def test_best_final_key_never_below_keeping_pairs():
    rng = np.random.default_rng(1)
    fid = rng.uniform(0.7, 1.0, size=(200, 5))
    states = np.stack([fid, (1 - fid) / 3, (1 - fid) / 3, (1 - fid) / 3], axis=-1)
    assert np.all(best_final_key(states) >= key_fraction_coeffs(states).sum(axis=1) - 1e-12)
    two = np.stack([werner_state(0.8).to_array()] * 2)[None]
    out, _ = dejmps_coeffs(two[:, 0], two[:, 1])
    keep_both = 2 * key_fraction_coeffs(two[:, 0])[0]
    assert best_final_key(two)[0] == pytest.approx(max(key_fraction_coeffs(out)[0], keep_both))


def test_low_fidelity_gives_no_key():
    cfg = RepeaterConfig(q0=2, p=0.2, f_init=0.5, eps_w=0.05, lam=0.6, samples=2000)
    assert conditional_key_rate(cfg, 30) == (0.0, 0.0)
    assert normalized_key_rate(cfg).value == 0.0


def test_seeded_runs_are_reproducible(monkeypatch):
    cfg = RepeaterConfig(q0=4, p=0.3, eps_w=1e-3, samples=9000, seed=7)
    a = normalized_key_rate(cfg)
    monkeypatch.setenv("MARKOVKEY_MAX_WORKERS", "3")
    b = normalized_key_rate(cfg)
    assert a == b
    c = normalized_key_rate(RepeaterConfig(q0=4, p=0.3, eps_w=1e-3, samples=9000, seed=8))
    assert c.value != a.value


def test_memory_error_never_helps():
    rates = [
        normalized_key_rate(RepeaterConfig(q0=2, p=0.3, eps_w=eps, lam=0.8, samples=100_000, seed=3)).value
        for eps in (0.0, 1e-3, 1e-2)
    ]
    assert rates[0] >= rates[1] >= rates[2]
    assert rates[2] >= 0.0


def test_simplified_rate_ignores_memory_error():
    values = {
        simplified_key_rate(RepeaterConfig(q0=2, p=0.3, eps_w=eps, samples=20_000, seed=5)).value
        for eps in (0.0, 1e-4, 1e-2)
    }
    assert len(values) == 1
    assert values.pop() >= 0.0


def test_simplified_at_unit_probability():
    # p = 1 removes all waiting, so the two rates differ only by t versus t + 1
    cfg = RepeaterConfig(q0=4, p=1.0, f_init=0.9, eps_w=1e-3, lam=0.9, samples=20_000, seed=2)
    k, s = normalized_key_rate(cfg), simplified_key_rate(cfg)
    tables = error_tables(4, 1.0, 0.9)
    t = np.arange(1, tables.t_max + 1)
    pmf = tables.pmf[1:]
    ratio = np.sum(pmf / (t + 1)) / np.sum(pmf / t)
    assert s.value == pytest.approx(k.value * ratio, rel=0.05)


def test_monte_carlo_error_bars_cover():
    cfg = RepeaterConfig(q0=2, p=0.4, eps_w=5e-3, lam=0.8, samples=100_000, seed=0)
    ref, _ = conditional_key_rate(cfg, 6)
    hits = 0
    for seed in range(1, 21):
        small = RepeaterConfig(q0=2, p=0.4, eps_w=5e-3, lam=0.8, samples=3000, seed=seed)
        value, se = conditional_key_rate(small, 6)
        hits += abs(value - ref) <= 3 * se
    assert hits >= 19
