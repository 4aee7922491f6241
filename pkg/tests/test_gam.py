import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gamurn.errors import ConfigurationError
from gamurn.gam import (GamConfig, GamState, Schedule, exact_label_law, label_sequences, simulate,
                        step)
from gamurn.harness import chi_square_law
from gamurn.weights import WeightScheme

from conftest import make_config


def test_schedule_constant_and_sequence():
    s = Schedule.constant(0.3)
    assert s.is_constant and s.s(1) == 0.3 and s.s(10 ** 6) == 0.3
    q = Schedule.sequence([0.5, 0.1, 0.2])
    assert [q.s(n) for n in range(1, 5)] == [0.5, 0.1, 0.2, 0.2]
    with pytest.raises(ConfigurationError):
        q.s(0)
    with pytest.raises(ConfigurationError):
        Schedule.constant(1.5)


def test_schedule_roundtrip():
    for s in (Schedule.constant(0.25), Schedule.sequence([0.1, 0.2])):
        assert Schedule.from_dict(s.to_dict()).to_dict() == s.to_dict()


def test_config_roundtrip(power2):
    cfg = make_config(power2, 0.3, seed=11)
    back = GamConfig.from_dict(cfg.to_dict())
    assert back.scheme == power2 and back.p == 0.3 and back.seed == 11


@pytest.mark.parametrize("p,length", [(0.3, 4), (0.0, 3), (0.7, 5)])
def test_exact_law_is_a_distribution(power2, p, length):
    law = exact_label_law(power2, Schedule.constant(p), length)
    assert sum(law.values()) == pytest.approx(1.0, abs=1e-12)
    for seq in law:
        assert seq[0] == 1
        assert all(b <= max(seq[:i + 1]) + 1 for i, b in enumerate(seq[1:]))


def test_exact_law_small_case():
    f = WeightScheme.linear()
    law = exact_label_law(f, Schedule.constant(0.5), 3)
    # sizes (1) -> new group w.p. 1/2; then (1,1) joins either w.p. 1/4 each
    assert law[(1, 2, 1)] == pytest.approx(0.5 * 0.5 * 0.5)
    assert law[(1, 1, 1)] == pytest.approx(0.5 * 0.5)
    assert law[(1, 1, 2)] == pytest.approx(0.5 * 0.5)


@pytest.mark.parametrize("sampler", ["tree", "gumbel", "linear"])
def test_samplers_follow_exact_law(power2, sampler):
    cfg = make_config(power2, 0.3)
    labels = label_sequences(cfg, 4, 20_000, master_seed=7, sampler=sampler)
    observed = {}
    for row in labels:
        key = tuple(int(x) for x in row)
        observed[key] = observed.get(key, 0) + 1
    res = chi_square_law(observed, exact_label_law(power2, cfg.schedule, 4), len(labels))
    assert res["p_value"] > 1e-3


def test_group_exponential_law():
    f = WeightScheme.group_exponential()
    cfg = make_config(f, 0.5)
    labels = label_sequences(cfg, 4, 10_000, master_seed=3)
    observed = {}
    for row in labels:
        key = tuple(int(x) for x in row)
        observed[key] = observed.get(key, 0) + 1
    res = chi_square_law(observed, exact_label_law(f, cfg.schedule, 4), len(labels))
    assert res["p_value"] > 1e-3


def test_step_matches_law(power2, rng):
    cfg = make_config(power2, 0.4)
    counts = {}
    for _ in range(20_000):
        st = GamState.initial(power2)
        seq = [1]
        for _ in range(2):
            nxt = step(st, cfg, rng)
            if nxt.L > st.L:
                seq.append(nxt.L)
            else:
                seq.append(int(np.flatnonzero(nxt.sizes != st.sizes)[0]) + 1)
            st = nxt
        counts[tuple(seq)] = counts.get(tuple(seq), 0) + 1
    res = chi_square_law(counts, exact_label_law(power2, cfg.schedule, 3), 20_000)
    assert res["p_value"] > 1e-3


@settings(max_examples=25, deadline=None)
@given(p=st.floats(0.0, 0.95), horizon=st.integers(1, 400), seed=st.integers(0, 2 ** 31))
def test_simulate_invariants(p, horizon, seed):
    cfg = make_config(WeightScheme.power(1.5), p, seed)
    tr = simulate(cfg, horizon, snapshot_at=[1, horizon // 2, horizon], record_labels=True,
                  record_parents=True)
    assert tr.final.n == horizon
    assert tr.final.sizes.sum() == horizon
    assert np.all(tr.final.sizes >= 1)
    assert tr.labels.size == horizon
    assert np.bincount(tr.labels, minlength=tr.final.L + 1)[1:].tolist() == tr.final.sizes.tolist()
    assert all(1 <= ld <= s.L for ld, s in zip(tr.leaders, tr.snapshots))
    assert tr.parents.size == tr.final.L


def test_simulate_deterministic(power2):
    cfg = make_config(power2, 0.5, seed=42)
    a = simulate(cfg, 5000)
    b = simulate(cfg, 5000)
    assert np.array_equal(a.final.sizes, b.final.sizes)


def test_p_zero_single_group(power2):
    tr = simulate(make_config(power2, 0.0), 1000)
    assert tr.final.L == 1


def test_to_csv(power2, tmp_path):
    tr = simulate(make_config(power2, 0.5, 1), 50, snapshot_at=[10, 50])
    path = tmp_path / "t.csv"
    tr.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "n,group_index,size"
    assert len(lines) == 1 + tr.snapshots[0].L + tr.snapshots[1].L


def test_bad_horizon(power2):
    with pytest.raises(ConfigurationError):
        simulate(make_config(power2, 0.5), 0)
