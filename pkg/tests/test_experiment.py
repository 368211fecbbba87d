"""Sequencing, study runs, log schema, determinism, and replay."""
from __future__ import annotations

import random
from collections import Counter

import pytest

from simtutor.experiment import (
    COLUMNS,
    TrialRecord,
    agent_condition,
    box_arrows_config,
    dump_problem_sets,
    filter_hard,
    fractions_config,
    read_transactions,
    run_study,
    sequence_fractions,
    write_transactions,
)
from simtutor.state import ConfigError


# -- sequencing ---------------------------------------------------------------

def test_blocked_sequence_transitions_at_positions_11_and_25():
    order = [p.problem_type for p in
             sequence_fractions("blocked", random.Random(0))]
    assert order[:10] == ["add_same"] * 10
    assert order[10:24] == ["add_diff"] * 14
    assert order[24:] == ["multiply"] * 24


def test_interleaved_sequence_preserves_the_type_multiset():
    order = [p.problem_type for p in
             sequence_fractions("interleaved", random.Random(3))]
    assert Counter(order) == {"add_same": 10, "add_diff": 14, "multiply": 24}


def test_blocked_sequences_differ_within_blocks_across_seeds():
    a = [p.given_fields["num1"] for p in sequence_fractions("blocked", random.Random(0))]
    b = [p.given_fields["num1"] for p in sequence_fractions("blocked", random.Random(1))]
    assert a != b


def test_unknown_condition_is_rejected():
    with pytest.raises(ConfigError):
        sequence_fractions("mixed", random.Random(0))


# -- config -------------------------------------------------------------------

def test_defaults_match_the_study_designs():
    f = fractions_config()
    assert f.n_agents == 78 and f.conditions == ("blocked", "interleaved")
    b = box_arrows_config()
    assert b.n_agents == 202 and b.conditions == ("constrained", "unconstrained")


def test_invalid_configs_fail_before_simulation():
    with pytest.raises(ConfigError):
        fractions_config(n_agents=0)
    with pytest.raises(ConfigError):
        fractions_config(replications=0)
    with pytest.raises(ConfigError):
        box_arrows_config(jobs=0)


def test_condition_allocation_is_balanced():
    cfg = fractions_config(n_agents=9)
    assigned = Counter(agent_condition(cfg, i) for i in range(9))
    assert abs(assigned["blocked"] - assigned["interleaved"]) <= 1


# -- run_study ----------------------------------------------------------------

@pytest.fixture(scope="module")
def small_fraction_log():
    return run_study(fractions_config(n_agents=4, replications=2, seed=11))


def test_log_shape_per_agent(small_fraction_log):
    problems = {(r.replication, r.agent_id, r.phase, r.problem_id)
                for r in small_fraction_log}
    per_agent = Counter((rep, agent, phase) for rep, agent, phase, _p in problems)
    for (rep, agent, phase), count in per_agent.items():
        assert count == (48 if phase == "tutor" else 8)


def test_every_agent_starts_with_a_hint(small_fraction_log):
    first = {}
    for r in small_fraction_log:
        first.setdefault((r.replication, r.agent_id), r)
    assert all(r.outcome == "HINT" for r in first.values())
    assert all(r.problem_correct is False for r in first.values())


def test_opportunity_counts_increase_per_type(small_fraction_log):
    seen = {}
    for r in small_fraction_log:
        key = (r.replication, r.agent_id, r.problem_type)
        last, pid = seen.get(key, (-1, None))
        if pid == r.problem_id:
            assert r.opportunity == last
        else:
            assert r.opportunity == last + 1
            seen[key] = (r.opportunity, r.problem_id)


def test_run_study_is_deterministic_and_job_count_independent():
    base = fractions_config(n_agents=4, replications=1, seed=5)
    serial = run_study(base)
    parallel = run_study(fractions_config(n_agents=4, replications=1, seed=5, jobs=2))
    assert serial == parallel


def test_tiny_logs_match_their_golden_digests():
    # Pins the exact behavior of the whole pipeline on two-agent runs; any
    # change to generators, agent dynamics, or log assembly shows up here.
    import hashlib

    def digest(rows):
        payload = "\n".join(",".join(r.as_row()) for r in rows)
        return hashlib.sha256(payload.encode()).hexdigest()

    fractions = run_study(fractions_config(n_agents=2, replications=1, seed=7))
    assert digest(fractions) == \
        "4ba59df0f77318c3a2dd4a275aed74fdcaa4e6415c1b4589bc2406104c3b9972"
    box = run_study(box_arrows_config(n_agents=2, replications=1, seed=7))
    assert digest(box) == \
        "54ee3893204f2797e85e6849c1d9fde0322147352b0aa1d474740092adc83e61"


def test_replaying_dumped_problem_sets_reproduces_the_log():
    cfg = fractions_config(n_agents=3, replications=1, seed=9)
    direct = run_study(cfg)
    replayed = run_study(cfg, problem_sets=dump_problem_sets(cfg))
    assert direct == replayed


def test_replaying_a_persisted_problem_file_reproduces_the_log(tmp_path):
    from simtutor.experiment import load_problem_sets, save_problem_sets

    cfg = box_arrows_config(n_agents=2, replications=1, seed=4)
    direct = run_study(cfg)
    path = tmp_path / "problems.jsonl"
    save_problem_sets(path, dump_problem_sets(cfg))
    replayed = run_study(cfg, problem_sets=load_problem_sets(path))
    assert direct == replayed


def test_box_study_counts_and_hard_filter():
    cfg = box_arrows_config(n_agents=4, replications=1, seed=2)
    rows = run_study(cfg)
    assert {r.phase for r in rows} == {"tutor"}
    problems = {(r.agent_id, r.problem_id, r.problem_type) for r in rows}
    per_agent = Counter(a for a, _p, _t in problems)
    assert set(per_agent.values()) == {32}
    hard_rows = filter_hard(rows)
    assert {r.problem_type for r in hard_rows} == {"box_hard"}
    # scoring filter preserves every hard row
    assert len(hard_rows) == sum(1 for r in rows if r.problem_type == "box_hard")
    hard_problems = {(a, p) for a, p, t in problems if t == "box_hard"}
    assert len(hard_problems) == 4 * 16


def test_curve_positions_count_every_agent(small_fraction_log):
    from simtutor.analytics import learning_curve

    per_condition = {}
    for r in small_fraction_log:
        per_condition.setdefault(r.condition, set()).add((r.replication, r.agent_id))
    for point in learning_curve(small_fraction_log):
        assert point.n == len(per_condition[point.condition])


def test_pretraining_affects_half_the_box_agents():
    cfg = box_arrows_config(n_agents=8, replications=1, seed=3)
    rows = run_study(cfg)
    # Pretrained agents enter the main phase with easy-problem opportunity
    # counts already advanced; their first logged easy row starts at 16.
    first_easy = {}
    for r in rows:
        if r.problem_type == "box_easy":
            first_easy.setdefault(r.agent_id, r.opportunity)
    starts = Counter(first_easy.values())
    assert starts[16] == 4 and starts[0] == 4


# -- persistence ----------------------------------------------------------------

def test_transaction_round_trip(tmp_path, small_fraction_log):
    path = tmp_path / "transactions.csv"
    write_transactions(path, small_fraction_log)
    assert read_transactions(path) == small_fraction_log
    header = path.read_text().splitlines()[0]
    assert header == ",".join(COLUMNS)


def test_schema_validation_rejects_corruption(tmp_path, small_fraction_log):
    path = tmp_path / "transactions.csv"
    write_transactions(path, small_fraction_log)
    lines = path.read_text().splitlines()
    (tmp_path / "bad_header.csv").write_text(
        "\n".join(["a,b,c"] + lines[1:]) + "\n")
    with pytest.raises(ConfigError):
        read_transactions(tmp_path / "bad_header.csv")
    truncated = [lines[0]] + [line.rsplit(",", 1)[0] for line in lines[1:3]]
    (tmp_path / "bad_rows.csv").write_text("\n".join(truncated) + "\n")
    with pytest.raises(ConfigError):
        read_transactions(tmp_path / "bad_rows.csv")


def test_record_row_round_trip():
    rec = TrialRecord("a001", 2, "blocked", "tutor", "p1", "add_diff", 3,
                      "conv_den1", "ERROR", False)
    assert TrialRecord.from_row(rec.as_row()) == rec
