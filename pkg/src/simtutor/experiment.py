"""A/B experiment harness: condition assignment, curricula, replications.

Every agent is fresh (empty skill store), gets its own seeded problem stream,
trains through its curriculum, and (for the fractions study) takes a
feedback-free posttest.  Agent runs are independent, so they can execute in
parallel; the transaction log is always assembled in (replication, agent,
problem) order, making output independent of scheduling.
"""
from __future__ import annotations

import csv
import json
import multiprocessing
import random
from dataclasses import dataclass, replace

from .agent import Agent, run_problem
from .state import ConfigError
from .tutors import (
    ProblemScript,
    TutorSession,
    gen_box_problem,
    gen_fraction_problem,
)

FRACTIONS_TRAINING = {"add_same": 10, "add_diff": 14, "multiply": 24}
FRACTIONS_POSTTEST = {"multiply": 4, "add_same": 2, "add_diff": 2}
BOX_TRAINING = {"box_easy": 16, "box_hard": 16}
BOX_PRETRAIN_EASY = 16

COLUMNS = ("agent_id", "replication", "condition", "phase", "problem_id",
           "problem_type", "opportunity", "step_id", "outcome", "problem_correct")


@dataclass(frozen=True)
class TrialRecord:
    """One per-step transaction row."""

    agent_id: str
    replication: int
    condition: str
    phase: str  # tutor | posttest
    problem_id: str
    problem_type: str
    opportunity: int  # prior problems of the same type for this agent
    step_id: str
    outcome: str  # CORRECT | ERROR | HINT
    problem_correct: bool

    def as_row(self):
        return (self.agent_id, str(self.replication), self.condition, self.phase,
                self.problem_id, self.problem_type, str(self.opportunity),
                self.step_id, self.outcome, "1" if self.problem_correct else "0")

    @staticmethod
    def from_row(row):
        return TrialRecord(
            agent_id=row[0], replication=int(row[1]), condition=row[2],
            phase=row[3], problem_id=row[4], problem_type=row[5],
            opportunity=int(row[6]), step_id=row[7], outcome=row[8],
            problem_correct=row[9] == "1",
        )


@dataclass(frozen=True)
class ExperimentConfig:
    study: str
    n_agents: int
    replications: int = 10
    seed: int = 7
    conditions: tuple = ()
    hard_only: bool = True  # box-and-arrows scoring flag
    jobs: int = 1

    def validate(self):
        if self.study not in ("fractions", "box_arrows"):
            raise ConfigError(f"unknown study {self.study!r}")
        if self.n_agents < 1:
            raise ConfigError("n_agents must be at least 1")
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        if len(self.conditions) != 2:
            raise ConfigError("exactly two conditions are required")
        if self.study == "fractions":
            if sum(FRACTIONS_TRAINING.values()) != 48:
                raise ConfigError("fractions curriculum must total 48 problems")
            if sum(FRACTIONS_POSTTEST.values()) != 8:
                raise ConfigError("fractions posttest must total 8 problems")
        else:
            if sum(BOX_TRAINING.values()) != 32:
                raise ConfigError("box curriculum must total 32 problems")
        return self


def fractions_config(**overrides) -> ExperimentConfig:
    cfg = ExperimentConfig(study="fractions", n_agents=78,
                           conditions=("blocked", "interleaved"))
    return replace(cfg, **overrides).validate()


def box_arrows_config(**overrides) -> ExperimentConfig:
    cfg = ExperimentConfig(study="box_arrows", n_agents=202,
                           conditions=("constrained", "unconstrained"))
    return replace(cfg, **overrides).validate()


def _mix(a: int, b: int) -> int:
    """Stable per-agent stream seed; independent of PYTHONHASHSEED."""
    return (a * 1_000_003 + b * 7_919) % 2_147_483_647


def sequence_fractions(condition: str, rng, id_prefix: str = "p"):
    """48 training items ordered by condition.

    Blocked: same-denominator addition, then different-denominator addition,
    then multiplication, shuffled within block, so the type transitions fall
    at positions 11 and 25.  Interleaved: one uniform shuffle of all 48.
    """
    if condition not in ("blocked", "interleaved"):
        raise ConfigError(f"unknown fractions condition {condition!r}")
    blocks = []
    for ptype in ("add_same", "add_diff", "multiply"):
        block = [gen_fraction_problem(ptype, rng, f"{id_prefix}-{ptype}-{i}")
                 for i in range(FRACTIONS_TRAINING[ptype])]
        rng.shuffle(block)
        blocks.append(block)
    if condition == "blocked":
        return [p for block in blocks for p in block]
    merged = [p for block in blocks for p in block]
    rng.shuffle(merged)
    return merged


def _fractions_posttest(rng, id_prefix: str):
    items = []
    for ptype, count in FRACTIONS_POSTTEST.items():
        for i in range(count):
            items.append(gen_fraction_problem(ptype, rng, f"{id_prefix}-post-{ptype}-{i}"))
    rng.shuffle(items)
    return items


def _box_curriculum(constraint: str, rng, id_prefix: str):
    items = [gen_box_problem("easy", constraint, rng, f"{id_prefix}-easy-{i}")
             for i in range(BOX_TRAINING["box_easy"])]
    # Hard items cover the relation-operator x layout space at least once;
    # the remainder of the set is sampled uniformly.
    combos = [(op, layout) for op in ("+", "-", "*", "/")
              for layout in ("given_first", "box_first")]
    deals = list(combos)
    deals += [rng.choice(combos)
              for _ in range(BOX_TRAINING["box_hard"] - len(combos))]
    rng.shuffle(deals)
    items += [gen_box_problem("hard", constraint, rng, f"{id_prefix}-hard-{i}",
                              op2=op, layout=layout)
              for i, (op, layout) in enumerate(deals)]
    rng.shuffle(items)
    return items


def agent_condition(config: ExperimentConfig, agent_index: int) -> str:
    return config.conditions[agent_index % 2]


def _agent_pretrained(agent_index: int) -> bool:
    # Crossed with condition: indices 0,1 pretrain; 2,3 do not; and so on.
    return (agent_index // 2) % 2 == 0


def _generate_sets(config: ExperimentConfig, replication: int, agent_index: int):
    """(pretrain, training, posttest) problem lists for one agent cell."""
    condition = agent_condition(config, agent_index)
    rng = random.Random(_mix(config.seed + replication, agent_index))
    prefix = f"{config.study}-r{replication}-a{agent_index:03d}"
    if config.study == "fractions":
        return [], sequence_fractions(condition, rng, prefix), \
            _fractions_posttest(rng, prefix)
    pretrain = []
    if _agent_pretrained(agent_index):
        pretrain = [gen_box_problem("easy", condition, rng, f"{prefix}-pre-{i}")
                    for i in range(BOX_PRETRAIN_EASY)]
    return pretrain, _box_curriculum(condition, rng, prefix), []


def run_agent(config: ExperimentConfig, replication: int, agent_index: int,
              problems=None):
    """Simulate one agent; returns its transaction rows in order."""
    condition = agent_condition(config, agent_index)
    agent_id = f"a{agent_index:03d}"

    if problems is not None:
        pretrain = [ProblemScript.from_record(line) for line in problems["pretrain"]]
        training = [ProblemScript.from_record(line) for line in problems["training"]]
        posttest = [ProblemScript.from_record(line) for line in problems["posttest"]]
    else:
        pretrain, training, posttest = _generate_sets(config, replication, agent_index)

    agent = Agent(agent_id)
    opportunities: dict = {}
    rows = []

    def run_block(scripts, phase, mode, log=True):
        for script in scripts:
            session = TutorSession(script, mode)
            result = run_problem(agent, session)
            opp = opportunities.get(script.problem_type, 0)
            if log:
                for step_role, outcome in result.steps:
                    rows.append(TrialRecord(
                        agent_id=agent_id, replication=replication,
                        condition=condition, phase=phase,
                        problem_id=script.problem_id,
                        problem_type=script.problem_type,
                        opportunity=opp, step_id=step_role, outcome=outcome,
                        problem_correct=result.correct))
            opportunities[script.problem_type] = opp + 1

    run_block(pretrain, "tutor", "training", log=False)
    run_block(training, "tutor", "training")
    run_block(posttest, "posttest", "posttest")
    return rows


def _worker(args):
    config, replication, agent_index = args
    return replication, agent_index, run_agent(config, replication, agent_index)


def run_study(config: ExperimentConfig, problem_sets=None):
    """Run every (replication, agent) cell; returns the full transaction log.

    ``problem_sets`` optionally replays persisted per-agent problem sequences
    (see ``dump_problem_sets``) instead of generating fresh ones.
    """
    config.validate()
    tasks = [(config, rep, idx)
             for rep in range(config.replications)
             for idx in range(config.n_agents)]
    if problem_sets is not None:
        results = [(rep, idx, run_agent(cfg, rep, idx,
                                        problems=problem_sets[(rep, idx)]))
                   for cfg, rep, idx in tasks]
    elif config.jobs > 1:
        with multiprocessing.Pool(config.jobs) as pool:
            results = pool.map(_worker, tasks, chunksize=8)
    else:
        results = [_worker(t) for t in tasks]
    results.sort(key=lambda r: (r[0], r[1]))
    return [row for _rep, _idx, rows in results for row in rows]


def dump_problem_sets(config: ExperimentConfig):
    """Regenerate every agent's problem sequences as serializable records."""
    config.validate()
    sets = {}
    for rep in range(config.replications):
        for idx in range(config.n_agents):
            pretrain, training, posttest = _generate_sets(config, rep, idx)
            sets[(rep, idx)] = {
                "pretrain": [p.to_record() for p in pretrain],
                "training": [p.to_record() for p in training],
                "posttest": [p.to_record() for p in posttest],
            }
    return sets


def save_problem_sets(path, sets):
    """Persist problem sets as JSON lines keyed by (replication, agent)."""
    with open(path, "w") as fh:
        for (rep, idx), groups in sorted(sets.items()):
            fh.write(json.dumps({"replication": rep, "agent": idx, **groups},
                                sort_keys=True) + "\n")


def load_problem_sets(path):
    sets = {}
    with open(path) as fh:
        for line in fh:
            raw = json.loads(line)
            sets[(raw["replication"], raw["agent"])] = {
                "pretrain": raw["pretrain"],
                "training": raw["training"],
                "posttest": raw["posttest"],
            }
    return sets


def filter_hard(records):
    """Scoring restriction for the box study: hard problems only."""
    return [r for r in records if r.problem_type == "box_hard"]


def write_transactions(path, records):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        for rec in records:
            writer.writerow(rec.as_row())


def read_transactions(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != COLUMNS:
            raise ConfigError(f"unexpected transaction header in {path}")
        records = []
        for row in reader:
            if len(row) != len(COLUMNS):
                raise ConfigError(f"malformed transaction row: {row!r}")
            if row[8] not in ("CORRECT", "ERROR", "HINT"):
                raise ConfigError(f"unknown outcome {row[8]!r}")
            records.append(TrialRecord.from_row(row))
    return records
