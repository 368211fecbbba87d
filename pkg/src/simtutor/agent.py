"""The agent's perceive-decide-act cycle against a tutor session.

Each decision matches the skill store against working memory and fires the
highest-utility activation; when nothing matches the agent requests a
demonstration, which is routed to the induction machinery.  Agents share
nothing and are deterministic given the same experience stream.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .induction import (
    InductionFailure,
    Skill,
    evaluate,
    expr_roles,
    induce_from_demo,
    refine_conditions,
)
from .state import (
    CORRECT,
    ERROR,
    FieldState,
    HINT,
    INPUT_VALUE,
    SAI,
    InvariantError,
    MalformedTutorError,
    ProtocolError,
    WorkingMemory,
    render_value,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Activation:
    """A matched skill bound to concrete fields, with its proposed step."""

    skill_id: str
    binding: tuple  # ((role, field_id), ...)
    proposed: SAI
    utility_value: float


def perceive(session) -> WorkingMemory:
    """Project a tutor session's visible state into working memory."""
    snapshot = session.snapshot()
    if not snapshot:
        raise MalformedTutorError("empty tutor snapshot")
    vocabulary = session.role_vocabulary
    for _fid, role, _value, _editable in snapshot:
        if role not in vocabulary:
            raise MalformedTutorError(f"role {role!r} not in tutor vocabulary")
    return WorkingMemory(
        [(fid, FieldState(role=role, value=value, editable=editable))
         for fid, role, value, editable in snapshot])


def activations(wm: WorkingMemory, skills, excluded=frozenset()):
    """All skills whose gate holds and whose procedure can execute here."""
    preds = wm.predicates
    out = []
    for sk in skills:
        if sk.skill_id in excluded:
            continue
        hit = wm.field_for_role(sk.target_role)
        if hit is None:
            continue
        fid, target = hit
        if not target.editable or target.value is not None:
            continue
        if not sk.required <= preds:
            continue
        binding = [(sk.target_role, fid)]
        if sk.procedure is not None:
            value = evaluate(sk.procedure, wm.fraction_values)
            if value is None:
                continue
            sai = SAI(fid, INPUT_VALUE, render_value(value))
            for role in sorted(expr_roles(sk.procedure)):
                entry = wm.field_for_role(role)
                if entry is not None:
                    binding.append((role, entry[0]))
        else:
            sai = SAI(fid, sk.action)
        out.append(Activation(sk.skill_id, tuple(binding), sai, float(sk.utility)))
    return out


def decide(wm: WorkingMemory, skills, excluded=frozenset()):
    """Best activation by utility, or None to request a demonstration.

    Ties break on higher attempt count, then smallest skill id.
    """
    acts = activations(wm, skills, excluded)
    if not acts:
        return None
    by_id = {sk.skill_id: sk for sk in skills}

    def rank(act):
        sk = by_id[act.skill_id]
        return (-sk.utility, -sk.attempts, sk.skill_id)

    return min(acts, key=rank)


def apply_feedback(skills, activation: Activation, correct: bool,
                   wm: WorkingMemory):
    """Credit or penalize the fired skill and refine its predicates."""
    for sk in skills:
        if sk.skill_id == activation.skill_id:
            sk.record(correct)
            refine_conditions(sk, wm, correct)
            return sk
    raise InvariantError(f"activation references unknown skill "
                         f"{activation.skill_id!r}")


@dataclass
class ProblemResult:
    """Outcome of one problem: per-step transactions plus overall correctness."""

    correct: bool
    steps: list = field(default_factory=list)  # (step role, CORRECT|ERROR|HINT)


class Agent:
    """A single simulated learner: a skill store plus deterministic id supply."""

    def __init__(self, agent_id: str = "agent-0"):
        self.agent_id = agent_id
        self.skills: list[Skill] = []
        self._skill_count = 0

    def _new_skill_id(self) -> str:
        self._skill_count += 1
        return f"s{self._skill_count:04d}"

    def decide(self, wm, excluded=frozenset()):
        return decide(wm, self.skills, excluded)

    def apply_feedback(self, activation, correct, wm):
        return apply_feedback(self.skills, activation, correct, wm)

    def induce(self, wm, demo):
        try:
            return induce_from_demo(self.skills, wm, demo, self._new_skill_id)
        except InductionFailure as exc:
            log.warning("%s: induction failure: %s", self.agent_id, exc)
            return None

    def skills_to_dicts(self):
        return [sk.to_dict() for sk in self.skills]


def run_problem(agent: Agent, session) -> ProblemResult:
    """Drive one agent through one tutor problem.

    Training mode: fire activations, retry failed steps with the next best
    untried activation, fall back to a demonstration when none remain, and
    learn from every outcome.  Posttest mode: no feedback reaches the agent;
    the first wrong step or demonstration request ends the problem as
    incorrect.
    """
    result = ProblemResult(correct=True)
    if session.mode == "training":
        excluded = set()
        guard = 0
        while not session.complete:
            guard += 1
            if guard > 10_000:
                raise ProtocolError("training session failed to progress")
            wm = perceive(session)
            step = session.next_step()
            act = decide(wm, agent.skills, excluded)
            if act is None:
                _field, demo = session.demonstrate()
                result.steps.append((step.role, HINT))
                result.correct = False
                agent.induce(wm, demo)
                excluded.clear()
            else:
                outcome = session.submit(act.proposed)
                if outcome == "correct":
                    result.steps.append((step.role, CORRECT))
                    agent.apply_feedback(act, True, wm)
                    excluded.clear()
                else:
                    result.steps.append((step.role, ERROR))
                    result.correct = False
                    agent.apply_feedback(act, False, wm)
                    excluded.add(act.skill_id)
        return result

    # Posttest: hints and feedback are unavailable; skills stay frozen.
    while session.active and not session.complete:
        wm = perceive(session)
        step = session.next_step()
        act = decide(wm, agent.skills)
        if act is None:
            result.steps.append((step.role, HINT))
            session.abandon()
            break
        session.submit(act.proposed)
        result.steps.append((step.role, session.transcript[-1][1]))
    result.correct = session.judged_correct
    return result
