"""Tutor environments: fraction arithmetic and box-and-arrows.

A ProblemScript fixes an item's givens, its ordered canonical steps, and the
expected entries.  A TutorSession applies the step contract: training mode
gives correctness feedback, locks correct entries, and can demonstrate the
next canonical step; posttest mode records silently and judges the problem
by the all-steps-correct rule.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

from .state import (
    CHECK_BOX,
    CORRECT,
    ERROR,
    GenerationError,
    INPUT_VALUE,
    PRESS_DONE,
    ProtocolError,
    SAI,
    ConfigError,
)

FRACTION_FIELDS = (
    "num1", "den1", "op", "num2", "den2",
    "convert_check", "conv_num1", "conv_den1", "conv_num2", "conv_den2",
    "answer_num", "answer_den", "done",
)
FRACTION_EDITABLE = frozenset((
    "convert_check", "conv_num1", "conv_den1", "conv_num2", "conv_den2",
    "answer_num", "answer_den", "done",
))

BOX_FIELDS = ("r1_a", "r1_op", "r1_b", "r2_a", "r2_op", "r2_b", "target", "done")

FAMILIES = {
    "fractions": (FRACTION_FIELDS, FRACTION_EDITABLE),
    "box": (BOX_FIELDS, None),  # editable roles vary per item (box position)
}

FRACTION_TYPES = ("add_same", "add_diff", "multiply")
BOX_TYPES = ("box_easy", "box_hard")

MAX_DRAWS = 10_000


@dataclass(frozen=True)
class CanonicalStep:
    role: str
    action: str
    expected: str | None = None  # input token; None for check/done steps


@dataclass(frozen=True)
class ProblemScript:
    problem_id: str
    family: str
    problem_type: str
    given_fields: dict
    canonical_steps: tuple
    condition_tags: tuple = ()
    editable_roles: frozenset = frozenset()

    def to_record(self) -> str:
        return json.dumps({
            "problem_id": self.problem_id,
            "family": self.family,
            "type": self.problem_type,
            "givens": self.given_fields,
            "steps": [(s.role, s.action, s.expected) for s in self.canonical_steps],
            "tags": list(self.condition_tags),
            "editable": sorted(self.editable_roles),
        }, sort_keys=True)

    @staticmethod
    def from_record(line: str) -> "ProblemScript":
        raw = json.loads(line)
        return ProblemScript(
            problem_id=raw["problem_id"],
            family=raw["family"],
            problem_type=raw["type"],
            given_fields=raw["givens"],
            canonical_steps=tuple(CanonicalStep(*s) for s in raw["steps"]),
            condition_tags=tuple(raw["tags"]),
            editable_roles=frozenset(raw["editable"]),
        )


class TutorSession:
    """Single-owner state machine for one problem attempt."""

    def __init__(self, script: ProblemScript, mode: str):
        if mode not in ("training", "posttest"):
            raise ConfigError(f"unknown session mode {mode!r}")
        if script.family not in FAMILIES:
            raise ConfigError(f"unknown tutor family {script.family!r}")
        self.script = script
        self.mode = mode
        self._layout = FAMILIES[script.family][0]
        self._editable = script.editable_roles
        self._values = {r: script.given_fields.get(r) for r in self._layout}
        self._locked = set()
        self._dead = False
        self.transcript = []

    @property
    def role_vocabulary(self):
        return frozenset(self._layout)

    def snapshot(self):
        """Every field is visible from problem start, including empty ones."""
        return [(r, r, self._values[r], r in self._editable) for r in self._layout]

    def next_step(self):
        for step in self.script.canonical_steps:
            if step.role not in self._locked:
                return step
        return None

    @property
    def complete(self) -> bool:
        return self.next_step() is None

    @property
    def active(self) -> bool:
        return not self._dead

    @property
    def judged_correct(self) -> bool:
        return self.complete and not self._dead

    def _matches(self, step: CanonicalStep, sai: SAI) -> bool:
        if sai.action != step.action:
            return False
        if step.action == INPUT_VALUE:
            return sai.input == step.expected
        return True

    def _lock(self, step: CanonicalStep, sai: SAI):
        self._locked.add(step.role)
        if step.action == INPUT_VALUE:
            token = sai.input
            self._values[step.role] = int(token) if token.lstrip("-").isdigit() else token
        else:
            self._values[step.role] = True

    def submit(self, sai: SAI) -> str:
        if self._dead or self.complete:
            raise ProtocolError("session is not accepting steps")
        if self.mode == "training":
            if sai.selection in self._locked:
                raise ProtocolError(f"field {sai.selection!r} is locked")
            step = self.next_step()
            if sai.selection == step.role and self._matches(step, sai):
                self._lock(step, sai)
                self.transcript.append((sai, CORRECT))
                return "correct"
            self.transcript.append((sai, ERROR))
            return "incorrect"
        # Posttest: silent recording; any wrong step ends the attempt.
        step = next((s for s in self.script.canonical_steps
                     if s.role == sai.selection and s.role not in self._locked), None)
        ok = step is not None and self._matches(step, sai)
        if ok and step.action == PRESS_DONE:
            others = [s for s in self.script.canonical_steps if s.role != step.role]
            ok = all(s.role in self._locked for s in others)
        if ok:
            self._lock(step, sai)
            self.transcript.append((sai, CORRECT))
        else:
            self.transcript.append((sai, ERROR))
            self._dead = True
        return "recorded"

    def demonstrate(self):
        """Provide (and lock in) the next canonical step. Training only."""
        if self.mode != "training":
            raise ProtocolError("demonstrations are unavailable at posttest")
        step = self.next_step()
        if step is None:
            raise ProtocolError("no step left to demonstrate")
        sai = SAI(step.role, step.action, step.expected)
        self._lock(step, sai)
        self.transcript.append((sai, "DEMO"))
        return step.role, sai

    def abandon(self):
        self._dead = True


def replay_canonical(session: TutorSession):
    """Submit every canonical step in order; returns the outcome list."""
    outcomes = []
    for step in session.script.canonical_steps:
        outcomes.append(session.submit(SAI(step.role, step.action, step.expected)))
    return outcomes


# --------------------------------------------------------------------------
# Fraction arithmetic items
# --------------------------------------------------------------------------

def gen_fraction_problem(problem_type: str, rng, problem_id: str = "p") -> ProblemScript:
    """One fraction item: numerators 1-9, denominators 2-12, unsimplified answers."""
    if problem_type not in FRACTION_TYPES:
        raise ConfigError(f"unknown fraction problem type {problem_type!r}")
    n1, n2 = rng.randint(1, 9), rng.randint(1, 9)
    d1 = rng.randint(2, 12)
    if problem_type == "add_same":
        d2 = d1
    else:
        d2 = rng.randint(2, 12)
        while problem_type == "add_diff" and d2 == d1:
            d2 = rng.randint(2, 12)
    op = "x" if problem_type == "multiply" else "+"
    givens = {"num1": n1, "den1": d1, "op": op, "num2": n2, "den2": d2}

    if problem_type == "add_same":
        steps = (
            CanonicalStep("answer_num", INPUT_VALUE, str(n1 + n2)),
            CanonicalStep("answer_den", INPUT_VALUE, str(d1)),
            CanonicalStep("done", PRESS_DONE),
        )
    elif problem_type == "multiply":
        steps = (
            CanonicalStep("answer_num", INPUT_VALUE, str(n1 * n2)),
            CanonicalStep("answer_den", INPUT_VALUE, str(d1 * d2)),
            CanonicalStep("done", PRESS_DONE),
        )
    else:  # cross multiplication is the only accepted conversion strategy
        dd = d1 * d2
        steps = (
            CanonicalStep("convert_check", CHECK_BOX),
            CanonicalStep("conv_den1", INPUT_VALUE, str(dd)),
            CanonicalStep("conv_den2", INPUT_VALUE, str(dd)),
            CanonicalStep("conv_num1", INPUT_VALUE, str(n1 * d2)),
            CanonicalStep("conv_num2", INPUT_VALUE, str(n2 * d1)),
            CanonicalStep("answer_num", INPUT_VALUE, str(n1 * d2 + n2 * d1)),
            CanonicalStep("answer_den", INPUT_VALUE, str(dd)),
            CanonicalStep("done", PRESS_DONE),
        )
    return ProblemScript(
        problem_id=problem_id,
        family="fractions",
        problem_type=problem_type,
        given_fields=givens,
        canonical_steps=steps,
        editable_roles=FRACTION_EDITABLE,
    )


# --------------------------------------------------------------------------
# Box-and-arrows items
# --------------------------------------------------------------------------

_BOX_OPS = ("+", "-", "*", "/")


def _apply_op(op: str, a: int, b: int):
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if b == 0:
        return None
    return Fraction(a, b)


def ambiguity_count(values, answer) -> int:
    """Candidate procedures consistent with an answer: distinct single
    applications of +, -, *, / over the visible numbers.

    Positions with equal values are one candidate; ordered operand pairs of
    the asymmetric operators are distinct candidates when their values differ.
    """
    n = len(values)
    seen = set()
    for op in _BOX_OPS:
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                if op in ("+", "*") and i > j:
                    continue
                v = _apply_op(op, values[i], values[j])
                if v is None or v != answer:
                    continue
                a, b = values[i], values[j]
                if op in ("+", "*"):
                    a, b = min(a, b), max(a, b)
                seen.add((op, a, b))
    return len(seen)


def _gen_row1(constraint: str, rng):
    """Row-1 operands.  Constrained items make the row-1 shortcut fractional;
    unconstrained items keep every row-1 reading whole-numbered."""
    if constraint == "constrained":
        op1 = "/"
        a, b = rng.randint(2, 30), rng.randint(2, 30)
        if a % b == 0:
            return None
        return a, op1, b
    op1 = rng.choice(_BOX_OPS)
    a, b = rng.randint(1, 30), rng.randint(1, 30)
    v = _apply_op(op1, a, b)
    if v is None or (isinstance(v, Fraction) and v.denominator != 1) or v < 1:
        return None
    return a, op1, b


def gen_box_problem(difficulty: str, constraint: str, rng,
                    problem_id: str = "p", op2: str | None = None,
                    layout: str | None = None) -> ProblemScript:
    """One box-and-arrows item, rejection-sampled against the candidate oracle.

    Easy items show a row-1 expression whose value goes in the row-2 box.
    Hard items show a row-2 relation against an arrow target; the correct
    entry completes it.  Constrained items admit exactly one candidate
    procedure; unconstrained items admit at least two.  ``op2`` and ``layout``
    pin the row-2 relation for curriculum designs that cover the space evenly.
    """
    if difficulty not in ("easy", "hard"):
        raise ConfigError(f"unknown difficulty {difficulty!r}")
    if constraint not in ("constrained", "unconstrained"):
        raise ConfigError(f"unknown constraint {constraint!r}")

    for _ in range(MAX_DRAWS):
        if difficulty == "easy":
            op1 = rng.choice(_BOX_OPS)
            a, b = rng.randint(1, 30), rng.randint(1, 30)
            v = _apply_op(op1, a, b)
            if v is None or (isinstance(v, Fraction) and v.denominator != 1):
                continue
            v = int(v)
            if v < 1 or v in (a, b):
                continue
            givens = {"r1_a": a, "r1_op": op1, "r1_b": b}
            steps = (CanonicalStep("r2_a", INPUT_VALUE, str(v)),
                     CanonicalStep("done", PRESS_DONE))
            return ProblemScript(
                problem_id=problem_id,
                family="box",
                problem_type="box_easy",
                given_fields=givens,
                canonical_steps=steps,
                condition_tags=(constraint,),
                editable_roles=frozenset(("r2_a", "done")),
            )

        # Hard item: (given op2 x) = target, or (x op2 given) = target.
        rel_op = op2 if op2 is not None else rng.choice(_BOX_OPS)
        slot = layout if layout is not None else rng.choice(("given_first", "box_first"))
        g = rng.randint(1, 30)
        x = rng.randint(1, 30)
        t = _apply_op(rel_op, g, x) if slot == "given_first" else _apply_op(rel_op, x, g)
        if t is None or (isinstance(t, Fraction) and t.denominator != 1):
            continue
        t = int(t)
        if t < 1 or t > 99:
            continue
        row1 = _gen_row1(constraint, rng)
        if row1 is None:
            continue
        a, op1, b = row1
        visible = [a, b, g, t]
        if x in visible:
            continue
        count = ambiguity_count(visible, x)
        if constraint == "constrained" and count != 1:
            continue
        if constraint == "unconstrained" and count < 2:
            continue
        if slot == "given_first":
            givens = {"r1_a": a, "r1_op": op1, "r1_b": b,
                      "r2_a": g, "r2_op": rel_op, "target": t}
            box_role = "r2_b"
        else:
            givens = {"r1_a": a, "r1_op": op1, "r1_b": b,
                      "r2_b": g, "r2_op": rel_op, "target": t}
            box_role = "r2_a"
        steps = (CanonicalStep(box_role, INPUT_VALUE, str(x)),
                 CanonicalStep("done", PRESS_DONE))
        return ProblemScript(
            problem_id=problem_id,
            family="box",
            problem_type="box_hard",
            given_fields=givens,
            canonical_steps=steps,
            condition_tags=(constraint, slot),
            editable_roles=frozenset((box_role, "done")),
        )
    raise GenerationError(
        f"no {constraint} {difficulty} item found in {MAX_DRAWS} draws")
