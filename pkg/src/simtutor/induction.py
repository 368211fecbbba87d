"""Skill induction: explaining demonstrations and learning applicability.

A demonstrated value is explained by searching compositions of arithmetic
primitives (add, subtract, multiply, divide) over the visible numeric fields,
shallowest first, with exact rational arithmetic.  An explanation generalizes
into a reusable skill: a procedure over field roles plus two predicate sets.

``conditions`` is the skill's positive prototype: every predicate observed
true when the skill was demonstrated, shrunk to the intersection over later
positive examples (drop-literal).  ``required`` is the firing gate actually
enforced during matching.  It starts empty, so a newborn skill fires anywhere
its procedure can execute, and it grows only when the skill fires incorrectly:
each prototype predicate that failed to hold in the bad state becomes
required.  Wrong-in-context rules are thereby discriminated away while
wrong-everywhere rules die through utility competition.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .state import (
    INPUT_VALUE,
    SAI,
    InvariantError,
    WorkingMemory,
)

MAX_DEPTH = 2
OPS = ("add", "subtract", "multiply", "divide")
COMMUTATIVE = frozenset(("add", "multiply"))


class InductionFailure(RuntimeError):
    """No explanation was found and the constant fallback is disabled."""


# --------------------------------------------------------------------------
# Expression trees
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Ref:
    """Leaf referencing a field role."""

    role: str


@dataclass(frozen=True)
class Lit:
    """Constant leaf, used when a value cannot be derived from the state."""

    value: int


@dataclass(frozen=True)
class Call:
    """Binary operator application."""

    op: str
    left: object
    right: object


def evaluate(expr, values):
    """Evaluate against role -> Fraction; None when unbound or divide-by-zero."""
    if isinstance(expr, Ref):
        return values.get(expr.role)
    if isinstance(expr, Lit):
        return Fraction(expr.value)
    left = evaluate(expr.left, values)
    if left is None:
        return None
    right = evaluate(expr.right, values)
    if right is None:
        return None
    if expr.op == "add":
        return left + right
    if expr.op == "subtract":
        return left - right
    if expr.op == "multiply":
        return left * right
    if right == 0:
        return None
    return left / right


def depth(expr) -> int:
    if isinstance(expr, (Ref, Lit)):
        return 0
    return 1 + max(depth(expr.left), depth(expr.right))


def expr_roles(expr) -> frozenset:
    if isinstance(expr, Ref):
        return frozenset((expr.role,))
    if isinstance(expr, Lit):
        return frozenset()
    return expr_roles(expr.left) | expr_roles(expr.right)


def sexpr(expr) -> str:
    if isinstance(expr, Ref):
        return expr.role
    if isinstance(expr, Lit):
        return str(expr.value)
    return f"({expr.op} {sexpr(expr.left)} {sexpr(expr.right)})"


def normalize(expr):
    """Canonical form: commutative operands ordered by their rendering."""
    if not isinstance(expr, Call):
        return expr
    left, right = normalize(expr.left), normalize(expr.right)
    if expr.op in COMMUTATIVE and sexpr(left) > sexpr(right):
        left, right = right, left
    return Call(expr.op, left, right)


def _compose_level(levels, d):
    """All exact-depth-d trees over disjoint leaves, deterministically ordered."""
    out = []
    pairs = [(i, j) for i in range(d) for j in range(d) if max(i, j) == d - 1]
    for opi, op in enumerate(OPS):
        for dl, dr in pairs:
            for le, lk, lu, lv in levels[dl]:
                for re_, rk, ru, rv in levels[dr]:
                    if lu & ru:
                        continue
                    if op in COMMUTATIVE and lk > rk:
                        continue
                    if op == "add":
                        v = lv + rv
                    elif op == "subtract":
                        v = lv - rv
                    elif op == "multiply":
                        v = lv * rv
                    elif rv == 0:
                        continue
                    else:
                        v = lv / rv
                    out.append((Call(op, le, re_), (1, opi, lk, rk), lu | ru, v))
    return out


def explain(wm: WorkingMemory, demo: SAI, max_depth: int = MAX_DEPTH,
            allow_constant: bool = True):
    """All minimal-depth explanations of a demonstrated value.

    Search runs by iterative deepening over operator compositions of the
    visible numeric field values: depth, then operator order (add, subtract,
    multiply, divide), then leftmost field order.  Each tree uses a field at
    most once.  The constant explanation is returned only when no field-based
    explanation exists within the depth bound.
    """
    if demo.action != INPUT_VALUE:
        return []
    try:
        target = Fraction(int(demo.input))
    except (TypeError, ValueError):
        raise InvariantError(f"non-numeric demonstration {demo.input!r}") from None

    leaves = wm.numeric_leaves()
    levels = [[(Ref(role), (0, i), frozenset((i,)), val)
               for i, (role, val) in enumerate(leaves)]]
    for d in range(max_depth + 1):
        if d > 0:
            levels.append(_compose_level(levels, d))
        found, seen = [], set()
        for expr, _key, _used, val in levels[d]:
            if val != target:
                continue
            canon = normalize(expr)
            token = sexpr(canon)
            if token not in seen:
                seen.add(token)
                found.append(canon)
        if found:
            return found
    if allow_constant and target.denominator == 1:
        return [Lit(target.numerator)]
    return []


# --------------------------------------------------------------------------
# Skills
# --------------------------------------------------------------------------

@dataclass
class Skill:
    """A learned production: procedure, applicability predicates, utility stats."""

    skill_id: str
    target_role: str
    action: str
    procedure: object  # Ref | Lit | Call, or None for structural actions
    conditions: frozenset
    required: frozenset = frozenset()
    successes: int = 0
    attempts: int = 0

    def __post_init__(self):
        if self.successes > self.attempts:
            raise InvariantError("successes exceed attempts")

    @property
    def utility(self) -> Fraction:
        """Smoothed success rate: (successes + 1) / (attempts + 2)."""
        return Fraction(self.successes + 1, self.attempts + 2)

    def record(self, correct: bool) -> None:
        self.attempts += 1
        if correct:
            self.successes += 1

    def to_dict(self) -> dict:
        return {
            "skill_id": self.skill_id,
            "target_role": self.target_role,
            "action": self.action,
            "procedure": None if self.procedure is None else sexpr(self.procedure),
            "conditions": sorted(" ".join(map(str, p)) for p in self.conditions),
            "required": sorted(" ".join(map(str, p)) for p in self.required),
            "successes": self.successes,
            "attempts": self.attempts,
        }


def generalize(expr, wm: WorkingMemory, target_field: str, skill_id: str) -> Skill:
    """Lift an explanation into a skill, conditioned on the observed state."""
    missing = [r for r in expr_roles(expr) if r not in wm.by_role]
    if missing:
        raise InvariantError(f"explanation references absent roles {missing}")
    target = wm.field(target_field)
    return Skill(
        skill_id=skill_id,
        target_role=target.role,
        action=INPUT_VALUE,
        procedure=expr,
        conditions=wm.predicates,
    )


def refine_conditions(skill: Skill, wm: WorkingMemory, correct: bool) -> Skill:
    """Update a skill's predicate sets after an outcome in ``wm``.

    Positive example: drop every predicate not satisfied by the state, from
    both the prototype and the gate.  Negative example: the prototype is left
    unchanged; prototype predicates that failed in the state join the gate.
    """
    sat = wm.predicates
    if correct:
        skill.conditions = skill.conditions & sat
        skill.required = skill.required & sat
    else:
        skill.required = skill.required | frozenset(
            p for p in skill.conditions if p not in sat)
    return skill


def induce_from_demo(skills, wm: WorkingMemory, demo: SAI, new_id,
                     allow_constant: bool = True):
    """Fold one tutor demonstration into the skill store.

    Any existing skill for the same field role and action whose procedure
    reproduces the demonstrated value is credited as a positive example.
    Otherwise the first explanation (in search order) is generalized into a
    new skill, which is appended to ``skills`` and returned.
    """
    target = wm.field(demo.selection)
    value = None
    if demo.action == INPUT_VALUE:
        value = Fraction(int(demo.input))

    credited = False
    for sk in skills:
        if sk.target_role != target.role or sk.action != demo.action:
            continue
        if sk.procedure is None:
            reproduces = True
        else:
            reproduces = evaluate(sk.procedure, wm.fraction_values) == value
        if reproduces:
            sk.record(True)
            refine_conditions(sk, wm, True)
            credited = True
    if credited:
        return None

    if demo.action == INPUT_VALUE:
        exprs = explain(wm, demo, allow_constant=allow_constant)
        if not exprs:
            raise InductionFailure(
                f"no explanation for {demo.input!r} at {demo.selection}")
        created = generalize(exprs[0], wm, demo.selection, new_id())
    else:
        created = Skill(
            skill_id=new_id(),
            target_role=target.role,
            action=demo.action,
            procedure=None,
            conditions=wm.predicates,
        )
    skills.append(created)
    return created
