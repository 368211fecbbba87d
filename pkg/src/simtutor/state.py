"""Tutor interface state as the agent perceives it, plus the step vocabulary.

A tutor exposes an ordered set of fields.  Every field carries a semantic
role, a current value (``None`` when empty), and an editability flag.  Agents
act by submitting a selection/action/input triple against one field.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

INPUT_VALUE = "input_value"
PRESS_DONE = "press_done"
CHECK_BOX = "check_box"
ACTIONS = (INPUT_VALUE, PRESS_DONE, CHECK_BOX)

CORRECT = "CORRECT"
ERROR = "ERROR"
HINT = "HINT"


class MalformedTutorError(ValueError):
    """A tutor snapshot violates the interface contract."""


class InvariantError(ValueError):
    """Internal consistency violation (stale ids, bad references)."""


class ProtocolError(RuntimeError):
    """Illegal interaction with a tutor session."""


class GenerationError(RuntimeError):
    """A problem generator could not satisfy its constraints."""


class ConfigError(ValueError):
    """Invalid experiment or CLI configuration."""


@dataclass(frozen=True)
class FieldState:
    """One interface field: semantic role, current value, editability."""

    role: str
    value: object = None
    editable: bool = False

    @property
    def filled(self) -> bool:
        return self.value is not None

    @property
    def numeric(self) -> bool:
        return isinstance(self.value, int) and not isinstance(self.value, bool)


@dataclass(frozen=True)
class SAI:
    """A (selection, action, input) step proposal submitted to a tutor."""

    selection: str
    action: str
    input: str | None = None

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise InvariantError(f"unknown action {self.action!r}")
        if (self.input is not None) != (self.action == INPUT_VALUE):
            raise InvariantError("input is present iff action is input_value")


def render_value(value: Fraction) -> str:
    """Canonical token for a computed value: integers bare, otherwise n/d."""
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def _true_predicates(order, fields):
    preds = set()
    for fid in order:
        st = fields[fid]
        preds.add(("filled", fid) if st.filled else ("empty", fid))
    op = fields.get("op")
    if op is not None and op.filled:
        preds.add(("op_equals", op.value))
    for fid in ("r1_op", "r2_op"):
        st = fields.get(fid)
        if st is not None and st.filled:
            preds.add(("op_is", fid, st.value))
    d1, d2 = fields.get("den1"), fields.get("den2")
    if d1 is not None and d2 is not None and d1.numeric and d2.numeric:
        preds.add(("denominators_equal",) if d1.value == d2.value
                  else ("denominators_differ",))
    chk = fields.get("convert_check")
    if chk is not None and bool(chk.value):
        preds.add(("box_checked",))
    return frozenset(preds)


class WorkingMemory:
    """The visible tutor state: ordered fields plus the true predicate set.

    Field ids and roles must both be unique; in the bundled tutors every
    field id equals its role.
    """

    __slots__ = ("order", "fields", "by_role", "predicates", "fraction_values")

    def __init__(self, entries):
        order = []
        fields = {}
        by_role = {}
        for field_id, state in entries:
            if field_id in fields:
                raise MalformedTutorError(f"duplicate field id {field_id!r}")
            if state.role in by_role:
                raise MalformedTutorError(f"duplicate role {state.role!r}")
            order.append(field_id)
            fields[field_id] = state
            by_role[state.role] = field_id
        if not order:
            raise MalformedTutorError("empty tutor snapshot")
        self.order = tuple(order)
        self.fields = fields
        self.by_role = by_role
        self.predicates = _true_predicates(self.order, fields)
        self.fraction_values = {
            fields[fid].role: Fraction(fields[fid].value)
            for fid in order if fields[fid].numeric
        }

    def field(self, field_id):
        try:
            return self.fields[field_id]
        except KeyError:
            raise InvariantError(f"unknown field {field_id!r}") from None

    def field_for_role(self, role):
        fid = self.by_role.get(role)
        return None if fid is None else (fid, self.fields[fid])

    def numeric_leaves(self):
        """(role, exact value) pairs for every numeric field, in field order."""
        out = []
        for fid in self.order:
            st = self.fields[fid]
            if st.numeric:
                out.append((st.role, Fraction(st.value)))
        return out

    def __repr__(self):
        parts = ", ".join(f"{fid}={self.fields[fid].value!r}" for fid in self.order)
        return f"WorkingMemory({parts})"
