"""Occlusal probe and session labels."""

from __future__ import annotations

import enum

from .errors import UnknownCondition


class Condition(enum.Enum):
    """Occlusal observational probe.

    Enumeration order is the canonical reporting order and the tie-break
    order used by :func:`latentry.metrics.rank`.
    """

    ONL = "ONL"
    OBL = "OBL"
    OSL = "OSL"
    OC25 = "OC2.5"
    OC3 = "OC3"
    OC3P = "OC3P"

    def __str__(self) -> str:
        return self.value

    @property
    def order(self) -> int:
        return _CONDITION_ORDER[self]

    @classmethod
    def parse(cls, text: str) -> "Condition":
        key = text.strip()
        try:
            return _CONDITION_LOOKUP[key.upper()]
        except KeyError:
            raise UnknownCondition(f"unknown condition {text!r}") from None

    def __lt__(self, other: "Condition") -> bool:
        if not isinstance(other, Condition):
            return NotImplemented
        return self.order < other.order


_CONDITION_ORDER = {c: i for i, c in enumerate(Condition)}
_CONDITION_LOOKUP = {c.value.upper(): c for c in Condition}
_CONDITION_LOOKUP.update({c.name: c for c in Condition})

CORE_CONDITIONS = (Condition.ONL, Condition.OC25, Condition.OC3)
ALL_CONDITIONS = tuple(Condition)

# d_OC3 < d_ONL < d_OC2.5, the longitudinal hierarchy carried over from the
# retrospective analysis.
CORE_HIERARCHY = (Condition.OC3, Condition.ONL, Condition.OC25)


class Session(enum.Enum):
    M1 = "M1"
    M2 = "M2"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "Session":
        try:
            return cls(text.strip().upper())
        except ValueError:
            raise ValueError(f"unknown session {text!r}") from None

    def __lt__(self, other: "Session") -> bool:
        if not isinstance(other, Session):
            return NotImplemented
        return self is Session.M1 and other is Session.M2


def parse_conditions(text: str) -> tuple[Condition, ...]:
    """Parse a comma-separated condition list, keeping canonical order."""
    found = {Condition.parse(tok) for tok in text.split(",") if tok.strip()}
    return tuple(c for c in Condition if c in found)


def hierarchy_key(conditions) -> str:
    return "<".join(str(c) for c in conditions)
