"""The nine top-level actionable information categories.

Categories carry no priority ordering; the letter codes exist only for
compact output and stable cross-run ordering.
"""

from __future__ import annotations

import enum


class ActionabilityType(enum.Enum):
    """One kind of actionable content a message may carry."""

    NEEDS = "A"
    RESPONSE_GROUPS = "B"
    THREATS_TO_RESPONSE = "C"
    ACCESSIBILITY_CHANGE = "D"
    DAMAGE_INFRASTRUCTURE = "E"
    GEOGRAPHIC_MENTION = "F"
    ENVIRONMENT_CHANGE = "G"
    RESCUE_REPORTING = "H"
    PERSONAL_OPINION = "I"

    @property
    def code(self) -> str:
        return self.value

    @classmethod
    def from_code(cls, code: str) -> "ActionabilityType":
        for member in cls:
            if member.value == code.upper():
                return member
        raise ValueError(f"unknown actionability code: {code!r}")


# Fixed display order (also the chart stacking / report row order).
CATEGORY_ORDER: tuple[ActionabilityType, ...] = tuple(ActionabilityType)

CATEGORY_NAMES: dict[ActionabilityType, str] = {
    ActionabilityType.NEEDS: "Needs",
    ActionabilityType.RESPONSE_GROUPS: "Response groups",
    ActionabilityType.THREATS_TO_RESPONSE: "Threats to response",
    ActionabilityType.ACCESSIBILITY_CHANGE: "Changes in accessibility",
    ActionabilityType.DAMAGE_INFRASTRUCTURE: "Damage to infrastructure, livelihoods",
    ActionabilityType.GEOGRAPHIC_MENTION: "Mention of affected areas",
    ActionabilityType.ENVIRONMENT_CHANGE: "Changes in environment",
    ActionabilityType.RESCUE_REPORTING: "General reporting",
    ActionabilityType.PERSONAL_OPINION: "Personal opinion",
}


ActionSet = frozenset[ActionabilityType]


def action_codes(actions: ActionSet) -> list[str]:
    """Sorted letter codes for an action set, e.g. {NEEDS, GEOGRAPHIC_MENTION} -> ['A', 'F']."""
    return sorted(a.code for a in actions)
