"""Rules applied to freshly generated option sets.

The generator is prompted for 3-5 non-redundant controls with initial
values. Models drift, so the engine enforces the contract instead of
trusting it: labels already present in the grounding are dropped
(existing wins), everything past the fifth surviving control is cut,
and a choice control that arrives without an initial selection is
rejected on its own without sinking the batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .options import (
    ChoiceControl,
    OptionSet,
    PromptOption,
    normalized_label,
    selected_refinements,
)

MAX_CONTROLS = 5
ADVISORY_MIN_CONTROLS = 3

INLINE = "inline"
SESSION = "session"


@dataclass(frozen=True)
class GenerationRequest:
    kind: str  # INLINE or SESSION
    history: tuple[tuple[str, str | None], ...]
    latest_input: str  # user prompt (inline) or the NL utterance (session)
    existing: OptionSet  # grounding options the result is deduped against
    request_id: str = ""

    def __post_init__(self) -> None:
        if self.kind == SESSION and not self.latest_input.strip():
            raise ValueError("session option generation needs a nonempty utterance")


@dataclass
class GenerationOutcome:
    accepted: OptionSet
    warnings: list[dict] = field(default_factory=list)
    raw_text: str = ""
    failed: bool = False  # backend or decode failure after the retry

    @property
    def accepted_labels(self) -> list[str]:
        return self.accepted.labels()


class RuleEnforcer:
    """Online form of the generation rules; offer options in stream order."""

    def __init__(self, grounding: OptionSet):
        self._seen = {normalized_label(o.label) for o in grounding}
        self._survived_dedupe = 0
        self._truncated = 0
        self.accepted: list[PromptOption] = []
        self.warnings: list[dict] = []

    def offer(self, option: PromptOption) -> tuple[bool, dict | None]:
        """(accepted, drop reason); the reason is None for accepted options."""
        key = normalized_label(option.label)
        if key in self._seen:
            warning = {"kind": "duplicate", "label": option.label}
            self.warnings.append(warning)
            return False, warning
        self._seen.add(key)
        self._survived_dedupe += 1
        if self._survived_dedupe > MAX_CONTROLS:
            self._truncated += 1
            return False, {"kind": "truncated", "label": option.label}
        control = option.control
        if isinstance(control, ChoiceControl):
            if not control.choices:
                warning = {"kind": "empty_choices", "label": option.label}
                self.warnings.append(warning)
                return False, warning
            if not selected_refinements(option):
                warning = {"kind": "missing_value", "label": option.label}
                self.warnings.append(warning)
                return False, warning
        if option.non_canonical:
            self.warnings.append({"kind": "non_canonical", "label": option.label})
        self.accepted.append(option)
        return True, None

    def finish(self, raw_text: str = "") -> GenerationOutcome:
        warnings = list(self.warnings)
        if self._truncated:
            warnings.append({"kind": "truncated", "count": self._truncated})
        if len(self.accepted) < ADVISORY_MIN_CONTROLS:
            warnings.append({"kind": "under_generation", "count": len(self.accepted)})
        return GenerationOutcome(
            accepted=OptionSet(self.accepted),
            warnings=warnings,
            raw_text=raw_text,
        )


def enforce_generation_rules(raw: OptionSet | Sequence[PromptOption], grounding: OptionSet) -> GenerationOutcome:
    enforcer = RuleEnforcer(grounding)
    for option in raw:
        enforcer.offer(option)
    return enforcer.finish()
