"""Data model for generated prompt-refinement controls.

A control is either a choice control (radio / checkbox over a label->
description map) or a free-text control. The description strings are the
instructions an LLM actually receives; choice labels exist for display.
Controls travel as JSON records with the field names ``type, label,
description, options, appearance, value, reason`` and that order is the
canonical encoding everywhere (wire, disk, prompt payloads).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterable, Iterator, NamedTuple

from .errors import (
    DocumentSyntaxError,
    DuplicateLabel,
    EmptyChoices,
    EmptyValue,
    MissingField,
    NotACanonicalChoice,
    ShapeMismatch,
    WrongShape,
)

RADIO = "single-select-radio"
CHECKBOX = "multi-select-checkbox"

OPTION_TYPE = "option"
TEXT_TYPE = "text"

# Canonical key order of an encoded record (text controls skip options/appearance).
_FIELD_ORDER = ("type", "label", "description", "options", "appearance", "value", "reason")


class Origin(str, Enum):
    """Where a control came from; metadata only, never serialized."""

    GENERATED_INLINE = "generated-inline"
    GENERATED_SESSION = "generated-session"
    PINNED = "pinned"
    PRESET = "preset"
    USER_JSON = "user-json"


def normalized_label(label: str) -> str:
    """Label key used for uniqueness and dedup comparisons."""
    return label.strip().casefold()


@dataclass(frozen=True)
class ChoiceControl:
    label: str
    description: str
    choices: tuple[tuple[str, str], ...]  # ordered (choice label, description)
    appearance: str  # RADIO or CHECKBOX
    value: str | tuple[str, ...]  # str for radio, tuple for checkbox
    reason: str

    @property
    def choice_descriptions(self) -> tuple[str, ...]:
        return tuple(desc for _, desc in self.choices)


@dataclass(frozen=True)
class TextControl:
    label: str
    description: str
    value: str
    reason: str


@dataclass(frozen=True)
class PromptOption:
    """One control plus bookkeeping flags.

    ``origin`` is excluded from equality: the same control pinned or
    re-imported is still the same control.
    """

    control: ChoiceControl | TextControl
    non_canonical: bool = False
    origin: Origin = field(default=Origin.USER_JSON, compare=False)

    @property
    def label(self) -> str:
        return self.control.label

    @property
    def is_choice(self) -> bool:
        return isinstance(self.control, ChoiceControl)

    def with_origin(self, origin: Origin) -> "PromptOption":
        return replace(self, origin=origin)


class OptionSet:
    """Ordered collection of options with case-insensitive label uniqueness."""

    __slots__ = ("_options", "_by_label")

    def __init__(self, options: Iterable[PromptOption] = ()):
        opts = tuple(options)
        by_label: dict[str, int] = {}
        for i, opt in enumerate(opts):
            key = normalized_label(opt.label)
            if key in by_label:
                raise DuplicateLabel(opt.label)
            by_label[key] = i
        self._options = opts
        self._by_label = by_label

    def __iter__(self) -> Iterator[PromptOption]:
        return iter(self._options)

    def __len__(self) -> int:
        return len(self._options)

    def __bool__(self) -> bool:
        return bool(self._options)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, OptionSet):
            return NotImplemented
        return self._options == other._options

    def __repr__(self) -> str:
        return f"OptionSet({[o.label for o in self._options]})"

    def labels(self) -> list[str]:
        return [o.label for o in self._options]

    def __contains__(self, label: str) -> bool:
        return normalized_label(label) in self._by_label

    def get(self, label: str) -> PromptOption | None:
        i = self._by_label.get(normalized_label(label))
        return None if i is None else self._options[i]

    def with_appended(self, option: PromptOption) -> "OptionSet":
        return OptionSet((*self._options, option))

    def with_replaced(self, label: str, option: PromptOption) -> "OptionSet":
        i = self._by_label[normalized_label(label)]
        return OptionSet((*self._options[:i], option, *self._options[i + 1:]))

    def without(self, label: str) -> "OptionSet":
        i = self._by_label[normalized_label(label)]
        return OptionSet((*self._options[:i], *self._options[i + 1:]))


EMPTY_SET = OptionSet()


def _require_str(record: dict, name: str) -> str:
    if name not in record:
        raise MissingField(name)
    v = record[name]
    if not isinstance(v, str):
        raise WrongShape(name, f"field {name!r} must be a string")
    return v


def validate_option(candidate: Any, origin: Origin = Origin.USER_JSON) -> PromptOption:
    """Check a decoded record against the control schema.

    Values a generator produced that paraphrase a choice description are
    kept and flagged ``non_canonical`` instead of rejected; a choice
    control with no selected radio value at all is a hard error. Checkbox
    values are stored in choice order (canonical entries first).
    """
    if not isinstance(candidate, dict):
        raise WrongShape("record", "option record must be a JSON object")
    if "type" not in candidate:
        raise MissingField("type")
    kind = candidate["type"]
    if kind == TEXT_TYPE:
        label = _require_str(candidate, "label")
        if not label.strip():
            raise WrongShape("label", "label must be nonempty")
        control = TextControl(
            label=label,
            description=_require_str(candidate, "description"),
            value=_require_str(candidate, "value"),
            reason=_require_str(candidate, "reason"),
        )
        return PromptOption(control=control, non_canonical=False, origin=origin)
    if kind != OPTION_TYPE:
        raise WrongShape("type", f"unknown control type {kind!r}")

    label = _require_str(candidate, "label")
    if not label.strip():
        raise WrongShape("label", "label must be nonempty")
    description = _require_str(candidate, "description")
    reason = _require_str(candidate, "reason")

    if "options" not in candidate:
        raise MissingField("options")
    raw_choices = candidate["options"]
    if not isinstance(raw_choices, dict):
        raise WrongShape("options", "choices must be an object of label -> description")
    if not raw_choices:
        raise EmptyChoices()
    choices = []
    for k, v in raw_choices.items():
        if not isinstance(k, str) or not isinstance(v, str):
            raise WrongShape("options", "choice labels and descriptions must be strings")
        choices.append((k, v))
    seen = set()
    for k, _ in choices:
        norm = normalized_label(k)
        if norm in seen:
            raise WrongShape("options", f"duplicate choice label {k!r}")
        seen.add(norm)

    appearance = _require_str(candidate, "appearance")
    if appearance not in (RADIO, CHECKBOX):
        raise WrongShape("appearance", f"unknown appearance {appearance!r}")

    if "value" not in candidate:
        raise MissingField("value")
    raw_value = candidate["value"]
    descriptions = [desc for _, desc in choices]

    if appearance == RADIO:
        if isinstance(raw_value, list):
            raise WrongShape("value", "radio control value must be a single string")
        if not isinstance(raw_value, str):
            raise WrongShape("value", "radio control value must be a string")
        if not raw_value.strip():
            raise EmptyValue()
        value: str | tuple[str, ...] = raw_value
        non_canonical = raw_value not in descriptions
    else:
        if isinstance(raw_value, str):
            raise WrongShape("value", "checkbox control value must be a list of strings")
        if not isinstance(raw_value, list):
            raise WrongShape("value", "checkbox control value must be a list")
        for item in raw_value:
            if not isinstance(item, str):
                raise WrongShape("value", "checkbox values must be strings")
            if not item.strip():
                raise WrongShape("value", "checkbox values must be nonempty strings")
        if len(set(raw_value)) != len(raw_value):
            raise WrongShape("value", "checkbox values must not repeat")
        value = _checkbox_order(raw_value, descriptions)
        non_canonical = any(item not in descriptions for item in raw_value)

    control = ChoiceControl(
        label=label,
        description=description,
        choices=tuple(choices),
        appearance=appearance,
        value=value,
        reason=reason,
    )
    return PromptOption(control=control, non_canonical=non_canonical, origin=origin)


def _checkbox_order(values: list[str], descriptions: list[str]) -> tuple[str, ...]:
    """Canonical entries in choice order, then extras in given order."""
    canonical = [d for d in descriptions if d in values]
    extras = [v for v in values if v not in descriptions]
    return tuple(canonical + extras)


def selected_refinements(option: PromptOption) -> list[str]:
    """The refinement strings a control currently contributes."""
    control = option.control
    if isinstance(control, TextControl):
        return [control.value] if control.value else []
    if control.appearance == RADIO:
        assert isinstance(control.value, str)
        return [control.value]
    return list(control.value)


def set_value(option: PromptOption, new_value: str | list[str]) -> PromptOption:
    """UI-driven value update; strict: only canonical choices accepted."""
    control = option.control
    if isinstance(control, TextControl):
        if not isinstance(new_value, str):
            raise ShapeMismatch("text control value must be a string")
        return PromptOption(
            control=replace(control, value=new_value),
            non_canonical=False,
            origin=option.origin,
        )
    descriptions = list(control.choice_descriptions)
    if control.appearance == RADIO:
        if not isinstance(new_value, str):
            raise ShapeMismatch("radio control value must be a single string")
        if new_value not in descriptions:
            raise NotACanonicalChoice(new_value)
        value: str | tuple[str, ...] = new_value
    else:
        if isinstance(new_value, str) or not isinstance(new_value, list):
            raise ShapeMismatch("checkbox control value must be a list of strings")
        for item in new_value:
            if not isinstance(item, str):
                raise ShapeMismatch("checkbox values must be strings")
            if item not in descriptions:
                raise NotACanonicalChoice(item)
        if len(set(new_value)) != len(new_value):
            raise ShapeMismatch("checkbox values must not repeat")
        value = _checkbox_order(new_value, descriptions)
    return PromptOption(
        control=replace(control, value=value),
        non_canonical=False,
        origin=option.origin,
    )


class DroppedDuplicate(NamedTuple):
    incoming_label: str
    existing_label: str


def merge_dedupe(existing: OptionSet, incoming: OptionSet) -> tuple[OptionSet, list[DroppedDuplicate]]:
    """Append incoming options whose labels are new; existing wins collisions."""
    merged = list(existing)
    seen = {normalized_label(o.label): o.label for o in existing}
    dropped: list[DroppedDuplicate] = []
    for opt in incoming:
        key = normalized_label(opt.label)
        if key in seen:
            dropped.append(DroppedDuplicate(opt.label, seen[key]))
        else:
            merged.append(opt)
            seen[key] = opt.label
    return OptionSet(merged), dropped


# --- canonical JSON encoding -------------------------------------------------

def encode_option(option: PromptOption) -> dict[str, Any]:
    """Record dict in canonical field order."""
    control = option.control
    if isinstance(control, TextControl):
        return {
            "type": TEXT_TYPE,
            "label": control.label,
            "description": control.description,
            "value": control.value,
            "reason": control.reason,
        }
    return {
        "type": OPTION_TYPE,
        "label": control.label,
        "description": control.description,
        "options": dict(control.choices),
        "appearance": control.appearance,
        "value": control.value if isinstance(control.value, str) else list(control.value),
        "reason": control.reason,
    }


def encode_document(options: Iterable[PromptOption]) -> str:
    """Canonical text form: 2-space indent, UTF-8, stable key order."""
    return json.dumps([encode_option(o) for o in options], indent=2, ensure_ascii=False)


def _pairs_to_dict(pairs: list[tuple[str, Any]]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for k, v in pairs:
        if k in out:
            raise DocumentSyntaxError(f"duplicate object key {k!r}", 0)
        out[k] = v
    return out


def parse_option_document(text: str, origin: Origin = Origin.USER_JSON) -> OptionSet:
    """Parse a complete option document into a validated OptionSet.

    Tolerates prose or code fences around the array by scanning to the
    first ``[`` and reading one JSON value from there; anything after the
    matching close is ignored. Rejection is atomic: any bad element kills
    the whole document.
    """
    start = text.find("[")
    if start < 0:
        raise DocumentSyntaxError("no option array found", 0)
    decoder = json.JSONDecoder(object_pairs_hook=_pairs_to_dict)
    try:
        data, _ = decoder.raw_decode(text, start)
    except json.JSONDecodeError as exc:
        raise DocumentSyntaxError(exc.msg, exc.pos) from None
    if not isinstance(data, list):
        raise WrongShape("document", "top-level value is not an array")
    return OptionSet(validate_option(rec, origin=origin) for rec in data)
