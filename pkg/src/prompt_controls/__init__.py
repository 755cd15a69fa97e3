"""Prompt middleware engine: generated GUI refinement controls for chat."""

from .options import (
    CHECKBOX,
    RADIO,
    ChoiceControl,
    Origin,
    OptionSet,
    PromptOption,
    TextControl,
    encode_document,
    encode_option,
    merge_dedupe,
    parse_option_document,
    selected_refinements,
    set_value,
    validate_option,
)

__all__ = [
    "CHECKBOX",
    "RADIO",
    "ChoiceControl",
    "Origin",
    "OptionSet",
    "PromptOption",
    "TextControl",
    "encode_document",
    "encode_option",
    "merge_dedupe",
    "parse_option_document",
    "selected_refinements",
    "set_value",
    "validate_option",
]
