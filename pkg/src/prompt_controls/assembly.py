"""Deterministic serialization of selected controls into prompt text.

Two instruction templates ship as resource files and are pinned by
checksum tests: the option-generation instructions (with the
``${currentContent}`` / ``${currentOptions}`` placeholders) and the
start/end frames that wrap the selected-options payload in the chat
system prompt. Same inputs, same bytes: nothing here reads a clock or
an RNG.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib.resources import files
from typing import Sequence

from .errors import EmptyUserMessage
from .options import OptionSet, PromptOption, encode_document, normalized_label

# (user_text, assistant_text or None while pending) per completed turn
Transcript = Sequence[tuple[str, str | None]]

CONTENT_PLACEHOLDER = "${currentContent}"
OPTIONS_PLACEHOLDER = "${currentOptions}"

# the option prompt embeds at most this many of the most recent turns
HISTORY_CAP = 20


def _template(name: str) -> str:
    return files("prompt_controls.templates").joinpath(name).read_text(encoding="utf-8")


OPTION_INSTRUCTIONS = _template("option_instructions.txt")
CHAT_START = _template("chat_start.txt")
CHAT_END = _template("chat_end.txt")


@dataclass(frozen=True)
class RefinementBlock:
    """Canonical array of the selected option records, ready to frame."""

    text: str
    included_labels: tuple[str, ...]
    dropped_session_labels: tuple[str, ...] = ()


@dataclass(frozen=True)
class AssembledPrompt:
    system_text: str
    messages: tuple[tuple[str, str], ...]  # (role, text), oldest first


def serialize_refinements(session: OptionSet, inline: OptionSet) -> RefinementBlock:
    """Session options first, then inline; inline wins label collisions."""
    inline_keys = {normalized_label(o.label) for o in inline}
    included: list[PromptOption] = []
    dropped: list[str] = []
    for opt in session:
        if normalized_label(opt.label) in inline_keys:
            dropped.append(opt.label)
        else:
            included.append(opt)
    included.extend(inline)
    return RefinementBlock(
        text=encode_document(included),
        included_labels=tuple(o.label for o in included),
        dropped_session_labels=tuple(dropped),
    )


def assemble_chat_prompt(history: Transcript, user_msg: str, block: RefinementBlock) -> AssembledPrompt:
    """System text is start frame + payload + end frame; history then the new message."""
    if not user_msg:
        raise EmptyUserMessage("user message must be nonempty")
    messages: list[tuple[str, str]] = []
    for user_text, assistant_text in history:
        messages.append(("user", user_text))
        if assistant_text is not None:
            messages.append(("assistant", assistant_text))
    messages.append(("user", user_msg))
    return AssembledPrompt(
        system_text=CHAT_START + block.text + CHAT_END,
        messages=tuple(messages),
    )


def render_transcript(history: Transcript, latest_user_input: str) -> str:
    """Plain-text conversation rendering used as option-generation grounding."""
    lines: list[str] = []
    for user_text, assistant_text in history[-HISTORY_CAP:]:
        lines.append(f"User: {user_text}")
        if assistant_text is not None:
            lines.append(f"Assistant: {assistant_text}")
    if latest_user_input:
        lines.append(f"User: {latest_user_input}")
    return "\n".join(lines)


def assemble_option_prompt(history: Transcript, latest_user_input: str, current_options: OptionSet) -> str:
    """The generation instructions with both placeholders filled in."""
    content = render_transcript(history, latest_user_input)
    return OPTION_INSTRUCTIONS.replace(CONTENT_PLACEHOLDER, content).replace(
        OPTIONS_PLACEHOLDER, encode_document(current_options)
    )
