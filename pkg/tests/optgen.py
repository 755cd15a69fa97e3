"""Seeded random builders for option records, sets, and backend stubs."""

from __future__ import annotations

import json
import random

from prompt_controls.gateway import CHUNK, DONE, CompletionRequest
from prompt_controls.options import Origin, OptionSet, validate_option

WORDS = [
    "detail", "focus", "tone", "scope", "format", "depth", "audience", "pace",
    "examples", "citations", "structure", "register", "goal", "risk", "style",
    "Ünicode", "emoji😀", "quote\"y", "back\\slash", "new\nline", "tab\there",
]


def rand_text(rng: random.Random, lo: int = 1, hi: int = 6) -> str:
    return " ".join(rng.choice(WORDS) for _ in range(rng.randint(lo, hi)))


def random_record(rng: random.Random, label: str) -> dict:
    kind = rng.choice(["radio", "checkbox", "text"])
    if kind == "text":
        return {
            "type": "text",
            "label": label,
            "description": rand_text(rng),
            "value": rand_text(rng, 0, 8) if rng.random() > 0.1 else "",
            "reason": rand_text(rng),
        }
    n_choices = rng.randint(1, 5)
    choices = {}
    while len(choices) < n_choices:
        key = f"{rand_text(rng, 1, 2)} {len(choices)}"
        choices[key] = f"{rand_text(rng, 2, 6)} [{len(choices)}]"
    descriptions = list(choices.values())
    if kind == "radio":
        value = rng.choice(descriptions) if rng.random() > 0.15 else rand_text(rng) + " (paraphrased)"
        appearance = "single-select-radio"
    else:
        appearance = "multi-select-checkbox"
        picked = [d for d in descriptions if rng.random() > 0.5]
        if rng.random() < 0.1:
            picked.append(rand_text(rng) + " (extra)")
        value = picked
    return {
        "type": "option",
        "label": label,
        "description": rand_text(rng),
        "options": choices,
        "appearance": appearance,
        "value": value,
        "reason": rand_text(rng),
    }


def random_records(rng: random.Random, max_n: int = 6) -> list[dict]:
    n = rng.randint(0, max_n)
    labels = set()
    records = []
    while len(records) < n:
        label = f"{rand_text(rng, 1, 3)} #{rng.randint(0, 999)}"
        if label.strip().casefold() in labels:
            continue
        labels.add(label.strip().casefold())
        records.append(random_record(rng, label))
    return records


def random_option_set(rng: random.Random, max_n: int = 6, origin: Origin = Origin.USER_JSON) -> OptionSet:
    return OptionSet(validate_option(r, origin=origin) for r in random_records(rng, max_n))


def option_doc(labels: list[str], appearance: str = "single-select-radio") -> str:
    """A simple valid option document with one radio per label."""
    records = []
    for label in labels:
        records.append({
            "type": "option",
            "label": label,
            "description": f"controls {label}",
            "options": {"A": f"First behavior for {label}", "B": f"Second behavior for {label}"},
            "appearance": appearance,
            "value": f"First behavior for {label}",
            "reason": f"why {label} matters",
        })
    return json.dumps(records)


class StubStream:
    def __init__(self, chunks: list[str]):
        self._chunks = list(chunks)
        self._i = 0

    def next_event(self, now: float):
        if self._i >= len(self._chunks):
            return DONE, None
        chunk = self._chunks[self._i]
        self._i += 1
        return CHUNK, chunk

    def close(self) -> None:
        self._i = len(self._chunks)


class PurposeStubGateway:
    """Unordered test backend: canned option docs and chat texts by purpose.

    Property-style tests mutate sessions in random orders, so order-matched
    replay fixtures do not fit; this stub answers any request.
    """

    def __init__(self, rng: random.Random | None = None):
        self.rng = rng or random.Random(0)
        self.log: list[CompletionRequest] = []
        self.chat_counter = 0

    def stream_completion(self, request: CompletionRequest) -> StubStream:
        self.log.append(request)
        if request.purpose == "options":
            doc = option_doc([f"Gen {self.rng.randint(0, 10**9)}" for _ in range(self.rng.randint(1, 3))])
            return StubStream([doc])
        self.chat_counter += 1
        return StubStream([f"response #{self.chat_counter}"])
