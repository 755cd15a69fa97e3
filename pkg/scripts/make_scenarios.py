"""Regenerate the scenario/fixture files under scenarios/.

Run from the repo root: python scripts/make_scenarios.py
Golden transcripts are produced separately with
`prompt-controls replay ... --update-golden` and reviewed before commit.
"""

from __future__ import annotations

import json
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "scenarios"

DETAIL_BASIC = "Provide a basic explanation of the formula"
DETAIL_INTERMEDIATE = "Provide a moderately detailed explanation of the formula"
DETAIL_ADVANCED = "Provide an advanced, in-depth explanation of the formula"
FOCUS_INDEX = "Focus on how the INDEX function works"
FOCUS_MATCH = "Focus on how the MATCH function works"
FOCUS_REFS = "Focus on how the cell ranges and references are used"
LEARN_UNDERSTAND = "Help me understand what the formula does"
LEARN_APPLY = "Help me apply the formula to my own data"
LEARN_TROUBLESHOOT = "Help me troubleshoot issues with the formula"
FORMAT_BULLETS = "Format the explanation as bullet points"
FORMAT_PARAGRAPH = "Present the explanation as flowing paragraphs"
FORMAT_STEPS = "Organize the explanation into discrete sequential steps"

INLINE_OPTIONS = [
    {
        "type": "option",
        "label": "Explanation Detail Level",
        "description": "Choose how deep the explanation should go",
        "options": {
            "Basic": DETAIL_BASIC,
            "Intermediate": DETAIL_INTERMEDIATE,
            "Advanced": DETAIL_ADVANCED,
        },
        "appearance": "single-select-radio",
        "value": DETAIL_BASIC,
        "reason": "Matching the depth of the explanation to the user avoids answers that are too shallow or too dense.",
    },
    {
        "type": "option",
        "label": "Focus Areas",
        "description": "Parts of the formula to concentrate on",
        "options": {
            "INDEX Function": FOCUS_INDEX,
            "MATCH Function": FOCUS_MATCH,
            "Cell References": FOCUS_REFS,
        },
        "appearance": "multi-select-checkbox",
        "value": [FOCUS_INDEX, FOCUS_MATCH],
        "reason": "Selecting focus areas keeps the explanation on the pieces of the formula the user cares about.",
    },
    {
        "type": "option",
        "label": "Learning Objectives",
        "description": "What you want to get out of the explanation",
        "options": {
            "Understanding the Formula": LEARN_UNDERSTAND,
            "Applying the Formula": LEARN_APPLY,
            "Troubleshooting": LEARN_TROUBLESHOOT,
        },
        "appearance": "single-select-radio",
        "value": LEARN_APPLY,
        "reason": "The goal changes whether the answer teaches concepts, walks through usage, or debugs problems.",
    },
]

SESSION_OPTIONS = [
    {
        "type": "option",
        "label": "Response Format",
        "description": "Structure of the generated response",
        "options": {
            "Bullet Points": FORMAT_BULLETS,
            "Paragraph": FORMAT_PARAGRAPH,
            "Step-by-Step": FORMAT_STEPS,
        },
        "appearance": "single-select-radio",
        "value": FORMAT_PARAGRAPH,
        "reason": "A consistent response structure applies to every prompt in the session.",
    },
]

CHAT_1 = (
    "This formula looks up a value in the table B2:E10. "
    "The first MATCH finds the row of G1 within A2:A10, the second MATCH finds "
    "the column of H1 within B1:E1, and INDEX returns the cell where they meet."
)

CHAT_2 = (
    "At an advanced level: INDEX(B2:E10, r, c) dereferences the r-th row and "
    "c-th column of the rectangular range B2:E10. MATCH(G1, A2:A10, 0) performs "
    "an exact scan for G1, so an unsorted key column is fine; a #N/A from either "
    "MATCH is the usual failure, and wrapping the row MATCH in IFERROR or checking "
    "for stray whitespace in A2:A10 are the first troubleshooting steps."
)

CHAT_3 = (
    "Step 1: MATCH(G1, A2:A10, 0) scans the key column for an exact match and returns its row number. "
    "Step 2: MATCH(H1, B1:E1, 0) does the same across the header row to pick the column. "
    "Step 3: INDEX(B2:E10, row, column) returns the intersecting cell. "
    "Step 4: if either MATCH shows #N/A, confirm the lookup values exist and strip stray whitespace."
)


def chunked(text: str, size: int) -> list[str]:
    return [text[i: i + size] for i in range(0, len(text), size)]


def completion(chunks: list[str], delay: float) -> dict:
    return {"chunks": chunks, "delays": [delay] * len(chunks)}


def main() -> None:
    OUT.mkdir(exist_ok=True)

    fig1_fixture = {
        "scenario": "fig1",
        "completions": [
            completion(chunked(json.dumps(INLINE_OPTIONS, indent=1), 64), 0.02),
            completion(chunked(CHAT_1, 48), 0.03),
            completion(chunked(CHAT_2, 48), 0.03),
            completion(chunked(json.dumps(SESSION_OPTIONS, indent=1), 64), 0.02),
            completion(chunked(CHAT_3, 48), 0.03),
        ],
    }
    (OUT / "fig1.fixture.json").write_text(json.dumps(fig1_fixture, indent=2) + "\n")

    step_selected = [dict(SESSION_OPTIONS[0], value=FORMAT_STEPS)]
    fig1_scenario = {
        "version": 1,
        "scenario": "fig1",
        "session_id": "fig1",
        "mode": "dynamic",
        "fixture": "fig1",
        "actions": [
            {
                "at": 0.0,
                "op": "submit_prompt",
                "text": "Explain the formula: =INDEX(B2:E10, MATCH(G1, A2:A10, 0), MATCH(H1, B1:E1, 0))",
            },
            {
                "at": 5.0,
                "op": "update_inline_option",
                "turn": 1,
                "label": "Explanation Detail Level",
                "value": DETAIL_ADVANCED,
            },
            {
                "at": 5.1,
                "op": "update_inline_option",
                "turn": 1,
                "label": "Learning Objectives",
                "value": LEARN_TROUBLESHOOT,
            },
            {
                "at": 10.0,
                "op": "request_session_options",
                "utterance": "I want to control the structure or format of the response",
            },
            {
                # after the generated controls land (~10.18) but inside the
                # debounce window of the generation's own regeneration, so the
                # selection and the new controls coalesce into one regeneration
                "at": 10.3,
                "op": "import_session_options",
                "options": step_selected,
            },
        ],
    }
    (OUT / "fig1.scenario").write_text(json.dumps(fig1_scenario, indent=2) + "\n")

    static_fixture = {
        "scenario": "static3",
        "completions": [
            completion(chunked("A pivot table groups rows by a key and aggregates each group.", 40), 0.03),
            completion(chunked("VLOOKUP searches the first column of a range and returns a value from another column.", 40), 0.03),
            completion(chunked("A histogram shows how often values fall into each bucket.", 40), 0.03),
        ],
    }
    (OUT / "static3.fixture.json").write_text(json.dumps(static_fixture, indent=2) + "\n")

    static_scenario = {
        "version": 1,
        "scenario": "static3",
        "session_id": "static3",
        "mode": "static",
        "fixture": "static3",
        "actions": [
            {"at": 0.0, "op": "submit_prompt", "text": "What is a pivot table?"},
            {"at": 10.0, "op": "submit_prompt", "text": "What does VLOOKUP do?"},
            {"at": 20.0, "op": "submit_prompt", "text": "What is a histogram?"},
        ],
    }
    (OUT / "static3.scenario").write_text(json.dumps(static_scenario, indent=2) + "\n")
    print("wrote", sorted(p.name for p in OUT.iterdir()))


if __name__ == "__main__":
    main()
