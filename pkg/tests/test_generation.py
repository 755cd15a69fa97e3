import json
import random

import pytest

from prompt_controls.generation import (
    INLINE,
    MAX_CONTROLS,
    SESSION,
    GenerationRequest,
    RuleEnforcer,
    enforce_generation_rules,
)
from prompt_controls.options import OptionSet, parse_option_document, validate_option
from optgen import option_doc, random_option_set


def controls(n, prefix="Control"):
    return parse_option_document(option_doc([f"{prefix} {i}" for i in range(n)]))


class TestEnforceRules:
    def test_three_fresh_controls_pass_clean(self):
        raw = controls(3)
        outcome = enforce_generation_rules(raw, OptionSet())
        assert outcome.accepted == raw
        assert outcome.warnings == []

    def test_seven_controls_truncate_to_five_with_warning(self):
        outcome = enforce_generation_rules(controls(7), OptionSet())
        assert len(outcome.accepted) == MAX_CONTROLS
        assert outcome.accepted_labels == [f"Control {i}" for i in range(5)]
        assert {"kind": "truncated", "count": 2} in outcome.warnings

    def test_grounding_duplicates_all_dropped(self):
        raw = controls(3)
        outcome = enforce_generation_rules(raw, raw)
        assert len(outcome.accepted) == 0
        assert sum(w["kind"] == "duplicate" for w in outcome.warnings) == 3

    def test_duplicate_detection_is_normalized(self):
        grounding = controls(1, prefix="Focus Area")
        raw = parse_option_document(option_doc(["  focus area 0 "]))
        outcome = enforce_generation_rules(raw, grounding)
        assert len(outcome.accepted) == 0
        assert outcome.warnings[0]["kind"] == "duplicate"

    def test_missing_initial_value_rejects_only_that_control(self):
        records = json.loads(option_doc(["Keep A", "Keep B"]))
        empty_checkbox = {
            "type": "option", "label": "No Value", "description": "d",
            "options": {"X": "Do X"}, "appearance": "multi-select-checkbox",
            "value": [], "reason": "r",
        }
        raw = OptionSet(validate_option(r) for r in [records[0], empty_checkbox, records[1]])
        outcome = enforce_generation_rules(raw, OptionSet())
        assert outcome.accepted_labels == ["Keep A", "Keep B"]
        assert {"kind": "missing_value", "label": "No Value"} in outcome.warnings

    def test_non_canonical_value_accepted_with_warning(self):
        record = {
            "type": "option", "label": "Depth", "description": "d",
            "options": {"Low": "Stay shallow", "High": "Go deep"},
            "appearance": "single-select-radio",
            "value": "Go impossibly deep", "reason": "r",
        }
        raw = OptionSet([validate_option(record)])
        outcome = enforce_generation_rules(raw, OptionSet())
        assert outcome.accepted_labels == ["Depth"]
        assert next(iter(outcome.accepted)).non_canonical is True
        assert {"kind": "non_canonical", "label": "Depth"} in outcome.warnings

    def test_under_generation_warned_not_rejected(self):
        outcome = enforce_generation_rules(controls(1), OptionSet())
        assert outcome.accepted_labels == ["Control 0"]
        assert {"kind": "under_generation", "count": 1} in outcome.warnings

    def test_dedupe_happens_before_truncation(self):
        grounding = controls(2)
        raw = controls(7)  # first two collide with grounding
        outcome = enforce_generation_rules(raw, grounding)
        assert outcome.accepted_labels == [f"Control {i}" for i in range(2, 7)]
        assert not any(w["kind"] == "truncated" for w in outcome.warnings)

    def test_accepted_never_intersects_grounding(self):
        rng = random.Random(5)
        for _ in range(200):
            grounding = random_option_set(rng, 4)
            raw = random_option_set(rng, 6)
            outcome = enforce_generation_rules(raw, grounding)
            grounded = {l.strip().casefold() for l in grounding.labels()}
            assert all(l.strip().casefold() not in grounded for l in outcome.accepted_labels)
            assert len(outcome.accepted) <= MAX_CONTROLS


class TestOnlineBatchConsistency:
    def test_streamed_offers_equal_batch_result(self):
        rng = random.Random(9)
        for _ in range(200):
            grounding = random_option_set(rng, 3)
            raw = random_option_set(rng, 8)
            batch = enforce_generation_rules(raw, grounding)
            enforcer = RuleEnforcer(grounding)
            streamed = [option for option in raw if enforcer.offer(option)[0]]
            online = enforcer.finish()
            assert list(online.accepted) == streamed
            assert online.accepted == batch.accepted
            assert online.warnings == batch.warnings


class TestGenerationRequest:
    def test_session_requires_utterance(self):
        with pytest.raises(ValueError):
            GenerationRequest(kind=SESSION, history=(), latest_input="   ", existing=OptionSet())

    def test_inline_allows_any_input(self):
        request = GenerationRequest(kind=INLINE, history=(), latest_input="explain", existing=OptionSet())
        assert request.kind == INLINE
