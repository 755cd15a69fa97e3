import json

import pytest

from prompt_controls import events as ev
from prompt_controls.assembly import serialize_refinements
from prompt_controls.clock import VirtualClock
from prompt_controls.errors import (
    Busy,
    DuplicateSessionLabel,
    EmptyPrompt,
    NoTurns,
    NotACanonicalChoice,
    NotLatestTurn,
    StaticModeViolation,
    UnknownLabel,
)
from prompt_controls.gateway import Fixture, ReplayGateway, ScriptedCompletion
from prompt_controls.runtime import Session
from prompt_controls.session import Mode, SessionDirectoryStore, TurnStatus, load_static_preset
from optgen import option_doc

FIG1_LABELS = ["Explanation Detail Level", "Focus Areas", "Learning Objectives"]


def completion(*chunks, delays=None, fault=None):
    return ScriptedCompletion(chunks=tuple(chunks), delays=tuple(delays or ()), fault=fault)


def make_session(completions, mode=Mode.DYNAMIC, session_id="t", store=None):
    clock = VirtualClock()
    gateway = ReplayGateway(Fixture(session_id, list(completions)))
    events = []
    session = Session(session_id, mode, gateway, clock=clock, sink=events.append, store=store)
    return session, clock, gateway, events


def drain(session, clock, until=None):
    while True:
        session.run_ready()
        wake = session.next_wake()
        if wake is None or (until is not None and wake > until):
            break
        clock.set(max(wake, clock.now()))


def value_for(label, which="First"):
    return f"{which} behavior for {label}"


class TestSubmitFlow:
    def test_dynamic_submit_generates_options_then_response(self):
        session, clock, gateway, events = make_session([
            completion(option_doc(FIG1_LABELS)),
            completion("The formula ", "answer."),
        ])
        turn_id = session.submit_prompt("Explain the formula")
        drain(session, clock)
        turn = session.state.latest_turn
        assert turn.turn_id == turn_id
        assert turn.inline_options.labels() == FIG1_LABELS
        assert turn.assistant_text == "The formula answer."
        assert turn.status == TurnStatus.COMPLETE
        assert [r.purpose for r in gateway.log] == ["options", "chat"]
        kinds = [e.kind for e in events]
        assert kinds.index(ev.OPTION_SET_COMPLETE) < kinds.index(ev.REGEN_STARTED)

    def test_chat_deltas_concatenate_to_final_text(self):
        session, clock, gateway, events = make_session([
            completion(option_doc(["A"])),
            completion("one ", "two ", "three"),
        ])
        session.submit_prompt("x")
        drain(session, clock)
        deltas = "".join(e.payload["text"] for e in events if e.kind == ev.CHAT_DELTA)
        final = next(e.payload["text"] for e in events if e.kind == ev.CHAT_COMPLETE)
        assert deltas == final == "one two three"

    def test_static_submit_skips_option_generation(self):
        session, clock, gateway, events = make_session([completion("short answer")], mode=Mode.STATIC)
        session.submit_prompt("What is a pivot table?")
        drain(session, clock)
        assert [r.purpose for r in gateway.log] == ["chat"]
        assert session.state.latest_turn.status == TurnStatus.COMPLETE
        assert len(session.state.session_options) == 6

    def test_static_prompt_carries_preset_refinements(self):
        session, clock, gateway, _ = make_session([completion("a")], mode=Mode.STATIC)
        session.submit_prompt("q")
        drain(session, clock)
        system_text = gateway.log[0].system_text
        assert "I am a beginner with limited knowledge" in system_text

    def test_empty_prompt_rejected(self):
        session, _, _, _ = make_session([])
        with pytest.raises(EmptyPrompt):
            session.submit_prompt("   ")

    def test_busy_while_turn_generating(self):
        session, clock, _, _ = make_session([
            completion(option_doc(["A"])),
            completion("slow", delays=[5.0]),
            completion("unused"),
        ])
        session.submit_prompt("first")
        session.run_ready()  # options done; chat parked on its delayed chunk
        with pytest.raises(Busy):
            session.submit_prompt("second")
        drain(session, clock)
        assert session.state.latest_turn.assistant_text == "slow"

    def test_event_revisions_are_consecutive(self):
        session, clock, _, events = make_session([
            completion(option_doc(["A", "B"])),
            completion("resp"),
        ])
        session.submit_prompt("x")
        drain(session, clock)
        assert [e.revision for e in events] == list(range(1, len(events) + 1))


class TestInlineEdits:
    def _ready_session(self, extra=(), labels=tuple(FIG1_LABELS)):
        session, clock, gateway, events = make_session([
            completion(option_doc(list(labels))),
            completion("initial response"),
            *extra,
        ])
        turn_id = session.submit_prompt("Explain the formula")
        drain(session, clock)
        return session, clock, gateway, events, turn_id

    def test_two_edits_in_window_coalesce_into_one_regeneration(self):
        session, clock, gateway, events, turn_id = self._ready_session(
            extra=[completion("regenerated response")]
        )
        label_a, label_b = FIG1_LABELS[0], FIG1_LABELS[2]
        session.update_inline_option(turn_id, label_a, value_for(label_a, "Second"))
        clock.advance(0.1)
        session.update_inline_option(turn_id, label_b, value_for(label_b, "Second"))
        drain(session, clock)
        chat_requests = [r for r in gateway.log if r.purpose == "chat"]
        assert len(chat_requests) == 2  # initial + one coalesced regeneration
        assert value_for(label_a, "Second") in chat_requests[-1].system_text
        assert value_for(label_b, "Second") in chat_requests[-1].system_text
        causes = [e.payload["cause"] for e in events if e.kind == ev.REGEN_STARTED]
        assert causes == ["initial", "option_changed"]

    def test_edits_outside_window_fire_separately(self):
        session, clock, gateway, _, turn_id = self._ready_session(
            extra=[completion("regen one"), completion("regen two")]
        )
        label_a, label_b = FIG1_LABELS[0], FIG1_LABELS[2]
        session.update_inline_option(turn_id, label_a, value_for(label_a, "Second"))
        drain(session, clock)
        session.update_inline_option(turn_id, label_b, value_for(label_b, "Second"))
        drain(session, clock)
        assert sum(r.purpose == "chat" for r in gateway.log) == 3
        assert session.state.latest_turn.assistant_text == "regen two"

    def test_regeneration_replaces_only_latest_assistant_text(self):
        session, clock, gateway, _, turn_id = self._ready_session(
            extra=[completion("better response")]
        )
        before_turns = len(session.state.turns)
        label = FIG1_LABELS[0]
        session.update_inline_option(turn_id, label, value_for(label, "Second"))
        drain(session, clock)
        assert len(session.state.turns) == before_turns
        assert session.state.latest_turn.assistant_text == "better response"
        assert session.state.latest_turn.status == TurnStatus.COMPLETE

    def test_edit_on_older_turn_is_frozen(self):
        session, clock, _, _, _ = self._ready_session(
            extra=[completion(option_doc(["Second Turn Control"])), completion("second response")]
        )
        session.submit_prompt("follow-up")
        drain(session, clock)
        with pytest.raises(NotLatestTurn):
            session.update_inline_option(1, FIG1_LABELS[0], value_for(FIG1_LABELS[0], "Second"))

    def test_unknown_label(self):
        session, _, _, _, turn_id = self._ready_session()
        with pytest.raises(UnknownLabel):
            session.update_inline_option(turn_id, "Nope", "x")

    def test_non_canonical_value_rejected_strictly(self):
        session, _, _, _, turn_id = self._ready_session()
        with pytest.raises(NotACanonicalChoice):
            session.update_inline_option(turn_id, FIG1_LABELS[0], "be cooler about it")

    def test_refinement_block_matches_state_at_call_time(self):
        session, clock, gateway, _, turn_id = self._ready_session(
            extra=[completion("regen")]
        )
        label = FIG1_LABELS[1]
        session.update_inline_option(turn_id, label, value_for(label, "Second"))
        drain(session, clock)
        expected = serialize_refinements(
            session.state.session_options, session.state.latest_turn.inline_options
        )
        last_chat = [r for r in gateway.log if r.purpose == "chat"][-1]
        assert expected.text in last_chat.system_text


class TestPinning:
    def _session_with_options(self):
        session, clock, gateway, events = make_session([
            completion(option_doc(FIG1_LABELS)),
            completion("resp"),
            completion("regen after pin"),
        ])
        turn_id = session.submit_prompt("explain")
        drain(session, clock)
        return session, clock, gateway, events, turn_id

    def test_pin_moves_option_between_tiers_preserving_value(self):
        session, clock, _, _, turn_id = self._session_with_options()
        label = FIG1_LABELS[1]
        before_union = sorted(
            session.state.session_options.labels() + session.state.latest_turn.inline_options.labels()
        )
        before_block = serialize_refinements(
            session.state.session_options, session.state.latest_turn.inline_options
        )
        session.pin_option(turn_id, label)
        after_union = sorted(
            session.state.session_options.labels() + session.state.latest_turn.inline_options.labels()
        )
        assert before_union == after_union  # pin conservation
        assert label not in session.state.latest_turn.inline_options
        pinned = session.state.session_options.get(label)
        assert pinned is not None
        after_block = serialize_refinements(
            session.state.session_options, session.state.latest_turn.inline_options
        )
        assert sorted(before_block.included_labels) == sorted(after_block.included_labels)
        drain(session, clock)

    def test_pin_schedules_regeneration(self):
        session, clock, gateway, events, turn_id = self._session_with_options()
        session.pin_option(turn_id, FIG1_LABELS[0])
        drain(session, clock)
        causes = [e.payload["cause"] for e in events if e.kind == ev.REGEN_STARTED]
        assert causes == ["initial", "session_options_changed"]

    def test_pin_twice_is_unknown_label(self):
        session, clock, _, _, turn_id = self._session_with_options()
        session.pin_option(turn_id, FIG1_LABELS[0])
        with pytest.raises(UnknownLabel):
            session.pin_option(turn_id, FIG1_LABELS[0])
        drain(session, clock)

    def test_pin_conflicting_session_label(self):
        session, clock, _, _, turn_id = self._session_with_options()
        session.import_session_options(option_doc([FIG1_LABELS[0]]))
        with pytest.raises(DuplicateSessionLabel):
            session.pin_option(turn_id, FIG1_LABELS[0])
        drain(session, clock)

    def test_unpin_restores_inline_tier(self):
        session, clock, _, _, turn_id = self._session_with_options()
        label = FIG1_LABELS[2]
        session.pin_option(turn_id, label)
        session.unpin_option(label)
        assert label in session.state.latest_turn.inline_options
        assert label not in session.state.session_options
        drain(session, clock)


class TestSessionOptionOps:
    def test_export_import_export_byte_stable(self):
        session, _, _, _ = make_session([])
        session.import_session_options(option_doc(["Tone", "Register"]))
        first = session.export_session_options()
        session.import_session_options(first)
        assert session.export_session_options() == first

    def test_import_empty_clears(self):
        session, _, _, _ = make_session([])
        session.import_session_options(option_doc(["Tone"]))
        session.import_session_options("[]")
        assert len(session.state.session_options) == 0

    def test_import_preset_yields_six_controls(self):
        session, _, _, _ = make_session([])
        from prompt_controls.options import encode_document
        session.import_session_options(encode_document(load_static_preset()))
        labels = session.state.session_options.labels()
        assert labels[0] == "Expertise Level"
        assert labels[-1] == "Tone of Explanation"
        assert len(labels) == 6

    def test_import_triggers_regeneration_of_latest(self):
        session, clock, gateway, _ = make_session([
            completion(option_doc(["A"])),
            completion("first"),
            completion("after import"),
        ])
        session.submit_prompt("q")
        drain(session, clock)
        session.import_session_options(option_doc(["House Style"]))
        drain(session, clock)
        assert session.state.latest_turn.assistant_text == "after import"
        assert "House Style" in gateway.log[-1].system_text

    def test_delete_session_option(self):
        session, _, _, _ = make_session([])
        session.import_session_options(option_doc(["Tone", "Register"]))
        session.delete_option("session", "Tone")
        assert session.state.session_options.labels() == ["Register"]
        with pytest.raises(UnknownLabel):
            session.delete_option("session", "Tone")

    def test_delete_inline_option(self):
        session, clock, _, _ = make_session([
            completion(option_doc(["A", "B"])),
            completion("resp"),
            completion("regen"),
        ])
        turn_id = session.submit_prompt("q")
        drain(session, clock)
        session.delete_option("inline", "A")
        assert session.state.latest_turn.inline_options.labels() == ["B"]
        drain(session, clock)


class TestSessionGeneration:
    def test_nl_request_adds_session_options_and_regenerates(self):
        session, clock, gateway, events = make_session([
            completion(option_doc(["A"])),
            completion("first response"),
            completion(option_doc(["Response Format"])),
            completion("formatted response"),
        ])
        session.submit_prompt("explain")
        drain(session, clock)
        session.request_session_options("I want to control the structure or format of the response")
        drain(session, clock)
        assert "Response Format" in session.state.session_options
        assert session.state.latest_turn.assistant_text == "formatted response"
        option_requests = [r for r in gateway.log if r.purpose == "options"]
        assert len(option_requests) == 2
        assert "I want to control the structure or format of the response" in option_requests[-1].system_text

    def test_generated_duplicates_of_session_options_drop(self):
        session, clock, _, events = make_session([
            completion(option_doc(["Existing", "Fresh"])),
        ])
        session.import_session_options(option_doc(["Existing"]))
        session.request_session_options("more controls")
        drain(session, clock)
        labels = session.state.session_options.labels()
        assert labels == ["Existing", "Fresh"]
        completes = [e for e in events if e.kind == ev.OPTION_SET_COMPLETE]
        assert any(w["kind"] == "duplicate" for w in completes[-1].payload["warnings"])

    def test_before_any_prompt_no_regeneration(self):
        session, clock, gateway, _ = make_session([
            completion(option_doc(["Format"])),
        ])
        session.request_session_options("controls please")
        drain(session, clock)
        assert [r.purpose for r in gateway.log] == ["options"]

    def test_second_request_cancels_first(self):
        session, clock, _, events = make_session([
            completion(option_doc(["From First"]), delays=[5.0]),
            completion(option_doc(["From Second"])),
        ])
        session.request_session_options("first ask")
        session.run_ready()  # first pump parked on its delayed chunk
        session.request_session_options("second ask")
        drain(session, clock)
        assert "From Second" in session.state.session_options
        assert "From First" not in session.state.session_options
        cancelled = [e for e in events if e.kind == ev.ERROR and e.payload["name"] == "Cancelled"]
        assert len(cancelled) == 1

    def test_static_mode_rejects_generation(self):
        session, _, _, _ = make_session([], mode=Mode.STATIC)
        with pytest.raises(StaticModeViolation):
            session.request_session_options("anything")


class TestStaticModeRules:
    def test_import_value_change_allowed_and_regenerates(self):
        session, clock, gateway, _ = make_session(
            [completion("first"), completion("longer answer")], mode=Mode.STATIC
        )
        session.submit_prompt("q")
        drain(session, clock)
        exported = json.loads(session.export_session_options())
        exported[1]["value"] = "Provide comprehensive, in-depth explanations"
        session.import_session_options(json.dumps(exported))
        drain(session, clock)
        assert session.state.latest_turn.assistant_text == "longer answer"
        assert "Provide comprehensive, in-depth explanations" in gateway.log[-1].system_text

    def test_import_with_novel_controls_rejected(self):
        session, _, _, _ = make_session([], mode=Mode.STATIC)
        with pytest.raises(StaticModeViolation):
            session.import_session_options(option_doc(["Custom Thing"]))

    def test_import_with_altered_choices_rejected(self):
        session, _, _, _ = make_session([], mode=Mode.STATIC)
        exported = json.loads(session.export_session_options())
        exported[0]["options"]["Beginner"] = "Totally new description"
        exported[0]["value"] = "Totally new description"
        with pytest.raises(StaticModeViolation):
            session.import_session_options(json.dumps(exported))

    def test_delete_rejected(self):
        session, _, _, _ = make_session([], mode=Mode.STATIC)
        with pytest.raises(StaticModeViolation):
            session.delete_option("session", "Expertise Level")


class TestFailurePaths:
    def test_decode_failure_retries_once_then_succeeds(self):
        session, clock, gateway, events = make_session([
            completion("wholly not json {"),
            completion(option_doc(["Recovered"])),
            completion("resp"),
        ])
        session.submit_prompt("q")
        drain(session, clock)
        assert session.state.latest_turn.inline_options.labels() == ["Recovered"]
        assert [r.purpose for r in gateway.log] == ["options", "options", "chat"]
        retries = [e for e in events if e.kind == ev.ERROR and e.payload["name"] == "DecodeError"]
        assert len(retries) == 1
        assert retries[0].payload["retrying"] is True

    def test_decode_failure_twice_yields_empty_options_but_answers(self):
        session, clock, gateway, events = make_session([
            completion("not json at all"),
            completion("still not json"),
            completion("the answer anyway"),
        ])
        session.submit_prompt("q")
        drain(session, clock)
        turn = session.state.latest_turn
        assert len(turn.inline_options) == 0
        assert turn.assistant_text == "the answer anyway"
        names = [e.payload["name"] for e in events if e.kind == ev.ERROR]
        assert names == ["DecodeError", "DecodeFailed"]
        assert sum(r.purpose == "options" for r in gateway.log) == 2  # retry bound

    def test_backend_error_marks_turn_errored_and_keeps_previous_text(self):
        from prompt_controls.gateway import Fault
        session, clock, _, events = make_session([
            completion(option_doc(["A"])),
            completion("good response"),
            completion("never arrives", fault=Fault(kind="disconnect", at_chunk=1)),
        ])
        turn_id = session.submit_prompt("q")
        drain(session, clock)
        assert session.state.latest_turn.assistant_text == "good response"
        session.update_inline_option(turn_id, "A", "Second behavior for A")
        drain(session, clock)
        turn = session.state.latest_turn
        assert turn.status == TurnStatus.ERRORED
        assert turn.assistant_text == "good response"  # retained
        assert any(e.kind == ev.ERROR and e.payload["name"] == "BackendError" for e in events)

    def test_option_backend_error_still_answers(self):
        from prompt_controls.gateway import Fault
        session, clock, _, _ = make_session([
            completion("x", fault=Fault(kind="disconnect", at_chunk=1)),
            completion("answer without controls"),
        ])
        session.submit_prompt("q")
        drain(session, clock)
        turn = session.state.latest_turn
        assert turn.assistant_text == "answer without controls"
        assert len(turn.inline_options) == 0


class TestCancellation:
    def test_edit_mid_stream_cancels_and_single_final_survives(self):
        session, clock, gateway, events = make_session([
            completion(option_doc(["A"])),
            completion("stale ", "text ", "never finishes", delays=[0.0, 1.0, 1.0]),
            completion("fresh final text"),
        ])
        turn_id = session.submit_prompt("q")
        session.run_ready()  # options decoded; chat pump emits first chunk then parks
        clock.advance(0.05)
        session.run_ready()
        session.update_inline_option(turn_id, "A", "Second behavior for A")
        drain(session, clock)
        turn = session.state.latest_turn
        assert turn.assistant_text == "fresh final text"
        completes = [e for e in events if e.kind == ev.CHAT_COMPLETE]
        assert len(completes) == 1
        assert completes[0].payload["text"] == "fresh final text"

    def test_regenerate_latest_requires_turns(self):
        session, _, _, _ = make_session([])
        with pytest.raises(NoTurns):
            session.regenerate_latest()

    def test_new_prompt_cancels_pending_regen(self):
        session, clock, gateway, _ = make_session([
            completion(option_doc(["A"])),
            completion("first answer"),
            completion(option_doc(["B"])),
            completion("second answer"),
        ])
        turn_id = session.submit_prompt("one")
        drain(session, clock)
        session.update_inline_option(turn_id, "A", "Second behavior for A")
        # submit before the debounce window elapses: the regen must not fire
        session.submit_prompt("two")
        drain(session, clock)
        assert [r.purpose for r in gateway.log] == ["options", "chat", "options", "chat"]
        assert session.state.turns[0].assistant_text == "first answer"
        assert session.state.turns[1].assistant_text == "second answer"


class TestPersistence:
    def test_persist_and_load_round_trip(self, tmp_path):
        store = SessionDirectoryStore(tmp_path)
        session, clock, _, _ = make_session([
            completion(option_doc(["A"])),
            completion("resp"),
        ], store=store)
        session.submit_prompt("q")
        drain(session, clock)
        session.persist()
        loaded = Session.load("t", store, ReplayGateway(Fixture("t", [])), clock=VirtualClock())
        assert loaded.state.latest_turn.assistant_text == "resp"
        assert loaded.state.latest_turn.inline_options.labels() == ["A"]

    def test_persist_mid_generation_loads_interrupted(self, tmp_path):
        store = SessionDirectoryStore(tmp_path)
        session, clock, _, _ = make_session([
            completion(option_doc(["A"])),
            completion("never finished", delays=[99.0]),
        ], store=store)
        session.submit_prompt("q")
        session.run_ready()  # options done; chat parked
        session.persist()
        loaded = Session.load("t", store, ReplayGateway(Fixture("t", [])), clock=VirtualClock())
        turn = loaded.state.latest_turn
        assert turn.status == TurnStatus.ERRORED
        assert turn.error == "interrupted"


class TestStreamAcceptedConsistency:
    def test_completed_deltas_match_accepted_set_under_overgeneration(self):
        labels = [f"Gen {i}" for i in range(7)]
        session, clock, _, events = make_session([
            completion(option_doc(labels)),
            completion("resp"),
        ])
        session.submit_prompt("q")
        drain(session, clock)
        completed = [
            e.payload["option"]["label"]
            for e in events
            if e.kind == ev.OPTION_DELTA and e.payload.get("phase") == "completed"
        ]
        accepted = session.state.latest_turn.inline_options.labels()
        assert completed == accepted == labels[:5]
        dropped = [
            e.payload["label"]
            for e in events
            if e.kind == ev.OPTION_DELTA and e.payload.get("phase") == "dropped"
        ]
        assert dropped == labels[5:]
