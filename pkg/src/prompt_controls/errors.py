"""Exception hierarchy shared by the engine and the HTTP layer.

Every engine error carries a stable ``name`` (the class name) so the HTTP
layer can surface it in error bodies without string matching.
"""


class EngineError(Exception):
    """Base class for all errors raised by this package."""

    @property
    def name(self) -> str:
        return type(self).__name__


# --- option validation (raw record -> PromptOption) ---

class ValidationError(EngineError):
    """A decoded option record violates the control schema."""

    def __init__(self, detail: str, field: str | None = None):
        super().__init__(detail)
        self.detail = detail
        self.field = field


class MissingField(ValidationError):
    def __init__(self, field: str):
        super().__init__(f"missing required field {field!r}", field)


class WrongShape(ValidationError):
    def __init__(self, field: str, detail: str | None = None):
        super().__init__(detail or f"field {field!r} has the wrong shape", field)


class EmptyChoices(ValidationError):
    def __init__(self):
        super().__init__("choice control has no choices", "options")


class EmptyValue(ValidationError):
    def __init__(self):
        super().__init__("choice control has no selected value", "value")


class DuplicateLabel(ValidationError):
    def __init__(self, label: str):
        super().__init__(f"duplicate option label {label!r}", "label")
        self.label = label


# --- value mutation (strict, UI-driven) ---

class NotACanonicalChoice(EngineError):
    def __init__(self, value: str):
        super().__init__(f"{value!r} is not one of this control's choice descriptions")
        self.value = value


class ShapeMismatch(EngineError):
    def __init__(self, detail: str):
        super().__init__(detail)


# --- document parsing / incremental decoding ---

class DocumentSyntaxError(EngineError):
    """Malformed JSON in an option document; offset is in characters."""

    def __init__(self, detail: str, offset: int):
        super().__init__(f"{detail} (at offset {offset})")
        self.detail = detail
        self.offset = offset


class IncompleteDocument(EngineError):
    def __init__(self, open_construct: str):
        super().__init__(f"option document incomplete: {open_construct}")
        self.open_construct = open_construct


class DecoderClosed(EngineError):
    def __init__(self):
        super().__init__("decoder already hit a decode error; feed rejected")


# --- session state machine ---

class EmptyPrompt(EngineError):
    pass


class EmptyUserMessage(EngineError):
    pass


class Busy(EngineError):
    pass


class NotLatestTurn(EngineError):
    pass


class UnknownLabel(EngineError):
    def __init__(self, label: str):
        super().__init__(f"no option labelled {label!r}")
        self.label = label


class UnknownTurn(EngineError):
    def __init__(self, turn_id: int):
        super().__init__(f"no turn {turn_id}")
        self.turn_id = turn_id


class DuplicateSessionLabel(EngineError):
    def __init__(self, label: str):
        super().__init__(f"session options already contain {label!r}")
        self.label = label


class NoTurns(EngineError):
    pass


class StaticModeViolation(EngineError):
    """Operation not available in static mode (fixed preset controls)."""


class NotFound(EngineError):
    def __init__(self, session_id: str):
        super().__init__(f"no persisted session {session_id!r}")
        self.session_id = session_id


class CorruptRecord(EngineError):
    def __init__(self, detail: str):
        super().__init__(detail)


# --- backend gateway ---

class TransportError(EngineError):
    def __init__(self, status: int | None, detail: str):
        super().__init__(f"transport failure ({status}): {detail}")
        self.status = status
        self.detail = detail


class FixtureExhausted(EngineError):
    def __init__(self, scenario: str, requested: int):
        super().__init__(
            f"fixture {scenario!r} has no completion for request #{requested}"
        )


class BackendError(EngineError):
    pass


# --- replay harness ---

class LeftoverFixtures(EngineError):
    def __init__(self, scenario: str, remaining: int):
        super().__init__(f"{remaining} unconsumed completions left in fixture {scenario!r}")
        self.remaining = remaining


class ActionRejected(EngineError):
    def __init__(self, step: int, error: EngineError):
        super().__init__(f"scenario action #{step} rejected: {error}")
        self.step = step
        self.error = error
