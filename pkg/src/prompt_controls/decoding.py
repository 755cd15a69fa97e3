"""Incremental decoding of a streamed option document.

Turns an LLM completion stream (arbitrary chunk boundaries, bytes or str)
into progressively materialized controls: an event fires as soon as a
control's label and type are known, and each completed control arrives
fully validated. The final result is bit-for-bit the same OptionSet the
batch parser produces on the concatenated text, for every chunking.

Models sometimes wrap the array in a code fence or a line of prose even
when told not to; the decoder recovers once by scanning to the first
``[`` and ignores everything after the matching close.
"""

from __future__ import annotations

import codecs
import re
from dataclasses import dataclass
from enum import Enum

from .errors import DecoderClosed, DocumentSyntaxError, IncompleteDocument, ValidationError
from .options import Origin, OptionSet, PromptOption, normalized_label, validate_option


class DecodeEventKind(str, Enum):
    OPTION_STARTED = "option_started"
    OPTION_FIELD = "option_field"
    OPTION_COMPLETED = "option_completed"
    DOCUMENT_COMPLETED = "document_completed"
    DECODE_ERROR = "decode_error"


@dataclass(frozen=True)
class DecodeEvent:
    kind: DecodeEventKind
    index: int | None = None
    label: str | None = None
    control_type: str | None = None
    option: PromptOption | None = None
    options: OptionSet | None = None
    detail: str | None = None


_WS = " \t\n\r"
_CTRL = re.compile(r"[\x00-\x1f]")
_NUM_FULL = re.compile(r"-?(?:0|[1-9]\d*)(?:\.\d+)?(?:[eE][+-]?\d+)?")
_NUM_PARTIAL = re.compile(r"-?(?:0|[1-9]\d*)?(?:\.\d*)?(?:[eE][+-]?\d*)?")
_ESCAPES = {'"': '"', "\\": "\\", "/": "/", "b": "\b", "f": "\f", "n": "\n", "r": "\r", "t": "\t"}

# expectation states of the pushdown machine
_ELEM_OR_END = "elem_or_end"   # inside an array: value or ']'
_VALUE = "value"               # a value must start
_KEY_OR_END = "key_or_end"     # inside an object: key string or '}'
_KEY = "key"                   # key string required (after comma)
_COLON = "colon"
_AFTER = "after"               # value closed: ',' or container end


class _Frame:
    __slots__ = ("is_obj", "out", "key")

    def __init__(self, is_obj: bool):
        self.is_obj = is_obj
        self.out: dict | list = {} if is_obj else []
        self.key: str | None = None


class StreamingOptionDecoder:
    """Single-owner incremental decoder; feed chunks, collect events."""

    def __init__(self, origin: Origin = Origin.USER_JSON):
        self._origin = origin
        self._utf8 = codecs.getincrementaldecoder("utf-8")()
        self._buf = ""
        self._pos = 0
        self._offset = 0  # absolute char offset of buf[0]
        self._phase = "seek"  # seek -> doc -> done | error
        self._stack: list[_Frame] = []
        self._expect = _VALUE
        self._in_string = False
        self._str_parts: list[str] = []
        self._str_is_key = False
        self._validated: list[PromptOption] = []
        self._seen_labels: set[str] = set()
        self._elem_index = -1       # index of the element currently open
        self._elem_open = False
        self._elem_label: str | None = None
        self._elem_type: str | None = None
        self._field_emitted = False
        self._events: list[DecodeEvent] = []
        self._result: OptionSet | None = None
        self._error: Exception | None = None

    # -- public surface -------------------------------------------------

    @property
    def terminal(self) -> bool:
        """True once a decode error has been emitted; feeds are rejected."""
        return self._phase == "error"

    @property
    def document_completed(self) -> bool:
        return self._phase == "done"

    @property
    def completed_count(self) -> int:
        return len(self._validated)

    def feed(self, chunk: bytes | str) -> list[DecodeEvent]:
        if self._phase == "error":
            raise DecoderClosed()
        if isinstance(chunk, bytes):
            try:
                text = self._utf8.decode(chunk)
            except UnicodeDecodeError as exc:
                self._fail(f"malformed UTF-8: {exc.reason}")
                return self._take_events()
        else:
            text = chunk
        if self._phase == "done":
            return []  # trailing bytes after the document are ignored
        self._buf += text
        self._run()
        return self._take_events()

    def finalize(self) -> OptionSet:
        """The decoded OptionSet, or IncompleteDocument naming what is open."""
        if self._phase == "done":
            assert self._result is not None
            return self._result
        if self._phase == "error":
            assert self._error is not None
            raise self._error
        if self._phase == "seek":
            raise IncompleteDocument("no option array start seen")
        raise IncompleteDocument(self._open_construct())

    # -- machinery ------------------------------------------------------

    def _take_events(self) -> list[DecodeEvent]:
        events, self._events = self._events, []
        return events

    def _fail(self, detail: str) -> None:
        offset = self._offset + self._pos
        self._error = DocumentSyntaxError(detail, offset)
        self._phase = "error"
        index = self._elem_index if self._elem_index >= 0 else None
        self._events.append(DecodeEvent(DecodeEventKind.DECODE_ERROR, index=index, detail=str(self._error)))

    def _open_construct(self) -> str:
        path = "$"
        for i, frame in enumerate(self._stack):
            if i == 0:
                path += f"[{self._elem_index if self._elem_index >= 0 else 0}]"
            elif frame.is_obj:
                path += f".{frame.key}" if frame.key is not None else ".{...}"
            else:
                path += f"[{len(frame.out)}]"
        if self._in_string:
            path += " (unterminated string)"
        return path

    def _compact(self) -> None:
        if self._pos:
            self._offset += self._pos
            self._buf = self._buf[self._pos:]
            self._pos = 0

    def _run(self) -> None:
        while True:
            if self._phase == "seek":
                start = self._buf.find("[", self._pos)
                if start < 0:
                    self._pos = len(self._buf)  # prose before the array: skip
                    break
                self._pos = start   # re-dispatched below as the root array
                self._phase = "doc"
                self._stack.append(_Frame(is_obj=False))
                self._expect = _ELEM_OR_END
                self._pos += 1
                continue
            if self._phase != "doc":
                self._buf = ""
                self._pos = 0
                break
            if self._in_string:
                if not self._string_step():
                    break
                continue
            if not self._dispatch():
                break
        self._compact()

    def _dispatch(self) -> bool:
        """Consume one token if possible; False when more input is needed."""
        buf = self._buf
        pos = self._pos
        while pos < len(buf) and buf[pos] in _WS:
            pos += 1
        self._pos = pos
        if pos >= len(buf):
            return False
        c = buf[pos]
        expect = self._expect

        if expect == _COLON:
            if c != ":":
                self._fail(f"expected ':' after object key, got {c!r}")
                return False
            self._pos += 1
            self._expect = _VALUE
            return True

        if expect == _AFTER:
            frame = self._stack[-1]
            if c == ",":
                self._pos += 1
                self._expect = _KEY if frame.is_obj else _VALUE
                return True
            if c == "}" and frame.is_obj:
                self._pos += 1
                self._close_container()
                return True
            if c == "]" and not frame.is_obj:
                self._pos += 1
                self._close_container()
                return True
            self._fail(f"expected ',' or container end, got {c!r}")
            return False

        if expect in (_KEY_OR_END, _KEY):
            if c == "}" and expect == _KEY_OR_END:
                self._pos += 1
                self._close_container()
                return True
            if c == '"':
                self._pos += 1
                self._begin_string(is_key=True)
                return True
            self._fail(f"expected object key, got {c!r}")
            return False

        # _VALUE or _ELEM_OR_END
        if c == "]" and expect == _ELEM_OR_END:
            self._pos += 1
            self._close_container()
            return True
        return self._begin_value(c)

    def _begin_value(self, c: str) -> bool:
        if c not in '{["-0123456789tfn':
            self._fail(f"expected a value, got {c!r}")
            return False
        if len(self._stack) == 1 and not self._elem_open:
            # a token may span chunks; mark the element open exactly once
            self._elem_open = True
            self._elem_index += 1
            self._elem_label = None
            self._elem_type = None
            self._field_emitted = False
            self._events.append(DecodeEvent(DecodeEventKind.OPTION_STARTED, index=self._elem_index))
        if c == "{":
            self._pos += 1
            self._stack.append(_Frame(is_obj=True))
            self._expect = _KEY_OR_END
            return True
        if c == "[":
            self._pos += 1
            self._stack.append(_Frame(is_obj=False))
            self._expect = _ELEM_OR_END
            return True
        if c == '"':
            self._pos += 1
            self._begin_string(is_key=False)
            return True
        if c in "-0123456789":
            return self._scan_number()
        return self._scan_keyword()

    def _scan_number(self) -> bool:
        buf, pos = self._buf, self._pos
        partial = _NUM_PARTIAL.match(buf, pos)
        assert partial is not None
        if partial.end() == len(buf):
            return False  # the rest of the buffer may still extend this number
        full = _NUM_FULL.match(buf, pos)
        if full is None or full.end() == pos or partial.end() > full.end():
            self._fail("invalid number")
            return False
        text = full.group()
        self._pos = full.end()
        value = int(text) if re.fullmatch(r"-?\d+", text) else float(text)
        self._complete_value(value)
        return True

    def _scan_keyword(self) -> bool:
        buf, pos = self._buf, self._pos
        for word, value in (("true", True), ("false", False), ("null", None)):
            if buf.startswith(word, pos):
                self._pos = pos + len(word)
                self._complete_value(value)
                return True
            rest = buf[pos:]
            if word.startswith(rest):
                return False  # keyword split across chunks
        self._fail(f"invalid token starting with {buf[pos]!r}")
        return False

    # -- strings ----------------------------------------------------------

    def _begin_string(self, is_key: bool) -> None:
        self._in_string = True
        self._str_parts = []
        self._str_is_key = is_key

    def _string_step(self) -> bool:
        """Consume string content up to the next escape/close; False = need input."""
        buf, pos = self._buf, self._pos
        quote = buf.find('"', pos)
        backslash = buf.find("\\", pos)
        if quote < 0 and backslash < 0:
            seg = buf[pos:]
            if _CTRL.search(seg):
                self._fail("control character inside string")
                return False
            self._str_parts.append(seg)
            self._pos = len(buf)
            self._compact()
            return False
        if backslash < 0 or (0 <= quote < backslash):
            seg = buf[pos:quote]
            if _CTRL.search(seg):
                self._fail("control character inside string")
                return False
            self._str_parts.append(seg)
            self._pos = quote + 1
            self._end_string()
            return True
        # escape comes first
        seg = buf[pos:backslash]
        if _CTRL.search(seg):
            self._fail("control character inside string")
            return False
        if backslash + 1 >= len(buf):
            self._str_parts.append(seg)
            self._pos = backslash
            self._compact()
            return False
        code = buf[backslash + 1]
        if code in _ESCAPES:
            self._str_parts.append(seg + _ESCAPES[code])
            self._pos = backslash + 2
            return True
        if code != "u":
            self._str_parts.append(seg)
            self._pos = backslash
            self._fail(f"invalid escape '\\{code}'")
            return False
        if len(buf) - backslash < 6:
            self._str_parts.append(seg)
            self._pos = backslash
            self._compact()
            return False
        hex4 = buf[backslash + 2: backslash + 6]
        try:
            cp = int(hex4, 16)
        except ValueError:
            self._str_parts.append(seg)
            self._pos = backslash
            self._fail(f"invalid \\u escape '\\u{hex4}'")
            return False
        if 0xD800 <= cp <= 0xDBFF:
            # may need a trailing low surrogate to combine, like the stdlib parser
            after = backslash + 6
            if len(buf) - after < 2:
                self._str_parts.append(seg)
                self._pos = backslash
                self._compact()
                return False
            if buf.startswith("\\u", after):
                if len(buf) - after < 6:
                    self._str_parts.append(seg)
                    self._pos = backslash
                    self._compact()
                    return False
                try:
                    low = int(buf[after + 2: after + 6], 16)
                except ValueError:
                    low = -1
                if 0xDC00 <= low <= 0xDFFF:
                    combined = 0x10000 + ((cp - 0xD800) << 10) + (low - 0xDC00)
                    self._str_parts.append(seg + chr(combined))
                    self._pos = after + 6
                    return True
        self._str_parts.append(seg + chr(cp))
        self._pos = backslash + 6
        return True

    def _end_string(self) -> None:
        value = "".join(self._str_parts)
        self._in_string = False
        self._str_parts = []
        if self._str_is_key:
            frame = self._stack[-1]
            assert frame.is_obj and isinstance(frame.out, dict)
            if value in frame.out:
                self._fail(f"duplicate object key {value!r}")
                return
            frame.key = value
            self._expect = _COLON
        else:
            self._complete_value(value)

    # -- value plumbing -----------------------------------------------------

    def _complete_value(self, value: object) -> None:
        frame = self._stack[-1]
        if frame.is_obj:
            assert isinstance(frame.out, dict) and frame.key is not None
            frame.out[frame.key] = value
            if len(self._stack) == 2 and frame.key in ("label", "type") and isinstance(value, str):
                if frame.key == "label":
                    self._elem_label = value
                else:
                    self._elem_type = value
                self._maybe_emit_field()
            frame.key = None
            self._expect = _AFTER
        else:
            assert isinstance(frame.out, list)
            if len(self._stack) == 1:
                self._complete_element(value)
            else:
                frame.out.append(value)
            self._expect = _AFTER

    def _maybe_emit_field(self) -> None:
        if self._field_emitted or self._elem_label is None or self._elem_type is None:
            return
        self._field_emitted = True
        self._events.append(
            DecodeEvent(
                DecodeEventKind.OPTION_FIELD,
                index=self._elem_index,
                label=self._elem_label,
                control_type=self._elem_type,
            )
        )

    def _complete_element(self, record: object) -> None:
        self._elem_open = False
        try:
            option = validate_option(record, origin=self._origin)
        except ValidationError as exc:
            self._fail(f"option {self._elem_index} invalid: {exc}")
            return
        key = normalized_label(option.label)
        if key in self._seen_labels:
            self._fail(f"duplicate option label {option.label!r}")
            return
        self._seen_labels.add(key)
        self._validated.append(option)
        self._events.append(
            DecodeEvent(DecodeEventKind.OPTION_COMPLETED, index=self._elem_index, option=option)
        )

    def _close_container(self) -> None:
        frame = self._stack.pop()
        if not self._stack:
            # the document array itself closed
            self._result = OptionSet(self._validated)
            self._phase = "done"
            self._events.append(
                DecodeEvent(DecodeEventKind.DOCUMENT_COMPLETED, options=self._result)
            )
            self._buf = ""
            self._pos = 0
            return
        self._complete_value(frame.out)
