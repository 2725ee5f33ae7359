"""Revisioned, line-attributed collaborative documents.

Each session owns two of these: the transcript pad and the summary pad.
The document is a flat character string (lines separated by ``"\\n"``) edited
through retain/insert/delete operations; every character carries an optional
attribute reference. Line attributes (utterance sequence number on the
transcript pad, summary-point id on the summary pad) are derived from the
characters, so they survive partial edits of a line and disappear when the
whole line is deleted.

Concurrent edits are reconciled server-side: an incoming operation based on
an older revision is transformed against everything applied since, then
appended to the revision log and broadcast. Insert-position ties are broken
by author ordering, so two concurrent operations from *distinct* authors
converge regardless of arrival order. Each author must serialize its own
operations (a client sends the next op only after the previous one is
acknowledged), which is what the sync protocol enforces.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

from .asr import Utterance
from .errors import DocOrderError, EditRejected, ValidationError

SYSTEM_AUTHOR = "system"

_ATTR_KEYS = {"utt_seq", "summary_id"}


@dataclass(frozen=True)
class Retain:
    n: int


@dataclass(frozen=True)
class Insert:
    text: str
    attrs: tuple[tuple[str, int], ...] | None = None


@dataclass(frozen=True)
class Delete:
    n: int


Component = Retain | Insert | Delete


def make_attrs(**kwargs: int) -> tuple[tuple[str, int], ...]:
    bad = set(kwargs) - _ATTR_KEYS
    if bad:
        raise ValidationError(f"unknown attribute keys: {sorted(bad)}")
    return tuple(sorted(kwargs.items()))


def attrs_dict(attrs: tuple[tuple[str, int], ...] | None) -> dict[str, int] | None:
    return dict(attrs) if attrs else None


@dataclass(frozen=True)
class EditOp:
    doc_id: str
    base_revision: int
    author: str
    components: tuple[Component, ...]


@dataclass(frozen=True)
class Line:
    text: str
    attrs: dict[str, int] | None
    author: str


@dataclass(frozen=True)
class SegmentRange:
    start_seq: int
    end_seq: int

    def __post_init__(self) -> None:
        if self.start_seq < 1 or self.end_seq < 1:
            raise ValidationError("sequence numbers must be positive")
        if self.start_seq > self.end_seq:
            raise ValidationError(
                f"inverted range ({self.start_seq}, {self.end_seq})")


@dataclass(frozen=True)
class AppliedEdit:
    doc_id: str
    revision: int
    author: str
    components: tuple[Component, ...]


@dataclass(frozen=True)
class Segment:
    text: str
    line_indices: tuple[int, ...]


def word_count(text: str) -> int:
    """Count maximal non-whitespace runs; speaker prefixes count as words."""
    return len(text.split())


# -- component plumbing ------------------------------------------------------


def component_to_json(c: Component) -> dict:
    if isinstance(c, Retain):
        return {"retain": c.n}
    if isinstance(c, Delete):
        return {"delete": c.n}
    out: dict = {"insert": c.text}
    if c.attrs:
        out["attrs"] = dict(c.attrs)
    return out


def component_from_json(obj: dict) -> Component:
    if not isinstance(obj, dict) or len(set(obj) & {"retain", "insert", "delete"}) != 1:
        raise EditRejected(f"malformed component: {obj!r}")
    if "retain" in obj:
        return Retain(int(obj["retain"]))
    if "delete" in obj:
        return Delete(int(obj["delete"]))
    attrs = obj.get("attrs")
    if attrs is not None:
        attrs = make_attrs(**{k: int(v) for k, v in attrs.items()})
    return Insert(str(obj["insert"]), attrs)


def _validate_components(comps: tuple[Component, ...], base_len: int) -> None:
    span = 0
    for c in comps:
        if isinstance(c, (Retain, Delete)):
            if c.n < 1:
                raise EditRejected(f"non-positive span in {c!r}")
            span += c.n
        elif isinstance(c, Insert):
            if not c.text:
                raise EditRejected("empty insert")
        else:
            raise EditRejected(f"unknown component {c!r}")
    if span != base_len:
        raise EditRejected(
            f"retain+delete spans cover {span} chars, document has {base_len}")


def _compact(comps: list[Component]) -> tuple[Component, ...]:
    out: list[Component] = []
    for c in comps:
        if isinstance(c, (Retain, Delete)) and c.n == 0:
            continue
        if isinstance(c, Insert) and not c.text:
            continue
        if out:
            last = out[-1]
            if isinstance(c, Retain) and isinstance(last, Retain):
                out[-1] = Retain(last.n + c.n)
                continue
            if isinstance(c, Delete) and isinstance(last, Delete):
                out[-1] = Delete(last.n + c.n)
                continue
            if (isinstance(c, Insert) and isinstance(last, Insert)
                    and c.attrs == last.attrs):
                out[-1] = Insert(last.text + c.text, last.attrs)
                continue
        out.append(c)
    return tuple(out)


def transform(moving: tuple[Component, ...], fixed: tuple[Component, ...],
              moving_first: bool) -> tuple[Component, ...]:
    """Rebase ``moving`` to apply after ``fixed`` (both based on the same text).

    ``moving_first`` resolves insert-position ties: when both operations
    insert at the same spot, the op whose flag says "first" keeps its place
    and the other is shifted behind it.
    """
    sm = list(reversed(moving))
    sf = list(reversed(fixed))
    out: list[Component] = []
    while sm or sf:
        cm = sm[-1] if sm else None
        cf = sf[-1] if sf else None
        if isinstance(cm, Insert) and (cf is None or not isinstance(cf, Insert)
                                       or moving_first):
            out.append(cm)
            sm.pop()
            continue
        if isinstance(cf, Insert):
            out.append(Retain(len(cf.text)))
            sf.pop()
            continue
        if cm is None or cf is None:
            raise EditRejected("operations span different base lengths")
        n = min(cm.n, cf.n)
        if isinstance(cm, Retain) and isinstance(cf, Retain):
            out.append(Retain(n))
        elif isinstance(cm, Delete) and isinstance(cf, Retain):
            out.append(Delete(n))
        # chars deleted by ``fixed`` need no component from ``moving``
        sm.pop()
        if cm.n > n:
            sm.append(Retain(cm.n - n) if isinstance(cm, Retain) else Delete(cm.n - n))
        sf.pop()
        if cf.n > n:
            sf.append(Retain(cf.n - n) if isinstance(cf, Retain) else Delete(cf.n - n))
    return _compact(out)


# -- the document ------------------------------------------------------------


@dataclass
class _ApplyScan:
    text: str
    attrs: list[tuple[tuple[str, int], ...] | None]
    retained: list[tuple[int, int, int]]  # (old_start, new_start, length)
    insert_spans: list[tuple[int, int]]   # (new_start, length)
    delete_points: list[int]              # new positions


def _apply_components(text: str, attrs: list, comps: tuple[Component, ...]) -> _ApplyScan:
    parts: list[str] = []
    new_attrs: list = []
    retained: list[tuple[int, int, int]] = []
    insert_spans: list[tuple[int, int]] = []
    delete_points: list[int] = []
    old_pos = new_pos = 0
    for c in comps:
        if isinstance(c, Retain):
            parts.append(text[old_pos:old_pos + c.n])
            new_attrs.extend(attrs[old_pos:old_pos + c.n])
            retained.append((old_pos, new_pos, c.n))
            old_pos += c.n
            new_pos += c.n
        elif isinstance(c, Insert):
            parts.append(c.text)
            new_attrs.extend([c.attrs] * len(c.text))
            insert_spans.append((new_pos, len(c.text)))
            new_pos += len(c.text)
        else:
            delete_points.append(new_pos)
            old_pos += c.n
    return _ApplyScan("".join(parts), new_attrs, retained, insert_spans, delete_points)


def _line_spans(text: str) -> list[tuple[int, int]]:
    if not text:
        return []
    spans = []
    start = 0
    while True:
        idx = text.find("\n", start)
        if idx < 0:
            spans.append((start, len(text)))
            return spans
        spans.append((start, idx))
        start = idx + 1


class LineDoc:
    """Server-authoritative document with a linear revision log."""

    def __init__(self, doc_id: str):
        self.doc_id = doc_id
        self.revision = 0
        # Fired after every applied edit, under the owning session's lock.
        self.listeners: list = []
        self._text = ""
        self._attrs: list[tuple[tuple[str, int], ...] | None] = []
        self._history: list[AppliedEdit] = []
        self._lines: list[Line] = []
        self._appended_utt_seqs: set[int] = set()
        self._max_utt_seq = 0

    @property
    def text(self) -> str:
        return self._text

    def lines(self) -> list[Line]:
        return list(self._lines)

    def history_since(self, revision: int) -> list[AppliedEdit]:
        return self._history[revision:]

    def snapshot(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "revision": self.revision,
            "lines": [
                {"text": ln.text, "attrs": ln.attrs, "author": ln.author}
                for ln in self._lines
            ],
        }

    # -- editing -------------------------------------------------------------

    def apply_edit(self, op: EditOp) -> AppliedEdit:
        if op.doc_id != self.doc_id:
            raise EditRejected(f"op addressed to {op.doc_id!r}, this is {self.doc_id!r}")
        if not 0 <= op.base_revision <= self.revision:
            raise EditRejected(
                f"base revision {op.base_revision} out of range 0..{self.revision}")
        if op.author == "":
            raise EditRejected("missing author")
        comps = _compact(op.components)
        base_len = self._length_at(op.base_revision)
        _validate_components(comps, base_len)
        for past in self._history[op.base_revision:]:
            comps = transform(comps, past.components, op.author < past.author)
        _validate_components(comps, len(self._text))
        scan = _apply_components(self._text, self._attrs, comps)
        self._install(scan, op.author)
        applied = AppliedEdit(self.doc_id, self.revision + 1, op.author, comps)
        self._history.append(applied)
        self.revision += 1
        for listener in list(self.listeners):
            listener(applied)
        return applied

    def _length_at(self, revision: int) -> int:
        length = len(self._text)
        for applied in reversed(self._history[revision:]):
            for c in applied.components:
                if isinstance(c, Insert):
                    length -= len(c.text)
                elif isinstance(c, Delete):
                    length += c.n
        return length

    def _install(self, scan: _ApplyScan, author: str) -> None:
        old_line_starts = [s for s, _ in _line_spans(self._text)]
        old_authors = [ln.author for ln in self._lines]
        spans = _line_spans(scan.text)
        authors: list[str] = []
        for start, end in spans:
            dirty = any(s < end and s + length > start
                        for s, length in scan.insert_spans if length)
            dirty = dirty or any(start <= p <= end for p in scan.delete_points)
            if dirty:
                authors.append(author)
                continue
            old_pos = None
            for old_start, new_start, length in scan.retained:
                if new_start <= start < new_start + length:
                    old_pos = old_start + (start - new_start)
                    break
            if old_pos is None:
                authors.append(author)
                continue
            idx = bisect.bisect_right(old_line_starts, old_pos) - 1
            authors.append(old_authors[idx] if 0 <= idx < len(old_authors) else author)
        self._text = scan.text
        self._attrs = scan.attrs
        self._lines = self._derive_lines(spans, authors)

    def _derive_lines(self, spans: list[tuple[int, int]], authors: list[str]) -> list[Line]:
        lines: list[Line] = []
        claimed: set[tuple[str, int]] = set()
        for (start, end), author in zip(spans, authors):
            attrs = None
            for a in self._attrs[start:end]:
                if a is None:
                    continue
                if any((k, v) in claimed for k, v in a):
                    continue
                claimed.update(a)
                attrs = dict(a)
                break
            lines.append(Line(self._text[start:end], attrs, author))
        return lines

    # -- system-side conveniences ---------------------------------------------

    def append_line(self, text: str, attrs: tuple[tuple[str, int], ...] | None,
                    author: str) -> AppliedEdit:
        if "\n" in text or not text:
            raise ValidationError("line text must be non-empty and newline-free")
        comps: list[Component] = []
        if self._text:
            comps.append(Retain(len(self._text)))
            comps.append(Insert("\n"))
        comps.append(Insert(text, attrs))
        return self.apply_edit(EditOp(self.doc_id, self.revision, author, tuple(comps)))

    def append_utterance(self, u: Utterance) -> AppliedEdit | None:
        """Append a transcript line for ``u``; None if this seq was already appended."""
        if u.utt_seq in self._appended_utt_seqs:
            return None
        if u.utt_seq <= self._max_utt_seq:
            raise DocOrderError(
                f"utterance seq {u.utt_seq} arrived after seq {self._max_utt_seq}")
        applied = self.append_line(f"{u.speaker_label}:  {u.text}",
                                   make_attrs(utt_seq=u.utt_seq), SYSTEM_AUTHOR)
        self._appended_utt_seqs.add(u.utt_seq)
        self._max_utt_seq = u.utt_seq
        return applied

    def find_line(self, **attr: int) -> int | None:
        """Index of the line carrying the given attribute value, or None."""
        ((key, value),) = attr.items()
        for i, ln in enumerate(self._lines):
            if ln.attrs and ln.attrs.get(key) == value:
                return i
        return None

    def replace_line_text(self, index: int, new_text: str, author: str) -> AppliedEdit:
        """Replace one line's text in place, re-stamping its attributes."""
        if "\n" in new_text or not new_text:
            raise ValidationError("line text must be non-empty and newline-free")
        spans = _line_spans(self._text)
        start, end = spans[index]
        line = self._lines[index]
        attrs = make_attrs(**line.attrs) if line.attrs else None
        comps: list[Component] = []
        if start:
            comps.append(Retain(start))
        if end > start:
            comps.append(Delete(end - start))
        comps.append(Insert(new_text, attrs))
        if end < len(self._text):
            comps.append(Retain(len(self._text) - end))
        return self.apply_edit(EditOp(self.doc_id, self.revision, author, tuple(comps)))

    # -- segment extraction ----------------------------------------------------

    def extract_segment(self, rng: SegmentRange) -> Segment:
        """Forward scan recovering the current text between two utterance seqs.

        Recording starts at the first line whose seq reaches the range start,
        includes every line (attributed or not) while active, and stops at the
        range end (inclusive) or at any higher seq (exclusive).
        """
        texts: list[str] = []
        indices: list[int] = []
        recording = False
        for i, line in enumerate(self._lines):
            seq = line.attrs.get("utt_seq") if line.attrs else None
            if not recording:
                if seq is None or seq < rng.start_seq:
                    continue
                if seq > rng.end_seq:
                    break
                recording = True
            elif seq is not None and seq > rng.end_seq:
                break
            texts.append(line.text)
            indices.append(i)
            if seq is not None and seq == rng.end_seq:
                break
        return Segment("\n".join(texts), tuple(indices))
