"""Summary lifecycle: auto triggers, placeholders, re-summarization, freezing.

One instance per session, always mutated under the session's writer lock.
Summary points go ``pending -> generated`` and may absorb into ``frozen`` the
moment a user edits their pad line; frozen points are never system-modified
again. Transcript edits are debounced, then every non-frozen point whose
extraction drifted from its snapshot is re-summarized; responses carry a
request sequence so stale ones are discarded.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .doc import SYSTEM_AUTHOR, LineDoc, SegmentRange, make_attrs, word_count
from .summarizer import collapse_to_line

PLACEHOLDER = "[summarizing…]"
UPDATING_SUFFIX = " [updating…]"
NO_MATCHING_LINES = "[no matching transcript lines]"

DEFAULT_DEBOUNCE_S = 2.0


@dataclass
class SummaryPoint:
    summary_id: int
    kind: str  # "auto" | "on-demand"
    range: SegmentRange
    state: str  # "pending" | "generated" | "frozen"
    text: str
    source_snapshot: str
    request_seq: int = 0
    applied_request_seq: int = 0

    def view(self) -> dict:
        return {
            "summary_id": self.summary_id,
            "kind": self.kind,
            "state": self.state,
            "start_seq": self.range.start_seq,
            "end_seq": self.range.end_seq,
            "request_seq": self.request_seq,
            "text": self.text,
        }


class Orchestrator:
    def __init__(
        self,
        session_id: str,
        transcript: LineDoc,
        summary: LineDoc,
        publish_request: Callable[[int, int, str], None],
        clock: Callable[[], float],
        chunk_length_words: Callable[[], int],
        emit: Callable[..., None],
        notify_points: Callable[[], None] = lambda: None,
        debounce_s: float = DEFAULT_DEBOUNCE_S,
    ):
        self.session_id = session_id
        self.transcript = transcript
        self.summary = summary
        self.points: dict[int, SummaryPoint] = {}
        self.last_summarized_seq = 0
        self.debounce_s = debounce_s
        self.debounce_deadline: float | None = None
        self.outstanding: set[tuple[int, int]] = set()
        self._publish_request = publish_request
        self._clock = clock
        self._chunk_length_words = chunk_length_words
        self._emit = emit
        self._notify_points = notify_points
        self._next_summary_id = 1
        self._next_request_seq = 1

    def points_view(self) -> list[dict]:
        return [self.points[sid].view() for sid in sorted(self.points)]

    # -- triggers ------------------------------------------------------------

    def on_utterance_appended(self, new_utt_seq: int) -> None:
        """Evaluate the unsummarized-word threshold after a transcript append."""
        rng = SegmentRange(self.last_summarized_seq + 1, new_utt_seq)
        segment = self.transcript.extract_segment(rng)
        words = word_count(segment.text)
        threshold = self._chunk_length_words()
        if words < threshold:
            return
        point = self._create_point("auto", rng, segment.text)
        self._emit("auto-trigger", summary_id=point.summary_id,
                   start_seq=rng.start_seq, end_seq=rng.end_seq,
                   words=words, threshold=threshold)
        self._place_placeholder(point, PLACEHOLDER)
        self._issue_request(point, segment.text)
        self.last_summarized_seq = new_utt_seq
        self._notify_points()

    def request_on_demand(self, rng: SegmentRange) -> SummaryPoint:
        """Additional summary of a user-selected range; never moves the cursor."""
        segment = self.transcript.extract_segment(rng)
        point = self._create_point("on-demand", rng, segment.text)
        self._emit("on-demand", summary_id=point.summary_id,
                   start_seq=rng.start_seq, end_seq=rng.end_seq)
        if not segment.text:
            point.state = "generated"
            point.text = NO_MATCHING_LINES
            self._place_placeholder(point, NO_MATCHING_LINES)
        else:
            self._place_placeholder(point, PLACEHOLDER)
            self._issue_request(point, segment.text)
        self._notify_points()
        return point

    # -- responses -----------------------------------------------------------

    def on_summary_response(self, summary_id: int, request_seq: int,
                            summary_text: str) -> None:
        point = self.points.get(summary_id)
        self.outstanding.discard((summary_id, request_seq))
        if point is None:
            self._emit("response-discarded", summary_id=summary_id,
                       request_seq=request_seq, reason="unknown")
            return
        if point.state == "frozen":
            self._emit("response-discarded", summary_id=summary_id,
                       request_seq=request_seq, reason="frozen")
            return
        if request_seq != point.request_seq:
            self._emit("response-discarded", summary_id=summary_id,
                       request_seq=request_seq, reason="stale")
            return
        if point.applied_request_seq == request_seq:
            self._emit("response-discarded", summary_id=summary_id,
                       request_seq=request_seq, reason="duplicate")
            return
        text = collapse_to_line(summary_text) or NO_MATCHING_LINES
        index = self.summary.find_line(summary_id=summary_id)
        if index is None:
            # The pad line vanishing implies a user deletion, which froze the
            # point; guard anyway for redeliveries racing the freeze.
            self._emit("response-discarded", summary_id=summary_id,
                       request_seq=request_seq, reason="line-missing")
            return
        self.summary.replace_line_text(index, text, SYSTEM_AUTHOR)
        point.state = "generated"
        point.text = text
        point.applied_request_seq = request_seq
        self._emit("summary-applied", summary_id=summary_id, request_seq=request_seq)
        self._notify_points()

    # -- edits ---------------------------------------------------------------

    def note_transcript_edit(self) -> None:
        """A user edited the transcript: (re)arm the debounce window."""
        self.debounce_deadline = self._clock() + self.debounce_s

    def poll(self, now: float | None = None) -> None:
        if self.debounce_deadline is None:
            return
        if (self._clock() if now is None else now) < self.debounce_deadline:
            return
        self.debounce_deadline = None
        self._emit("debounce-fired")
        self._resummarize_changed()

    def freeze_scan(self, pre_texts: dict[int, str]) -> None:
        """Freeze every point whose pad line a user edit just changed or removed."""
        post = self._summary_texts()
        changed = False
        for summary_id, old_text in pre_texts.items():
            point = self.points.get(summary_id)
            if point is None:
                continue
            new_text = post.get(summary_id)
            if new_text == old_text:
                continue
            if point.state != "frozen":
                point.state = "frozen"
                self._emit("point-frozen", summary_id=summary_id)
                changed = True
            if new_text is not None:
                point.text = new_text
        if changed:
            self._notify_points()

    def summary_texts(self) -> dict[int, str]:
        return self._summary_texts()

    # -- internals -----------------------------------------------------------

    def _resummarize_changed(self) -> None:
        notified = False
        for summary_id in sorted(self.points):
            point = self.points[summary_id]
            if point.state == "frozen":
                continue
            segment = self.transcript.extract_segment(point.range)
            if segment.text == point.source_snapshot:
                continue
            point.source_snapshot = segment.text
            index = self.summary.find_line(summary_id=summary_id)
            if index is not None:
                current = self.summary.lines()[index].text
                if not current.endswith(UPDATING_SUFFIX):
                    self.summary.replace_line_text(index, current + UPDATING_SUFFIX,
                                                   SYSTEM_AUTHOR)
            point.state = "pending"
            self._emit("resummarize", summary_id=summary_id)
            self._issue_request(point, segment.text)
            notified = True
        if notified:
            self._notify_points()

    def _summary_texts(self) -> dict[int, str]:
        out: dict[int, str] = {}
        for line in self.summary.lines():
            if line.attrs and "summary_id" in line.attrs:
                out[line.attrs["summary_id"]] = line.text
        return out

    def _create_point(self, kind: str, rng: SegmentRange, snapshot: str) -> SummaryPoint:
        summary_id = self._next_summary_id
        self._next_summary_id += 1
        point = SummaryPoint(summary_id=summary_id, kind=kind, range=rng,
                             state="pending", text="", source_snapshot=snapshot)
        self.points[summary_id] = point
        return point

    def _place_placeholder(self, point: SummaryPoint, text: str) -> None:
        self.summary.append_line(text, make_attrs(summary_id=point.summary_id),
                                 SYSTEM_AUTHOR)

    def _issue_request(self, point: SummaryPoint, segment_text: str) -> None:
        request_seq = self._next_request_seq
        self._next_request_seq += 1
        point.request_seq = request_seq
        self.outstanding.add((point.summary_id, request_seq))
        self._emit("summarize-request", summary_id=point.summary_id,
                   request_seq=request_seq)
        self._publish_request(point.summary_id, request_seq, segment_text)
