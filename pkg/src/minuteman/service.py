"""Session management and pipeline wiring.

Owns the bus, the per-session state (tracks, pads, orchestrator, event log)
and the five pipeline stages:

    audio -> segmentation -> transcription -> document/orchestrator
                                summarize-request -> summarizer -> response

Stages can run as live worker threads (server mode) or be stepped
synchronously with ``drain`` for deterministic replays and tests. All
document and orchestrator state for a session mutates under one lock, the
single-logical-writer rule.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Callable

from .asr import MockAsrBackend, Resequencer, Utterance, clean_transcript_text
from .audio import CHUNK_BYTES, CHUNK_SECONDS
from .bus import Bus, BusMessage, Subscription
from .codec import pack, unpack
from .doc import SYSTEM_AUTHOR, AppliedEdit, EditOp, LineDoc, SegmentRange
from .errors import (BusShutdown, EditRejected, FormatError, NotFoundError,
                     SequencingError, ValidationError)
from .orchestrator import DEFAULT_DEBOUNCE_S, Orchestrator
from .segmenter import TrackSegmenter, UtteranceAudio, UtteranceSequencer
from .summarizer import MockSummarizerBackend, PreprocessConfig, summarize_segment

logger = logging.getLogger("minuteman")

TOPIC_AUDIO = "audio"
TOPIC_UTTERANCE_AUDIO = "utterance-audio"
TOPIC_UTTERANCE_TEXT = "utterance-text"
TOPIC_SUMMARIZE_REQUEST = "summarize-request"
TOPIC_SUMMARIZE_RESPONSE = "summarize-response"

DEFAULT_CHUNK_LENGTH_WORDS = 100
CHUNK_LENGTH_MIN = 10
CHUNK_LENGTH_MAX = 2000
CHUNK_LENGTH_CHOICES = (50, 100, 200)  # offered by the UI selector


class VirtualClock:
    """Deterministic replay time source; only ever advances."""

    def __init__(self) -> None:
        self._t = 0.0

    def __call__(self) -> float:
        return self._t

    def advance(self, dt: float) -> float:
        self._t += dt
        return self._t

    def set(self, t: float) -> float:
        self._t = max(self._t, t)
        return self._t


class EventLog:
    """Totally ordered record of pipeline decisions for one session."""

    def __init__(self, clock: Callable[[], float]):
        self._clock = clock
        self._events: list[dict] = []
        self._lock = threading.Lock()

    def emit(self, event: str, **fields) -> None:
        with self._lock:
            entry = {"seq": len(self._events) + 1,
                     "t": round(self._clock(), 3), "event": event}
            entry.update(fields)
            self._events.append(entry)

    def all(self) -> list[dict]:
        with self._lock:
            return list(self._events)


@dataclass
class TrackState:
    track_id: str
    speaker_label: str
    next_chunk_seq: int = 0


@dataclass
class Session:
    session_id: str
    created_at: float
    chunk_length_words: int
    transcript: LineDoc
    summary: LineDoc
    orchestrator: Orchestrator
    events: EventLog
    lock: threading.RLock = field(default_factory=threading.RLock)
    tracks: dict[str, TrackState] = field(default_factory=dict)
    closed: bool = False
    debug: bool = False
    debug_listeners: list = field(default_factory=list)
    points_listeners: list = field(default_factory=list)
    # segment-stage private state (touched only by the single audio consumer)
    segmenters: dict[str, TrackSegmenter] = field(default_factory=dict)
    sequencer: UtteranceSequencer = field(default_factory=UtteranceSequencer)
    seen_chunk_seq: dict[str, int] = field(default_factory=dict)
    # transcription-stage state
    resequencer: Resequencer = field(default_factory=Resequencer)

    def doc(self, doc_id: str) -> LineDoc:
        if doc_id == "transcript":
            return self.transcript
        if doc_id == "summary":
            return self.summary
        raise NotFoundError(f"no document {doc_id!r}")


@dataclass
class _Stage:
    name: str
    subscription: Subscription
    handler: Callable[[BusMessage], None]


class MinutemanService:
    """The whole backend behind one bus, minus the HTTP surface."""

    def __init__(
        self,
        asr_backend=None,
        summarizer_backend=None,
        clock: Callable[[], float] | None = None,
        preprocess_cfg: PreprocessConfig | None = None,
        bus: Bus | None = None,
        vad: Callable[[bytes], bool] | None = None,
        debounce_s: float = DEFAULT_DEBOUNCE_S,
    ):
        self.bus = bus or Bus()
        self.asr_backend = asr_backend or MockAsrBackend()
        self.summarizer_backend = summarizer_backend or MockSummarizerBackend()
        self.clock = clock or time.monotonic
        self.preprocess_cfg = preprocess_cfg or PreprocessConfig()
        self.vad = vad
        self.debounce_s = debounce_s
        self.sessions: dict[str, Session] = {}
        self._sessions_lock = threading.Lock()
        self._next_session = 1
        self._threads: list[threading.Thread] = []
        self._stages = [
            _Stage("segment", self.bus.subscribe(TOPIC_AUDIO, "segmenter"),
                   self._handle_audio),
            _Stage("transcribe", self.bus.subscribe(TOPIC_UTTERANCE_AUDIO, "asr"),
                   self._handle_utterance_audio),
            _Stage("document", self.bus.subscribe(TOPIC_UTTERANCE_TEXT, "doc"),
                   self._handle_utterance_text),
            _Stage("summarize", self.bus.subscribe(TOPIC_SUMMARIZE_REQUEST, "summarizer"),
                   self._handle_summarize_request),
            _Stage("respond", self.bus.subscribe(TOPIC_SUMMARIZE_RESPONSE, "responses"),
                   self._handle_summarize_response),
        ]

    # -- session lifecycle ----------------------------------------------------

    def create_session(self, chunk_length_words: int | None = None) -> Session:
        words = DEFAULT_CHUNK_LENGTH_WORDS if chunk_length_words is None \
            else self._validate_density(chunk_length_words)
        with self._sessions_lock:
            session_id = f"s{self._next_session}"
            self._next_session += 1
        events = EventLog(self.clock)
        transcript = LineDoc("transcript")
        summary = LineDoc("summary")
        session = Session(
            session_id=session_id,
            created_at=self.clock(),
            chunk_length_words=words,
            transcript=transcript,
            summary=summary,
            orchestrator=None,  # type: ignore[arg-type]  # set just below
            events=events,
        )
        session.orchestrator = Orchestrator(
            session_id=session_id,
            transcript=transcript,
            summary=summary,
            publish_request=lambda sid, rseq, text: self._publish_request(
                session, sid, rseq, text),
            clock=self.clock,
            chunk_length_words=lambda: session.chunk_length_words,
            emit=events.emit,
            notify_points=lambda: self._notify_points(session),
            debounce_s=self.debounce_s,
        )
        with self._sessions_lock:
            self.sessions[session_id] = session
        events.emit("session-created", chunk_length_words=words)
        return session

    def get_session(self, session_id: str, open_only: bool = False) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise NotFoundError(f"no session {session_id!r}")
        if open_only and session.closed:
            raise NotFoundError(f"session {session_id!r} is closed")
        return session

    def set_chunk_length(self, session_id: str, chunk_length_words: int) -> None:
        session = self.get_session(session_id, open_only=True)
        words = self._validate_density(chunk_length_words)
        with session.lock:
            session.chunk_length_words = words
            session.events.emit("density-changed", chunk_length_words=words)

    def register_speaker(self, session_id: str, track_id: str, label: str) -> None:
        session = self.get_session(session_id, open_only=True)
        if not label or "\n" in label or ":" in label:
            raise ValidationError("speaker label must be a single colon-free line")
        with session.lock:
            track = session.tracks.get(track_id)
            if track is None:
                session.tracks[track_id] = TrackState(track_id, label)
            else:
                track.speaker_label = label

    def close_session(self, session_id: str) -> None:
        session = self.get_session(session_id)
        with session.lock:
            if session.closed:
                return
            session.closed = True
            track_ids = sorted(session.tracks)
            session.events.emit("session-closed", tracks=track_ids)
        for track_id in track_ids:
            self.bus.publish(TOPIC_AUDIO, f"{session_id}:{track_id}",
                             pack({"kind": "track-close", "session_id": session_id,
                                   "track_id": track_id}))
        self.bus.publish(TOPIC_AUDIO, f"{session_id}:__control__",
                         pack({"kind": "session-close", "session_id": session_id,
                               "tracks": track_ids}))

    @staticmethod
    def _validate_density(value: int) -> int:
        if not isinstance(value, int) or isinstance(value, bool) \
                or not CHUNK_LENGTH_MIN <= value <= CHUNK_LENGTH_MAX:
            raise ValidationError(
                f"chunk_length_words must be an integer in "
                f"[{CHUNK_LENGTH_MIN}, {CHUNK_LENGTH_MAX}], got {value!r}")
        return value

    # -- ingestion --------------------------------------------------------------

    def ingest_chunk(self, session_id: str, track_id: str, chunk_seq: int,
                     payload: bytes) -> dict:
        session = self.get_session(session_id, open_only=True)
        if len(payload) != CHUNK_BYTES:
            raise FormatError(
                f"chunk must be exactly {CHUNK_BYTES} bytes of s16le mono PCM, "
                f"got {len(payload)}")
        with session.lock:
            track = session.tracks.get(track_id)
            expected = track.next_chunk_seq if track else 0
            if chunk_seq != expected:
                raise SequencingError(
                    f"track {track_id!r} expects chunk_seq {expected}, got {chunk_seq}")
            if track is None:
                track = TrackState(track_id, track_id)
                session.tracks[track_id] = track
                session.events.emit("track-created", track=track_id)
            self.bus.publish(
                TOPIC_AUDIO, f"{session_id}:{track_id}",
                pack({"kind": "chunk", "session_id": session_id,
                      "track_id": track_id, "chunk_seq": chunk_seq}, payload))
            track.next_chunk_seq = chunk_seq + 1
        return {"session_id": session_id, "track_id": track_id, "chunk_seq": chunk_seq}

    # -- user-facing operations -------------------------------------------------

    def summarize_selection(self, session_id: str, start_seq: int, end_seq: int) -> dict:
        session = self.get_session(session_id)
        rng = SegmentRange(start_seq, end_seq)
        with session.lock:
            point = session.orchestrator.request_on_demand(rng)
            return point.view()

    def set_debug(self, session_id: str, enabled: bool) -> None:
        session = self.get_session(session_id)
        with session.lock:
            session.debug = bool(enabled)
            listeners = list(session.debug_listeners)
        for listener in listeners:
            listener(bool(enabled))

    def apply_edit(self, session_id: str, op: EditOp) -> AppliedEdit:
        session = self.get_session(session_id)
        doc = session.doc(op.doc_id)
        with session.lock:
            is_user = op.author != SYSTEM_AUTHOR
            pre_texts = session.orchestrator.summary_texts() \
                if (is_user and op.doc_id == "summary") else None
            applied = doc.apply_edit(op)
            session.events.emit("edit-applied", doc=op.doc_id,
                                author=op.author, revision=applied.revision)
            if is_user:
                if op.doc_id == "transcript":
                    session.orchestrator.note_transcript_edit()
                else:
                    session.orchestrator.freeze_scan(pre_texts or {})
            return applied

    def poll(self, session_id: str | None = None) -> None:
        """Fire any due debounce windows (replay and timer-thread entry point)."""
        sessions = [self.get_session(session_id)] if session_id \
            else list(self.sessions.values())
        for session in sessions:
            with session.lock:
                session.orchestrator.poll()

    def quiescent(self, session_id: str) -> bool:
        session = self.get_session(session_id)
        with session.lock:
            orch = session.orchestrator
            if orch.outstanding or orch.debounce_deadline is not None:
                return False
        return all(self.bus.pending(stage.subscription.topic, stage.subscription.group) == 0
                   for stage in self._stages)

    def _notify_points(self, session: Session) -> None:
        view = session.orchestrator.points_view()
        for listener in list(session.points_listeners):
            listener(view)

    def _publish_request(self, session: Session, summary_id: int,
                         request_seq: int, segment_text: str) -> None:
        self.bus.publish(TOPIC_SUMMARIZE_REQUEST, session.session_id,
                         pack({"session": session.session_id,
                               "summary_id": summary_id,
                               "request_seq": request_seq,
                               "segment_text": segment_text}))

    # -- pipeline stages ----------------------------------------------------------

    def _handle_audio(self, msg: BusMessage) -> None:
        header, pcm = unpack(msg.payload)
        session = self.sessions.get(header["session_id"])
        if session is None:
            return
        kind = header["kind"]
        if kind == "chunk":
            track_id = header["track_id"]
            chunk_seq = header["chunk_seq"]
            last = session.seen_chunk_seq.get(track_id, -1)
            if chunk_seq <= last:
                return  # redelivered duplicate
            session.seen_chunk_seq[track_id] = chunk_seq
            segmenter = session.segmenters.get(track_id)
            if segmenter is None:
                segmenter = TrackSegmenter(session.session_id, track_id, vad=self.vad)
                session.segmenters[track_id] = segmenter
            released = []
            emitted = segmenter.advance(chunk_seq, pcm)
            if emitted is not None:
                released += session.sequencer.add(emitted)
            released += session.sequencer.note_progress(
                track_id, (chunk_seq + 1) * CHUNK_SECONDS)
            self._publish_finalized(session, released)
        elif kind == "track-close":
            track_id = header["track_id"]
            released = []
            segmenter = session.segmenters.get(track_id)
            if segmenter is not None:
                emitted = segmenter.flush()
                if emitted is not None:
                    released += session.sequencer.add(emitted)
            released += session.sequencer.close_track(track_id)
            self._publish_finalized(session, released)
        elif kind == "session-close":
            self._publish_finalized(session, session.sequencer.close_session())

    def _publish_finalized(self, session: Session, released: list[UtteranceAudio]) -> None:
        for utt in released:
            session.events.emit(
                "utterance-finalized", finalize_seq=utt.finalize_seq,
                track=utt.track_id, start_time_s=utt.start_time_s,
                end_time_s=utt.end_time_s)
            self.bus.publish(
                TOPIC_UTTERANCE_AUDIO, session.session_id,
                pack({"kind": "utterance", "session_id": session.session_id,
                      "track_id": utt.track_id, "finalize_seq": utt.finalize_seq,
                      "start_time_s": utt.start_time_s,
                      "end_time_s": utt.end_time_s}, utt.audio))

    def _handle_utterance_audio(self, msg: BusMessage) -> None:
        header, pcm = unpack(msg.payload)
        session = self.sessions.get(header["session_id"])
        if session is None:
            return
        utt_audio = UtteranceAudio(
            session_id=header["session_id"], track_id=header["track_id"],
            audio=pcm, start_time_s=header["start_time_s"],
            end_time_s=header["end_time_s"], finalize_seq=header["finalize_seq"])
        try:
            text = clean_transcript_text(self.asr_backend.transcribe(utt_audio))
        except Exception:
            logger.exception("ASR backend failed without sentinel")
            text = ""
        with session.lock:
            label = session.tracks.get(utt_audio.track_id)
            speaker = label.speaker_label if label else utt_audio.track_id
            utterance = Utterance(
                utt_seq=utt_audio.finalize_seq or 0, track_id=utt_audio.track_id,
                speaker_label=speaker, text=text,
                start_time_s=utt_audio.start_time_s, end_time_s=utt_audio.end_time_s)
            ready = session.resequencer.push(utterance.utt_seq, utterance)
            for seq, item in ready:
                if not item.text:
                    session.events.emit("utterance-discarded", utt_seq=seq,
                                        track=item.track_id)
                    continue
                self.bus.publish(
                    TOPIC_UTTERANCE_TEXT, session.session_id,
                    pack({"session_id": session.session_id, "utt_seq": seq,
                          "track_id": item.track_id,
                          "speaker_label": item.speaker_label, "text": item.text,
                          "start_time_s": item.start_time_s,
                          "end_time_s": item.end_time_s}))

    def _handle_utterance_text(self, msg: BusMessage) -> None:
        header, _ = unpack(msg.payload)
        session = self.sessions.get(header["session_id"])
        if session is None:
            return
        utterance = Utterance(
            utt_seq=header["utt_seq"], track_id=header["track_id"],
            speaker_label=header["speaker_label"], text=header["text"],
            start_time_s=header["start_time_s"], end_time_s=header["end_time_s"])
        with session.lock:
            applied = session.transcript.append_utterance(utterance)
            if applied is None:
                return  # redelivered duplicate
            session.events.emit(
                "line-appended", utt_seq=utterance.utt_seq, track=utterance.track_id,
                end_time_s=utterance.end_time_s, revision=applied.revision)
            session.orchestrator.on_utterance_appended(utterance.utt_seq)

    def _handle_summarize_request(self, msg: BusMessage) -> None:
        header, _ = unpack(msg.payload)
        summary = summarize_segment(header["segment_text"], self.summarizer_backend,
                                    self.preprocess_cfg)
        self.bus.publish(TOPIC_SUMMARIZE_RESPONSE, header["session"],
                         pack({"session": header["session"],
                               "summary_id": header["summary_id"],
                               "request_seq": header["request_seq"],
                               "summary_text": summary}))

    def _handle_summarize_response(self, msg: BusMessage) -> None:
        header, _ = unpack(msg.payload)
        session = self.sessions.get(header["session"])
        if session is None:
            return
        with session.lock:
            session.orchestrator.on_summary_response(
                header["summary_id"], header["request_seq"], header["summary_text"])

    # -- execution models -----------------------------------------------------------

    def drain(self, only: set[str] | None = None) -> int:
        """Synchronously process every queued message; returns messages handled.

        Stages are stepped in pipeline order until a full sweep finds nothing,
        so the result of a drained state is deterministic for a given input.
        ``only`` restricts the sweep to named stages (tests use it to hold a
        stage back and exercise in-flight races).
        """
        total = 0
        while True:
            processed = 0
            for stage in self._stages:
                if only is not None and stage.name not in only:
                    continue
                while True:
                    try:
                        msg = stage.subscription.get(timeout=0)
                    except BusShutdown:
                        break
                    if msg is None:
                        break
                    try:
                        stage.handler(msg)
                    finally:
                        stage.subscription.ack(msg)
                    processed += 1
            if processed == 0:
                return total
            total += processed

    def start_workers(self, asr_concurrency: int = 2, poll_interval_s: float = 0.1) -> None:
        """Spawn live consumer threads plus the debounce timer."""
        def run(stage: _Stage) -> None:
            while True:
                try:
                    msg = stage.subscription.get(timeout=0.2)
                except BusShutdown:
                    return
                if msg is None:
                    continue
                try:
                    stage.handler(msg)
                except Exception:
                    logger.exception("stage %s failed on a message", stage.name)
                finally:
                    stage.subscription.ack(msg)

        for stage in self._stages:
            copies = asr_concurrency if stage.name == "transcribe" else 1
            for i in range(copies):
                t = threading.Thread(target=run, args=(stage,),
                                     name=f"minuteman-{stage.name}-{i}", daemon=True)
                t.start()
                self._threads.append(t)

        def timer() -> None:
            while not self.bus.closed:
                self.poll()
                time.sleep(poll_interval_s)

        t = threading.Thread(target=timer, name="minuteman-debounce", daemon=True)
        t.start()
        self._threads.append(t)

    def stop(self) -> None:
        self.bus.close()
        for t in self._threads:
            t.join(timeout=5)
        self._threads.clear()
