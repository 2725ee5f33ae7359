"""Voice-activity-gated utterance segmentation.

Each track keeps a buffer of consecutive speech-positive chunks. A silence
chunk ends the utterance and flushes the buffer; a buffer that would grow
past the maximum utterance length is flushed first (forced flush). Flushed
utterances from all tracks of a session pass through a single ordering stage
that assigns the global ``finalize_seq`` in nondecreasing end-time order,
ties broken by track id.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

from .audio import CHUNK_BYTES, CHUNK_SECONDS, rms_dbfs
from .errors import ValidationError

DEFAULT_THRESHOLD_DBFS = -40.0
DEFAULT_MAX_UTTERANCE_S = 30.0


class EnergyVad:
    """Chunk-level speech detector: RMS level at or above a dBFS threshold.

    Deterministic and closed-form; a model-based detector can be plugged in
    anywhere a ``chunk -> bool`` callable is accepted.
    """

    def __init__(self, threshold_dbfs: float = DEFAULT_THRESHOLD_DBFS):
        self.threshold_dbfs = threshold_dbfs

    def __call__(self, pcm: bytes) -> bool:
        level = rms_dbfs(pcm)
        return level != -math.inf and level >= self.threshold_dbfs


@dataclass
class UtteranceAudio:
    session_id: str
    track_id: str
    audio: bytes
    start_time_s: float
    end_time_s: float
    finalize_seq: int | None = None  # assigned by the ordering stage


@dataclass
class TrackSegmenter:
    """Per-track state machine; feed chunks in chunk_seq order."""

    session_id: str
    track_id: str
    vad: EnergyVad | None = None
    max_utterance_s: float = DEFAULT_MAX_UTTERANCE_S
    _buffer: list[bytes] = field(default_factory=list)
    _buffer_start_s: float = 0.0

    def __post_init__(self) -> None:
        if self.vad is None:
            self.vad = EnergyVad()
        self._max_chunks = int(self.max_utterance_s / CHUNK_SECONDS)
        if self._max_chunks < 1:
            raise ValidationError("max_utterance_s must allow at least one chunk")

    def advance(self, chunk_seq: int, pcm: bytes) -> UtteranceAudio | None:
        if len(pcm) != CHUNK_BYTES:
            raise ValidationError(f"chunk must be {CHUNK_BYTES} bytes, got {len(pcm)}")
        stream_time = chunk_seq * CHUNK_SECONDS
        if not self.vad(pcm):
            return self._flush()
        emitted = None
        if len(self._buffer) >= self._max_chunks:
            emitted = self._flush()
        if not self._buffer:
            self._buffer_start_s = stream_time
        self._buffer.append(pcm)
        return emitted

    def flush(self) -> UtteranceAudio | None:
        """End-of-session flush of any buffered speech."""
        return self._flush()

    def _flush(self) -> UtteranceAudio | None:
        if not self._buffer:
            return None
        audio = b"".join(self._buffer)
        start = self._buffer_start_s
        end = start + len(self._buffer) * CHUNK_SECONDS
        self._buffer.clear()
        return UtteranceAudio(self.session_id, self.track_id, audio, start, end)


class UtteranceSequencer:
    """Session-wide ordering stage: total order over all tracks' utterances.

    An utterance is released once every open track has progressed past its
    end time, which guarantees nondecreasing end times regardless of how the
    per-track chunk streams interleave. Held utterances drain at session
    close. ``finalize_seq`` starts at 1 and is assigned at release.
    """

    def __init__(self) -> None:
        self._heap: list[tuple[float, str, int, UtteranceAudio]] = []
        self._progress: dict[str, float] = {}
        self._closed_tracks: set[str] = set()
        self._session_closed = False
        self._watermark = 0.0
        self._next_seq = 1
        self._tiebreak = 0  # keeps heap comparisons away from UtteranceAudio

    def note_progress(self, track_id: str, up_to_s: float) -> list[UtteranceAudio]:
        prev = self._progress.get(track_id, 0.0)
        self._progress[track_id] = max(prev, up_to_s)
        return self._release()

    def add(self, utt: UtteranceAudio) -> list[UtteranceAudio]:
        self._tiebreak += 1
        heapq.heappush(self._heap, (utt.end_time_s, utt.track_id, self._tiebreak, utt))
        return self._release()

    def close_track(self, track_id: str) -> list[UtteranceAudio]:
        self._progress.setdefault(track_id, 0.0)
        self._closed_tracks.add(track_id)
        return self._release()

    def close_session(self) -> list[UtteranceAudio]:
        self._session_closed = True
        return self._release()

    def _release(self) -> list[UtteranceAudio]:
        open_progress = [t for track, t in self._progress.items()
                         if track not in self._closed_tracks]
        if not self._session_closed:
            if self._progress and not open_progress:
                # every known track closed but session still open: wait for close
                watermark = self._watermark
            else:
                watermark = min(open_progress) if open_progress else 0.0
            self._watermark = max(self._watermark, watermark)
        out = []
        while self._heap and (self._session_closed
                              or self._heap[0][0] < self._watermark):
            _, _, _, utt = heapq.heappop(self._heap)
            utt.finalize_seq = self._next_seq
            self._next_seq += 1
            out.append(utt)
        return out
