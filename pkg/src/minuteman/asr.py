"""Pluggable transcription backends and response re-sequencing.

The remote adapter posts WAV-wrapped PCM to an external service; the mock
backend maps audio content hashes to scripted texts so the whole pipeline
runs deterministically without a model. Backend responses may complete out
of order; a hold-back buffer releases utterances strictly in finalize_seq
order so the transcript document only ever sees ordered appends.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path

import httpx

from .audio import wav_wrap
from .errors import ValidationError
from .segmenter import UtteranceAudio

TRANSCRIPTION_FAILED = "[transcription failed]"


@dataclass(frozen=True)
class Utterance:
    utt_seq: int
    track_id: str
    speaker_label: str
    text: str
    start_time_s: float
    end_time_s: float


def clean_transcript_text(text: str) -> str:
    """One utterance is one line: fold newlines, trim edges."""
    return " ".join(text.split("\n")).strip()


class MockAsrBackend:
    """Deterministic test double: sha256(audio) -> scripted text.

    A file-backed manifest is reloaded whenever the file changes, so a
    replay driving a separately started server can publish fingerprints
    after the server is already up.
    """

    def __init__(self, manifest: dict[str, str] | None = None,
                 manifest_path: str | Path | None = None):
        self.manifest = dict(manifest or {})
        self.manifest_path = Path(manifest_path) if manifest_path else None
        self._loaded_mtime: float | None = None

    @classmethod
    def from_file(cls, path: str | Path) -> "MockAsrBackend":
        return cls(manifest_path=path)

    @staticmethod
    def fingerprint(audio: bytes) -> str:
        return hashlib.sha256(audio).hexdigest()

    def add(self, audio: bytes, text: str) -> str:
        h = self.fingerprint(audio)
        self.manifest[h] = text
        return h

    def _refresh(self) -> None:
        if self.manifest_path is None:
            return
        try:
            mtime = self.manifest_path.stat().st_mtime
        except OSError:
            return
        if mtime != self._loaded_mtime:
            with open(self.manifest_path, encoding="utf-8") as f:
                self.manifest.update(json.load(f))
            self._loaded_mtime = mtime

    def transcribe(self, utt: UtteranceAudio) -> str:
        self._refresh()
        h = self.fingerprint(utt.audio)
        if h in self.manifest:
            return self.manifest[h]
        return f"UNKNOWN-{h[:8]}"


class RemoteAsrBackend:
    """HTTP adapter: POST /transcribe, WAV body, plain-text response.

    Failures are retried with exponential backoff; once retries are
    exhausted the sentinel line is returned so the timeline stays intact.
    """

    def __init__(self, url: str, timeout_s: float = 30.0, retries: int = 3,
                 backoff_s: float = 0.5):
        self.url = url.rstrip("/")
        self.timeout_s = timeout_s
        self.retries = retries
        self.backoff_s = backoff_s

    def transcribe(self, utt: UtteranceAudio) -> str:
        body = wav_wrap(utt.audio)
        attempts = self.retries + 1
        for attempt in range(attempts):
            try:
                resp = httpx.post(f"{self.url}/transcribe", content=body,
                                  headers={"content-type": "audio/wav"},
                                  timeout=self.timeout_s)
                resp.raise_for_status()
                return resp.text
            except Exception:
                if attempt + 1 < attempts:
                    time.sleep(self.backoff_s * (2 ** attempt))
        return TRANSCRIPTION_FAILED


def make_asr_backend(url: str):
    """Build a backend from an ASR_URL value: ``mock:[manifest.json]`` or http(s)."""
    if url.startswith("mock:"):
        path = url[len("mock:"):]
        return MockAsrBackend.from_file(path) if path else MockAsrBackend()
    if url.startswith("http://") or url.startswith("https://"):
        return RemoteAsrBackend(url)
    raise ValidationError(f"unsupported ASR_URL {url!r}")


class Resequencer:
    """Hold-back buffer releasing items strictly in sequence order.

    An item is released only once every lower sequence number has been
    released (appended or discarded). Duplicate deliveries of an already
    released or already held sequence are dropped.
    """

    def __init__(self, first_seq: int = 1):
        self.next_seq = first_seq
        self._held: dict[int, object] = {}

    def push(self, seq: int, item: object) -> list[tuple[int, object]]:
        if seq < self.next_seq or seq in self._held:
            return []
        self._held[seq] = item
        out = []
        while self.next_seq in self._held:
            out.append((self.next_seq, self._held.pop(self.next_seq)))
            self.next_seq += 1
        return out

    @property
    def holding(self) -> int:
        return len(self._held)
