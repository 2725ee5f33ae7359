"""Replay driver: feeds a recorded or scripted meeting through the pipeline.

Scripted tracks synthesize deterministic noise-burst audio per utterance and
register each burst's content hash with the mock transcription backend, so a
manifest fully determines the transcript. The driver steps virtual time one
chunk-second at a time and drains the pipeline synchronously after every
step; fast and realtime modes make identical decisions, realtime just paces
the steps against the wall clock. Scheduled edits are applied through the
same path as live user edits.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from hashlib import sha256
from pathlib import Path

import numpy as np
import yaml

from .asr import MockAsrBackend
from .audio import CHUNK_BYTES, CHUNK_SAMPLES, silence, wav_unwrap
from .doc import Delete, EditOp, Insert, LineDoc, Retain
from .errors import ManifestError
from .service import DEFAULT_CHUNK_LENGTH_WORDS, MinutemanService, VirtualClock

SPEECH_AMPLITUDE = 8000  # ~-17 dBFS, comfortably above the VAD threshold
MAX_SCRIPTED_UTTERANCE_S = 30  # longer would be split by the forced flush
DEFAULT_EDIT_AUTHOR = "editor"


@dataclass(frozen=True)
class ScriptedUtterance:
    start_s: int
    duration_s: int
    text: str


@dataclass(frozen=True)
class TrackSpec:
    track_id: str
    speaker_label: str
    script: tuple[ScriptedUtterance, ...] | None = None
    wav: Path | None = None


@dataclass(frozen=True)
class EditSpec:
    at_s: int
    doc: str
    author: str = DEFAULT_EDIT_AUTHOR
    find: str | None = None
    replace: str | None = None
    append: str | None = None


@dataclass(frozen=True)
class ReplayManifest:
    chunk_length_words: int
    tracks: tuple[TrackSpec, ...]
    edits: tuple[EditSpec, ...] = ()


@dataclass
class ReplayResult:
    session_id: str
    transcript_path: Path
    minutes_path: Path
    events_path: Path


def load_manifest(path: str | Path) -> ReplayManifest:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text("utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}")
    if not isinstance(raw, dict):
        raise ManifestError("manifest must be a mapping")
    if raw.get("version") != 1:
        raise ManifestError(f"unsupported manifest version {raw.get('version')!r}")
    words = raw.get("chunk_length_words", DEFAULT_CHUNK_LENGTH_WORDS)
    if not isinstance(words, int) or not 10 <= words <= 2000:
        raise ManifestError(f"chunk_length_words out of range: {words!r}")

    tracks: list[TrackSpec] = []
    seen_ids: set[str] = set()
    for i, entry in enumerate(raw.get("tracks") or []):
        if not isinstance(entry, dict):
            raise ManifestError(f"tracks[{i}] must be a mapping")
        track_id = entry.get("track_id")
        if not track_id or not isinstance(track_id, str) or track_id in seen_ids:
            raise ManifestError(f"tracks[{i}] needs a unique non-empty track_id")
        seen_ids.add(track_id)
        label = entry.get("speaker_label", track_id)
        has_script = "script" in entry
        has_wav = "wav" in entry
        if has_script == has_wav:
            raise ManifestError(f"track {track_id!r} needs exactly one of script/wav")
        if has_wav:
            wav_path = (path.parent / str(entry["wav"])).resolve()
            if not wav_path.is_file():
                raise ManifestError(f"track {track_id!r}: wav file {wav_path} missing")
            tracks.append(TrackSpec(track_id, label, wav=wav_path))
            continue
        script = _parse_script(track_id, entry["script"])
        tracks.append(TrackSpec(track_id, label, script=script))

    edits = tuple(_parse_edit(i, e) for i, e in enumerate(raw.get("edits") or []))
    return ReplayManifest(chunk_length_words=words, tracks=tuple(tracks), edits=edits)


def _parse_script(track_id: str, entries) -> tuple[ScriptedUtterance, ...]:
    if not isinstance(entries, list):
        raise ManifestError(f"track {track_id!r}: script must be a list")
    script: list[ScriptedUtterance] = []
    prev_end = None
    for j, u in enumerate(entries):
        if not isinstance(u, dict):
            raise ManifestError(f"track {track_id!r} script[{j}] must be a mapping")
        start = u.get("start_s")
        dur = u.get("duration_s")
        text = u.get("text")
        if not isinstance(start, int) or start < 0:
            raise ManifestError(f"track {track_id!r} script[{j}]: start_s must be a "
                                "non-negative whole number of seconds")
        if not isinstance(dur, int) or not 1 <= dur <= MAX_SCRIPTED_UTTERANCE_S:
            raise ManifestError(f"track {track_id!r} script[{j}]: duration_s must be "
                                f"1..{MAX_SCRIPTED_UTTERANCE_S} whole seconds")
        if not isinstance(text, str) or not text.strip() or "\n" in text:
            raise ManifestError(f"track {track_id!r} script[{j}]: text must be a "
                                "non-empty single line")
        if prev_end is not None and start < prev_end + 1:
            # utterances need >= 1 s of silence between them to be segmented apart
            raise ManifestError(f"track {track_id!r} script[{j}] overlaps or touches "
                                "the previous utterance (leave a silent second)")
        prev_end = start + dur
        script.append(ScriptedUtterance(start, dur, text))
    return tuple(script)


def _parse_edit(i: int, entry) -> EditSpec:
    if not isinstance(entry, dict):
        raise ManifestError(f"edits[{i}] must be a mapping")
    at_s = entry.get("at_s")
    doc = entry.get("doc")
    if not isinstance(at_s, int) or at_s < 0:
        raise ManifestError(f"edits[{i}]: at_s must be a non-negative integer")
    if doc not in ("transcript", "summary"):
        raise ManifestError(f"edits[{i}]: doc must be transcript or summary")
    author = entry.get("author", DEFAULT_EDIT_AUTHOR)
    has_replace = "find" in entry
    has_append = "append" in entry
    if has_replace == has_append:
        raise ManifestError(f"edits[{i}]: needs exactly one of find/replace or append")
    if has_append:
        text = entry["append"]
        if not isinstance(text, str) or not text or "\n" in text:
            raise ManifestError(f"edits[{i}]: append must be a non-empty single line")
        return EditSpec(at_s=at_s, doc=doc, author=author, append=text)
    find = entry.get("find")
    replace = entry.get("replace", "")
    if not isinstance(find, str) or not find:
        raise ManifestError(f"edits[{i}]: find must be a non-empty string")
    if not isinstance(replace, str):
        raise ManifestError(f"edits[{i}]: replace must be a string")
    return EditSpec(at_s=at_s, doc=doc, author=author, find=find, replace=replace)


# -- audio synthesis -----------------------------------------------------------


def _utterance_audio(track_id: str, index: int, utt: ScriptedUtterance, seed: int) -> bytes:
    """Deterministic speech-level noise, unique per (seed, track, index, text)."""
    digest = sha256(f"{seed}|{track_id}|{index}|{utt.text}".encode()).digest()
    rng = np.random.RandomState(int.from_bytes(digest[:4], "big"))
    samples = rng.randint(-SPEECH_AMPLITUDE, SPEECH_AMPLITUDE + 1,
                          size=utt.duration_s * CHUNK_SAMPLES).astype("<i2")
    return samples.tobytes()


def synthesize_track(track: TrackSpec, total_chunks: int, seed: int,
                     asr: MockAsrBackend) -> list[bytes]:
    """Render a track's chunk list and register utterance hashes with the mock."""
    if track.wav is not None:
        pcm = wav_unwrap(track.wav.read_bytes())
        pad = (-len(pcm)) % CHUNK_BYTES
        pcm += bytes(pad)
        chunks = [pcm[i:i + CHUNK_BYTES] for i in range(0, len(pcm), CHUNK_BYTES)]
    else:
        chunks = []
        for index, utt in enumerate(track.script or ()):
            while len(chunks) < utt.start_s:
                chunks.append(silence())
            audio = _utterance_audio(track.track_id, index, utt, seed)
            asr.add(audio, utt.text)
            chunks.extend(audio[i:i + CHUNK_BYTES]
                          for i in range(0, len(audio), CHUNK_BYTES))
    while len(chunks) < total_chunks:
        chunks.append(silence())
    return chunks


def track_length_chunks(track: TrackSpec) -> int:
    if track.wav is not None:
        return math.ceil(len(wav_unwrap(track.wav.read_bytes())) / CHUNK_BYTES)
    if not track.script:
        return 0
    last = track.script[-1]
    return last.start_s + last.duration_s


# -- edit construction -----------------------------------------------------------


def build_edit_for_text(doc_id: str, text: str, revision: int, spec: EditSpec) -> EditOp:
    if spec.append is not None:
        comps = []
        if text:
            comps.append(Retain(len(text)))
            comps.append(Insert("\n"))
        comps.append(Insert(spec.append))
        return EditOp(doc_id, revision, spec.author, tuple(comps))
    assert spec.find is not None
    pos = text.find(spec.find)
    if pos < 0:
        raise ManifestError(
            f"edit at t={spec.at_s}: {spec.find!r} not found in {spec.doc}")
    comps = []
    if pos:
        comps.append(Retain(pos))
    comps.append(Delete(len(spec.find)))
    if spec.replace:
        comps.append(Insert(spec.replace))
    rest = len(text) - pos - len(spec.find)
    if rest:
        comps.append(Retain(rest))
    return EditOp(doc_id, revision, spec.author, tuple(comps))


def build_edit(doc: LineDoc, spec: EditSpec) -> EditOp:
    return build_edit_for_text(doc.doc_id, doc.text, doc.revision, spec)


# -- the driver -----------------------------------------------------------


class ReplayRunner:
    """In-process replay against a freshly wired service."""

    def __init__(self, manifest: ReplayManifest, out_dir: str | Path,
                 mode: str = "fast", seed: int = 0):
        if mode not in ("fast", "realtime"):
            raise ManifestError(f"unknown mode {mode!r}")
        self.manifest = manifest
        self.out_dir = Path(out_dir)
        self.mode = mode
        self.seed = seed
        self.clock = VirtualClock()
        self.asr = MockAsrBackend()
        self.service = MinutemanService(asr_backend=self.asr, clock=self.clock)

    def run(self) -> ReplayResult:
        manifest = self.manifest
        session = self.service.create_session(manifest.chunk_length_words)
        sid = session.session_id
        for track in manifest.tracks:
            self.service.register_speaker(sid, track.track_id, track.speaker_label)

        # Pad every track to the common length so cross-track ordering
        # advances one second at a time, the way live recording does.
        lengths = [track_length_chunks(t) for t in manifest.tracks]
        common_len = (max(lengths) + 1) if lengths else 0
        chunks = {t.track_id: synthesize_track(t, common_len, self.seed, self.asr)
                  for t in sorted(manifest.tracks, key=lambda t: t.track_id)}

        pending_edits = sorted(manifest.edits, key=lambda e: e.at_s)
        horizon = max([common_len] + [e.at_s + 1 for e in pending_edits])

        wall_start = time.monotonic()
        for t in range(horizon):
            if self.mode == "realtime":
                lag = wall_start + t - time.monotonic()
                if lag > 0:
                    time.sleep(lag)
            self.clock.set(float(t))
            while pending_edits and pending_edits[0].at_s <= t:
                self._apply_edit(sid, pending_edits.pop(0))
            self.service.poll(sid)
            self.service.drain()
            for track_id in sorted(chunks):
                track_chunks = chunks[track_id]
                if t < len(track_chunks):
                    self.service.ingest_chunk(sid, track_id, t, track_chunks[t])
            self.service.drain()

        self.clock.set(float(horizon))
        self.service.close_session(sid)
        self.service.drain()
        for _ in range(100):
            if self.service.quiescent(sid):
                break
            self.clock.advance(2 * self.service.debounce_s)
            self.service.poll(sid)
            self.service.drain()

        return _write_outputs(self.out_dir, sid,
                              session.transcript.text, session.summary.text,
                              session.events.all())

    def _apply_edit(self, sid: str, spec: EditSpec) -> None:
        session = self.service.get_session(sid)
        with session.lock:
            op = build_edit(session.doc(spec.doc), spec)
            self.service.apply_edit(sid, op)


def _write_outputs(out_dir: Path, sid: str, transcript: str, minutes: str,
                   events: list[dict]) -> ReplayResult:
    out_dir.mkdir(parents=True, exist_ok=True)
    transcript_path = out_dir / "transcript.txt"
    minutes_path = out_dir / "minutes.txt"
    events_path = out_dir / "events.log"
    transcript_path.write_bytes((transcript + "\n" if transcript else "").encode("utf-8"))
    minutes_path.write_bytes((minutes + "\n" if minutes else "").encode("utf-8"))
    lines = "".join(json.dumps(e, sort_keys=False, separators=(",", ":")) + "\n"
                    for e in events)
    events_path.write_bytes(lines.encode("utf-8"))
    return ReplayResult(sid, transcript_path, minutes_path, events_path)


class HttpReplayRunner:
    """Replay against a running gateway; always paced in real time.

    Edits reconnect to the sync socket per injection to pick up the current
    snapshot; determinism over a live server is best-effort by nature.
    """

    def __init__(self, manifest: ReplayManifest, out_dir: str | Path,
                 server: str, seed: int = 0):
        self.manifest = manifest
        self.out_dir = Path(out_dir)
        self.server = server.rstrip("/")
        self.seed = seed

    def run(self) -> ReplayResult:
        import httpx

        manifest = self.manifest
        client = httpx.Client(base_url=self.server, timeout=30.0)
        resp = client.post("/sessions",
                           json={"chunk_length_words": manifest.chunk_length_words})
        resp.raise_for_status()
        sid = resp.json()["session_id"]
        for track in manifest.tracks:
            client.put(f"/sessions/{sid}/tracks/{track.track_id}/speaker",
                       json={"display_name": track.speaker_label}).raise_for_status()

        asr = MockAsrBackend()
        lengths = [track_length_chunks(t) for t in manifest.tracks]
        common_len = (max(lengths) + 1) if lengths else 0
        chunks = {t.track_id: synthesize_track(t, common_len, self.seed, asr)
                  for t in sorted(manifest.tracks, key=lambda t: t.track_id)}
        # publish the fingerprint map so a server started with
        # ASR_URL=mock:<out>/asr-manifest.json resolves the scripted texts
        self.out_dir.mkdir(parents=True, exist_ok=True)
        (self.out_dir / "asr-manifest.json").write_text(
            json.dumps(asr.manifest, indent=0, sort_keys=True), encoding="utf-8")
        pending_edits = sorted(manifest.edits, key=lambda e: e.at_s)
        horizon = max([common_len] + [e.at_s + 1 for e in pending_edits])

        wall_start = time.monotonic()
        for t in range(horizon):
            lag = wall_start + t - time.monotonic()
            if lag > 0:
                time.sleep(lag)
            while pending_edits and pending_edits[0].at_s <= t:
                self._apply_edit_ws(sid, pending_edits.pop(0))
            for track_id in sorted(chunks):
                track_chunks = chunks[track_id]
                if t < len(track_chunks):
                    client.post(
                        f"/sessions/{sid}/tracks/{track_id}/chunks/{t}",
                        content=track_chunks[t],
                        headers={"content-type": "application/octet-stream"},
                    ).raise_for_status()

        client.post(f"/sessions/{sid}/close").raise_for_status()
        deadline = time.monotonic() + 30
        while time.monotonic() < deadline:
            points = client.get(f"/sessions/{sid}/points").json()["points"]
            if all(p["state"] != "pending" for p in points):
                break
            time.sleep(0.5)
        time.sleep(1.0)

        transcript = client.get(f"/sessions/{sid}/transcript").text
        minutes = client.get(f"/sessions/{sid}/summary").text
        events = client.get(f"/sessions/{sid}/events").json()["events"]
        client.close()
        return _write_outputs(self.out_dir, sid, transcript, minutes, events)

    def _apply_edit_ws(self, sid: str, spec: EditSpec) -> None:
        # a live pipeline may still be appending the edit's target line;
        # retry briefly before treating the miss as a manifest error
        deadline = time.monotonic() + 5.0
        while True:
            try:
                self._apply_edit_ws_once(sid, spec)
                return
            except ManifestError:
                if time.monotonic() >= deadline:
                    raise
                time.sleep(0.25)

    def _apply_edit_ws_once(self, sid: str, spec: EditSpec) -> None:
        from websockets.sync.client import connect

        ws_url = self.server.replace("http://", "ws://").replace("https://", "wss://")
        with connect(f"{ws_url}/sessions/{sid}/sync") as ws:
            ws.send(json.dumps({"type": "hello", "author": spec.author}))
            revision = None
            lines: list[str] = []
            while True:
                msg = json.loads(ws.recv(timeout=10))
                if msg.get("type") == "snapshot" and msg.get("doc_id") == spec.doc:
                    revision = msg["revision"]
                    lines = [ln["text"] for ln in msg["lines"]]
                if msg.get("type") == "points":
                    break
            op = build_edit_for_text(spec.doc, "\n".join(lines),
                                     revision if revision is not None else 0, spec)
            ws.send(json.dumps({
                "type": "edit", "doc_id": spec.doc, "base_revision": op.base_revision,
                "components": [
                    {"retain": c.n} if isinstance(c, Retain)
                    else {"delete": c.n} if isinstance(c, Delete)
                    else {"insert": c.text}
                    for c in op.components],
            }))
            while True:
                msg = json.loads(ws.recv(timeout=10))
                if msg.get("type") in ("edit-applied", "error"):
                    if msg.get("type") == "error":
                        raise ManifestError(f"edit rejected by server: {msg.get('message')}")
                    break


def run_replay(manifest_path: str | Path, out_dir: str | Path, mode: str = "fast",
               server: str | None = None, seed: int = 0) -> ReplayResult:
    manifest = load_manifest(manifest_path)
    if server:
        return HttpReplayRunner(manifest, out_dir, server, seed).run()
    return ReplayRunner(manifest, out_dir, mode, seed).run()
