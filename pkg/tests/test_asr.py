import hashlib
import json

import pytest

import minuteman.asr as asr_mod
from minuteman.asr import (TRANSCRIPTION_FAILED, MockAsrBackend, RemoteAsrBackend,
                           Resequencer, clean_transcript_text, make_asr_backend)
from minuteman.audio import sine_chunk, wav_unwrap, wav_wrap
from minuteman.errors import ValidationError
from minuteman.segmenter import UtteranceAudio


def ua(audio: bytes) -> UtteranceAudio:
    return UtteranceAudio("s1", "t1", audio, 0.0, 1.0, finalize_seq=1)


def test_mock_returns_scripted_text_for_known_fingerprint():
    audio = sine_chunk(440, 8000)
    backend = MockAsrBackend()
    backend.add(audio, "a different DHCP server named care so we can try it")
    assert backend.transcribe(ua(audio)) == \
        "a different DHCP server named care so we can try it"


def test_mock_unknown_audio_gets_hash_prefix():
    audio = sine_chunk(123, 5000)
    expected = f"UNKNOWN-{hashlib.sha256(audio).hexdigest()[:8]}"
    assert MockAsrBackend().transcribe(ua(audio)) == expected


def test_mock_is_deterministic():
    audio = sine_chunk(200, 4000)
    backend = MockAsrBackend({MockAsrBackend.fingerprint(audio): "hello world"})
    assert backend.transcribe(ua(audio)) == backend.transcribe(ua(audio)) == "hello world"


def test_mock_loads_manifest_file(tmp_path):
    audio = sine_chunk(300, 4000)
    manifest = {MockAsrBackend.fingerprint(audio): "from file"}
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(manifest))
    backend = make_asr_backend(f"mock:{path}")
    assert backend.transcribe(ua(audio)) == "from file"


def test_backend_selection():
    assert isinstance(make_asr_backend("mock:"), MockAsrBackend)
    assert isinstance(make_asr_backend("http://asr.internal:9000"), RemoteAsrBackend)
    with pytest.raises(ValidationError):
        make_asr_backend("ftp://nope")


def test_clean_transcript_text_strips_newlines_and_edges():
    assert clean_transcript_text("  hello\nworld \n") == "hello world"
    assert clean_transcript_text("\n\n") == ""


def test_wav_roundtrip():
    pcm = sine_chunk(440, 12000)
    assert wav_unwrap(wav_wrap(pcm)) == pcm


def test_remote_retries_then_sentinel(monkeypatch):
    calls = []

    def failing_post(*args, **kwargs):
        calls.append(args)
        raise ConnectionError("backend down")

    monkeypatch.setattr(asr_mod.httpx, "post", failing_post)
    monkeypatch.setattr(asr_mod.time, "sleep", lambda s: None)
    backend = RemoteAsrBackend("http://asr.internal:9000", retries=3, backoff_s=0.001)
    assert backend.transcribe(ua(b"\x00" * 32000)) == TRANSCRIPTION_FAILED
    assert len(calls) == 4  # first attempt + three retries


def test_remote_recovers_after_transient_failure(monkeypatch):
    attempts = []

    class FakeResponse:
        text = "recovered text"

        def raise_for_status(self):
            return None

    def flaky_post(*args, **kwargs):
        attempts.append(1)
        if len(attempts) < 3:
            raise ConnectionError("blip")
        return FakeResponse()

    monkeypatch.setattr(asr_mod.httpx, "post", flaky_post)
    monkeypatch.setattr(asr_mod.time, "sleep", lambda s: None)
    backend = RemoteAsrBackend("http://asr.internal:9000", backoff_s=0.001)
    assert backend.transcribe(ua(b"\x00" * 32000)) == "recovered text"
    assert len(attempts) == 3


# -- re-sequencing hold-back ---------------------------------------------------


def test_resequencer_releases_in_order():
    rs = Resequencer()
    assert rs.push(2, "b") == []
    assert rs.push(3, "c") == []
    assert rs.push(1, "a") == [(1, "a"), (2, "b"), (3, "c")]
    assert rs.push(4, "d") == [(4, "d")]


def test_resequencer_drops_duplicates():
    rs = Resequencer()
    assert rs.push(1, "a") == [(1, "a")]
    assert rs.push(1, "a-again") == []
    rs.push(3, "c")
    assert rs.push(3, "c-again") == []
    assert rs.push(2, "b") == [(2, "b"), (3, "c")]


def test_discarded_items_still_advance_the_sequence():
    rs = Resequencer()
    released = rs.push(1, {"text": ""})
    assert [seq for seq, _ in released] == [1]
    assert rs.push(2, {"text": "kept"}) == [(2, {"text": "kept"})]
