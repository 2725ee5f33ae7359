"""PCM audio constants and helpers.

All audio in the pipeline is signed 16-bit little-endian mono PCM at
16 kHz, cut into exactly one-second chunks (16000 samples / 32000 bytes).
Timing is derived purely from chunk sequence numbers, never wall clock.
"""

from __future__ import annotations

import io
import math
import wave

import numpy as np

SAMPLE_RATE = 16000
SAMPLE_WIDTH = 2  # s16le
CHUNK_SAMPLES = SAMPLE_RATE  # one second
CHUNK_BYTES = CHUNK_SAMPLES * SAMPLE_WIDTH
CHUNK_SECONDS = 1.0
FULL_SCALE = 32768.0


def rms_dbfs(pcm: bytes) -> float:
    """RMS level of an s16le buffer in dBFS; -inf for digital silence."""
    samples = np.frombuffer(pcm, dtype="<i2").astype(np.float64) / FULL_SCALE
    if samples.size == 0:
        return -math.inf
    mean_square = float(np.mean(samples * samples))
    if mean_square == 0.0:
        return -math.inf
    return 10.0 * math.log10(mean_square)


def sine_chunk(freq_hz: float, amplitude: int, seconds: float = 1.0) -> bytes:
    """Synthesize an s16le sine tone (amplitude in int16 units)."""
    n = int(round(seconds * SAMPLE_RATE))
    t = np.arange(n, dtype=np.float64) / SAMPLE_RATE
    samples = np.clip(np.rint(amplitude * np.sin(2 * math.pi * freq_hz * t)),
                      -32768, 32767).astype("<i2")
    return samples.tobytes()


def silence(seconds: float = 1.0) -> bytes:
    return bytes(int(round(seconds * SAMPLE_RATE)) * SAMPLE_WIDTH)


def wav_wrap(pcm: bytes) -> bytes:
    """Wrap raw pipeline PCM in a WAV container (for remote ASR backends)."""
    buf = io.BytesIO()
    with wave.open(buf, "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(SAMPLE_WIDTH)
        w.setframerate(SAMPLE_RATE)
        w.writeframes(pcm)
    return buf.getvalue()


def wav_unwrap(data: bytes) -> bytes:
    """Extract raw PCM from a WAV container, validating the pipeline format."""
    with wave.open(io.BytesIO(data), "rb") as w:
        if w.getnchannels() != 1 or w.getsampwidth() != SAMPLE_WIDTH \
                or w.getframerate() != SAMPLE_RATE:
            raise ValueError("expected 16 kHz mono s16 WAV")
        return w.readframes(w.getnframes())
