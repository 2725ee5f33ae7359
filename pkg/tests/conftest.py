import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from minuteman.codec import pack
from minuteman.service import TOPIC_UTTERANCE_TEXT, MinutemanService, VirtualClock


@pytest.fixture
def clock():
    return VirtualClock()


@pytest.fixture
def service(clock):
    return MinutemanService(clock=clock)


def push_utterance(svc: MinutemanService, session_id: str, utt_seq: int,
                   speaker: str, text: str, end_time_s: float | None = None,
                   drain: bool = True) -> None:
    """Inject a transcribed utterance directly onto the text topic."""
    end = float(utt_seq) if end_time_s is None else end_time_s
    svc.bus.publish(TOPIC_UTTERANCE_TEXT, session_id, pack({
        "session_id": session_id, "utt_seq": utt_seq, "track_id": speaker,
        "speaker_label": speaker, "text": text,
        "start_time_s": max(0.0, end - 1.0), "end_time_s": end,
    }))
    if drain:
        svc.drain()


def words(n: int, stem: str = "w") -> str:
    """A text of exactly n whitespace-separated words."""
    return " ".join(f"{stem}{i}" for i in range(n))
