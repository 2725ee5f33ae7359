"""Minuteman: real-time semi-automatic meeting minuting.

Per-speaker audio streams become an editable live transcript and an editable
live summary. Summary points are generated automatically at a configurable
word density, can be requested on demand for any transcript selection, are
re-generated when users correct the transcript, and freeze permanently once
a user edits them.
"""

from .bus import Bus, BusMessage, Subscription
from .doc import EditOp, Line, LineDoc, SegmentRange, word_count
from .errors import MinutemanError
from .service import MinutemanService
from .summarizer import PreprocessConfig, preprocess

__all__ = [
    "Bus",
    "BusMessage",
    "EditOp",
    "Line",
    "LineDoc",
    "MinutemanError",
    "MinutemanService",
    "PreprocessConfig",
    "SegmentRange",
    "Subscription",
    "preprocess",
    "word_count",
]

__version__ = "0.1.0"
