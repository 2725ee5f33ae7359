"""Segment preprocessing and pluggable summarization backends.

Preprocessing clears filler phrases and (optionally) stopwords from each
line while leaving speaker labels untouched, then drops lines with no
content left. The remote backend wraps an external abstractive model; the
mock backend produces a deterministic template so orchestration behavior can
be tested without one.
"""

from __future__ import annotations

import re
import string
import time
from dataclasses import dataclass, field
from importlib import resources

import httpx

from .errors import ValidationError

SUMMARIZATION_FAILED = "[summarization failed]"
NO_CONTENT = "[no content to summarize]"

DEFAULT_FILLERS = (
    "um", "uh", "like", "you know", "I mean", "so", "okay", "well",
    "actually", "basically",
)

_LABEL_RE = re.compile(r"^(?P<label>[^\s:][^:\n]{0,39}):(?P<rest>.*)$")


def load_default_stopwords() -> frozenset[str]:
    text = resources.files("minuteman").joinpath("data/stopwords.txt").read_text("utf-8")
    return frozenset(w.strip().lower() for w in text.splitlines() if w.strip())


@dataclass(frozen=True)
class PreprocessConfig:
    filler_words: tuple[str, ...] = DEFAULT_FILLERS
    remove_stopwords: bool = True
    stopword_list: frozenset[str] = field(default_factory=load_default_stopwords)


def _filler_patterns(fillers: tuple[str, ...]) -> list[re.Pattern]:
    # Longest phrases first so "you know" wins over any single-word overlap.
    ordered = sorted(fillers, key=lambda p: (-len(p.split()), -len(p)))
    # A filler is removed together with the comma that attached it to the
    # sentence: a preceding ", " if present, else a trailing ",".
    return [re.compile(rf"(?:,\s*)?\b{re.escape(p)}\b,?", re.IGNORECASE)
            for p in ordered]


def _split_label(line: str) -> tuple[str | None, str]:
    m = _LABEL_RE.match(line)
    if m:
        return m.group("label").strip(), m.group("rest")
    return None, line


def _clean_content(content: str, patterns: list[re.Pattern],
                   cfg: PreprocessConfig) -> str:
    for pat in patterns:
        content = pat.sub(" ", content)
    tokens = content.split()
    if cfg.remove_stopwords:
        kept = []
        for tok in tokens:
            core = tok.strip(string.punctuation).lower()
            if core and core in cfg.stopword_list:
                continue
            kept.append(tok)
        tokens = kept
    return " ".join(tokens)


def preprocess(segment_text: str, cfg: PreprocessConfig | None = None) -> str:
    """Clean a transcript segment for summarization.

    Runs to a fixpoint: removing a stopword can expose a new filler phrase
    (and vice versa), and idempotency is part of the contract.
    """
    cfg = cfg or PreprocessConfig()
    patterns = _filler_patterns(cfg.filler_words)
    text = segment_text
    for _ in range(10):
        out_lines = []
        for line in text.split("\n"):
            label, rest = _split_label(line)
            content = _clean_content(rest, patterns, cfg)
            if not content:
                continue
            out_lines.append(f"{label}: {content}" if label is not None else content)
        cleaned = "\n".join(out_lines)
        if cleaned == text:
            return cleaned
        text = cleaned
    return text


def collapse_to_line(summary: str) -> str:
    """Summaries land on a single pad line; fold any newlines to spaces."""
    return " ".join(summary.split("\n")).strip()


class MockSummarizerBackend:
    """Deterministic template: speakers + the first content words."""

    def summarize(self, cleaned_text: str) -> str:
        labels: list[str] = []
        words: list[str] = []
        for line in cleaned_text.split("\n"):
            label, rest = _split_label(line)
            if label is not None and label not in labels:
                labels.append(label)
            words.extend(rest.split())
        who = " and ".join(sorted(labels)) if labels else "Participants"
        return f"{who} discuss: {' '.join(words[:8])}".strip()


class RemoteSummarizerBackend:
    """HTTP adapter: POST /summarize {"text"} -> {"summary"}, with retries."""

    def __init__(self, url: str, timeout_s: float = 60.0, retries: int = 3,
                 backoff_s: float = 0.5):
        self.url = url.rstrip("/")
        self.timeout_s = timeout_s
        self.retries = retries
        self.backoff_s = backoff_s

    def summarize(self, cleaned_text: str) -> str:
        attempts = self.retries + 1
        for attempt in range(attempts):
            try:
                resp = httpx.post(f"{self.url}/summarize",
                                  json={"text": cleaned_text},
                                  timeout=self.timeout_s)
                resp.raise_for_status()
                return str(resp.json()["summary"])
            except Exception:
                if attempt + 1 < attempts:
                    time.sleep(self.backoff_s * (2 ** attempt))
        return SUMMARIZATION_FAILED


def make_summarizer_backend(url: str):
    """Build a backend from a SUMM_URL value: ``mock:`` or http(s)."""
    if url.startswith("mock:"):
        return MockSummarizerBackend()
    if url.startswith("http://") or url.startswith("https://"):
        return RemoteSummarizerBackend(url)
    raise ValidationError(f"unsupported SUMM_URL {url!r}")


def summarize_segment(segment_text: str, backend, cfg: PreprocessConfig | None = None) -> str:
    """Preprocess then summarize; total (always returns a usable line)."""
    cleaned = preprocess(segment_text, cfg)
    if not cleaned:
        return NO_CONTENT
    return collapse_to_line(backend.summarize(cleaned))
