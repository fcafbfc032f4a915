"""Token counters.

Counters are plain callables ``str -> int`` registered under a stable id so
corpora can record which counter produced their cached counts.  The default
is a cheap heuristic; exact model tokenizers can be registered by callers.
"""

from __future__ import annotations

import math
from typing import Callable

TokenCounter = Callable[[str], int]


def whitespace_counter(text: str) -> int:
    return len(text.split())


def heuristic_counter(text: str) -> int:
    """max(word count, ceil(utf-8 bytes / 4)); 0 for empty text."""
    if not text:
        return 0
    words = len(text.split())
    return max(words, math.ceil(len(text.encode("utf-8")) / 4))


_REGISTRY: dict[str, TokenCounter] = {
    "whitespace": whitespace_counter,
    "heuristic": heuristic_counter,
}

DEFAULT_COUNTER_ID = "heuristic"


def register_counter(counter_id: str, counter: TokenCounter) -> None:
    _REGISTRY[counter_id] = counter


def get_counter(counter_id: str) -> TokenCounter:
    try:
        return _REGISTRY[counter_id]
    except KeyError:
        raise KeyError(f"unknown token counter: {counter_id!r}") from None


def count_tokens(counter: TokenCounter, text: str) -> int:
    """Apply a counter; deterministic, monotone under concatenation."""
    return counter(text)
