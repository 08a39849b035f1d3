"""Grade-level readability scoring used to accept releveled text.

The score maps word, sentence, and syllable counts to a school grade:

    grade = 0.39 * (words / sentences) + 11.8 * (syllables / words) - 15.59

The counting rules are deliberately simple and fully documented so that
hand-computed oracles agree with the code:

* words: maximal runs of letters, digits, and apostrophes.
* sentences: segments split at '.', '!' or '?' followed by whitespace or
  end-of-text; only segments containing at least one word count. Text with
  no terminator counts as one sentence. Abbreviations are not special-cased
  (determinism over precision).
* syllables per word: contiguous vowel groups (a, e, i, o, u, y) in the
  letters of the word; a word-final 'e' group is dropped unless that would
  reach zero; minimum 1 per word.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import EmptyText

_WORD_RE = re.compile(r"[A-Za-z0-9']+")
_VOWEL_GROUP_RE = re.compile(r"[aeiouy]+")
_TERMINATORS = ".!?"


@dataclass(frozen=True)
class ReadabilityStats:
    words: int
    sentences: int
    syllables: int
    fkg: float


def fkg_from_counts(words: int, sentences: int, syllables: int) -> float:
    """The grade formula over raw counts; defined for words and sentences >= 1."""
    if words < 1 or sentences < 1:
        raise EmptyText("grade undefined without at least one word and one sentence")
    return 0.39 * (words / sentences) + 11.8 * (syllables / words) - 15.59


def split_words(text: str) -> list[str]:
    return [t for t in _WORD_RE.findall(text) if any(c.isalnum() for c in t)]


def count_syllables(word: str) -> int:
    letters = "".join(c for c in word.lower() if c.isalpha())
    groups = _VOWEL_GROUP_RE.findall(letters)
    count = len(groups)
    if letters.endswith("e") and count > 1:
        count -= 1
    return max(count, 1)


def split_sentences(text: str) -> list[str]:
    """Segments at terminator+whitespace/EOF boundaries; may include empties."""
    segments: list[str] = []
    start = 0
    n = len(text)
    for i, ch in enumerate(text):
        if ch in _TERMINATORS and (i + 1 == n or text[i + 1].isspace()):
            segments.append(text[start : i + 1])
            start = i + 1
    if start < n:
        segments.append(text[start:])
    return segments


def readability(text: str) -> ReadabilityStats:
    """Count words/sentences/syllables and compute the grade score.

    Raises:
        EmptyText: no words in the input.
    """
    words = split_words(text)
    if not words:
        raise EmptyText("no words in text")
    sentences = sum(1 for seg in split_sentences(text) if split_words(seg))
    sentences = max(sentences, 1)
    syllables = sum(count_syllables(w) for w in words)
    return ReadabilityStats(
        words=len(words),
        sentences=sentences,
        syllables=syllables,
        fkg=fkg_from_counts(len(words), sentences, syllables),
    )
