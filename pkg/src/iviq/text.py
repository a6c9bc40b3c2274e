"""Tokenization shared by the synthetic provider and ranking plumbing."""

from __future__ import annotations

import string

SEPARATOR = " [SEP] "

# Framing vocabulary of queries and question templates. The synthetic
# embedder drops these so bag-of-token vectors track content words only;
# slot *values* (e.g. "street", "red") are never in this set.
STOPWORDS = frozenset("""
a an and are as at be been being by did do does doing for from had has have
he her hers him his how i if in into is it its me my no not of on or our
ours she so than that the their theirs them then there these they this those
to was we were what when where which while who whom whose why will with you
your yours yes
video videos object objects other others half first second
""".split())

_PUNCT_TO_SPACE = str.maketrans({c: " " for c in string.punctuation})


def tokenize(text: str, *, drop_stopwords: bool = False) -> list[str]:
    """Lowercase tokens of ``text``.

    ``[SEP]`` markers are removed before punctuation stripping so they never
    leak a literal "sep" token.
    """
    lowered = text.lower().replace("[sep]", " ")
    cleaned = lowered.translate(_PUNCT_TO_SPACE)
    tokens = cleaned.split()
    if drop_stopwords:
        tokens = [t for t in tokens if t not in STOPWORDS]
    return tokens
