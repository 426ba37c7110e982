#!/usr/bin/env python3
"""Generate the bundled sample corpus (assets/tiny_corpus.txt).

The language-model experiments need a ~100k-character plain-text corpus that
can live in the repository. Rather than redistributing a book, this script
writes deterministic template-English: grammatical filler sentences over a
small vocabulary. The output has stable character statistics (lowercase
letters, space, newline, and light punctuation) so character-level models
have real structure to learn, and every symbol appears early enough that a
tail split never sees an unknown character.

Usage: python3 scripts/make_corpus.py [out-path] [target-chars]
"""

import random
import sys

NOUNS = [
    "river", "lantern", "meadow", "harbor", "signal", "garden", "window",
    "valley", "engine", "letter", "bridge", "forest", "market", "anchor",
    "mirror", "orchard", "village", "shadow", "thread", "circuit", "kettle",
    "ledger", "compass", "saddle", "quarry", "archive", "furnace", "hollow",
    "stream", "tower", "cellar", "meridian", "current", "basket", "signal",
    "junction", "paper", "mountain", "winter", "morning", "evening", "storm",
]

ADJS = [
    "quiet", "amber", "distant", "narrow", "steady", "pale", "early",
    "crooked", "gentle", "hollow", "bright", "weathered", "patient", "low",
    "sudden", "familiar", "cold", "slow", "thin", "heavy", "restless",
    "clear", "faded", "long", "small", "grey", "warm", "late", "open",
]

VERBS_S = [
    "turns", "settles", "carries", "follows", "holds", "crosses", "gathers",
    "leans", "drifts", "answers", "measures", "keeps", "waits", "folds",
    "covers", "reaches", "remembers", "marks", "passes", "fills", "climbs",
]

VERBS_PAST = [
    "turned", "settled", "carried", "followed", "held", "crossed",
    "gathered", "leaned", "drifted", "answered", "measured", "kept",
    "waited", "folded", "covered", "reached", "remembered", "marked",
    "passed", "filled", "climbed", "opened", "closed", "returned",
]

ADVERBS = [
    "slowly", "again", "quietly", "at last", "for a while", "by degrees",
    "without a sound", "before dawn", "after the rain", "all afternoon",
]

TEMPLATES = [
    "the {adj} {noun} {verbs} past the {noun2}",
    "a {adj} {noun} {past} {adv}",
    "beyond the {noun}, the {adj} {noun2} {past}",
    "the {noun} {verbs} where the {noun2} {past}",
    "every {noun} {verbs} toward the {adj} {noun2}",
    "nobody {past} the {adj} {noun} {adv}",
    "the {adj} {noun} and the {adj2} {noun2} {past} together",
    "under a {adj} sky the {noun} {past}",
    "it was the {noun} that {past} first",
    "we {past} along the {adj} {noun} {adv}",
    "she {past} the {noun} before the {noun2}",
    "he {past} {adv} and the {noun} {past} too",
    "between the {noun} and the {noun2} lies a {adj} {noun3}",
    "the {noun} was {adj} and the {noun2} was {adj2}",
    "when the {noun} {verbs}, the {noun2} {verbs2}",
]


def sentence(rng):
    t = rng.choice(TEMPLATES)
    return t.format(
        noun=rng.choice(NOUNS),
        noun2=rng.choice(NOUNS),
        noun3=rng.choice(NOUNS),
        adj=rng.choice(ADJS),
        adj2=rng.choice(ADJS),
        verbs=rng.choice(VERBS_S),
        verbs2=rng.choice(VERBS_S),
        past=rng.choice(VERBS_PAST),
        adv=rng.choice(ADVERBS),
    )


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "crates/adaqn/assets/tiny_corpus.txt"
    target = int(sys.argv[2]) if len(sys.argv) > 2 else 100_000
    rng = random.Random(20260815)
    paragraphs = []
    total = 0
    while total < target:
        n_sent = rng.randint(3, 7)
        parts = []
        for _ in range(n_sent):
            s = sentence(rng)
            s = s[0].upper() + s[1:]
            end = rng.choice([".", ".", ".", ".", ";", ","])
            if end in ",;":
                follow = sentence(rng)
                s = s + end + " " + follow + "."
            else:
                s = s + end
            parts.append(s)
        para = " ".join(parts)
        paragraphs.append(para)
        total += len(para) + 2
    text = "\n\n".join(paragraphs) + "\n"
    with open(out, "w") as f:
        f.write(text)
    symbols = sorted(set(text))
    print(f"wrote {len(text)} chars, {len(symbols)} distinct symbols to {out}")
    print("symbols:", "".join(symbols))


if __name__ == "__main__":
    main()
