"""High-precision single-token pattern mining and pattern-based triage."""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, NamedTuple

from .corpus import Corpus, Label, tokenize

# fixed human-derived keyword baseline
MAT_PATTERNS = ("todo", "fixme", "hack", "xxx")

DEFAULT_THRESHOLD = 0.8
DEFAULT_EXPONENT = 4


class UndefinedFitnessError(ValueError):
    """Fitness is undefined for a pattern with zero positives."""


@dataclass(frozen=True)
class PatternStats:
    """Occurrence statistics of one token pattern on a labeled corpus."""

    pattern: str
    positives: int
    true_positives: int

    def __post_init__(self):
        if not 0 <= self.true_positives <= self.positives:
            raise ValueError(
                f"need 0 <= TP <= P, got TP={self.true_positives} P={self.positives}"
            )

    @property
    def precision(self) -> float:
        if self.positives == 0:
            raise UndefinedFitnessError(f"pattern {self.pattern!r} has no positives")
        return self.true_positives / self.positives


def fitness(stats: PatternStats, exponent: int = DEFAULT_EXPONENT) -> float:
    """TP^N / P^(N-1): precision^N weighted by frequency."""
    if stats.positives == 0:
        raise UndefinedFitnessError(f"pattern {stats.pattern!r} has no positives")
    return stats.true_positives**exponent / stats.positives ** (exponent - 1)


@dataclass
class PatternSet:
    """Mined patterns in discovery order, with their mining parameters."""

    patterns: list[PatternStats] = field(default_factory=list)
    threshold: float = DEFAULT_THRESHOLD
    exponent: int = DEFAULT_EXPONENT

    @property
    def tokens(self) -> list[str]:
        return [p.pattern for p in self.patterns]

    def __len__(self) -> int:
        return len(self.patterns)

    def __iter__(self):
        return iter(self.patterns)


def _token_sets(corpus: Corpus) -> list[set[str]]:
    return [set(tokenize(c.text)) for c in corpus.comments]


def pattern_stats(corpus: Corpus, pattern: str) -> PatternStats:
    """Count comments containing the token (P) and SATD ones among them (TP)."""
    positives = 0
    true_positives = 0
    for comment in corpus.comments:
        if comment.label is Label.UNKNOWN:
            raise ValueError("pattern statistics need a fully labeled corpus")
        if pattern in set(tokenize(comment.text)):
            positives += 1
            if comment.label is Label.SATD:
                true_positives += 1
    return PatternStats(pattern=pattern, positives=positives, true_positives=true_positives)


def mine_patterns(
    corpus: Corpus,
    threshold: float = DEFAULT_THRESHOLD,
    exponent: int = DEFAULT_EXPONENT,
) -> PatternSet:
    """Iteratively extract the strongest token patterns from a labeled corpus.

    Each round scores every token of the remaining comments with
    TP^N / P^(N-1), takes the argmax (ties: higher precision, then
    lexicographically smaller token), stops as soon as the winner's precision
    drops below the threshold, and otherwise records the winner and removes
    every comment containing it.
    """
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    if exponent < 1:
        raise ValueError(f"exponent must be >= 1, got {exponent}")

    remaining: list[tuple[set[str], bool]] = []
    for comment in corpus.comments:
        if comment.label is Label.UNKNOWN:
            raise ValueError("pattern mining needs a fully labeled corpus")
        remaining.append((set(tokenize(comment.text)), comment.label is Label.SATD))

    result = PatternSet(threshold=threshold, exponent=exponent)
    while remaining:
        positives: dict[str, int] = {}
        true_positives: dict[str, int] = {}
        for tokens, is_satd in remaining:
            for tok in tokens:
                positives[tok] = positives.get(tok, 0) + 1
                if is_satd:
                    true_positives[tok] = true_positives.get(tok, 0) + 1
        if not positives:
            break

        # exact-rational comparison so ties resolve identically on any platform
        best_token = None
        best_key: tuple[Fraction, Fraction] | None = None
        for tok, p in positives.items():
            tp = true_positives.get(tok, 0)
            key = (Fraction(tp**exponent, p ** (exponent - 1)), Fraction(tp, p))
            if (
                best_key is None
                or key > best_key
                or (key == best_key and tok < best_token)
            ):
                best_token = tok
                best_key = key

        p = positives[best_token]
        tp = true_positives.get(best_token, 0)
        if tp / p < threshold:
            break
        result.patterns.append(
            PatternStats(pattern=best_token, positives=p, true_positives=tp)
        )
        remaining = [entry for entry in remaining if best_token not in entry[0]]
    return result


class PatternPartition(NamedTuple):
    easy_satd: list[int]
    remainder: list[int]


def classify_by_patterns(corpus: Corpus, patterns: PatternSet | Iterable[str]) -> PatternPartition:
    """Split comment ids into pattern matches (auto-classified SATD) and the rest.

    Membership is token-exact against the tokenized text; both id lists keep
    corpus order.
    """
    tokens = set(patterns.tokens if isinstance(patterns, PatternSet) else patterns)
    easy: list[int] = []
    rest: list[int] = []
    for comment in corpus.comments:
        if tokens and not tokens.isdisjoint(tokenize(comment.text)):
            easy.append(comment.id)
        else:
            rest.append(comment.id)
    return PatternPartition(easy_satd=easy, remainder=rest)
