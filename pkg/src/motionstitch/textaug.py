"""Free-form compositional descriptions from action label sets: seeded label
shuffling, conjunction insertion, and rule-based gerund inflection."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .errors import EmptyLabelList, SchemaError, UnknownConjunction
from .rng import SplitMix64

_VOWELS = "aeiou"


@dataclass(frozen=True)
class Conjunction:
    """One template: `infix` joins clauses in place ("A while B-ing");
    `wrapped` joins with a connective and appends a suffix
    ("A and B at the same time", from the text "and ... at the same time")."""

    text: str
    requires_gerund: bool
    placement: str  # "infix" | "wrapped"

    def __post_init__(self):
        if self.placement not in ("infix", "wrapped"):
            raise SchemaError(f"unknown placement {self.placement!r}")
        if not self.text.strip():
            raise SchemaError("conjunction text is empty")


@dataclass(frozen=True)
class ConjunctionTable:
    entries: tuple[Conjunction, ...]

    def __post_init__(self):
        if not self.entries:
            raise SchemaError("conjunction table is empty")

    def get(self, text: str) -> Conjunction:
        for entry in self.entries:
            if entry.text == text:
                return entry
        raise UnknownConjunction(f"conjunction {text!r} is not in the table")


def load_conjunctions(path) -> ConjunctionTable:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read conjunction table {path}: {exc}") from exc
    if not isinstance(payload, list):
        raise SchemaError(f"{path}: conjunction table must be a JSON list")
    entries = []
    for item in payload:
        try:
            entries.append(
                Conjunction(
                    text=item["text"],
                    requires_gerund=bool(item["gerund"]),
                    placement=item["placement"],
                )
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"{path}: malformed conjunction entry: {exc}") from exc
    return ConjunctionTable(entries=tuple(entries))


@lru_cache(maxsize=1)
def default_conjunctions() -> ConjunctionTable:
    with resources.as_file(
        resources.files("motionstitch.data").joinpath("conjunctions.json")
    ) as path:
        return load_conjunctions(path)


@lru_cache(maxsize=1)
def _gerund_exceptions() -> dict[str, str]:
    text = resources.files("motionstitch.data").joinpath("gerund_exceptions.json").read_text()
    return json.loads(text)


def _is_short_vowel_cvc(word: str) -> bool:
    """Monosyllable ending consonant-vowel-consonant ('run', 'sit', 'squat')."""
    w = word.replace("qu", "qw")  # 'u' after 'q' acts as a consonant
    if len(w) < 3:
        return False
    if w[-1] in _VOWELS or w[-2] not in _VOWELS or w[-3] in _VOWELS:
        return False
    return len(re.findall(r"[aeiou]+", w)) == 1


def inflect_gerund(verb_phrase: str) -> str:
    """Inflect the first token of a verb phrase into its -ing form.

    "wave with the right hand" -> "waving with the right hand".  The
    exception table is consulted first; already-inflected phrases pass
    through unchanged, making the function idempotent on its own output.
    """
    tokens = verb_phrase.split()
    if not tokens:
        return verb_phrase
    tokens[0] = _gerund(tokens[0])
    return " ".join(tokens)


def _gerund(word: str) -> str:
    exceptions = _gerund_exceptions()
    if word in exceptions:
        return exceptions[word]
    if word.endswith("ing"):
        return word
    if word.endswith("ie"):
        return word[:-2] + "ying"
    if word.endswith(("ee", "oe", "ye")):
        return word + "ing"
    if word.endswith("e") and len(word) > 1:
        return word[:-1] + "ing"
    if _is_short_vowel_cvc(word) and word[-1] not in "wxy":
        return word + word[-1] + "ing"
    return word + "ing"


def _normalize_label(label: str) -> str:
    return " ".join(label.lower().split())


def _instantiate(conjunction: Conjunction, ordered_labels: list[str]) -> str:
    head = ", ".join(ordered_labels[:-1])
    last = ordered_labels[-1]
    if conjunction.requires_gerund:
        last = inflect_gerund(last)
    if conjunction.placement == "infix":
        return f"{head} {conjunction.text} {last}"
    if "..." in conjunction.text:
        connective, suffix = (part.strip() for part in conjunction.text.split("...", 1))
    else:
        connective, suffix = "and", conjunction.text.strip()
    return f"{head} {connective} {last} {suffix}"


def compose_description(
    labels: list[str], seed: int, table: ConjunctionTable | None = None
) -> str:
    """Seeded free-form description of one or more action labels.

    A single label passes through (normalized); with two or more the
    labels are shuffled and joined by a seed-chosen conjunction, with the
    trailing clause inflected when the conjunction asks for a gerund.
    """
    table = default_conjunctions() if table is None else table
    normalized = [_normalize_label(l) for l in labels]
    if not normalized or any(not l for l in normalized):
        raise EmptyLabelList("labels must be non-empty strings")
    if len(normalized) == 1:
        return normalized[0]
    rng = SplitMix64(seed)
    order = rng.shuffle(list(range(len(normalized))))
    conjunction = table.entries[rng.randint(len(table.entries))]
    return _instantiate(conjunction, [normalized[i] for i in order])


def test_description(labels: list[str], conjunction: str,
                     table: ConjunctionTable | None = None) -> str:
    """Deterministic join used at evaluation time: no shuffling, labels in
    the given order, the named conjunction applied."""
    table = default_conjunctions() if table is None else table
    entry = table.get(conjunction)
    normalized = [_normalize_label(l) for l in labels]
    if not normalized or any(not l for l in normalized):
        raise EmptyLabelList("labels must be non-empty strings")
    if len(normalized) == 1:
        return normalized[0]
    return _instantiate(entry, normalized)
