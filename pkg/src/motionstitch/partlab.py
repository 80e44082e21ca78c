"""Body-part taxonomy, completion-API prompting, response parsing, and
labeling-accuracy scoring.

The taxonomy is six coarse parts.  Prompts offer an eight-word vocabulary
(left/right arm, left/right leg, torso, neck, buttocks, waist); responses
are remapped onto the taxonomy with neck -> torso and waist/buttocks ->
global orientation.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

import requests

from .errors import (
    CacheMiss,
    EmptyAction,
    MissingPrediction,
    SchemaError,
    ServiceUnavailable,
)

API_KEY_ENV = "SINC_COMPLETION_API_KEY"
CACHE_DIR_ENV = "SINC_CACHE_DIR"
DEFAULT_BASE_URL = "https://api.openai.com/v1"
DEFAULT_MODEL = "gpt-3.5-turbo-instruct"


class BodyPart(Enum):
    LEFT_ARM = "left arm"
    RIGHT_ARM = "right arm"
    LEFT_LEG = "left leg"
    RIGHT_LEG = "right leg"
    TORSO = "torso"
    GLOBAL = "global orientation"


PartSet = frozenset  # of BodyPart

ALL_PARTS = frozenset(BodyPart)

# Joint ownership over the 22-joint skeleton.  Joints 1..21 are partitioned
# by the five articulated parts; the pelvis rotation (joint 0) and the root
# translation belong to the global orientation.
PART_JOINTS: dict[BodyPart, frozenset[int]] = {
    BodyPart.GLOBAL: frozenset({0}),
    BodyPart.TORSO: frozenset({3, 6, 9, 12, 15}),
    BodyPart.LEFT_ARM: frozenset({13, 16, 18, 20}),
    BodyPart.RIGHT_ARM: frozenset({14, 17, 19, 21}),
    BodyPart.LEFT_LEG: frozenset({1, 4, 7, 10}),
    BodyPart.RIGHT_LEG: frozenset({2, 5, 8, 11}),
}


def _check_part_joints():
    claimed = [j for part, js in PART_JOINTS.items() if part is not BodyPart.GLOBAL for j in js]
    if sorted(claimed) != list(range(1, 22)):
        raise AssertionError("part joint sets must partition joints 1..21")
    if PART_JOINTS[BodyPart.GLOBAL] != {0}:
        raise AssertionError("global orientation must own exactly the pelvis rotation")


_check_part_joints()


def joints_for(parts: Iterable[BodyPart]) -> frozenset[int]:
    out: set[int] = set()
    for p in parts:
        out |= PART_JOINTS[p]
    return frozenset(out)


class Mark(Enum):
    YES = "yes"
    NO = "no"
    SOMETIMES = "sometimes"


@dataclass(frozen=True)
class PartAnnotation:
    """Ground-truth involvement marks for one action, all six parts marked."""

    action: str
    marks: Mapping[BodyPart, Mark]

    def __post_init__(self):
        if set(self.marks) != ALL_PARTS:
            raise SchemaError(f"annotation for {self.action!r} must mark all six parts")
        object.__setattr__(self, "marks", dict(self.marks))


class PromptKind(Enum):
    FREE_FORM = "freeform"
    LIST_ONLY = "list"
    LIST_FEW_SHOT = "fewshot"


# ---------------------------------------------------------------------------
# Prompt construction.  The few-shot template must reproduce byte-for-byte;
# some lines intentionally carry a trailing space.

PROMPT_VOCAB = (
    "left arm",
    "right arm",
    "left leg",
    "buttocks",
    "waist",
    "right leg",
    "torso",
    "neck",
)

_INSTRUCTION_LINES = [
    "The instructions for this task are to choose ",
    "your answers from the list below:",
    "",
    *PROMPT_VOCAB,
]

_EXAMPLE_LINES = [
    "",
    "Here are some examples of the question and answer ",
    "pairs for this task:",
    "",
    "Question: What are the body parts involved in the",
    "action of: walk forwards?",
    "Answer: right leg",
    "left leg",
    "buttocks",
    "",
    "Question: What are the body parts involved in the",
    "action of: face to the left?",
    "Answer: torso",
    "neck",
    "",
    "Question: What are the body parts involved in the",
    "action of: put headphones over ears?",
    "Answer: right arm",
    "left arm",
    "neck",
    "",
    "Question: What are the body parts involved in the",
    "action of: sit down?",
    "Answer: right leg",
    "left leg",
    "buttocks",
    "waist",
]

_FINAL_QUESTION_LINES = [
    "Question: What are the body parts involved in the ",
    "action of: [ACTION]?",
]

FREE_FORM_TEMPLATE = "List the body parts involved in this action: [ACTION]"
LIST_ONLY_TEMPLATE = "\n".join(_INSTRUCTION_LINES + [""] + _FINAL_QUESTION_LINES)
LIST_FEW_SHOT_TEMPLATE = "\n".join(
    _INSTRUCTION_LINES + _EXAMPLE_LINES + [""] + _FINAL_QUESTION_LINES
)

_TEMPLATES = {
    PromptKind.FREE_FORM: FREE_FORM_TEMPLATE,
    PromptKind.LIST_ONLY: LIST_ONLY_TEMPLATE,
    PromptKind.LIST_FEW_SHOT: LIST_FEW_SHOT_TEMPLATE,
}


def build_prompt(action: str, kind: PromptKind) -> str:
    """Byte-reproducible prompt for (action, kind)."""
    action = action.strip()
    if not action:
        raise EmptyAction("action is empty after trimming whitespace")
    return _TEMPLATES[kind].replace("[ACTION]", action)


# ---------------------------------------------------------------------------
# Response parsing


def _tokenize(text: str) -> list[str]:
    return re.findall(r"[a-z0-9]+", text.lower())


# Remap of the prompt vocabulary onto the six-part taxonomy.
_VOCAB_PARTS: dict[tuple[str, ...], frozenset[BodyPart]] = {
    ("left", "arm"): frozenset({BodyPart.LEFT_ARM}),
    ("right", "arm"): frozenset({BodyPart.RIGHT_ARM}),
    ("left", "leg"): frozenset({BodyPart.LEFT_LEG}),
    ("right", "leg"): frozenset({BodyPart.RIGHT_LEG}),
    ("torso",): frozenset({BodyPart.TORSO}),
    ("neck",): frozenset({BodyPart.TORSO}),
    ("waist",): frozenset({BodyPart.GLOBAL}),
    ("buttocks",): frozenset({BodyPart.GLOBAL}),
}

_PART_BY_NAME = {p.value: p for p in BodyPart}

LookupTable = dict  # phrase tuple -> frozenset[BodyPart]


def load_lookup(path) -> LookupTable:
    """Free-form lookup table: JSON map from an anatomy word or phrase to a
    part name (or list of part names for side-less words like 'arms')."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read lookup table {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise SchemaError(f"{path}: lookup table must be a JSON object")
    table: LookupTable = {}
    for word, target in payload.items():
        names = [target] if isinstance(target, str) else list(target)
        parts = set()
        for name in names:
            if name not in _PART_BY_NAME:
                raise SchemaError(f"{path}: unknown body part {name!r} for word {word!r}")
            parts.add(_PART_BY_NAME[name])
        key = tuple(_tokenize(word))
        if not key:
            raise SchemaError(f"{path}: empty lookup key {word!r}")
        table[key] = frozenset(parts)
    return table


@lru_cache(maxsize=1)
def default_lookup() -> LookupTable:
    with resources.as_file(
        resources.files("motionstitch.data").joinpath("part_lookup.json")
    ) as path:
        return load_lookup(path)


def parse_response(text: str, kind: PromptKind, lookup: LookupTable | None = None) -> PartSet:
    """Map a completion response onto the six-part taxonomy.

    Lowercases, strips punctuation, and scans for the eight vocabulary
    terms (two-word names matched before single words); free-form
    responses additionally consult the anatomy lookup table.  Unmatched
    tokens are ignored; an empty set means the response was unusable.
    """
    phrases = dict(_VOCAB_PARTS)
    if kind is PromptKind.FREE_FORM:
        table = default_lookup() if lookup is None else lookup
        for key, parts in table.items():
            phrases.setdefault(key, parts)
    max_len = max(len(k) for k in phrases)
    tokens = _tokenize(text)
    found: set[BodyPart] = set()
    i = 0
    while i < len(tokens):
        for width in range(min(max_len, len(tokens) - i), 0, -1):
            candidate = tuple(tokens[i : i + width])
            if candidate in phrases:
                found |= phrases[candidate]
                i += width
                break
        else:
            i += 1
    return frozenset(found)


# ---------------------------------------------------------------------------
# Accuracy scoring


@dataclass(frozen=True)
class AccuracyReport:
    per_part: dict[BodyPart, float]
    mean: float


def label_accuracy(
    predictions: Mapping[str, PartSet], annotations: Iterable[PartAnnotation]
) -> AccuracyReport:
    """Score predicted part sets against Yes/No/Sometimes marks.

    Yes counts 1 when the part was selected (else 0), No counts 1 when it
    was not (else 0), Sometimes counts 0.5 regardless.  Per-part accuracy
    is the mean over actions; the report mean averages the six parts.
    """
    annotations = list(annotations)
    if not annotations:
        raise SchemaError("no annotations to score")
    totals = {p: 0.0 for p in BodyPart}
    for ann in annotations:
        if ann.action not in predictions:
            raise MissingPrediction(f"no prediction for action {ann.action!r}")
        selected = predictions[ann.action]
        for part in BodyPart:
            mark = ann.marks[part]
            if mark is Mark.SOMETIMES:
                totals[part] += 0.5
            elif mark is Mark.YES:
                totals[part] += 1.0 if part in selected else 0.0
            else:
                totals[part] += 0.0 if part in selected else 1.0
    per_part = {p: totals[p] / len(annotations) for p in BodyPart}
    mean = sum(per_part.values()) / len(per_part)
    return AccuracyReport(per_part=per_part, mean=mean)


_MARK_KEYS = {
    "left_arm": BodyPart.LEFT_ARM,
    "right_arm": BodyPart.RIGHT_ARM,
    "left_leg": BodyPart.LEFT_LEG,
    "right_leg": BodyPart.RIGHT_LEG,
    "torso": BodyPart.TORSO,
    "global_orientation": BodyPart.GLOBAL,
}


def load_annotations(path) -> list[PartAnnotation]:
    """Annotation file: JSON list of {action, marks: {left_arm: "yes"|...}}."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read annotations {path}: {exc}") from exc
    if not isinstance(payload, list):
        raise SchemaError(f"{path}: annotations must be a JSON list")
    out = []
    for entry in payload:
        try:
            marks_raw = entry["marks"]
            marks = {}
            for key, part in _MARK_KEYS.items():
                marks[part] = Mark(marks_raw[key])
            out.append(PartAnnotation(action=entry["action"], marks=marks))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"{path}: malformed annotation entry: {exc}") from exc
    return out


# ---------------------------------------------------------------------------
# Completion client with on-disk cache


def normalize_action(action: str) -> str:
    return " ".join(action.lower().split())


class CompletionClient:
    """Text-completion client with a JSON file cache.

    Live requests POST the OpenAI text-completion schema ({model, prompt,
    max_tokens, temperature=0}) to `base_url`/completions with the API key
    from the SINC_COMPLETION_API_KEY environment variable.  Offline mode
    serves only from the cache and raises CacheMiss otherwise.  Repeated
    calls for the same (kind, action) never re-query.
    """

    def __init__(
        self,
        cache_dir=None,
        offline: bool = False,
        base_url: str = DEFAULT_BASE_URL,
        model: str = DEFAULT_MODEL,
        api_key: str | None = None,
        max_tokens: int = 64,
        temperature: float = 0.0,
        timeout: float = 30.0,
        min_request_interval: float = 0.0,
    ):
        if cache_dir is None:
            cache_dir = os.environ.get(CACHE_DIR_ENV, ".completion-cache")
        self.cache_dir = Path(cache_dir)
        self.offline = offline
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.max_tokens = max_tokens
        self.temperature = temperature
        self.timeout = timeout
        self.min_request_interval = min_request_interval
        self._write_lock = threading.Lock()
        self._inflight_lock = threading.Lock()
        self._inflight: dict[str, threading.Lock] = {}
        self._last_request = 0.0

    def cache_path(self, kind: PromptKind, action: str) -> Path:
        digest = hashlib.sha256(normalize_action(action).encode("utf-8")).hexdigest()[:16]
        return self.cache_dir / f"{kind.value}-{digest}.json"

    def _read_cache(self, path: Path) -> str | None:
        try:
            entry = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            return None
        except (OSError, json.JSONDecodeError) as exc:
            raise SchemaError(f"corrupt cache entry {path}: {exc}") from exc
        if "response" not in entry:
            raise SchemaError(f"cache entry {path} lacks a 'response' field")
        return entry["response"]

    def write_cache(self, kind: PromptKind, action: str, prompt: str, response: str,
                    timestamp: float | None = None) -> Path:
        path = self.cache_path(kind, action)
        entry = {
            "prompt": prompt,
            "response": response,
            "timestamp": time.time() if timestamp is None else timestamp,
        }
        with self._write_lock:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(entry, indent=1) + "\n", encoding="utf-8")
            tmp.replace(path)
        return path

    def _key_lock(self, key: str) -> threading.Lock:
        with self._inflight_lock:
            return self._inflight.setdefault(key, threading.Lock())

    def complete_action(self, action: str, kind: PromptKind) -> str:
        """Cached completion text for an action prompt."""
        prompt = build_prompt(action, kind)
        path = self.cache_path(kind, action)
        cached = self._read_cache(path)
        if cached is not None:
            return cached
        if self.offline:
            raise CacheMiss(f"offline mode and no cached response for {action!r} ({kind.value})")
        with self._key_lock(str(path)):
            cached = self._read_cache(path)
            if cached is not None:
                return cached
            response = self._request(prompt)
            self.write_cache(kind, action, prompt, response)
            return response

    def _request(self, prompt: str) -> str:
        self._throttle()
        key = self.api_key if self.api_key is not None else os.environ.get(API_KEY_ENV, "")
        body = {
            "model": self.model,
            "prompt": prompt,
            "max_tokens": self.max_tokens,
            "temperature": self.temperature,
        }
        try:
            resp = requests.post(
                f"{self.base_url}/completions",
                json=body,
                headers={"Authorization": f"Bearer {key}"},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise ServiceUnavailable(f"completion request failed: {exc}") from exc
        if resp.status_code != 200:
            raise ServiceUnavailable(
                f"completion endpoint returned {resp.status_code}: {resp.text[:200]}"
            )
        try:
            return resp.json()["choices"][0]["text"]
        except (KeyError, IndexError, ValueError) as exc:
            raise ServiceUnavailable(f"malformed completion response: {exc}") from exc

    def _throttle(self):
        if self.min_request_interval <= 0:
            return
        with self._write_lock:
            wait = self._last_request + self.min_request_interval - time.monotonic()
            if wait > 0:
                time.sleep(wait)
            self._last_request = time.monotonic()


def fetch_parts(
    action: str,
    kind: PromptKind,
    client: CompletionClient,
    lookup: LookupTable | None = None,
) -> PartSet:
    """Prompt (or hit the cache) for an action and parse the response."""
    response = client.complete_action(action, kind)
    return parse_response(response, kind, lookup)


# Canonical response text for a part set: parses back to exactly that set.
_CANONICAL_WORD = {
    BodyPart.LEFT_ARM: "left arm",
    BodyPart.RIGHT_ARM: "right arm",
    BodyPart.LEFT_LEG: "left leg",
    BodyPart.RIGHT_LEG: "right leg",
    BodyPart.TORSO: "torso",
    BodyPart.GLOBAL: "waist",
}

_PART_ORDER = [
    BodyPart.LEFT_ARM,
    BodyPart.RIGHT_ARM,
    BodyPart.LEFT_LEG,
    BodyPart.RIGHT_LEG,
    BodyPart.TORSO,
    BodyPart.GLOBAL,
]


def parts_to_response(parts: PartSet) -> str:
    """Render a part set as vocabulary words, one per line."""
    return "\n".join(_CANONICAL_WORD[p] for p in _PART_ORDER if p in parts)
