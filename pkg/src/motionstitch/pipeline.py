"""Corpus ingestion, overlapping-pair extraction, split filtering,
probabilistic on-the-fly pairing, and deterministic dataset export."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .compose import LabeledMotion, compose_strict, save_composition
from .errors import EmptyCorpus, Incompatible, SchemaError
from .motion import (
    MotionSequence,
    StandardizationStats,
    load_motion,
    load_stats,
    pack_features,
    save_motion_bin,
    save_motion_json,
    save_stats,
    slice_frames,
)
from .partlab import (
    CompletionClient,
    PartSet,
    PromptKind,
    build_prompt,
    fetch_parts,
    parts_to_response,
)
from .rng import SplitMix64, derive_seed
from .textaug import compose_description

MANIFEST_SCHEMA = "manifest/1"
SEGMENTS_SCHEMA = "segments/1"

MIN_PAIR_FRAMES = 15
MAX_PAIR_FRAMES = 600

# kind used for corpus part-cache entries
CORPUS_PROMPT_KIND = PromptKind.LIST_FEW_SHOT


@dataclass(frozen=True)
class LabeledSegment:
    motion_id: str
    start_frame: int
    end_frame: int
    action: str
    parts: PartSet


class PairKind(Enum):
    REAL = "real"
    SYNTH = "synth"


@dataclass(frozen=True)
class PairSpec:
    """A pair of segment indices into Corpus.segments plus a per-item seed."""

    seg_a: int
    seg_b: int
    kind: PairKind
    seed: int = 0


@dataclass(frozen=True)
class Corpus:
    motions: dict[str, MotionSequence]
    segments: tuple[LabeledSegment, ...]
    part_cache: dict[str, PartSet]
    stats: StandardizationStats | None = None

    def __post_init__(self):
        for seg in self.segments:
            if seg.motion_id not in self.motions:
                raise SchemaError(f"segment references unknown motion {seg.motion_id!r}")
            n = len(self.motions[seg.motion_id])
            if not 0 <= seg.start_frame < seg.end_frame <= n:
                raise SchemaError(
                    f"segment [{seg.start_frame}, {seg.end_frame}) is outside "
                    f"motion {seg.motion_id!r} of length {n}"
                )


def _normalize(action: str) -> str:
    return " ".join(action.lower().split())


def _overlap(a: LabeledSegment, b: LabeledSegment) -> tuple[int, int] | None:
    if a.motion_id != b.motion_id:
        return None
    start = max(a.start_frame, b.start_frame)
    end = min(a.end_frame, b.end_frame)
    return (start, end) if start < end else None


def extract_real_pairs(corpus: Corpus) -> list[PairSpec]:
    """All segment pairs on the same motion with overlapping frame ranges,
    deduplicated by unordered action pair, motion, and overlap range."""
    pairs = []
    seen = set()
    segments = corpus.segments
    for i in range(len(segments)):
        for j in range(i + 1, len(segments)):
            ov = _overlap(segments[i], segments[j])
            if ov is None:
                continue
            key = (
                tuple(sorted((_normalize(segments[i].action), _normalize(segments[j].action)))),
                segments[i].motion_id,
                ov,
            )
            if key in seen:
                continue
            seen.add(key)
            pairs.append(PairSpec(seg_a=i, seg_b=j, kind=PairKind.REAL))
    return pairs


def pair_frames(corpus: Corpus, spec: PairSpec) -> int:
    """Output length of a pair: the overlap for real pairs, the shorter
    segment for synthetic ones."""
    a = corpus.segments[spec.seg_a]
    b = corpus.segments[spec.seg_b]
    if spec.kind is PairKind.REAL:
        ov = _overlap(a, b)
        if ov is None:
            return 0
        return ov[1] - ov[0]
    return min(a.end_frame - a.start_frame, b.end_frame - b.start_frame)


def filter_split(
    corpus: Corpus,
    pairs,
    role: str,
    seen: set | frozenset = frozenset(),
) -> list[PairSpec]:
    """Keep pairs whose length is within [15, 600] frames; the eval split
    additionally drops pairs containing the action 'stand' and pairs whose
    unordered action pair was seen in training."""
    if role not in ("train", "eval"):
        raise ValueError(f"role must be 'train' or 'eval', got {role!r}")
    out = []
    for spec in pairs:
        frames = pair_frames(corpus, spec)
        if not MIN_PAIR_FRAMES <= frames <= MAX_PAIR_FRAMES:
            continue
        if role == "eval":
            actions = (
                _normalize(corpus.segments[spec.seg_a].action),
                _normalize(corpus.segments[spec.seg_b].action),
            )
            if "stand" in actions:
                continue
            if tuple(sorted(actions)) in seen:
                continue
        out.append(spec)
    return out


def seen_action_pairs(corpus: Corpus, pairs) -> set:
    """Unordered normalized action pairs, for eval-split exclusion."""
    return {
        tuple(
            sorted(
                (
                    _normalize(corpus.segments[s.seg_a].action),
                    _normalize(corpus.segments[s.seg_b].action),
                )
            )
        )
        for s in pairs
    }


def single_segments(corpus: Corpus) -> list[int]:
    """Indices of segments that overlap no other segment of their motion."""
    segments = corpus.segments
    overlapping = set()
    for i in range(len(segments)):
        for j in range(i + 1, len(segments)):
            if _overlap(segments[i], segments[j]) is not None:
                overlapping.add(i)
                overlapping.add(j)
    return [i for i in range(len(segments)) if i not in overlapping]


def sample_synth_pairs(
    corpus: Corpus, p: float, seed: int, n_singles: int | None = None
) -> list[PairSpec]:
    """With probability p, pair each single-action segment (in seeded order)
    with a uniformly drawn compatible partner.  Segments with no compatible
    partner stay single.  Deterministic in (corpus, p, seed)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    if not corpus.segments:
        raise EmptyCorpus("corpus has no segments")
    rng = SplitMix64(seed)
    singles = rng.shuffle(single_segments(corpus))
    if n_singles is not None:
        singles = singles[:n_singles]
    out = []
    for draw_index, base_index in enumerate(singles):
        base = corpus.segments[base_index]
        if not rng.bernoulli(p):
            continue
        if not base.parts:
            continue
        candidates = [
            j
            for j, seg in enumerate(corpus.segments)
            if j != base_index and seg.parts and not (base.parts & seg.parts)
        ]
        if not candidates:
            continue
        partner = candidates[rng.randint(len(candidates))]
        out.append(
            PairSpec(
                seg_a=base_index,
                seg_b=partner,
                kind=PairKind.SYNTH,
                seed=derive_seed(seed, draw_index),
            )
        )
    return out


# ---------------------------------------------------------------------------
# dataset export


def _slice_segment(corpus: Corpus, index: int, new_id: str) -> MotionSequence:
    seg = corpus.segments[index]
    return slice_frames(corpus.motions[seg.motion_id], seg.start_frame, seg.end_frame, new_id)


def _build_item(corpus: Corpus, index: int, spec: PairSpec, aug_seed: int):
    """Returns (manifest_entry, motion, composition_or_none, description)."""
    seg_a = corpus.segments[spec.seg_a]
    seg_b = corpus.segments[spec.seg_b]
    if spec.kind is PairKind.REAL:
        ov = _overlap(seg_a, seg_b)
        item_id = f"real-{index:05d}"
        motion = slice_frames(corpus.motions[seg_a.motion_id], ov[0], ov[1], item_id)
        motion = MotionSequence(
            id=item_id,
            fps=motion.fps,
            rotations=motion.rotations,
            translations=motion.translations,
            annotations=(
                (seg_a.action, 0, len(motion)),
                (seg_b.action, 0, len(motion)),
            ),
        )
        entry = {
            "id": item_id,
            "kind": "real",
            "status": "emitted",
            "actions": [seg_a.action, seg_b.action],
            "parents": [seg_a.motion_id],
            "frames": len(motion),
            "file": f"motions/{item_id}.json",
        }
        return entry, motion, None, None

    item_id = f"synth-{index:05d}"
    a = LabeledMotion(
        motion=_slice_segment(corpus, spec.seg_a, f"{seg_a.motion_id}[{seg_a.start_frame}:{seg_a.end_frame}]"),
        action=seg_a.action,
        parts=corpus.part_cache.get(seg_a.action, seg_a.parts),
    )
    b = LabeledMotion(
        motion=_slice_segment(corpus, spec.seg_b, f"{seg_b.motion_id}[{seg_b.start_frame}:{seg_b.end_frame}]"),
        action=seg_b.action,
        parts=corpus.part_cache.get(seg_b.action, seg_b.parts),
    )
    try:
        result = compose_strict(a, b)
    except Incompatible as exc:
        entry = {
            "id": item_id,
            "kind": "synth",
            "status": "skipped",
            "reason": str(exc),
            "actions": [seg_a.action, seg_b.action],
            "parents": [seg_a.motion_id, seg_b.motion_id],
        }
        return entry, None, None, None
    description = compose_description([seg_a.action, seg_b.action], seed=derive_seed(aug_seed, index))
    motion = MotionSequence(
        id=item_id,
        fps=result.motion.fps,
        rotations=result.motion.rotations,
        translations=result.motion.translations,
        annotations=result.motion.annotations,
    )
    result = dataclasses.replace(result, motion=motion)
    entry = {
        "id": item_id,
        "kind": "synth",
        "status": "emitted",
        "actions": [seg_a.action, seg_b.action],
        "parents": [seg_a.motion_id, seg_b.motion_id],
        "frames": len(motion),
        "file": f"motions/{item_id}.json",
        "description": description,
    }
    return entry, motion, result, description


def build_dataset(corpus: Corpus, specs, out_dir, aug_seed: int, workers: int = 1) -> dict:
    """Compose every spec into a motion file (+ provenance sidecar for
    synthetic items) under out_dir/motions, and write a deterministic
    manifest.  Incompatible synthetic specs are skipped and counted."""
    out_dir = Path(out_dir)
    motions_dir = out_dir / "motions"
    motions_dir.mkdir(parents=True, exist_ok=True)
    specs = list(specs)

    def job(args):
        index, spec = args
        return _build_item(corpus, index, spec, aug_seed)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            built = list(pool.map(job, enumerate(specs)))
    else:
        built = [job(item) for item in enumerate(specs)]

    items = []
    emitted = skipped = 0
    from .motion import save_motion_json

    for (entry, motion, result, description), spec in zip(built, specs):
        items.append(entry)
        if entry["status"] == "skipped":
            skipped += 1
            continue
        emitted += 1
        path = out_dir / entry["file"]
        if result is not None:
            seg_a = corpus.segments[spec.seg_a]
            seg_b = corpus.segments[spec.seg_b]
            save_motion_json(motion, path)
            save_composition(
                result._replace_motion(motion) if hasattr(result, "_replace_motion") else result,
                path,
                parent_ids=(seg_a.motion_id, seg_b.motion_id),
                description=description,
            )
        else:
            save_motion_json(motion, path)

    manifest = {
        "schema": MANIFEST_SCHEMA,
        "corpus_hash": corpus_hash(corpus),
        "augmentation_seed": aug_seed,
        "emitted": emitted,
        "skipped": skipped,
        "items": items,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest


def corpus_hash(corpus: Corpus) -> str:
    """Content fingerprint covering motions, segments, parts, and stats."""
    h = hashlib.sha256()
    for mid in sorted(corpus.motions):
        m = corpus.motions[mid]
        h.update(mid.encode("utf-8"))
        h.update(str(m.fps).encode("utf-8"))
        h.update(pack_features(m).tobytes())
    for seg in corpus.segments:
        h.update(
            f"{seg.motion_id}|{seg.start_frame}|{seg.end_frame}|{seg.action}".encode("utf-8")
        )
        h.update(",".join(sorted(p.value for p in seg.parts)).encode("utf-8"))
    for action in sorted(corpus.part_cache):
        h.update(action.encode("utf-8"))
        h.update(",".join(sorted(p.value for p in corpus.part_cache[action])).encode("utf-8"))
    if corpus.stats is not None:
        h.update(corpus.stats.mean.tobytes())
        h.update(corpus.stats.std.tobytes())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# corpus directory I/O
#
# Layout: motions/*.bin|*.json, segments.json, parts_cache/ (completion-cache
# entries, one per action), stats.json.


def save_corpus(corpus: Corpus, directory) -> None:
    directory = Path(directory)
    motions_dir = directory / "motions"
    motions_dir.mkdir(parents=True, exist_ok=True)
    for mid in sorted(corpus.motions):
        save_motion_bin(corpus.motions[mid], motions_dir / f"{mid}.bin")
    segments_payload = {
        "schema": SEGMENTS_SCHEMA,
        "segments": [
            {
                "motion_id": seg.motion_id,
                "start_frame": seg.start_frame,
                "end_frame": seg.end_frame,
                "action": seg.action,
            }
            for seg in corpus.segments
        ],
    }
    (directory / "segments.json").write_text(
        json.dumps(segments_payload, indent=1, sort_keys=True) + "\n", encoding="utf-8"
    )
    cache = CompletionClient(cache_dir=directory / "parts_cache", offline=True)
    from .partlab import build_prompt

    for action in sorted(corpus.part_cache):
        cache.write_cache(
            CORPUS_PROMPT_KIND,
            action,
            prompt=build_prompt(action, CORPUS_PROMPT_KIND),
            response=parts_to_response(corpus.part_cache[action]),
            timestamp=0.0,
        )
    if corpus.stats is not None:
        save_stats(corpus.stats, directory / "stats.json")


def load_corpus(directory) -> Corpus:
    directory = Path(directory)
    motions_dir = directory / "motions"
    if not motions_dir.is_dir():
        raise SchemaError(f"{directory}: missing motions/ directory")
    motions = {}
    for path in sorted(motions_dir.iterdir()):
        if path.suffix not in (".json", ".bin"):
            continue
        m = load_motion(path)
        motions[m.id] = m
    segments_path = directory / "segments.json"
    try:
        payload = json.loads(segments_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read {segments_path}: {exc}") from exc
    if payload.get("schema") != SEGMENTS_SCHEMA:
        raise SchemaError(f"{segments_path}: expected schema {SEGMENTS_SCHEMA!r}")
    client = CompletionClient(cache_dir=directory / "parts_cache", offline=True)
    part_cache: dict[str, PartSet] = {}
    segments = []
    for raw in payload["segments"]:
        action = raw["action"]
        if action not in part_cache:
            part_cache[action] = fetch_parts(action, CORPUS_PROMPT_KIND, client)
        segments.append(
            LabeledSegment(
                motion_id=raw["motion_id"],
                start_frame=int(raw["start_frame"]),
                end_frame=int(raw["end_frame"]),
                action=action,
                parts=part_cache[action],
            )
        )
    stats = None
    if (directory / "stats.json").exists():
        stats = load_stats(directory / "stats.json")
    return Corpus(motions=motions, segments=tuple(segments), part_cache=part_cache, stats=stats)
