"""Positional metrics (APE/AVE families) over forward-kinematics joint
trajectories, plus the embedding-similarity score, report formatting, and
embedding file/provider plumbing."""

from __future__ import annotations

import json
import shlex
import subprocess
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    LengthMismatch,
    MissingEmbedding,
    SchemaError,
    TooShort,
    ZeroVector,
)
from .geometry import NUM_JOINTS, Skeleton, default_skeleton, forward_kinematics
from .motion import MotionSequence

VARIANTS = ("root", "traj", "mean_local", "mean_global")

EMBEDDING_DIM_DEFAULT = 256


def joint_trajectory(motion: MotionSequence, skeleton: Skeleton | None = None) -> np.ndarray:
    """(F, 22, 3) world joint positions for every frame."""
    skeleton = default_skeleton() if skeleton is None else skeleton
    return forward_kinematics(skeleton, motion.pose_matrices(), motion.translations)


def _check_pair(gen: np.ndarray, gt: np.ndarray, variant: str, min_frames: int):
    gen = np.asarray(gen, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if gen.ndim != 3 or gen.shape[1:] != (NUM_JOINTS, 3):
        raise LengthMismatch(f"trajectories must be (F, {NUM_JOINTS}, 3), got {gen.shape}")
    if gen.shape != gt.shape:
        raise LengthMismatch(f"trajectory shapes differ: {gen.shape} vs {gt.shape}")
    if gen.shape[0] < min_frames:
        raise TooShort(f"need at least {min_frames} frames, got {gen.shape[0]}")
    return gen, gt


def _localize(traj: np.ndarray) -> np.ndarray:
    return traj - traj[:, 0:1, :]


def ape(gen: np.ndarray, gt: np.ndarray, variant: str) -> float:
    """Average positional error.

    root: mean per-frame pelvis distance; traj: the same on (x, y) only;
    mean_global: mean per-frame per-joint distance; mean_local: mean_global
    after subtracting each frame's pelvis position.
    """
    gen, gt = _check_pair(gen, gt, variant, min_frames=1)
    if variant == "root":
        return float(np.linalg.norm(gen[:, 0] - gt[:, 0], axis=-1).mean())
    if variant == "traj":
        return float(np.linalg.norm(gen[:, 0, :2] - gt[:, 0, :2], axis=-1).mean())
    if variant == "mean_local":
        gen, gt = _localize(gen), _localize(gt)
    return float(np.linalg.norm(gen - gt, axis=-1).mean())


def ave(gen: np.ndarray, gt: np.ndarray, variant: str) -> float:
    """Average variance error.

    Per joint, the per-coordinate temporal variance (unbiased, divisor
    F - 1) forms a 3-vector; the score is the mean, over the variant's
    joint set, of the L2 distance between the two variance vectors.
    """
    gen, gt = _check_pair(gen, gt, variant, min_frames=2)
    if variant == "mean_local":
        gen, gt = _localize(gen), _localize(gt)
    var_gen = gen.var(axis=0, ddof=1)  # (22, 3)
    var_gt = gt.var(axis=0, ddof=1)
    if variant == "root":
        return float(np.linalg.norm(var_gen[0] - var_gt[0]))
    if variant == "traj":
        return float(np.linalg.norm(var_gen[0, :2] - var_gt[0, :2]))
    return float(np.linalg.norm(var_gen - var_gt, axis=-1).mean())


def temos_score(f_gt: np.ndarray, f_gen: np.ndarray) -> float:
    """Half-shifted cosine similarity of two embeddings, in [0, 1]."""
    f_gt = np.asarray(f_gt, dtype=np.float64)
    f_gen = np.asarray(f_gen, dtype=np.float64)
    if f_gt.shape != f_gen.shape or f_gt.ndim != 1:
        raise LengthMismatch(f"embeddings must be equal-length vectors, got {f_gt.shape} / {f_gen.shape}")
    n_gt = np.linalg.norm(f_gt)
    n_gen = np.linalg.norm(f_gen)
    if n_gt <= 1e-12 or n_gen <= 1e-12:
        raise ZeroVector("cannot score a zero-norm embedding")
    cos = float(np.dot(f_gt, f_gen) / (n_gt * n_gen))
    return 0.5 * (1.0 + max(-1.0, min(1.0, cos)))


# ---------------------------------------------------------------------------
# embedding sources


def load_embeddings(path, ids) -> dict[str, np.ndarray]:
    """Load requested ids from a JSON map {id: [d floats]}.

    All vectors in the file must share one dimension; every requested id
    must be present."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read embedding file {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise SchemaError(f"{path}: embedding file must be a JSON object")
    dims = set()
    vectors = {}
    for key, value in payload.items():
        vec = np.asarray(value, dtype=np.float64)
        if vec.ndim != 1 or not np.all(np.isfinite(vec)):
            raise SchemaError(f"{path}: embedding {key!r} is not a finite vector")
        dims.add(vec.shape[0])
        vectors[key] = vec
    if len(dims) > 1:
        raise SchemaError(f"{path}: inconsistent embedding dimensions {sorted(dims)}")
    missing = [i for i in ids if i not in vectors]
    if missing:
        raise MissingEmbedding(f"{path}: missing embeddings for ids: {', '.join(missing)}")
    return {i: vectors[i] for i in ids}


def run_embedding_provider(command, motion_paths) -> list[np.ndarray]:
    """Run an external embedding provider.

    Protocol: the command reads one motion-file path per input line and
    writes one whitespace-separated d-vector per output line."""
    argv = shlex.split(command) if isinstance(command, str) else list(command)
    paths = [str(p) for p in motion_paths]
    proc = subprocess.run(
        argv,
        input="".join(p + "\n" for p in paths),
        capture_output=True,
        text=True,
    )
    if proc.returncode != 0:
        raise SchemaError(
            f"embedding provider exited with {proc.returncode}: {proc.stderr[:200]}"
        )
    lines = [line for line in proc.stdout.splitlines() if line.strip()]
    if len(lines) != len(paths):
        raise SchemaError(
            f"embedding provider returned {len(lines)} vectors for {len(paths)} paths"
        )
    vectors = []
    dims = set()
    for line in lines:
        try:
            vec = np.array([float(tok) for tok in line.split()], dtype=np.float64)
        except ValueError as exc:
            raise SchemaError(f"embedding provider wrote a non-numeric line: {exc}") from exc
        dims.add(vec.shape[0])
        vectors.append(vec)
    if len(dims) > 1:
        raise SchemaError(f"embedding provider mixed dimensions {sorted(dims)}")
    return vectors


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class MetricReport:
    ape_root: float
    ape_traj: float
    ape_mean_local: float
    ape_mean_global: float
    ave_root: float
    ave_traj: float
    ave_mean_local: float
    ave_mean_global: float
    temos_score: float | None = None

    def to_dict(self) -> dict:
        out = {
            "ape_root": self.ape_root,
            "ape_traj": self.ape_traj,
            "ape_mean_local": self.ape_mean_local,
            "ape_mean_global": self.ape_mean_global,
            "ave_root": self.ave_root,
            "ave_traj": self.ave_traj,
            "ave_mean_local": self.ave_mean_local,
            "ave_mean_global": self.ave_mean_global,
        }
        if self.temos_score is not None:
            out["temos_score"] = self.temos_score
        return out


def evaluate_pair(
    gen: MotionSequence,
    gt: MotionSequence,
    skeleton: Skeleton | None = None,
    embedding_pair: tuple[np.ndarray, np.ndarray] | None = None,
) -> MetricReport:
    """All APE/AVE variants for a generated/ground-truth motion pair,
    trimmed to the shorter length; the similarity score is included when an
    (f_gt, f_gen) embedding pair is supplied."""
    n = min(len(gen), len(gt))
    traj_gen = joint_trajectory(gen, skeleton)[:n]
    traj_gt = joint_trajectory(gt, skeleton)[:n]
    score = None
    if embedding_pair is not None:
        score = temos_score(embedding_pair[0], embedding_pair[1])
    return MetricReport(
        ape_root=ape(traj_gen, traj_gt, "root"),
        ape_traj=ape(traj_gen, traj_gt, "traj"),
        ape_mean_local=ape(traj_gen, traj_gt, "mean_local"),
        ape_mean_global=ape(traj_gen, traj_gt, "mean_global"),
        ave_root=ave(traj_gen, traj_gt, "root"),
        ave_traj=ave(traj_gen, traj_gt, "traj"),
        ave_mean_local=ave(traj_gen, traj_gt, "mean_local"),
        ave_mean_global=ave(traj_gen, traj_gt, "mean_global"),
        temos_score=score,
    )


def mean_report(reports) -> MetricReport:
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to aggregate")
    scores = [r.temos_score for r in reports if r.temos_score is not None]
    mean_score = float(np.mean(scores)) if len(scores) == len(reports) else None
    mean = lambda key: float(np.mean([getattr(r, key) for r in reports]))
    return MetricReport(
        ape_root=mean("ape_root"),
        ape_traj=mean("ape_traj"),
        ape_mean_local=mean("ape_mean_local"),
        ape_mean_global=mean("ape_mean_global"),
        ave_root=mean("ave_root"),
        ave_traj=mean("ave_traj"),
        ave_mean_local=mean("ave_mean_local"),
        ave_mean_global=mean("ave_mean_global"),
        temos_score=mean_score,
    )


_COLUMNS = [
    ("score", lambda r: r.temos_score),
    ("APE root", lambda r: r.ape_root),
    ("APE traj", lambda r: r.ape_traj),
    ("APE mloc", lambda r: r.ape_mean_local),
    ("APE mglob", lambda r: r.ape_mean_global),
    ("AVE root", lambda r: r.ave_root),
    ("AVE traj", lambda r: r.ave_traj),
    ("AVE mloc", lambda r: r.ave_mean_local),
    ("AVE mglob", lambda r: r.ave_mean_global),
]


def format_report_table(rows: dict[str, MetricReport]) -> str:
    """Aligned text table, one row per id; the score column leads."""
    name_w = max(len("id"), *(len(k) for k in rows)) if rows else 2
    header = "id".ljust(name_w) + "".join(f"  {name:>10}" for name, _ in _COLUMNS)
    lines = [header, "-" * len(header)]
    for key, report in rows.items():
        cells = []
        for _, getter in _COLUMNS:
            value = getter(report)
            cells.append(f"  {'-':>10}" if value is None else f"  {value:>10.4f}")
        lines.append(key.ljust(name_w) + "".join(cells))
    return "\n".join(lines)
