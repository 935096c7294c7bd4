"""Batch dataset construction: augmentation, replacement sampling, and the
minority-coverage guarantee probability.

Sampling preserves the raw point density of the cloud (uniform draws with
replacement), so class frequencies inside a batch mirror the cloud. The
guarantee probability quantifies the chance that every one of ``n_batches``
batches contains at least ``k`` minority-class points, which is what makes
a k-regular graph over the minority class meaningful in every batch.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datatypes import BoneLabel, LabeledCloud, N_CLASSES
from .errors import (
    EmptyInputError,
    InvalidConfigError,
    InvalidInputError,
    ParseError,
    SchemaError,
)
from .rng import STREAM_AUGMENT, STREAM_BATCH, stream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AugmentConfig:
    """Minority-doubling augmentation parameters, all in mm."""

    target_label: BoneLabel = BoneLabel.PATELLA
    jitter_sigma: float = 0.25
    jitter_clip: float = 1.25
    translation_range: float = 2.5

    def validate(self) -> None:
        if self.jitter_sigma < 0 or self.translation_range < 0:
            raise InvalidConfigError("jitter_sigma and translation_range must be >= 0")
        if self.jitter_clip <= 0:
            raise InvalidConfigError("jitter_clip must be positive")


def default_augment_config(
    cloud: LabeledCloud, target_label: BoneLabel = BoneLabel.PATELLA
) -> AugmentConfig:
    """Scale-relative defaults: sigma 1%, clip 5%, translation 10% of the
    cloud normalization scale."""
    _, _, scale = normalize(cloud.xyz)
    return AugmentConfig(
        target_label=target_label,
        jitter_sigma=0.01 * scale,
        jitter_clip=0.05 * scale,
        translation_range=0.1 * scale,
    )


@dataclass(frozen=True)
class SampleConfig:
    n_clouds: int = 500
    n_points: int = 1024
    seed: int = 0

    def validate(self) -> None:
        if self.n_clouds < 1:
            raise InvalidConfigError("n_clouds must be >= 1")
        if self.n_points < 2:
            raise InvalidConfigError("n_points must be >= 2")
        if self.seed < 0:
            raise InvalidConfigError("seed must be non-negative")


@dataclass
class BatchSample:
    """Indices of one with-replacement draw plus its normalization."""

    cloud_ref: str
    indices: np.ndarray  # (n_points,) int64, duplicates allowed
    centroid: np.ndarray  # (3,)
    scale: float


def normalize(points: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Centre on the centroid and scale by the max centroid distance.

    Returns (normalized, centroid, scale); scale falls back to 1 for a
    degenerate (single-location) input so the map is always invertible.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or len(points) == 0:
        raise EmptyInputError("normalize requires at least one point")
    centroid = points.mean(axis=0)
    shifted = points - centroid
    scale = float(np.linalg.norm(shifted, axis=1).max())
    if scale == 0.0:
        scale = 1.0
    return shifted / scale, centroid, scale


def denormalize(points: np.ndarray, centroid: np.ndarray, scale: float) -> np.ndarray:
    return np.asarray(points, dtype=np.float64) * scale + np.asarray(centroid)


def augment_minority(cloud: LabeledCloud, cfg: AugmentConfig, seed: int) -> LabeledCloud:
    """Append one jittered, jointly translated copy of every target-class point.

    Original points are preserved verbatim; copies inherit label and
    provenance and carry the ``synthetic`` marker. The translation is one
    shared uniform 3-vector per call, the jitter is per-point Gaussian with
    its euclidean norm clipped to ``jitter_clip``.
    """
    cfg.validate()
    cloud.validate()
    mask = cloud.labels == int(cfg.target_label)
    m = int(mask.sum())
    if m == 0:
        logger.warning(
            "cloud %s has no %s points; augmentation is a no-op",
            cloud.source,
            cfg.target_label.name,
        )
        return cloud.subset(np.arange(len(cloud)))
    rng = stream(seed, STREAM_AUGMENT)
    translation = rng.uniform(-cfg.translation_range, cfg.translation_range, 3)
    jitter = rng.normal(0.0, cfg.jitter_sigma, (m, 3)) if cfg.jitter_sigma > 0 else np.zeros((m, 3))
    norms = np.linalg.norm(jitter, axis=1)
    over = norms > cfg.jitter_clip
    if np.any(over):
        jitter[over] *= (cfg.jitter_clip / norms[over])[:, None]
    src = np.nonzero(mask)[0]
    new_xyz = cloud.xyz[src] + jitter + translation
    return LabeledCloud(
        source=cloud.source,
        xyz=np.vstack([cloud.xyz, new_xyz]),
        labels=np.concatenate([cloud.labels, cloud.labels[src]]),
        frame_index=np.concatenate([cloud.frame_index, cloud.frame_index[src]]),
        u=np.concatenate([cloud.u, cloud.u[src]]),
        v=np.concatenate([cloud.v, cloud.v[src]]),
        is_artifact=np.concatenate([cloud.is_artifact, cloud.is_artifact[src]]),
        synthetic=np.concatenate([cloud.synthetic, np.ones(m, dtype=bool)]),
    )


def sample_batches(cloud: LabeledCloud, cfg: SampleConfig) -> list[BatchSample]:
    """Draw ``n_clouds`` batches of ``n_points`` uniform with-replacement
    indices; each batch has its own derived stream, so the result does not
    depend on generation order."""
    cfg.validate()
    if len(cloud) == 0:
        raise EmptyInputError("cannot sample from an empty cloud")
    n = len(cloud)
    batches = []
    for b in range(cfg.n_clouds):
        rng = stream(cfg.seed, STREAM_BATCH, b)
        idx = rng.integers(0, n, size=cfg.n_points, dtype=np.int64)
        _, centroid, scale = normalize(cloud.xyz[idx])
        batches.append(BatchSample(cloud.source, idx, centroid, scale))
    return batches


def class_histogram(cloud: LabeledCloud) -> dict[BoneLabel, int]:
    """Exact per-label point counts; accepts empty clouds."""
    counts = np.bincount(cloud.labels, minlength=N_CLASSES)
    return {label: int(counts[int(label)]) for label in BoneLabel}


def _logsumexp(terms: np.ndarray) -> float:
    m = float(terms.max())
    return m + math.log(float(np.exp(terms - m).sum()))


def _log_binom_pmf(n: int, p: float, i: np.ndarray) -> np.ndarray:
    i = i.astype(np.float64)
    return (
        math.lgamma(n + 1)
        - np.array([math.lgamma(x + 1) for x in i])
        - np.array([math.lgamma(n - x + 1) for x in i])
        + i * math.log(p)
        + (n - i) * math.log1p(-p)
    )


def min_class_guarantee(p_minority: float, n_points: int, k: int, n_batches: int) -> float:
    """Probability that all ``n_batches`` draws of ``n_points`` points contain
    at least ``k`` minority points, i.e. P[Binomial(n, p) >= k] ** B.

    The per-batch tail is evaluated in log space on whichever side of the
    distribution has less mass, so the result stays accurate for extreme
    parameters.
    """
    if not 0.0 <= p_minority <= 1.0 or not math.isfinite(p_minority):
        raise InvalidInputError(f"p_minority must be a probability, got {p_minority}")
    if n_points < 1 or n_batches < 1:
        raise InvalidInputError("n_points and n_batches must be >= 1")
    if not 0 <= k <= n_points:
        raise InvalidInputError(f"k must be in [0, n_points], got {k}")
    if k == 0:
        return 1.0
    if p_minority == 0.0:
        return 0.0
    if p_minority == 1.0:
        return 1.0
    n, p = n_points, float(p_minority)
    if k - 1 < n * p:
        # lower tail P[X <= k-1] is the small side
        low = _logsumexp(_log_binom_pmf(n, p, np.arange(k)))
        log_q = math.log1p(-math.exp(low)) if low < 0 else -math.inf
    else:
        log_q = _logsumexp(_log_binom_pmf(n, p, np.arange(k, n + 1)))
    if log_q == -math.inf:
        return 0.0
    return math.exp(n_batches * log_q)


def solve_guarantee_probability(
    target: float, n_points: int, k: int, n_batches: int, tol: float = 1e-12
) -> float:
    """Bisect for the minority fraction p whose guarantee equals ``target``.

    The guarantee is monotone non-decreasing in p, so plain bisection on
    (0, 1) converges; raises if the target is outside the attainable range.
    """
    if not 0.0 < target < 1.0:
        raise InvalidInputError("target must be strictly between 0 and 1")
    lo, hi = 0.0, 1.0
    if min_class_guarantee(1.0, n_points, k, n_batches) < target:
        raise InvalidInputError("target unreachable for these (n, k, B)")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if min_class_guarantee(mid, n_points, k, n_batches) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


BATCH_INDEX_FILE = "index.json"
_BATCH_FORMAT = "graphprune-batches"


def save_batches(directory, batches: list[BatchSample]) -> None:
    """Serialize a batch set to ``directory``: one index column file per
    batch plus an index manifest holding the normalizations."""
    if not batches:
        raise EmptyInputError("no batches to save")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, b in enumerate(batches):
        name = f"batch_{i:05d}.csv"
        lines = ["index"] + [str(int(j)) for j in b.indices]
        (directory / name).write_text("\n".join(lines) + "\n", encoding="utf-8")
        entries.append(
            {
                "file": name,
                "cloud_ref": b.cloud_ref,
                "centroid": [float(c) for c in b.centroid],
                "scale": float(b.scale),
            }
        )
    doc = {"format": _BATCH_FORMAT, "version": 1, "batches": entries}
    (directory / BATCH_INDEX_FILE).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_batches(directory) -> list[BatchSample]:
    directory = Path(directory)
    index_path = directory / BATCH_INDEX_FILE
    try:
        doc = json.loads(index_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=index_path, line=exc.lineno) from None
    if not isinstance(doc, dict) or doc.get("format") != _BATCH_FORMAT:
        raise SchemaError(f"{index_path}: not a {_BATCH_FORMAT} index")
    batches = []
    for entry in doc["batches"]:
        fpath = directory / entry["file"]
        rows = fpath.read_text(encoding="utf-8").splitlines()
        if not rows or rows[0] != "index":
            raise ParseError("expected 'index' header", path=fpath, line=1)
        try:
            idx = np.array([int(r) for r in rows[1:] if r.strip()], dtype=np.int64)
        except ValueError as exc:
            raise ParseError(f"bad index value: {exc}", path=fpath) from None
        batches.append(
            BatchSample(
                cloud_ref=entry["cloud_ref"],
                indices=idx,
                centroid=np.array(entry["centroid"], dtype=float),
                scale=float(entry["scale"]),
            )
        )
    return batches
