"""Domain types: labels, scan geometry, and the columnar labeled cloud."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import EmptyInputError, InvalidInputError, ValidationError

ROTATION_TOL = 1e-9


class BoneLabel(IntEnum):
    """The three bone classes. Codes are stable and serialized as-is."""

    FEMUR = 0
    PATELLA = 1
    TIBIA = 2

    @classmethod
    def from_code(cls, code: int) -> "BoneLabel":
        try:
            return cls(int(code))
        except ValueError:
            raise InvalidInputError(f"unknown bone label code {code!r}") from None

    @classmethod
    def from_name(cls, name: str) -> "BoneLabel":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise InvalidInputError(f"unknown bone label name {name!r}") from None


N_CLASSES = len(BoneLabel)


class Position(IntEnum):
    """Knee flexion positions, ordered from full flexion to full extension."""

    P0 = 0
    P1 = 1
    P2 = 2
    P3 = 3

    @classmethod
    def from_name(cls, name: str) -> "Position":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise InvalidInputError(f"unknown position {name!r}") from None


class ScanKind(IntEnum):
    THOROUGH = 0
    PARTIAL = 1

    @classmethod
    def from_name(cls, name: str) -> "ScanKind":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise InvalidInputError(f"unknown scan kind {name!r}") from None


@dataclass(frozen=True)
class FramePoint:
    """One labeled pixel inside a 2D frame.

    ``is_artifact`` is ground truth and only meaningful for phantom data.
    """

    u: float
    v: float
    label: BoneLabel
    line_id: int
    is_artifact: bool = False

    def validate(self) -> None:
        if not (np.isfinite(self.u) and np.isfinite(self.v)):
            raise InvalidInputError(f"non-finite pixel coordinates ({self.u}, {self.v})")
        if self.u < 0 or self.v < 0:
            raise InvalidInputError(f"negative pixel coordinates ({self.u}, {self.v})")


def rotation_is_valid(rotation: np.ndarray, tol: float = ROTATION_TOL) -> bool:
    """True iff ``rotation`` is orthonormal with determinant +1 within ``tol``."""
    rotation = np.asarray(rotation, dtype=float)
    if rotation.shape != (3, 3) or not np.all(np.isfinite(rotation)):
        return False
    err = np.abs(rotation.T @ rotation - np.eye(3)).max()
    return err <= tol and abs(np.linalg.det(rotation) - 1.0) <= tol


@dataclass(eq=False)
class FrameTransform:
    """Pixel spacing plus the rigid pose lifting a frame plane into world mm."""

    frame_index: int
    pixel_spacing: tuple[float, float]
    rotation: np.ndarray  # (3, 3), orthonormal, det +1
    translation: np.ndarray  # (3,), mm

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=float)
        self.translation = np.asarray(self.translation, dtype=float)

    def validate(self) -> None:
        sx, sy = self.pixel_spacing
        if self.frame_index < 0:
            raise ValidationError(f"negative frame_index {self.frame_index}")
        if not (sx > 0 and sy > 0):
            raise ValidationError(f"pixel spacing must be positive, got ({sx}, {sy})")
        if self.translation.shape != (3,) or not np.all(np.isfinite(self.translation)):
            raise ValidationError("translation must be a finite 3-vector")
        if not rotation_is_valid(self.rotation):
            raise ValidationError(
                f"frame {self.frame_index}: rotation is not orthonormal with det +1"
            )


@dataclass
class ScanFrame:
    transform: FrameTransform
    points: list[FramePoint]


@dataclass
class ScanRecord:
    """An ordered sweep of labeled 2D frames with their world transforms."""

    scan_id: str
    position: Position
    scan_kind: ScanKind
    frames: list[ScanFrame]

    def validate(self) -> None:
        indices = [f.transform.frame_index for f in self.frames]
        if sorted(set(indices)) != indices:
            raise ValidationError("frame_index values must be unique and ascending")
        for frame in self.frames:
            frame.transform.validate()
            for p in frame.points:
                p.validate()

    @property
    def n_points(self) -> int:
        return sum(len(f.points) for f in self.frames)


@dataclass(frozen=True)
class Provenance:
    scan_id: str
    frame_index: int
    u: float
    v: float


@dataclass(frozen=True)
class WorldPoint:
    """A 3D point with its label and 2D origin; element view of LabeledCloud."""

    xyz: tuple[float, float, float]
    label: BoneLabel
    provenance: Provenance
    is_artifact: bool = False
    synthetic: bool = False


@dataclass
class LabeledCloud:
    """Columnar 3D point cloud extracted from one scan.

    ``synthetic`` marks augmentation copies; it is in-memory only and not
    serialized by the on-disk cloud formats.
    """

    source: str
    xyz: np.ndarray  # (n, 3) float64, mm
    labels: np.ndarray  # (n,) uint8 BoneLabel codes
    frame_index: np.ndarray  # (n,) int32
    u: np.ndarray  # (n,) float64
    v: np.ndarray  # (n,) float64
    is_artifact: np.ndarray = field(default=None)  # (n,) bool
    synthetic: np.ndarray = field(default=None)  # (n,) bool

    def __post_init__(self):
        n = len(self.xyz)
        self.xyz = np.asarray(self.xyz, dtype=np.float64).reshape(n, 3)
        self.labels = np.asarray(self.labels, dtype=np.uint8).reshape(n)
        self.frame_index = np.asarray(self.frame_index, dtype=np.int32).reshape(n)
        self.u = np.asarray(self.u, dtype=np.float64).reshape(n)
        self.v = np.asarray(self.v, dtype=np.float64).reshape(n)
        if self.is_artifact is None:
            self.is_artifact = np.zeros(n, dtype=bool)
        if self.synthetic is None:
            self.synthetic = np.zeros(n, dtype=bool)
        self.is_artifact = np.asarray(self.is_artifact, dtype=bool).reshape(n)
        self.synthetic = np.asarray(self.synthetic, dtype=bool).reshape(n)

    def __len__(self) -> int:
        return len(self.xyz)

    def validate(self) -> None:
        if len(self) == 0:
            raise EmptyInputError("cloud has no points")
        if not np.all(np.isfinite(self.xyz)):
            raise ValidationError("cloud coordinates must be finite")
        if not np.all(self.labels < N_CLASSES):
            bad = int(np.argmax(self.labels >= N_CLASSES))
            raise ValidationError(f"point {bad} has unknown label code {self.labels[bad]}")

    def point(self, i: int) -> WorldPoint:
        return WorldPoint(
            xyz=tuple(float(c) for c in self.xyz[i]),
            label=BoneLabel(int(self.labels[i])),
            provenance=Provenance(
                self.source, int(self.frame_index[i]), float(self.u[i]), float(self.v[i])
            ),
            is_artifact=bool(self.is_artifact[i]),
            synthetic=bool(self.synthetic[i]),
        )

    def subset(self, indices: np.ndarray) -> "LabeledCloud":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledCloud(
            source=self.source,
            xyz=self.xyz[idx].copy(),
            labels=self.labels[idx].copy(),
            frame_index=self.frame_index[idx].copy(),
            u=self.u[idx].copy(),
            v=self.v[idx].copy(),
            is_artifact=self.is_artifact[idx].copy(),
            synthetic=self.synthetic[idx].copy(),
        )


def clouds_equal(a: LabeledCloud, b: LabeledCloud) -> bool:
    """Exact (bitwise) equality of two clouds, synthetic markers excluded."""
    return (
        a.source == b.source
        and len(a) == len(b)
        and np.array_equal(a.xyz, b.xyz)
        and np.array_equal(a.labels, b.labels)
        and np.array_equal(a.frame_index, b.frame_index)
        and np.array_equal(a.u, b.u)
        and np.array_equal(a.v, b.v)
        and np.array_equal(a.is_artifact, b.is_artifact)
    )
