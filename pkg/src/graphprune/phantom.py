"""Synthetic knee-like scan generator with ground-truth artifact flags.

Geometry lives in a "rig" coordinate system: frames are planes orthogonal
to the rig x axis (the probe sweep direction), and each bone is a smooth
dome-shaped height field z(x, y) sliced by those planes into one labeled
line per frame. The three domes are stacked along z (tibia, femur, patella
bottom to top) with offsets computed so that the euclidean distance between
any two clean points of different classes stays above the configured gap.

Two kinds of ground-truth-flagged artifacts are injected per frame:

* floaters, sampled inside the slab between two adjacent bone surfaces and
  labeled as one of the two bounding bones: the failure geometry the filter
  is meant to remove;
* outliers, clean surface points displaced in-plane by a couple of
  millimetres: same-class noise that mixes no neighbourhoods.

A fixed per-position rigid transform plus a small random per-frame in-plane
tilt turn rig coordinates into world coordinates, so frame poses are
non-trivial and the projection/inversion chain is exercised for real.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .datatypes import (
    BoneLabel,
    FramePoint,
    FrameTransform,
    LabeledCloud,
    Position,
    ScanFrame,
    ScanKind,
    ScanRecord,
)
from .errors import EmptyInputError, InvalidConfigError, InvalidInputError
from .rng import STREAM_PHANTOM, stream
from .transforms import axis_angle_rotation, project_frame_many

# Plane-embedding permutation: pixel u runs along rig y, pixel v along rig z,
# the plane normal along the sweep axis x.
_PERM = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])

# In-plane offsets keeping all pixel coordinates positive.
_Y0 = -40.0
_Z0 = -40.0

_LATERAL_HALF = 12.0  # mm, half extent of femur/tibia lines in rig y
_PATELLA_HALF_X = 7.0
_PATELLA_HALF_Y = 6.0
_EDGE_MARGIN = 0.8  # mm kept clear of the lateral domain edges


@dataclass(frozen=True)
class PhantomConfig:
    """Parameters of one synthetic scan.

    ``artifact_rate`` is the expected artifact fraction of the emitted
    points; ``floater_share`` splits it between inter-bone floaters and
    near-surface outliers.
    """

    position: Position
    scan_kind: ScanKind = ScanKind.THOROUGH
    n_frames: int = 40
    points_per_line: int = 24
    artifact_rate: float = 0.06
    floater_share: float = 0.5
    noise_scale: float = 0.5  # mm, outlier displacement unit
    surface_noise: float = 0.08  # mm, sigma of on-surface depth noise
    gap_mm: float = 4.0  # guaranteed clean inter-class distance
    pixel_spacing: tuple[float, float] = (0.25, 0.25)
    frame_step_mm: float = 1.0
    partial_frame_keep: float = 0.45
    partial_line_keep: float = 0.75

    def validate(self) -> None:
        if self.n_frames < 1:
            raise InvalidConfigError("n_frames must be >= 1")
        if self.points_per_line < 1:
            raise InvalidConfigError("points_per_line must be >= 1")
        if not 0.0 <= self.artifact_rate < 1.0:
            raise InvalidConfigError("artifact_rate must be in [0, 1)")
        if not 0.0 <= self.floater_share <= 1.0:
            raise InvalidConfigError("floater_share must be in [0, 1]")
        if self.noise_scale < 0 or self.surface_noise < 0:
            raise InvalidConfigError("noise scales must be non-negative")
        if self.gap_mm <= 0:
            raise InvalidConfigError("gap_mm must be positive")
        if self.pixel_spacing[0] <= 0 or self.pixel_spacing[1] <= 0:
            raise InvalidConfigError("pixel_spacing must be positive")
        if self.frame_step_mm <= 0:
            raise InvalidConfigError("frame_step_mm must be positive")
        if not 0.0 < self.partial_frame_keep <= 1.0:
            raise InvalidConfigError("partial_frame_keep must be in (0, 1]")
        if not 0.0 < self.partial_line_keep <= 1.0:
            raise InvalidConfigError("partial_line_keep must be in (0, 1]")


@dataclass(frozen=True)
class _Dome:
    """Downward dome z = z0 - ax*(x-xc)^2 - ay*(y-yc)^2 over a rectangle."""

    label: BoneLabel
    z0: float
    ax: float
    ay: float
    xc: float
    yc: float
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    def sag(self, x, y):
        return self.ax * (x - self.xc) ** 2 + self.ay * (y - self.yc) ** 2

    def height(self, x, y):
        return self.z0 - self.sag(x, y)

    def covers_x(self, x: float, margin: float = 0.5) -> bool:
        return self.x_lo + margin <= x <= self.x_hi - margin

    def max_slope(self) -> float:
        gx = 2 * self.ax * max(abs(self.x_lo - self.xc), abs(self.x_hi - self.xc))
        gy = 2 * self.ay * max(abs(self.y_lo - self.yc), abs(self.y_hi - self.yc))
        return math.hypot(gx, gy)


def _grid_max(f, x_lo, x_hi, y_lo, y_hi, step=0.25) -> float:
    xs = np.arange(x_lo, x_hi + step, step)
    ys = np.arange(y_lo, y_hi + step, step)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return float(f(gx, gy).max())


def _build_surfaces(cfg: PhantomConfig) -> list[_Dome]:
    """Tibia, femur, patella (bottom to top), offsets sized from the gap."""
    width = cfg.n_frames * cfg.frame_step_mm
    pos = int(cfg.position)
    half = _LATERAL_HALF

    tibia = _Dome(
        BoneLabel.TIBIA, 0.0, 0.010, 0.012, 0.5 * width, 0.0, 0.0, width, -half, half
    )
    femur_shape = _Dome(
        BoneLabel.FEMUR,
        0.0,
        0.008,
        0.016,
        (0.5 - 0.01 * pos) * width,
        0.0,
        0.0,
        width,
        -half,
        half,
    )
    pat_xc = (0.30 + 0.10 * pos) * width
    pat_yc = 1.2 * (pos - 1.5)
    patella_shape = _Dome(
        BoneLabel.PATELLA,
        0.0,
        0.020,
        0.025,
        pat_xc,
        pat_yc,
        pat_xc - _PATELLA_HALF_X,
        pat_xc + _PATELLA_HALF_X,
        pat_yc - _PATELLA_HALF_Y,
        pat_yc + _PATELLA_HALF_Y,
    )

    noise_clip = 3.0 * cfg.surface_noise

    def clearance(lower: _Dome, upper: _Dome) -> float:
        s = max(lower.max_slope(), upper.max_slope())
        return cfg.gap_mm * math.sqrt(1.0 + s * s) * 1.05 + 2.0 * noise_clip

    # femur must clear tibia pointwise over the shared (full) domain
    c_ft = clearance(tibia, femur_shape)
    femur_z0 = c_ft + _grid_max(
        lambda x, y: tibia.height(x, y) + femur_shape.sag(x, y),
        femur_shape.x_lo,
        femur_shape.x_hi,
        femur_shape.y_lo,
        femur_shape.y_hi,
    )
    femur = _Dome(
        femur_shape.label,
        femur_z0,
        femur_shape.ax,
        femur_shape.ay,
        femur_shape.xc,
        femur_shape.yc,
        femur_shape.x_lo,
        femur_shape.x_hi,
        femur_shape.y_lo,
        femur_shape.y_hi,
    )

    # patella must clear femur pointwise over the patella domain
    c_pf = clearance(femur, patella_shape)
    patella_z0 = c_pf + _grid_max(
        lambda x, y: femur.height(x, y) + patella_shape.sag(x, y),
        patella_shape.x_lo,
        patella_shape.x_hi,
        patella_shape.y_lo,
        patella_shape.y_hi,
    )
    patella = _Dome(
        patella_shape.label,
        patella_z0,
        patella_shape.ax,
        patella_shape.ay,
        patella_shape.xc,
        patella_shape.yc,
        patella_shape.x_lo,
        patella_shape.x_hi,
        patella_shape.y_lo,
        patella_shape.y_hi,
    )
    return [tibia, femur, patella]


def _global_pose(position: Position) -> tuple[np.ndarray, np.ndarray]:
    pos = int(position)
    rotation = axis_angle_rotation((0.25, 0.85, 0.45), 0.05 + 0.04 * pos)
    translation = np.array([3.0 * pos - 2.0, 28.0, -10.0 + 2.0 * pos])
    return rotation, translation


def _rx(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _clipped_normal(rng, sigma: float, clip: float, size: int) -> np.ndarray:
    if sigma == 0:
        return np.zeros(size)
    return np.clip(rng.normal(0.0, sigma, size), -clip, clip)


def gen_phantom(cfg: PhantomConfig, seed: int) -> ScanRecord:
    """Generate one deterministic synthetic scan for ``(cfg, seed)``."""
    cfg.validate()
    rng = stream(seed, STREAM_PHANTOM, int(cfg.position), int(cfg.scan_kind))
    surfaces = _build_surfaces(cfg)
    by_label = {s.label: s for s in surfaces}
    slabs = [(surfaces[0], surfaces[1]), (surfaces[1], surfaces[2])]  # (lower, upper)
    g_rot, g_trans = _global_pose(cfg.position)
    sx, sy = cfg.pixel_spacing

    partial = cfg.scan_kind == ScanKind.PARTIAL
    frame_ids = np.arange(cfg.n_frames)
    if partial:
        n_keep = max(1, round(cfg.partial_frame_keep * cfg.n_frames))
        frame_ids = np.sort(rng.choice(cfg.n_frames, size=n_keep, replace=False))

    scan_id = f"{cfg.position.name}-{cfg.scan_kind.name.lower()}-s{seed}"
    frames: list[ScanFrame] = []
    for f in frame_ids:
        x_f = (int(f) + 0.5) * cfg.frame_step_mm
        theta = rng.uniform(-0.10, 0.10)
        plane_rot = _rx(theta) @ _PERM
        t_rig = np.array([x_f, _Y0, _Z0])
        pose_rot = g_rot @ plane_rot
        pose_trans = g_rot @ t_rig + g_trans
        transform = FrameTransform(int(f), cfg.pixel_spacing, pose_rot, pose_trans)

        present = [s for s in surfaces if s.covers_x(x_f)]
        kept = []
        for s in sorted(present, key=lambda s: int(s.label)):
            if partial and rng.random() >= cfg.partial_line_keep:
                continue
            kept.append(s)
        if not kept and present:
            kept = [min(present, key=lambda s: int(s.label))]

        # clean bone lines, one per kept surface, in rig (y, z) coordinates
        line_yz: list[tuple[BoneLabel, np.ndarray, np.ndarray]] = []
        for s in kept:
            base = np.linspace(
                s.y_lo + _EDGE_MARGIN, s.y_hi - _EDGE_MARGIN, cfg.points_per_line
            )
            spacing = base[1] - base[0] if cfg.points_per_line > 1 else 1.0
            ys = base + rng.uniform(-0.3, 0.3, cfg.points_per_line) * spacing
            zs = s.height(x_f, ys) + _clipped_normal(
                rng, cfg.surface_noise, 3.0 * cfg.surface_noise, cfg.points_per_line
            )
            line_yz.append((s.label, ys, zs))

        # artifacts: rate r of the final frame implies r/(1-r) per clean point
        n_true = cfg.points_per_line * len(line_yz)
        n_art = 0
        if cfg.artifact_rate > 0 and n_true > 0:
            n_art = int(
                rng.binomial(n_true, cfg.artifact_rate / (1.0 - cfg.artifact_rate))
            )
        art_yz: list[tuple[BoneLabel, float, float]] = []
        kept_labels = [lbl for lbl, _, _ in line_yz]
        for _ in range(n_art):
            want_floater = rng.random() < cfg.floater_share
            placed = False
            if want_floater:
                choices = []
                for lower, upper in slabs:
                    if not upper.covers_x(x_f):
                        continue
                    eligible = [
                        s.label for s in (lower, upper) if s.label in kept_labels
                    ]
                    if eligible:
                        choices.append((lower, upper, eligible))
                if choices:
                    lower, upper, eligible = choices[
                        int(rng.integers(len(choices)))
                    ]
                    y_lo = max(lower.y_lo, upper.y_lo) + 1.0
                    y_hi = min(lower.y_hi, upper.y_hi) - 1.0
                    y = rng.uniform(y_lo, y_hi)
                    z_bot = lower.height(x_f, y)
                    z_top = upper.height(x_f, y)
                    z = z_bot + rng.uniform(0.3, 0.7) * (z_top - z_bot)
                    label = eligible[int(rng.integers(len(eligible)))]
                    art_yz.append((label, y, z))
                    placed = True
            if not placed:
                # outlier: displace a random clean point in-plane
                src = int(rng.integers(n_true))
                label, ys, zs = line_yz[src // cfg.points_per_line]
                j = src % cfg.points_per_line
                phi = rng.uniform(0.0, 2.0 * math.pi)
                mag = cfg.noise_scale * rng.uniform(1.5, 3.5)
                art_yz.append(
                    (label, ys[j] + mag * math.cos(phi), zs[j] + mag * math.sin(phi))
                )

        # map rig (y, z) to pixels: the plane is x = x_f exactly, so the
        # in-plane solve against the rig pose is exact
        def to_pixels(ys, zs):
            pts = np.column_stack([np.full(len(ys), x_f), ys, zs])
            local = (pts - t_rig) @ plane_rot
            return local[:, 0] / sx, local[:, 1] / sy

        points: list[FramePoint] = []
        for label, ys, zs in line_yz:
            us, vs = to_pixels(ys, zs)
            for uu, vv in zip(us, vs):
                points.append(FramePoint(float(uu), float(vv), label, int(label), False))
        if art_yz:
            labels = [a[0] for a in art_yz]
            us, vs = to_pixels(
                np.array([a[1] for a in art_yz]), np.array([a[2] for a in art_yz])
            )
            for label, uu, vv in zip(labels, us, vs):
                points.append(FramePoint(float(uu), float(vv), label, int(label), True))
        for p in points:
            if p.u < 0 or p.v < 0:
                raise InvalidInputError(
                    "phantom produced a negative pixel coordinate; "
                    "plane offsets are too small for this geometry"
                )
        frames.append(ScanFrame(transform, points))

    record = ScanRecord(scan_id, cfg.position, cfg.scan_kind, frames)
    record.validate()
    return record


def build_cloud(scan: ScanRecord) -> LabeledCloud:
    """Lift every frame point of ``scan`` to world mm, frame-major order."""
    if scan.n_points == 0:
        raise EmptyInputError(f"scan {scan.scan_id!r} has no points")
    xyz, labels, fidx, us, vs, art = [], [], [], [], [], []
    for frame in scan.frames:
        if not frame.points:
            continue
        uv = np.array([[p.u, p.v] for p in frame.points])
        xyz.append(project_frame_many(frame.transform, uv))
        labels.extend(int(p.label) for p in frame.points)
        fidx.extend([frame.transform.frame_index] * len(frame.points))
        us.extend(p.u for p in frame.points)
        vs.extend(p.v for p in frame.points)
        art.extend(p.is_artifact for p in frame.points)
    cloud = LabeledCloud(
        source=scan.scan_id,
        xyz=np.vstack(xyz),
        labels=np.array(labels, dtype=np.uint8),
        frame_index=np.array(fidx, dtype=np.int32),
        u=np.array(us),
        v=np.array(vs),
        is_artifact=np.array(art, dtype=bool),
    )
    cloud.validate()
    return cloud
