"""Frame-to-world projection and its inverse.

A pixel ``(u, v)`` is lifted to world millimetres by the fixed chain

    world = pose_rotation @ (sx * u, sy * v, 0) + pose_translation

i.e. plane embedding, then anisotropic pixel scaling, then the rigid pose.
The inverse applies the pose inverse and then the scaling inverse; any
residual along the plane normal beyond ``PLANE_TOL`` means the point does
not belong to the frame it claims to come from.
"""

from __future__ import annotations

import numpy as np

from .datatypes import FrameTransform
from .errors import InvalidInputError, WrongFrameError

PLANE_TOL = 1e-6  # mm, max out-of-plane residual accepted by invert_point


def project_frame(t: FrameTransform, u: float, v: float) -> np.ndarray:
    """Map pixel ``(u, v)`` of frame ``t`` to a world 3-vector in mm."""
    if not (np.isfinite(u) and np.isfinite(v)):
        raise InvalidInputError(f"non-finite pixel coordinates ({u}, {v})")
    sx, sy = t.pixel_spacing
    plane = np.array([sx * u, sy * v, 0.0])
    return t.rotation @ plane + t.translation


def project_frame_many(t: FrameTransform, uv: np.ndarray) -> np.ndarray:
    """Vectorized ``project_frame`` over an (m, 2) pixel array."""
    uv = np.asarray(uv, dtype=float)
    if not np.all(np.isfinite(uv)):
        raise InvalidInputError("non-finite pixel coordinates")
    sx, sy = t.pixel_spacing
    plane = np.column_stack([sx * uv[:, 0], sy * uv[:, 1], np.zeros(len(uv))])
    return plane @ t.rotation.T + t.translation


def invert_point(
    xyz: np.ndarray, t: FrameTransform, plane_tol: float = PLANE_TOL
) -> tuple[float, float]:
    """Recover the pixel ``(u, v)`` that projects to ``xyz`` under ``t``.

    Raises WrongFrameError when the out-of-plane residual exceeds
    ``plane_tol`` mm, which signals corrupted provenance.
    """
    xyz = np.asarray(xyz, dtype=float)
    local = t.rotation.T @ (xyz - t.translation)
    if abs(local[2]) > plane_tol:
        raise WrongFrameError(
            f"point {xyz.tolist()} lies {local[2]:.3e} mm off the plane of "
            f"frame {t.frame_index} (tolerance {plane_tol:g})"
        )
    sx, sy = t.pixel_spacing
    return float(local[0] / sx), float(local[1] / sy)


def invert_point_many(
    t: FrameTransform, xyz: np.ndarray, plane_tol: float = PLANE_TOL
) -> np.ndarray:
    """Vectorized inverse; returns (m, 2) pixels or raises on any off-plane row."""
    xyz = np.asarray(xyz, dtype=float)
    local = (xyz - t.translation) @ t.rotation
    residual = np.abs(local[:, 2])
    if residual.size and residual.max() > plane_tol:
        bad = int(np.argmax(residual))
        raise WrongFrameError(
            f"point {bad} lies {local[bad, 2]:.3e} mm off the plane of frame "
            f"{t.frame_index} (tolerance {plane_tol:g})"
        )
    sx, sy = t.pixel_spacing
    return np.column_stack([local[:, 0] / sx, local[:, 1] / sy])


def axis_angle_rotation(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix about ``axis`` (need not be unit) by ``angle`` rad."""
    axis = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(axis)
    if norm == 0:
        raise InvalidInputError("rotation axis must be non-zero")
    x, y, z = axis / norm
    c, s = np.cos(angle), np.sin(angle)
    cross = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return c * np.eye(3) + s * cross + (1 - c) * np.outer([x, y, z], [x, y, z])
