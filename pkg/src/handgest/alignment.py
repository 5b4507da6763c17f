"""Screen-space hand alignment: crop center, rotation, and scale.

The rotation estimate deliberately avoids the obvious wrist-to-middle-knuckle
vector, which collapses under foreshortening when the fingers point at the
camera. Instead it sums two roughly perpendicular knuckle vectors, middle
MCP -> wrist and index MCP -> pinky MCP; at least one of them keeps most of
its length under any plausible view, so the sum stays usable.

Angles follow atan2(v.x, -v.y) in the y-down pixel frame: 0 means the vector
already points at the image top, and rotating the image by -angle about the
crop center aligns it. Results lie in (-pi, pi].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRotation, DegenerateScale, ShapeMismatch
from .skeleton import INDEX_MCP, MIDDLE_MCP, NUM_KEYPOINTS, PINKY_MCP, WRIST

# Knuckles defining the crop center.
CENTER_KEYPOINTS = (INDEX_MCP, MIDDLE_MCP, PINKY_MCP)

# Knuckles eligible for the scale estimate: every joint except wrist and tips.
SCALE_KEYPOINTS = (1, 2, 3, 5, 6, 7, 9, 10, 11, 13, 14, 15, 17, 18, 19)

EPS_ROTATION_PX = 1e-6
EPS_SCALE_PX = 1e-6


@dataclass(frozen=True)
class AlignmentFrame:
    """Crop parameters derived from one 2D skeleton."""

    center: np.ndarray      # (2,) pixels
    rotation_rad: float     # (-pi, pi], 0 = already upright
    scale_px: float         # > 0


def _check_kp2d(kp2d: np.ndarray) -> np.ndarray:
    kp2d = np.asarray(kp2d, dtype=np.float64)
    if kp2d.shape != (NUM_KEYPOINTS, 2):
        raise ShapeMismatch(f"expected (21, 2) keypoints, got {kp2d.shape}")
    return kp2d


def center_keypoint(kp2d: np.ndarray) -> np.ndarray:
    """Mean of the index, middle, and pinky base knuckles."""
    kp2d = _check_kp2d(kp2d)
    return kp2d[list(CENTER_KEYPOINTS)].mean(axis=0)


def rotation_vector(kp2d: np.ndarray) -> np.ndarray:
    """Sum of the middle-MCP->wrist and index-MCP->pinky-MCP vectors."""
    kp2d = _check_kp2d(kp2d)
    return (kp2d[WRIST] - kp2d[MIDDLE_MCP]) + (kp2d[PINKY_MCP] - kp2d[INDEX_MCP])


def rotation_angle(kp2d: np.ndarray) -> float:
    """Roll of the hand in the image plane, in (-pi, pi].

    Raises DegenerateRotation when the rotation vector is shorter than
    EPS_ROTATION_PX (the two component vectors cancelled out).
    """
    v = rotation_vector(kp2d)
    n = float(np.hypot(v[0], v[1]))
    if n < EPS_ROTATION_PX:
        raise DegenerateRotation(f"rotation vector norm {n:.3e} px below {EPS_ROTATION_PX:.0e}")
    angle = float(np.arctan2(v[0], -v[1]))
    if angle <= -np.pi:
        angle += 2.0 * np.pi
    return angle


def alignment_scale(kp2d: np.ndarray) -> float:
    """Distance from the crop center to the farthest non-tip knuckle.

    Tips are excluded so a curled fist and an open palm yield comparable
    crops. Raises DegenerateScale below EPS_SCALE_PX.
    """
    kp2d = _check_kp2d(kp2d)
    center = kp2d[list(CENTER_KEYPOINTS)].mean(axis=0)
    d = np.linalg.norm(kp2d[list(SCALE_KEYPOINTS)] - center, axis=1)
    scale = float(d.max())
    if scale < EPS_SCALE_PX:
        raise DegenerateScale(f"knuckle spread {scale:.3e} px below {EPS_SCALE_PX:.0e}")
    return scale


def compute_alignment(kp2d: np.ndarray) -> AlignmentFrame:
    """Center, rotation, and scale for one skeleton in a single call."""
    return AlignmentFrame(
        center=center_keypoint(kp2d),
        rotation_rad=rotation_angle(kp2d),
        scale_px=alignment_scale(kp2d),
    )


def roll_normalize_3d(kp3d: np.ndarray, kp2d: np.ndarray) -> np.ndarray:
    """Rotate kp3d about the optical axis by -rotation_angle(kp2d).

    Keeps the 3D keypoints consistent with an image whose content was
    rotated upright: the rotation is rigid (pairwise distances preserved)
    and projecting the result reproduces the derotated 2D keypoints.
    Propagates DegenerateRotation from the angle estimate.
    """
    kp3d = np.asarray(kp3d, dtype=np.float64)
    if kp3d.shape != (NUM_KEYPOINTS, 3):
        raise ShapeMismatch(f"expected (21, 3) keypoints, got {kp3d.shape}")
    theta = rotation_angle(kp2d)
    c, s = np.cos(-theta), np.sin(-theta)
    rz = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return kp3d @ rz.T
