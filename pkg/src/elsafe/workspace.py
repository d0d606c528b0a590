"""Workspace collision test for the planar two-link arm.

Links are capsules (segments thickened by ``half_width``). A configuration
is unsafe when the elbow or the tip drops below the floor line, or when a
link capsule touches a circular workspace obstacle. The indicator is
vectorized so it can drive :func:`cover_unsafe_region` directly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _segment_distance(a, b, p):
    """Distance from point ``p`` to segments ``a -> b`` (rows broadcast)."""
    ab = b - a
    t = np.clip(np.einsum("ij,ij->i", p - a, ab) / np.einsum("ij,ij->i", ab, ab), 0.0, 1.0)
    closest = a + t[:, None] * ab
    return np.linalg.norm(p - closest, axis=1)


@dataclass
class TwoLinkWorkspace:
    l1: float = 0.25
    l2: float = 0.4
    half_width: float = 0.035
    floor_y: float = 0.0
    discs: list = field(default_factory=list)  # [(cx, cy, radius)]

    def points(self, qs):
        """Base, elbow and tip positions, each ``(M, 2)``."""
        qs = np.atleast_2d(np.asarray(qs, dtype=float))
        q1, q12 = qs[:, 0], qs[:, 0] + qs[:, 1]
        base = np.zeros((len(qs), 2))
        elbow = self.l1 * np.stack([np.cos(q1), np.sin(q1)], axis=1)
        tip = elbow + self.l2 * np.stack([np.cos(q12), np.sin(q12)], axis=1)
        return base, elbow, tip

    def clearance(self, qs) -> np.ndarray:
        """Signed workspace clearance per configuration; negative means collision."""
        base, elbow, tip = self.points(qs)
        c = np.minimum(elbow[:, 1], tip[:, 1]) - self.floor_y
        for cx, cy, rad in self.discs:
            p = np.broadcast_to(np.array([cx, cy], dtype=float), base.shape)
            reach = rad + self.half_width
            d = np.minimum(_segment_distance(base, elbow, p), _segment_distance(elbow, tip, p))
            c = np.minimum(c, d - reach)
        return c

    def unsafe(self, qs) -> np.ndarray:
        return self.clearance(qs) < 0
