"""
Simplex equiangular tight frame anchors.

M = sqrt(K/(K-1)) * U (I_K - 11^T / K), with U a dim x K matrix of orthonormal columns
obtained from a seeded Gaussian draw. Column r of M is anchor v_r; distinct anchors have
cosine -1/(K-1).
"""

from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel

from app.core.errors import GeometryError


@dataclass(frozen=True, eq=False)
class AnchorFrame:
    dim: int
    r_max: int
    seed: int
    anchors: np.ndarray  # r_max x dim, read-only

    def anchor(self, index: int) -> np.ndarray:
        return self.anchors[index]

    def fingerprint(self) -> bytes:
        return self.anchors.tobytes()


class FrameReport(BaseModel):
    r_max: int
    dim: int
    max_norm_deviation: float
    max_cosine_deviation: float
    target_cosine: float


def generate_etf(r_max: int, dim: int = 64, seed: int = 0) -> AnchorFrame:
    if r_max < 2:
        raise GeometryError(f"An ETF needs at least two anchors, got r_max={r_max}")
    if dim < r_max:
        raise GeometryError(f"Simplex ETF with {r_max} anchors needs dim >= r_max, got dim={dim}")

    rng = np.random.default_rng(seed)
    u, _ = np.linalg.qr(rng.standard_normal((dim, r_max)))
    k = float(r_max)
    centering = np.eye(r_max) - np.ones((r_max, r_max)) / k
    m = np.sqrt(k / (k - 1.0)) * (u @ centering)
    anchors = m.T
    anchors = anchors / np.linalg.norm(anchors, axis=1, keepdims=True)
    anchors = np.ascontiguousarray(anchors)
    anchors.setflags(write=False)
    return AnchorFrame(dim=dim, r_max=r_max, seed=seed, anchors=anchors)


def frame_report(frame: AnchorFrame) -> FrameReport:
    gram = frame.anchors @ frame.anchors.T
    target = -1.0 / (frame.r_max - 1)
    off_diag = gram[~np.eye(frame.r_max, dtype=bool)]
    return FrameReport(
        r_max=frame.r_max,
        dim=frame.dim,
        max_norm_deviation=float(np.max(np.abs(np.linalg.norm(frame.anchors, axis=1) - 1.0))),
        max_cosine_deviation=float(np.max(np.abs(off_diag - target))),
        target_cosine=target,
    )
