"""Detection decoding, greedy NMS and occupancy counting."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import OUTPUTS_PER_ANCHOR

DEFAULT_CONF_THRESHOLD = 0.4
DEFAULT_IOU_THRESHOLD = 0.5
HEAD_CLASS_ID = 0


@dataclass(frozen=True)
class DetectionBox:
    """Box centre/size normalised to the unit square."""

    cx: float
    cy: float
    w: float
    h: float
    confidence: float
    class_id: int = HEAD_CLASS_ID

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        if not (self.w > 0 and self.h > 0):
            raise ValueError("box width and height must be positive")

    def corners(self) -> tuple[float, float, float, float]:
        return (self.cx - self.w / 2, self.cy - self.h / 2, self.cx + self.w / 2, self.cy + self.h / 2)

    @property
    def area(self) -> float:
        return self.w * self.h


def iou(a: DetectionBox, b: DetectionBox) -> float:
    ax1, ay1, ax2, ay2 = a.corners()
    bx1, by1, bx2, by2 = b.corners()
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return min(1.0, inter / union)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def _logit(p: float) -> float:
    if p <= 0:
        return -math.inf
    if p >= 1:
        return math.inf
    return math.log(p / (1.0 - p))


def decode(
    heads: Sequence[np.ndarray],
    anchors: Sequence[np.ndarray],
    strides: Sequence[int],
    input_side: int,
    conf_threshold: float = DEFAULT_CONF_THRESHOLD,
) -> list[DetectionBox]:
    """YOLOv5-style decode of raw head logits into normalised boxes.

    Each head is (A * 6, H, W) real-valued logits. Confidence is the sigmoid of
    the objectness logit; the comparison is done in logit space so a threshold
    of 1.0 never admits a box even when the float sigmoid rounds to 1.
    """
    if not 0.0 < conf_threshold <= 1.0:
        raise ValueError(f"conf_threshold {conf_threshold} outside (0, 1]")
    cut = _logit(conf_threshold)
    boxes: list[DetectionBox] = []
    for logits, anc, stride in zip(heads, anchors, strides):
        logits = np.asarray(logits, dtype=np.float64)
        anc = np.asarray(anc, dtype=np.float64).reshape(-1, 2)
        n_anchor = len(anc)
        _, gh, gw = logits.shape
        p = logits.reshape(n_anchor, OUTPUTS_PER_ANCHOR, gh, gw)
        obj = p[:, 4]
        keep = obj >= cut
        if not keep.any():
            continue
        gy, gx = np.mgrid[0:gh, 0:gw]
        sxy = _sigmoid(p[:, 0:2])
        swh = _sigmoid(p[:, 2:4])
        cx = (sxy[:, 0] * 2 - 0.5 + gx) * stride
        cy = (sxy[:, 1] * 2 - 0.5 + gy) * stride
        bw = (swh[:, 0] * 2) ** 2 * anc[:, 0, None, None]
        bh = (swh[:, 1] * 2) ** 2 * anc[:, 1, None, None]
        conf = _sigmoid(obj)
        for a, i, j in zip(*np.nonzero(keep)):
            x1 = min(max(float(cx[a, i, j] - bw[a, i, j] / 2) / input_side, 0.0), 1.0)
            y1 = min(max(float(cy[a, i, j] - bh[a, i, j] / 2) / input_side, 0.0), 1.0)
            x2 = min(max(float(cx[a, i, j] + bw[a, i, j] / 2) / input_side, 0.0), 1.0)
            y2 = min(max(float(cy[a, i, j] + bh[a, i, j] / 2) / input_side, 0.0), 1.0)
            if x2 <= x1 or y2 <= y1:
                continue
            boxes.append(DetectionBox(
                (x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1, float(conf[a, i, j]),
            ))
    return boxes


def nms(boxes: Sequence[DetectionBox], iou_threshold: float = DEFAULT_IOU_THRESHOLD) -> list[DetectionBox]:
    """Greedy suppression in descending confidence; ties keep input order.

    A box is dropped when its IoU with an already kept box is >= the threshold,
    so every surviving pair has IoU strictly below it.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold {iou_threshold} outside [0, 1]")
    order = sorted(range(len(boxes)), key=lambda i: (-boxes[i].confidence, i))
    kept: list[DetectionBox] = []
    for i in order:
        b = boxes[i]
        if all(iou(b, k) < iou_threshold for k in kept):
            kept.append(b)
    return kept


def count_occupancy(boxes: Sequence[DetectionBox]) -> int:
    return len(boxes)
