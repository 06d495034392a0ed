"""Slow, obviously-correct reference implementations used as test oracles.

None of these share code with the package beyond its data types.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

# --- demosaic ---

def mirror(i: int, n: int) -> int:
    """Reflect without repeating the edge sample: -1 -> 1, n -> n - 2."""
    while i < 0 or i >= n:
        i = -i if i < 0 else 2 * (n - 1) - i
    return i


def cfa_colour(y: int, x: int, pattern: str) -> int:
    layout = {
        "RGGB": ((0, 1), (1, 2)),
        "BGGR": ((2, 1), (1, 0)),
        "GRBG": ((1, 0), (2, 1)),
        "GBRG": ((1, 2), (0, 1)),
    }[pattern]
    return layout[y % 2][x % 2]


def demosaic_oracle(mosaic: np.ndarray, pattern: str = "RGGB") -> np.ndarray:
    """Each missing colour is the mean of that colour's samples in the mirrored 3x3 window."""
    h, w = mosaic.shape
    out = np.zeros((3, h, w), dtype=np.uint8)
    for y in range(h):
        for x in range(w):
            own = cfa_colour(y, x, pattern)
            for c in range(3):
                if c == own:
                    out[c, y, x] = mosaic[y, x]
                    continue
                vals = []
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        yy, xx = mirror(y + dy, h), mirror(x + dx, w)
                        # skip the centre and only take nearest neighbours of colour c
                        if (dy, dx) != (0, 0) and cfa_colour(y + dy, x + dx, pattern) == c:
                            vals.append(float(mosaic[yy, xx]))
                out[c, y, x] = int(np.clip(np.rint(sum(vals) / len(vals)), 0, 255))
    return out


# --- convolution ---

def conv_float_oracle(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int, pad: int) -> np.ndarray:
    """Direct-loop float convolution, (C,H,W) x (O,C,k,k) -> (O,H',W')."""
    c, h, wd = x.shape
    o, _, k, _ = w.shape
    xp = np.zeros((c, h + 2 * pad, wd + 2 * pad))
    xp[:, pad:pad + h, pad:pad + wd] = x
    oh = (h + 2 * pad - k) // stride + 1
    ow = (wd + 2 * pad - k) // stride + 1
    out = np.zeros((o, oh, ow))
    for i in range(oh):
        for j in range(ow):
            patch = xp[:, i * stride:i * stride + k, j * stride:j * stride + k]
            out[:, i, j] = np.tensordot(w, patch, axes=([1, 2, 3], [0, 1, 2])) + b
    return out


# --- NMS ---

def _iou(a, b) -> float:
    ax1, ay1, ax2, ay2 = a.cx - a.w / 2, a.cy - a.h / 2, a.cx + a.w / 2, a.cy + a.h / 2
    bx1, by1, bx2, by2 = b.cx - b.w / 2, b.cy - b.h / 2, b.cx + b.w / 2, b.cy + b.h / 2
    iw = max(0.0, min(ax2, bx2) - max(ax1, bx1))
    ih = max(0.0, min(ay2, by2) - max(ay1, by1))
    inter = iw * ih
    if inter == 0:
        return 0.0
    return min(1.0, inter / (a.w * a.h + b.w * b.h - inter))


def nms_oracle(boxes, threshold: float):
    """Enumerate every subset and keep the one satisfying the greedy fixed point.

    With priority = (higher confidence, then lower index), greedy NMS keeps box i
    exactly when no kept box of higher priority overlaps it at >= threshold.
    That characterisation has a unique solution; we find it by brute force.
    """
    n = len(boxes)
    prio = sorted(range(n), key=lambda i: (-boxes[i].confidence, i))
    rank = {i: r for r, i in enumerate(prio)}
    solutions = []
    for mask in range(1 << n):
        kept = {i for i in range(n) if mask >> i & 1}
        ok = True
        for i in range(n):
            blocked = any(rank[j] < rank[i] and _iou(boxes[i], boxes[j]) >= threshold for j in kept)
            if (i in kept) == blocked:
                ok = False
                break
        if ok:
            solutions.append(sorted(kept, key=lambda i: rank[i]))
    assert len(solutions) == 1, solutions
    return [boxes[i] for i in solutions[0]]


# --- tiling ---

def input_rows(kind: str, o0: int, o1: int, n_in: int, k: int, stride: int, pad: int) -> int:
    """Number of distinct input indices read by outputs [o0, o1)."""
    if kind == "upsample":
        return len({o // stride for o in range(o0, o1)})
    idx = set()
    for o in range(o0, o1):
        for kk in range(k):
            i = o * stride - pad + kk
            if 0 <= i < n_in:
                idx.add(i)
    return len(idx)


def admissible(kind: str, n_out: int, stride: int) -> list[int]:
    if kind != "upsample":
        return list(range(1, n_out + 1))
    return sorted({t for t in range(1, n_out + 1) if t % stride == 0 or t == n_out})


def tiling_oracle(layer, l1_bytes: int, depth: int = 3):
    """Exhaustive search: minimum (dma_in + dma_out) over tilings whose
    statically sized tile buffer times ``depth`` fits ``l1_bytes``.

    One buffer holds the largest input tile, the largest output tile and the
    largest weight slice that any tile of the plan needs.

    Returns (best_traffic, n_candidates) or (None, n_candidates) when nothing fits.
    """
    conv = layer.kind == "conv"
    bpe = layer.bytes_per_element
    oh, ow, oc = layer.out_h, layer.out_w, layer.out_c
    w_per_oc = {"conv": layer.k_h * layer.k_w * layer.in_c, "depthwise": layer.k_h * layer.k_w}.get(layer.kind, 0)
    total_w = w_per_oc * oc * bpe

    def axis_tiles(n_out, t, n_in, k):
        return [input_rows(layer.kind, s, min(s + t, n_out), n_in, k, layer.stride, layer.pad)
                for s in range(0, n_out, t)]

    hs = {t: axis_tiles(oh, t, layer.in_h, layer.k_h) for t in admissible(layer.kind, oh, layer.stride)}
    ws_ = {t: axis_tiles(ow, t, layer.in_w, layer.k_w) for t in admissible(layer.kind, ow, layer.stride)}
    best = None
    n = 0
    for th, tw, toc in itertools.product(hs, ws_, range(1, oc + 1)):
        n += 1
        oc_tiles = [min(c + toc, oc) - c for c in range(0, oc, toc)]
        max_in = max_out = max_w = 0
        traffic_in = 0
        for ci, cw in enumerate(oc_tiles):
            for hi, rows in enumerate(hs[th]):
                for wi, cols in enumerate(ws_[tw]):
                    out_h = min(th, oh - hi * th)
                    out_w = min(tw, ow - wi * tw)
                    in_ch = layer.in_c if conv else cw
                    in_bytes = rows * cols * in_ch * bpe
                    max_in = max(max_in, in_bytes)
                    max_out = max(max_out, out_h * out_w * cw * bpe)
                    max_w = max(max_w, w_per_oc * cw * bpe)
                    traffic_in += in_bytes
        if depth * (max_in + max_out + max_w) > l1_bytes:
            continue
        cost = traffic_in + total_w + oh * ow * oc * bpe
        if best is None or cost < best:
            best = cost
    return best, n


def candidate_count(layer) -> int:
    return (len(admissible(layer.kind, layer.out_h, layer.stride))
            * len(admissible(layer.kind, layer.out_w, layer.stride)) * layer.out_c)


# --- energy ---

def trace_integral_mj(events) -> float:
    return math.fsum(e.power_mw * (e.t_end_us - e.t_start_us) / 1e6 for e in events)


def tiling_oracle_grid(layer, l1_bytes: int, depth: int = 3):
    """Same search as :func:`tiling_oracle`, vectorised over the candidate grid.

    Per-axis input extents still come from the set-based ``input_rows``; the
    only shortcut is that a rectangular tile's input is rows x cols, so sums and
    maxima factor per axis. Usable on layers far beyond 10^4 candidates.
    """
    conv = layer.kind == "conv"
    bpe = layer.bytes_per_element
    oh, ow, oc = layer.out_h, layer.out_w, layer.out_c
    w_per_oc = {"conv": layer.k_h * layer.k_w * layer.in_c, "depthwise": layer.k_h * layer.k_w}.get(layer.kind, 0)

    def axis(n_out, n_in, k):
        sizes = admissible(layer.kind, n_out, layer.stride)
        ext = [[input_rows(layer.kind, s, min(s + t, n_out), n_in, k, layer.stride, layer.pad)
                for s in range(0, n_out, t)] for t in sizes]
        return (np.array(sizes), np.array([sum(e) for e in ext]), np.array([max(e) for e in ext]))

    th, hsum, hmax = axis(oh, layer.in_h, layer.k_h)
    tw, wsum, wmax = axis(ow, layer.in_w, layer.k_w)
    toc = np.arange(1, oc + 1)
    n_oc = -(-oc // toc)
    T_h, T_w, T_c = np.meshgrid(np.arange(len(th)), np.arange(len(tw)), np.arange(oc), indexing="ij")
    ch = layer.in_c if conv else toc[T_c]
    max_in = hmax[T_h] * wmax[T_w] * ch * bpe
    max_out = th[T_h] * tw[T_w] * toc[T_c] * bpe
    max_w = w_per_oc * toc[T_c] * bpe
    fits = depth * (max_in + max_out + max_w) <= l1_bytes
    if conv:
        traffic_in = n_oc[T_c] * hsum[T_h] * wsum[T_w] * layer.in_c * bpe
    else:
        traffic_in = hsum[T_h] * wsum[T_w] * oc * bpe
    cost = traffic_in + w_per_oc * oc * bpe + oh * ow * oc * bpe
    if not fits.any():
        return None
    return int(cost[fits].min())
