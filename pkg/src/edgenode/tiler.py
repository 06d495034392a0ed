"""Static operator tiling over an L1/L2/L3 hierarchy.

Cost model: bytes moved between L1 and the outer levels. Tiles are
rectangular over (out rows, out cols, out channels); conv tiles always carry
the full input-channel depth. Channel tiles form the outer loop, so a weight
slice is fetched once and stays resident while its spatial tiles stream.

Tile geometry is always sized for the deepest supported buffering
(``GEOMETRY_DEPTH``); the requested depth only changes how much of L1 the
plan occupies. A plan is therefore valid, and moves the same bytes, at
either depth.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .pipeline.model import MicroModel

KiB = 1024
MiB = 1024 * KiB
LAYER_KINDS = ("conv", "depthwise", "pool", "upsample")
BUFFERING_DEPTHS = (2, 3)
GEOMETRY_DEPTH = 3


class TilingError(ValueError):
    pass


class InfeasibleError(TilingError):
    def __init__(self, layer: str, message: str):
        super().__init__(f"{layer}: {message}")
        self.layer = layer


@dataclass(frozen=True)
class MemoryHierarchy:
    l1_bytes: int = 128 * KiB
    l2_bytes: int = 1536 * KiB
    l3_bytes: int = 64 * MiB

    def __post_init__(self):
        if not 0 < self.l1_bytes < self.l2_bytes < self.l3_bytes:
            raise TilingError("memory levels must satisfy 0 < L1 < L2 < L3")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_h: int
    in_w: int
    in_c: int
    out_c: int
    k_h: int = 1
    k_w: int = 1
    stride: int = 1
    pad: int = 0
    bytes_per_element: int = 1
    name: str = "layer"

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise TilingError(f"{self.name}: unknown kind {self.kind!r}")
        if min(self.in_h, self.in_w, self.in_c, self.out_c, self.k_h, self.k_w,
               self.stride, self.bytes_per_element) <= 0 or self.pad < 0:
            raise TilingError(f"{self.name}: dimensions must be positive")
        if self.channelwise and self.in_c != self.out_c:
            raise TilingError(f"{self.name}: {self.kind} keeps the channel count")
        if self.out_h <= 0 or self.out_w <= 0:
            raise TilingError(f"{self.name}: kernel larger than padded input")

    @property
    def channelwise(self) -> bool:
        return self.kind != "conv"

    @property
    def out_h(self) -> int:
        if self.kind == "upsample":
            return self.in_h * self.stride
        return (self.in_h + 2 * self.pad - self.k_h) // self.stride + 1

    @property
    def out_w(self) -> int:
        if self.kind == "upsample":
            return self.in_w * self.stride
        return (self.in_w + 2 * self.pad - self.k_w) // self.stride + 1

    @property
    def input_bytes(self) -> int:
        return self.in_h * self.in_w * self.in_c * self.bytes_per_element

    @property
    def output_bytes(self) -> int:
        return self.out_h * self.out_w * self.out_c * self.bytes_per_element

    def weight_bytes(self, oc: int | None = None) -> int:
        oc = self.out_c if oc is None else oc
        if self.kind == "conv":
            return self.k_h * self.k_w * self.in_c * oc * self.bytes_per_element
        if self.kind == "depthwise":
            return self.k_h * self.k_w * oc * self.bytes_per_element
        return 0

    def input_range(self, axis: str, o0: int, o1: int) -> tuple[int, int]:
        """Input index range [lo, hi) read by output range [o0, o1) along 'h' or 'w'."""
        n_in = self.in_h if axis == "h" else self.in_w
        if self.kind == "upsample":
            return o0 // self.stride, (o1 - 1) // self.stride + 1
        k = self.k_h if axis == "h" else self.k_w
        lo = max(0, o0 * self.stride - self.pad)
        hi = min(n_in, (o1 - 1) * self.stride - self.pad + k)
        return lo, max(lo, hi)

    def tile_sizes(self, axis: str) -> range | list[int]:
        """Admissible tile extents along a spatial axis.

        Upsample tiles are whole multiples of the factor (or the full extent)
        so neighbouring tiles never share a source row.
        """
        n = self.out_h if axis == "h" else self.out_w
        if self.kind != "upsample":
            return range(1, n + 1)
        return sorted({t for t in range(self.stride, n + 1, self.stride)} | {n})


@dataclass(frozen=True)
class TilePlan:
    layer: str
    tile_h: int
    tile_w: int
    tile_oc: int
    buffering_depth: int
    tiles_total: int
    l1_working_set_bytes: int
    dma_bytes_in: int
    dma_bytes_out: int
    resident_level_weights: str
    out_shape: tuple[int, int, int]

    @property
    def dma_total(self) -> int:
        return self.dma_bytes_in + self.dma_bytes_out


def _axis_profile(layer: LayerSpec, axis: str, t: int) -> tuple[int, int, int]:
    """(number of tiles, total input extent fetched, largest per-tile input extent)."""
    n_out = layer.out_h if axis == "h" else layer.out_w
    starts = np.arange(0, n_out, t)
    ends = np.minimum(starts + t, n_out)
    if layer.kind == "upsample":
        lo = starts // layer.stride
        hi = (ends - 1) // layer.stride + 1
    else:
        n_in = layer.in_h if axis == "h" else layer.in_w
        k = layer.k_h if axis == "h" else layer.k_w
        lo = np.maximum(0, starts * layer.stride - layer.pad)
        hi = np.minimum(n_in, (ends - 1) * layer.stride - layer.pad + k)
        hi = np.maximum(hi, lo)
    ext = hi - lo
    return len(starts), int(ext.sum()), int(ext.max())


def _profiles(layer: LayerSpec, axis: str):
    sizes = np.array(list(layer.tile_sizes(axis)), dtype=np.int64)
    prof = np.array([_axis_profile(layer, axis, int(t)) for t in sizes], dtype=np.int64)
    return sizes, prof[:, 0], prof[:, 1], prof[:, 2]


def _weight_level(layer: LayerSpec, mem: MemoryHierarchy, n_oc: int) -> str:
    w = layer.weight_bytes()
    if w == 0:
        return "none"
    if n_oc == 1:
        return "L1"
    return "L2" if w <= mem.l2_bytes else "L3"


def _working_set(layer: LayerSpec, rows, cols, th, tw, toc) -> np.ndarray:
    bpe = layer.bytes_per_element
    in_c = layer.in_c if layer.kind == "conv" else toc
    in_tile = rows * cols * in_c * bpe
    out_tile = th * tw * toc * bpe
    if layer.kind == "conv":
        w_slice = layer.k_h * layer.k_w * layer.in_c * toc * bpe
    elif layer.kind == "depthwise":
        w_slice = layer.k_h * layer.k_w * toc * bpe
    else:
        w_slice = 0 * toc
    return in_tile + out_tile + w_slice


def _input_traffic(layer: LayerSpec, hsum, wsum, n_oc) -> np.ndarray:
    bpe = layer.bytes_per_element
    if layer.kind == "conv":
        return n_oc * hsum * wsum * layer.in_c * bpe
    # each channel tile brings only its own channels
    return hsum * wsum * layer.out_c * bpe + 0 * n_oc


def plan(layer: LayerSpec, mem: MemoryHierarchy = MemoryHierarchy(), buffering_depth: int = 3) -> TilePlan:
    """Traffic-minimal tiling of ``layer`` that fits L1 at the geometry depth.

    Ties on traffic prefer the largest tile_h, then tile_w, then tile_oc.
    """
    if buffering_depth not in BUFFERING_DEPTHS:
        raise TilingError(f"buffering depth must be one of {BUFFERING_DEPTHS}")
    geometry_depth = max(buffering_depth, GEOMETRY_DEPTH)
    budget = mem.l1_bytes

    th_s, n_h, hsum, hmax = _profiles(layer, "h")
    tw_s, n_w, wsum, wmax = _profiles(layer, "w")
    toc_s = np.arange(1, layer.out_c + 1, dtype=np.int64)
    n_oc = -(-layer.out_c // toc_s)

    # smallest possible tile decides feasibility
    unit = _working_set(layer, hmax[0], wmax[0], th_s[0], tw_s[0], np.int64(1))
    if geometry_depth * int(unit) > budget:
        raise InfeasibleError(layer.name, _binding_message(layer, geometry_depth, budget, int(hmax[0]), int(wmax[0]), int(th_s[0]), int(tw_s[0])))

    best = None  # (cost, -th, -tw, -toc, indices)
    tw_g, toc_g = np.meshgrid(np.arange(len(tw_s)), np.arange(len(toc_s)), indexing="ij")
    tw_g, toc_g = tw_g.ravel(), toc_g.ravel()
    for hi in range(len(th_s) - 1, -1, -1):
        ws = _working_set(layer, hmax[hi], wmax[tw_g], th_s[hi], tw_s[tw_g], toc_s[toc_g])
        ok = geometry_depth * ws <= budget
        if not ok.any():
            continue
        cost = _input_traffic(layer, hsum[hi], wsum[tw_g], n_oc[toc_g])
        cost = np.where(ok, cost, np.iinfo(np.int64).max)
        c_min = cost.min()
        cand = np.nonzero(cost == c_min)[0]
        # lexicographic: largest tile_w, then largest tile_oc
        pick = max(cand, key=lambda i: (tw_s[tw_g[i]], toc_s[toc_g[i]]))
        key = (int(c_min), -int(th_s[hi]), -int(tw_s[tw_g[pick]]), -int(toc_s[toc_g[pick]]))
        if best is None or key < best[0]:
            best = (key, hi, int(tw_g[pick]), int(toc_g[pick]))

    _, hi, wi, oi = best
    th, tw, toc = int(th_s[hi]), int(tw_s[wi]), int(toc_s[oi])
    ws = int(_working_set(layer, hmax[hi], wmax[wi], th, tw, np.int64(toc)))
    dma_in = int(_input_traffic(layer, hsum[hi], wsum[wi], n_oc[oi])) + layer.weight_bytes()
    return TilePlan(
        layer=layer.name,
        tile_h=th,
        tile_w=tw,
        tile_oc=toc,
        buffering_depth=buffering_depth,
        tiles_total=int(n_h[hi] * n_w[wi] * n_oc[oi]),
        l1_working_set_bytes=buffering_depth * ws,
        dma_bytes_in=dma_in,
        dma_bytes_out=layer.output_bytes,
        resident_level_weights=_weight_level(layer, mem, int(n_oc[oi])),
        out_shape=(layer.out_h, layer.out_w, layer.out_c),
    )


def _binding_message(layer: LayerSpec, depth: int, budget: int, rows: int, cols: int, th: int, tw: int) -> str:
    bpe = layer.bytes_per_element
    in_c = layer.in_c if layer.kind == "conv" else 1
    terms = {
        f"input halo {rows}x{cols}x{in_c}": rows * cols * in_c * bpe,
        f"output tile {th}x{tw}x1": th * tw * bpe,
        "weight slice for one output channel": layer.weight_bytes(1),
    }
    total = sum(terms.values())
    binding = max(terms, key=terms.get)
    return (
        f"infeasible: smallest tile needs {depth} x {total} = {depth * total} B "
        f"of L1 but only {budget} B available (binding constraint: {binding}, "
        f"{terms[binding]} B)"
    )


def tile_grid(plan_: TilePlan, layer: LayerSpec):
    """Yield every tile as ((h0, h1), (w0, w1), (c0, c1)) output ranges."""
    oh, ow, oc = layer.out_h, layer.out_w, layer.out_c
    for c0 in range(0, oc, plan_.tile_oc):
        for h0 in range(0, oh, plan_.tile_h):
            for w0 in range(0, ow, plan_.tile_w):
                yield ((h0, min(h0 + plan_.tile_h, oh)),
                       (w0, min(w0 + plan_.tile_w, ow)),
                       (c0, min(c0 + plan_.tile_oc, oc)))


def traffic(plan_: TilePlan, layer: LayerSpec) -> tuple[int, int]:
    """Exact (dma_bytes_in, dma_bytes_out) by walking every tile of the plan."""
    if plan_.out_shape != (layer.out_h, layer.out_w, layer.out_c) or plan_.layer != layer.name:
        raise TilingError(f"plan for {plan_.layer} {plan_.out_shape} does not match layer {layer.name}")
    bpe = layer.bytes_per_element
    dma_in = dma_out = 0
    for (h0, h1), (w0, w1), (c0, c1) in tile_grid(plan_, layer):
        rlo, rhi = layer.input_range("h", h0, h1)
        clo, chi = layer.input_range("w", w0, w1)
        ch = layer.in_c if layer.kind == "conv" else c1 - c0
        dma_in += (rhi - rlo) * (chi - clo) * ch * bpe
        dma_out += (h1 - h0) * (w1 - w0) * (c1 - c0) * bpe
    dma_in += layer.weight_bytes()
    return dma_in, dma_out


@dataclass
class GraphPlan:
    plans: list[TilePlan]

    @property
    def dma_bytes_in(self) -> int:
        return sum(p.dma_bytes_in for p in self.plans)

    @property
    def dma_bytes_out(self) -> int:
        return sum(p.dma_bytes_out for p in self.plans)

    @property
    def dma_total(self) -> int:
        return self.dma_bytes_in + self.dma_bytes_out


_KIND_MAP = {"conv": "conv", "head": "conv", "dwconv": "depthwise", "maxpool": "pool", "upsample": "upsample"}


def layer_specs(model: "MicroModel") -> list[LayerSpec]:
    """Tileable operators of a model; concats are L2 views and move no data."""
    specs = []
    for idx, layer in enumerate(model.layers):
        if layer.kind == "concat":
            continue
        c, h, w = model.input_shapes(idx)[0]
        specs.append(LayerSpec(
            kind=_KIND_MAP[layer.kind],
            in_h=h, in_w=w, in_c=c, out_c=layer.out_c,
            k_h=layer.kernel, k_w=layer.kernel, stride=layer.stride, pad=layer.pad,
            name=f"{idx:02d}_{layer.name}",
        ))
    return specs


def plan_graph(model: "MicroModel", mem: MemoryHierarchy = MemoryHierarchy(), buffering_depth: int = 3) -> GraphPlan:
    return GraphPlan([plan(spec, mem, buffering_depth) for spec in layer_specs(model)])
