"""Symmetric INT8 post-training quantization and the integer conv kernel.

Weights are quantized per output channel (axis 0), activations per tensor.
Zero points are always 0 and the code range is [-127, 127]; -128 is never
produced. Rounding is half-to-even everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

QMAX = 127
SCALE_FLOOR = 1e-12
_MULT_BITS = 31


class QuantError(ValueError):
    pass


class Granularity(str, Enum):
    PER_TENSOR = "per-tensor"
    PER_CHANNEL = "per-channel"


@dataclass(frozen=True)
class QuantParams:
    granularity: Granularity
    scales: np.ndarray
    zero_point: int = 0

    def __post_init__(self):
        scales = np.atleast_1d(np.asarray(self.scales, dtype=np.float64))
        object.__setattr__(self, "scales", scales)
        object.__setattr__(self, "granularity", Granularity(self.granularity))
        if self.zero_point != 0:
            raise QuantError("symmetric quantization requires zero_point == 0")
        if scales.size == 0 or not np.all(scales > 0):
            raise QuantError("scales must be positive")
        if self.granularity is Granularity.PER_TENSOR and scales.size != 1:
            raise QuantError("per-tensor params carry exactly one scale")

    @property
    def scale(self) -> float:
        if self.granularity is not Granularity.PER_TENSOR:
            raise QuantError("per-channel params have no single scale")
        return float(self.scales[0])

    @classmethod
    def per_tensor(cls, scale: float) -> "QuantParams":
        return cls(Granularity.PER_TENSOR, np.array([scale]))

    def broadcast(self, shape: tuple[int, ...]) -> np.ndarray:
        """Scales shaped to broadcast against a tensor of ``shape``."""
        if self.granularity is Granularity.PER_TENSOR:
            return self.scales.reshape((1,) * len(shape))
        if len(shape) == 0 or shape[0] != self.scales.size:
            raise QuantError(
                f"per-channel scales ({self.scales.size}) do not match leading dim of {shape}"
            )
        return self.scales.reshape((-1,) + (1,) * (len(shape) - 1))

    def __eq__(self, other):
        if not isinstance(other, QuantParams):
            return NotImplemented
        return (
            self.granularity == other.granularity
            and self.zero_point == other.zero_point
            and np.array_equal(self.scales, other.scales)
        )

    __hash__ = None


@dataclass(frozen=True)
class QuantizedTensor:
    data: np.ndarray
    qparams: QuantParams

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.dtype != np.int8:
            raise QuantError(f"quantized data must be int8, got {data.dtype}")
        if data.size and data.min() < -QMAX:
            raise QuantError("code -128 is outside the symmetric range")
        self.qparams.broadcast(data.shape)
        object.__setattr__(self, "data", data)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def dequantize(self) -> np.ndarray:
        return dequantize(self)


def calibrate(values, granularity: Granularity | str = Granularity.PER_TENSOR) -> QuantParams:
    """Max-abs calibration: scale = max|x| / 127, per tensor or per leading-axis channel."""
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise QuantError("cannot calibrate an empty tensor")
    granularity = Granularity(granularity)
    if granularity is Granularity.PER_TENSOR:
        scales = np.array([np.max(np.abs(x)) / QMAX])
    else:
        if x.ndim < 1:
            raise QuantError("per-channel calibration needs at least one axis")
        scales = np.max(np.abs(x.reshape(x.shape[0], -1)), axis=1) / QMAX
    return QuantParams(granularity, np.maximum(scales, SCALE_FLOOR))


def quantize(values, qparams: QuantParams) -> QuantizedTensor:
    x = np.asarray(values, dtype=np.float64)
    s = qparams.broadcast(x.shape)
    q = np.clip(np.rint(x / s), -QMAX, QMAX).astype(np.int8)
    return QuantizedTensor(q, qparams)


def dequantize(q: QuantizedTensor) -> np.ndarray:
    return q.data.astype(np.float64) * q.qparams.broadcast(q.data.shape)


def quantize_multiplier(multiplier: float) -> tuple[int, int]:
    """Split a positive real multiplier into (m0, shift) with multiplier ~= m0 * 2**-shift.

    m0 is a 31-bit mantissa in [2**30, 2**31).
    """
    if not multiplier > 0:
        raise QuantError(f"requantization multiplier must be positive, got {multiplier}")
    mant, exp = np.frexp(multiplier)
    m0 = int(round(float(mant) * (1 << _MULT_BITS)))
    if m0 == 1 << _MULT_BITS:
        m0 //= 2
        exp += 1
    return m0, _MULT_BITS - int(exp)


def rounding_shift(x: np.ndarray, shift: np.ndarray) -> np.ndarray:
    """Integer x / 2**shift rounded half-to-even; shift may be per element."""
    x = np.asarray(x, dtype=np.int64)
    shift = np.broadcast_to(np.asarray(shift, dtype=np.int64), x.shape)
    out = np.empty_like(x)
    left = shift <= 0
    out[left] = x[left] << (-shift[left])
    s = np.minimum(shift[~left], 62)
    xr = x[~left]
    q = xr >> s
    rem = xr - (q << s)
    half = np.int64(1) << (s - 1)
    q = q + ((rem > half) | ((rem == half) & (q & 1).astype(bool)))
    out[~left] = q
    return out


def requantize(acc: np.ndarray, multipliers: np.ndarray, relu: bool = False) -> np.ndarray:
    """Scale int32 accumulators (channel-major) to saturated int8 codes.

    ``multipliers`` holds one real multiplier per leading-axis channel.
    """
    acc = np.asarray(acc, dtype=np.int64)
    multipliers = np.atleast_1d(multipliers)
    m0 = np.empty(multipliers.size, dtype=np.int64)
    sh = np.empty(multipliers.size, dtype=np.int64)
    for i, m in enumerate(multipliers):
        m0[i], sh[i] = quantize_multiplier(float(m))
    bshape = (-1,) + (1,) * (acc.ndim - 1) if multipliers.size > 1 else (1,) * acc.ndim
    # |acc| < 2**31 and m0 < 2**31 so the product fits int64
    prod = acc * m0.reshape(bshape)
    out = rounding_shift(prod, sh.reshape(bshape))
    lo = 0 if relu else -QMAX
    return np.clip(out, lo, QMAX).astype(np.int8)


def quantize_bias(bias: np.ndarray, input_scale: float, weight_scales: np.ndarray) -> np.ndarray:
    """Real-valued bias to int32 in the accumulator scale (input_scale * weight_scale)."""
    acc_scale = input_scale * np.asarray(weight_scales, dtype=np.float64)
    q = np.rint(np.asarray(bias, dtype=np.float64) / acc_scale)
    info = np.iinfo(np.int32)
    return np.clip(q, info.min, info.max).astype(np.int32)


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int) -> tuple[np.ndarray, int, int]:
    c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    if oh <= 0 or ow <= 0:
        raise QuantError(f"kernel {kh}x{kw} larger than padded input {h}x{w}")
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(1, 2))
    win = win[:, ::stride, ::stride][:, :oh, :ow]  # (c, oh, ow, kh, kw)
    return win, oh, ow


def conv_accumulate(
    x: np.ndarray,
    w: np.ndarray,
    stride: int = 1,
    pad: int | None = None,
    groups: int = 1,
) -> np.ndarray:
    """Integer MAC accumulation of int8 CHW input with OIHW weights -> int64 (oc, oh, ow)."""
    c, h, wd = x.shape
    oc, icg, kh, kw = w.shape
    if pad is None:
        pad = kh // 2
    if groups not in (1, c) or icg * groups != c:
        raise QuantError(f"weight shape {w.shape} incompatible with {c} input channels, groups={groups}")
    if groups > 1 and oc != c:
        raise QuantError("depthwise conv needs out_c == in_c")
    # float64 holds every partial sum exactly (|sum| < 2**53) and reaches BLAS
    win, oh, ow = _im2col(x.astype(np.float64), kh, kw, stride, pad)
    if groups == 1:
        cols = win.transpose(1, 2, 0, 3, 4).reshape(oh * ow, c * kh * kw)
        acc = cols @ w.reshape(oc, -1).astype(np.float64).T
        acc = acc.T.reshape(oc, oh, ow)
    else:
        acc = np.einsum("cyxij,cij->cyx", win, w[:, 0].astype(np.float64))
    return np.rint(acc).astype(np.int64)


def conv2d_int8(
    inp: QuantizedTensor,
    weights: QuantizedTensor,
    bias: np.ndarray | None,
    out_qparams: QuantParams,
    stride: int = 1,
    pad: int | None = None,
    relu: bool = False,
    groups: int = 1,
) -> QuantizedTensor:
    """Integer-only conv: int8 x int8 -> int32 acc + bias -> fixed-point requant -> int8.

    ``inp`` is CHW with per-tensor scale; ``weights`` is OIHW with per-channel
    (or per-tensor) scales; ``bias`` is int32 in the accumulator scale.
    """
    if inp.data.ndim != 3 or weights.data.ndim != 4:
        raise QuantError(f"expected CHW input and OIHW weights, got {inp.shape} and {weights.shape}")
    if inp.qparams.granularity is not Granularity.PER_TENSOR:
        raise QuantError("activations must be quantized per tensor")
    if out_qparams.granularity is not Granularity.PER_TENSOR:
        raise QuantError("output activations must be quantized per tensor")
    oc = weights.shape[0]
    acc = conv_accumulate(inp.data, weights.data, stride, pad, groups)
    if bias is not None:
        bias = np.asarray(bias)
        if bias.shape != (oc,):
            raise QuantError(f"bias shape {bias.shape} != ({oc},)")
        acc = acc + bias.astype(np.int64)[:, None, None]
    info = np.iinfo(np.int32)
    if acc.size and (acc.max() > info.max or acc.min() < info.min):
        raise QuantError("accumulator overflowed int32")
    w_scales = np.broadcast_to(weights.qparams.scales, (oc,))
    mult = inp.qparams.scale * w_scales / out_qparams.scale
    return QuantizedTensor(requantize(acc, mult, relu=relu), out_qparams)


def requantize_tensor(q: QuantizedTensor, out_qparams: QuantParams) -> QuantizedTensor:
    """Move a per-tensor int8 tensor onto a new per-tensor scale."""
    if q.qparams == out_qparams:
        return q
    mult = np.array([q.qparams.scale / out_qparams.scale])
    return QuantizedTensor(requantize(q.data.astype(np.int64), mult), out_qparams)
