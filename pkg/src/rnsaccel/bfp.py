"""Block floating point: groups of values sharing one exponent.

A group v_1..v_g is stored as integer mantissas plus a shared exponent
e = max_i floor(log2|v_i|).  With b mantissa bits the scale is
s = 2^(e - (b-1)) and mantissa_i = trunc(v_i / s), clipped to +/-(2^b - 1).
The largest-magnitude element therefore normalizes into [2^(b-1), 2^b - 1]
and every truncation error is below one scale step.

A dot product of two groups is an integer dot product of mantissas times
2^(e_a + e_b - 2(b-1)); that integer part is what the residue engine
evaluates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "BfpGroup",
    "BfpMatrix",
    "quantize_group",
    "dequantize_group",
    "quantization_error_bound",
    "output_exponent",
    "quantize_matrix",
    "dequantize_matrix",
]

_ROUNDINGS = ("truncate", "nearest_even")


def _floor_log2_exponents(x: np.ndarray) -> np.ndarray:
    """floor(log2|x|) per element, read off the binary representation.

    Zeros return a large negative sentinel so they never win the group max.
    """
    mant, exp = np.frexp(np.abs(x))  # |x| = mant * 2^exp, mant in [0.5, 1)
    return np.where(mant == 0, np.iinfo(np.int32).min, exp - 1)


def _shared_exponent(x: np.ndarray, axis=None):
    exps = _floor_log2_exponents(x)
    e = exps.max(axis=axis)
    all_zero = (x == 0).all(axis=axis)
    return np.where(all_zero, 0, e)  # zero groups get exponent 0


@dataclass
class BfpGroup:
    """One quantized group: integer mantissas and their shared exponent."""

    mantissas: np.ndarray  # int64
    shared_exponent: int
    mantissa_bits: int

    def __len__(self):
        return len(self.mantissas)

    @property
    def scale(self) -> float:
        return float(np.ldexp(1.0, self.shared_exponent - (self.mantissa_bits - 1)))


def quantize_group(values, mantissa_bits: int, rounding: str = "truncate") -> BfpGroup:
    """Quantize a 1-D group of reals to block floating point.

    quantize_group([1.5, 0.25, -3.0], 4) -> exponent 1, mantissas (6, 1, -12).
    """
    if mantissa_bits < 1:
        raise ValueError("mantissa_bits must be >= 1")
    if rounding not in _ROUNDINGS:
        raise ValueError(f"rounding must be one of {_ROUNDINGS}")
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("a group is a non-empty 1-D array")
    if not np.isfinite(v).all():
        raise ValueError("non-finite values cannot be quantized")
    e = int(_shared_exponent(v))
    scale = np.ldexp(1.0, e - (mantissa_bits - 1))
    scaled = v / scale
    q = np.trunc(scaled) if rounding == "truncate" else np.rint(scaled)
    top = (1 << mantissa_bits) - 1
    m = np.clip(q, -top, top).astype(np.int64)
    return BfpGroup(m, e, mantissa_bits)


def dequantize_group(group: BfpGroup) -> np.ndarray:
    return group.mantissas.astype(np.float64) * group.scale


def quantization_error_bound(group: BfpGroup) -> float:
    """Worst-case absolute error of the group: one scale step 2^(e - (b-1))."""
    return group.scale


def output_exponent(a: BfpGroup, b: BfpGroup) -> int:
    """Exponent of a two-group dot product: e_a + e_b - 2*(b - 1)."""
    if a.mantissa_bits != b.mantissa_bits:
        raise ValueError("dot product requires matching mantissa widths")
    return a.shared_exponent + b.shared_exponent - 2 * (a.mantissa_bits - 1)


@dataclass
class BfpMatrix:
    """A matrix quantized in groups of ``group_size`` along one axis.

    axis=1: shape (rows, n_groups, group) mantissas, exponents (rows, n_groups)
    axis=0: shape (n_groups, group, cols) mantissas, exponents (n_groups, cols)
    The grouped axis is zero-padded up to a whole number of groups; ``shape``
    keeps the original (unpadded) dimensions.
    """

    mantissas: np.ndarray
    exponents: np.ndarray
    shape: tuple[int, int]
    axis: int
    group_size: int
    mantissa_bits: int

    @property
    def n_groups(self) -> int:
        return self.mantissas.shape[1] if self.axis == 1 else self.mantissas.shape[0]


def quantize_matrix(
    x, mantissa_bits: int, group_size: int, axis: int, rounding: str = "truncate"
) -> BfpMatrix:
    """Quantize a 2-D matrix in contiguous groups along ``axis``."""
    if rounding not in _ROUNDINGS:
        raise ValueError(f"rounding must be one of {_ROUNDINGS}")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    if not np.isfinite(x).all():
        raise ValueError("non-finite values cannot be quantized")
    if axis not in (0, 1):
        raise ValueError("axis must be 0 or 1")
    rows, cols = x.shape
    length = x.shape[axis]
    n_groups = -(-length // group_size)
    pad = n_groups * group_size - length
    if pad:
        width = ((0, 0), (0, pad)) if axis == 1 else ((0, pad), (0, 0))
        x = np.pad(x, width)

    if axis == 1:
        grouped = x.reshape(rows, n_groups, group_size)
        exps = _shared_exponent(grouped, axis=2)
        scale = np.ldexp(1.0, (exps - (mantissa_bits - 1)))[:, :, None]
    else:
        grouped = x.reshape(n_groups, group_size, cols)
        exps = _shared_exponent(grouped, axis=1)
        scale = np.ldexp(1.0, (exps - (mantissa_bits - 1)))[:, None, :]

    scaled = grouped / scale
    q = np.trunc(scaled) if rounding == "truncate" else np.rint(scaled)
    top = (1 << mantissa_bits) - 1
    mant = np.clip(q, -top, top).astype(np.int64)
    return BfpMatrix(mant, exps.astype(np.int64), (rows, cols), axis, group_size, mantissa_bits)


def dequantize_matrix(bfp: BfpMatrix) -> np.ndarray:
    scale = np.ldexp(1.0, bfp.exponents - (bfp.mantissa_bits - 1))
    if bfp.axis == 1:
        vals = bfp.mantissas.astype(np.float64) * scale[:, :, None]
        flat = vals.reshape(bfp.shape[0], -1)
        return flat[:, : bfp.shape[1]]
    vals = bfp.mantissas.astype(np.float64) * scale[:, None, :]
    flat = vals.reshape(-1, bfp.shape[1])
    return flat[: bfp.shape[0], :]
