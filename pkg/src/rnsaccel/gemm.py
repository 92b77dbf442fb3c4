"""Tiled GEMM through block floating point and residue arithmetic.

The engine computes O = A @ B the way the hardware does:

1. split the contraction axis K into groups of ``group_size`` (one group per
   weight/input pair of an optical dot-product unit),
2. quantize each row-slice of A and column-slice of B to block floating
   point,
3. evaluate the integer mantissa dot products per modulus (this is what the
   phase domain carries), reconstruct each tile's integer result,
4. rescale by the output exponent and accumulate partial tiles in float64,
   in ascending tile order, so results are bit-reproducible.

In ideal mode the result equals a float64 product of the BFP-dequantized
operands exactly.  In noisy mode every residue read-out goes through the
quadrature detection model with Gaussian receiver noise, and detection
errors show up as residue mismatches in the diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bfp import quantize_matrix
from .photonics import (
    DeviceSpecs,
    NoiseParams,
    noise_sigma,
    required_detector_power,
)
from .rns import ModulusSet, make_special_moduli, min_k, reverse_convert_special

__all__ = [
    "EngineConfig",
    "TilePlan",
    "GemmResult",
    "plan_tiles",
    "rns_gemm",
    "dequantized_reference",
    "conv_as_gemm",
    "linear_as_gemm",
]


@dataclass(frozen=True)
class EngineConfig:
    """Arithmetic configuration of the engine.

    k=None picks the smallest special modulus set satisfying the range
    inequality M >= g * 2^(2*b+1); an explicit smaller k is rejected.
    """

    mantissa_bits: int = 4
    group_size: int = 16
    k: int | None = None
    rows: int = 32                      # dot-product units per tile (row tile)
    rounding: str = "truncate"
    laser_power_margin: float = 4.0     # noisy mode: multiple of the SNR=m power
    device: DeviceSpecs = field(default_factory=DeviceSpecs)
    noise: NoiseParams = field(default_factory=NoiseParams)

    def __post_init__(self):
        if self.mantissa_bits < 1:
            raise ValueError("mantissa_bits must be >= 1")
        if self.group_size < 1 or self.rows < 1:
            raise ValueError("group_size and rows must be >= 1")
        need = min_k(self.mantissa_bits, self.group_size)
        if self.k is not None and self.k < need:
            got = (1 << (3 * self.k)) - (1 << self.k)
            raise ValueError(
                f"k={self.k} gives dynamic range M={got}, below the "
                f"g * 2^(2*b+1) = {self.group_size * (1 << (2 * self.mantissa_bits + 1))} "
                f"required for mantissa_bits={self.mantissa_bits}, "
                f"group_size={self.group_size}; minimum k is {need}"
            )

    def modulus_set(self) -> ModulusSet:
        k = self.k if self.k is not None else min_k(self.mantissa_bits, self.group_size)
        return make_special_moduli(k)


@dataclass(frozen=True)
class TilePlan:
    """Static tiling of one GEMM onto rows x group_size arrays."""

    m: int
    k: int
    n: int
    rows: int
    group_size: int
    row_tiles: int
    k_tiles: int

    @property
    def tiles(self) -> int:
        return self.row_tiles * self.k_tiles

    @property
    def padded_m(self) -> int:
        return self.row_tiles * self.rows

    @property
    def padded_k(self) -> int:
        return self.k_tiles * self.group_size

    @property
    def spatial_fill(self) -> float:
        """Useful fraction of the MAC slots inside the occupied tiles."""
        return (self.m * self.k) / (self.tiles * self.rows * self.group_size)


def plan_tiles(m: int, k: int, n: int, cfg: EngineConfig) -> TilePlan:
    if min(m, k, n) < 1:
        raise ValueError("GEMM dimensions must be positive")
    return TilePlan(
        m=m, k=k, n=n,
        rows=cfg.rows, group_size=cfg.group_size,
        row_tiles=-(-m // cfg.rows),
        k_tiles=-(-k // cfg.group_size),
    )


@dataclass
class GemmResult:
    output: np.ndarray
    plan: TilePlan
    mode: str
    # noisy-mode diagnostics: detection disagreements per (k_tile, modulus)
    residue_mismatches: np.ndarray | None = None
    total_detections: int = 0
    quant_error_a: float = 0.0          # max |a - dequant(a)|
    quant_error_b: float = 0.0

    @property
    def mismatch_rate(self) -> float:
        if self.residue_mismatches is None or self.total_detections == 0:
            return 0.0
        return float(self.residue_mismatches.sum()) / self.total_detections


def _exact_modular_matmul(ra: np.ndarray, rb: np.ndarray, m: int,
                          group_size: int) -> np.ndarray:
    """(ra @ rb) mod m with exactness guaranteed.

    Residues are < m, so the dot products are bounded by g*(m-1)^2; while
    that fits float64's integer range the BLAS path is exact and fast.
    """
    bound = group_size * (m - 1) ** 2
    if bound < 2**53:
        prod = ra.astype(np.float64) @ rb.astype(np.float64)
        return np.rint(prod).astype(np.int64) % m
    if bound < 2**62:
        return (ra @ rb) % m
    raise ValueError(f"modulus {m} too large for exact accumulation")


def rns_gemm(a, b, cfg: EngineConfig, mode: str = "ideal",
             rng: np.random.Generator | None = None) -> GemmResult:
    """Compute a @ b through the BFP + residue dataflow.

    mode="ideal" is bit-exact; mode="noisy" passes every residue read-out
    through the quadrature detection model and requires a caller-supplied
    ``rng`` (the engine owns no hidden random state).
    """
    if mode not in ("ideal", "noisy"):
        raise ValueError("mode must be 'ideal' or 'noisy'")
    if mode == "noisy" and rng is None:
        raise ValueError("noisy mode needs an explicit rng")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"incompatible GEMM shapes {a.shape} x {b.shape}")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ValueError("non-finite operands")

    mset = cfg.modulus_set()
    plan = plan_tiles(a.shape[0], a.shape[1], b.shape[1], cfg)
    bfp_a = quantize_matrix(a, cfg.mantissa_bits, cfg.group_size, axis=1,
                            rounding=cfg.rounding)
    bfp_b = quantize_matrix(b, cfg.mantissa_bits, cfg.group_size, axis=0,
                            rounding=cfg.rounding)

    shift = 2 * (cfg.mantissa_bits - 1)
    out = np.zeros((plan.m, plan.n), dtype=np.float64)
    mismatches = None
    total_detections = 0
    detector_power = margins = None
    if mode == "noisy":
        mismatches = np.zeros((plan.k_tiles, mset.n_moduli), dtype=np.int64)
        detector_power = [
            cfg.laser_power_margin * required_detector_power(m, cfg.noise, cfg.device)
            for m in mset.moduli
        ]
        margins = [noise_sigma(p, cfg.noise, cfg.device) for p in detector_power]

    for t in range(plan.k_tiles):            # fixed ascending accumulation order
        ma = bfp_a.mantissas[:, t, :]        # (M, g)
        mb = bfp_b.mantissas[t]              # (g, N)
        ea = bfp_a.exponents[:, t]
        eb = bfp_b.exponents[t]

        exact_residues = [
            _exact_modular_matmul(ma % m, mb % m, m, cfg.group_size)
            for m in mset.moduli
        ]
        residues = exact_residues
        if mode == "noisy":
            residues = []
            for i, m in enumerate(mset.moduli):
                phases = exact_residues[i] * (2.0 * math.pi / m)
                i_d = cfg.device.responsivity_a_per_w * detector_power[i]
                ix = i_d * np.cos(phases) + rng.normal(0.0, margins[i], phases.shape)
                iy = i_d * np.sin(phases) + rng.normal(0.0, margins[i], phases.shape)
                theta = np.mod(np.arctan2(iy, ix), 2.0 * math.pi)
                detected = np.mod(np.rint(theta * m / (2.0 * math.pi)).astype(np.int64), m)
                mismatches[t, i] = int((detected != exact_residues[i]).sum())
                total_detections += detected.size
                residues.append(detected)

        tile_int = reverse_convert_special(residues, mset)
        if mode == "ideal" and tile_int.size:
            peak = int(np.abs(tile_int).max())
            if peak > mset.psi:
                raise AssertionError(
                    f"tile dot product {peak} escaped the signed range {mset.psi}"
                )
        exp_out = (ea[:, None] + eb[None, :] - shift).astype(np.int32)
        out += np.ldexp(tile_int.astype(np.float64), exp_out)

    # worst-case quantization error actually incurred, for the diagnostics
    qa = np.ldexp(1.0, (bfp_a.exponents - (cfg.mantissa_bits - 1)).astype(np.int32))
    qb = np.ldexp(1.0, (bfp_b.exponents - (cfg.mantissa_bits - 1)).astype(np.int32))
    return GemmResult(
        output=out,
        plan=plan,
        mode=mode,
        residue_mismatches=mismatches,
        total_detections=total_detections,
        quant_error_a=float(qa.max()),
        quant_error_b=float(qb.max()),
    )


def dequantized_reference(a, b, cfg: EngineConfig) -> np.ndarray:
    """Float64 product of the BFP-dequantized operands, tile order matched.

    Ideal-mode ``rns_gemm`` must equal this elementwise, bit for bit.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    bfp_a = quantize_matrix(a, cfg.mantissa_bits, cfg.group_size, axis=1,
                            rounding=cfg.rounding)
    bfp_b = quantize_matrix(b, cfg.mantissa_bits, cfg.group_size, axis=0,
                            rounding=cfg.rounding)
    shift = cfg.mantissa_bits - 1
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.float64)
    for t in range(bfp_a.mantissas.shape[1]):
        da = np.ldexp(bfp_a.mantissas[:, t, :].astype(np.float64),
                      (bfp_a.exponents[:, t, None] - shift).astype(np.int32))
        db = np.ldexp(bfp_b.mantissas[t].astype(np.float64),
                      (bfp_b.exponents[t][None, :] - shift).astype(np.int32))
        out += da @ db
    return out


def conv_as_gemm(c_out: int, c_in: int, kernel_h: int, kernel_w: int,
                 out_h: int, out_w: int, batch: int) -> tuple[int, int, int]:
    """GEMM dimensions of a lowered convolution.

    (M, K, N) = (C_out, C_in * kh * kw, H_out * W_out * batch).
    """
    dims = (c_out, c_in * kernel_h * kernel_w, out_h * out_w * batch)
    if min(dims) < 1:
        raise ValueError("convolution dimensions must be positive")
    return dims


def linear_as_gemm(in_features: int, out_features: int, batch: int) -> tuple[int, int, int]:
    """GEMM dimensions of a dense layer: (out, in, batch)."""
    if min(in_features, out_features, batch) < 1:
        raise ValueError("layer dimensions must be positive")
    return (out_features, in_features, batch)
