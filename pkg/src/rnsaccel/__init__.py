"""Bit-exact functional model and cost model of a residue-arithmetic
photonic GEMM accelerator.

Layered bottom-up:

    rns        residue arithmetic over {2^k-1, 2^k, 2^k+1}
    bfp        block-floating-point quantization
    photonics  phase-domain device model, losses, noise, laser budgets
    gemm       the tiled BFP+residue GEMM engine (ideal and noisy modes)
    training   toy networks trained through the engine, with a
               full-precision twin for paired comparisons
    workloads  DNN layer shapes and their training GEMMs
    perf       latency/energy/power/area model and a systolic baseline
    verify     self-check suites
    config     YAML run configuration
    cli        command-line surface
"""

from .bfp import (
    BfpGroup,
    BfpMatrix,
    dequantize_group,
    dequantize_matrix,
    quantization_error_bound,
    quantize_group,
    quantize_matrix,
)
from .config import ConfigError, RunConfig, load_config
from .gemm import (
    EngineConfig,
    GemmResult,
    TilePlan,
    conv_as_gemm,
    dequantized_reference,
    linear_as_gemm,
    plan_tiles,
    rns_gemm,
)
from .perf import (
    AcceleratorConfig,
    AreaSpecs,
    ConverterSpecs,
    CostReport,
    DigitalEnergies,
    area_report,
    energy_per_mac_sweep,
    energy_report,
    gemm_latency,
    iso_scale,
    simulate_gemm_latency,
    spatial_utilization,
    systolic_baseline,
    training_step_latency,
)
from .photonics import (
    DeviceSpecs,
    NoiseParams,
    detect_phase,
    encoding_error,
    encoding_error_report,
    link_loss_db,
    mdpu_phase,
    mmu_length_mm,
    mmu_phase,
    required_laser_power,
    shifter_length_mm,
)
from .rns import (
    ModulusSet,
    ResidueTensor,
    check_range_inequality,
    forward_convert,
    make_special_moduli,
    min_k,
    residue_mac,
    reverse_convert_crt,
    reverse_convert_special,
)
from .training import TrainResult, make_arcs, make_blobs, make_network, train_toy
from .workloads import (
    GemmShape,
    LayerShape,
    WorkloadSpec,
    load_workload,
    preset_workload,
    save_workload,
)

__version__ = "0.1.0"
