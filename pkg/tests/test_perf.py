"""Latency, energy, area and baseline model tests.

Closed-form latency is cross-checked against an independent discrete
schedule simulation; energy and area totals are cross-checked against
values recomputed here from the device constants by hand.
"""

import json
import math
from dataclasses import replace

import numpy as np
import pytest

from rnsaccel.perf import (
    AcceleratorConfig,
    COMPUTE_COMPONENTS,
    ConverterSpecs,
    CostReport,
    PHOTONIC_REFERENCE_PJ_PER_MAC,
    SYSTOLIC_FORMATS,
    accuracy_viable,
    area_report,
    energy_per_mac_sweep,
    energy_report,
    gemm_cycles,
    gemm_energy_components,
    gemm_latency,
    gemm_utilization,
    iso_scale,
    simulate_gemm_latency,
    spatial_utilization,
    systolic_baseline,
    training_step_latency,
)
from rnsaccel.workloads import (
    PRESET_NAMES,
    WorkloadSpec,
    LayerShape,
    load_workload,
    preset_workload,
    save_workload,
    workload_from_dict,
    workload_to_dict,
)

CFG = AcceleratorConfig()
CFG_U1 = replace(CFG, units=1)


# ---------------------------------------------------------------------------
# config validation


def test_config_rejects_k_below_range_requirement():
    # 4-bit mantissas with 16-element groups need k >= 5
    with pytest.raises(ValueError):
        AcceleratorConfig(k=4, mantissa_bits=4, group_size=16)


def test_config_rejects_slow_digital_side():
    with pytest.raises(ValueError):
        AcceleratorConfig(interleave_factor=5, digital_clock_ghz=1.0)


def test_config_rejects_fractional_program_window():
    with pytest.raises(ValueError):
        AcceleratorConfig(t_prog_ns=5.05)


def test_config_derived_properties():
    assert CFG.moduli == (31, 32, 33)
    assert CFG.moduli_bits == (5, 5, 6)
    assert CFG.prog_cycles == 50
    assert CFG.mac_slots == 8 * 32 * 16
    # 32*16 weights per modulus over a 5 ns window at 20 GS/s needs 6 DACs
    assert CFG.dacs_per_unit() == 3 * 6


# ---------------------------------------------------------------------------
# latency


def test_single_unit_latency_example():
    # one unit: 2x2 tiles, each 50 prog + 100 stream cycles at 0.1 ns
    assert gemm_latency(64, 32, 100, "DF1", CFG_U1) == pytest.approx(60.0)


def test_eight_unit_latency_example():
    # the four tiles fit in one round across eight units
    assert gemm_latency(64, 32, 100, "DF1", CFG) == pytest.approx(15.0)


def test_df2_streams_the_other_operand():
    # DF2 holds the 100-row operand: ceil(100/32)*ceil(32/16) = 8 tiles
    cycles = gemm_cycles(64, 32, 100, "DF2", CFG)
    assert cycles == math.ceil(8 / 8) * (50 + 64)


def test_df3_rejected():
    with pytest.raises(ValueError):
        gemm_cycles(64, 32, 100, "DF3", CFG)


def test_unknown_dataflow_rejected():
    with pytest.raises(ValueError):
        gemm_cycles(8, 8, 8, "DF9", CFG)


def test_nonpositive_dims_rejected():
    with pytest.raises(ValueError):
        gemm_cycles(0, 8, 8, "DF1", CFG)


def test_simulation_matches_closed_form():
    rng = np.random.default_rng(7)
    for _ in range(60):
        m, k, n = (int(rng.integers(1, 400)) for _ in range(3))
        u = int(rng.integers(1, 12))
        cfg = replace(CFG, units=u)
        for df in ("DF1", "DF2"):
            assert simulate_gemm_latency(m, k, n, df, cfg) == pytest.approx(
                gemm_latency(m, k, n, df, cfg))


def test_square_shapes_make_dataflows_equal():
    for s in (16, 32, 100, 257):
        assert gemm_cycles(s, 48, s, "DF1", CFG) == gemm_cycles(s, 48, s, "DF2", CFG)


def test_latency_non_increasing_in_units():
    prev = None
    for u in (1, 2, 4, 8, 16):
        t = gemm_latency(300, 200, 150, "DF1", replace(CFG, units=u))
        if prev is not None:
            assert t <= prev
        prev = t


def test_latency_monotone_in_shape():
    base = gemm_cycles(64, 64, 64, "DF1", CFG)
    assert gemm_cycles(128, 64, 64, "DF1", CFG) >= base
    assert gemm_cycles(64, 128, 64, "DF1", CFG) >= base
    assert gemm_cycles(64, 64, 128, "DF1", CFG) >= base


# ---------------------------------------------------------------------------
# schedules


def _workload():
    return preset_workload("alexnet", batch_size=64)


def test_schedule_report_shape():
    rep = training_step_latency(_workload(), "DF1", CFG)
    # three GEMMs per layer
    assert len(rep["rows"]) == 3 * len(_workload().layers)
    assert rep["total_cycles"] == sum(r["cycles"] for r in rep["rows"])
    assert all(r["dataflow"] == "DF1" for r in rep["rows"])


def test_opt1_is_consistent_per_role():
    rep = training_step_latency(_workload(), "OPT1", CFG)
    by_role = {}
    for r in rep["rows"]:
        by_role.setdefault(r["role"], set()).add(r["dataflow"])
    assert all(len(v) == 1 for v in by_role.values())


def test_schedule_dominance_on_presets():
    for name in PRESET_NAMES:
        w = preset_workload(name, batch_size=32)
        pure = min(training_step_latency(w, df, CFG)["total_cycles"]
                   for df in ("DF1", "DF2"))
        opt1 = training_step_latency(w, "OPT1", CFG)["total_cycles"]
        opt2 = training_step_latency(w, "OPT2", CFG)["total_cycles"]
        assert opt2 <= opt1 <= pure


def test_unknown_schedule_rejected():
    with pytest.raises(ValueError):
        training_step_latency(_workload(), "DF3", CFG)


# ---------------------------------------------------------------------------
# utilization


def test_utilization_example():
    # 40x20 tile on a 32x16 unit: 800 useful MACs over 4 tile slots
    assert gemm_utilization(40, 20, 7, CFG_U1) == pytest.approx(800 / 2048)


def test_utilization_exact_fit():
    assert gemm_utilization(32, 16, 5, CFG_U1) == pytest.approx(1.0)
    assert gemm_utilization(64, 48, 11, CFG_U1) == pytest.approx(1.0)


def test_utilization_never_improves_with_wider_rows():
    util = [gemm_utilization(40, 20, 7, replace(CFG_U1, rows=r))
            for r in (8, 16, 32, 64)]
    assert all(b <= a + 1e-12 for a, b in zip(util, util[1:]))


def test_workload_utilization_bounds():
    u = spatial_utilization(_workload(), CFG)
    assert 0.0 < u <= 1.0


# ---------------------------------------------------------------------------
# energy


def test_energy_components_non_negative():
    comps = gemm_energy_components(100, 100, 100, "DF1", CFG)
    assert all(v >= 0 for v in comps.values())


def test_energy_monotone_in_shape():
    def total(m, k, n):
        return sum(gemm_energy_components(m, k, n, "DF1", CFG).values())
    base = total(64, 64, 64)
    assert total(128, 64, 64) >= base
    assert total(64, 128, 64) >= base
    assert total(64, 64, 128) >= base


def test_laser_energy_scales_with_margin():
    lo = gemm_energy_components(64, 64, 64, "DF1", CFG)["laser"]
    hi = gemm_energy_components(64, 64, 64, "DF1",
                                replace(CFG, laser_margin=4.0))["laser"]
    assert hi == pytest.approx(4.0 * lo)


def test_dac_charged_per_tile_not_per_cycle():
    # doubling the streamed dimension must not change DAC energy under DF1
    a = gemm_energy_components(64, 64, 64, "DF1", CFG)
    b = gemm_energy_components(64, 64, 128, "DF1", CFG)
    assert b["dac"] == pytest.approx(a["dac"])
    assert b["adc"] == pytest.approx(2 * a["adc"])


def test_adc_energy_hand_check():
    # per cycle, per unit: 2 quadratures * 32 rows * (E5 + E5 + E6)
    conv = ConverterSpecs()
    e5 = conv.adc_energy_pj / 4  # one bit below the 6-bit reference, 4x/bit
    e6 = conv.adc_energy_pj
    expected_per_cycle = 2 * 32 * (2 * e5 + e6)
    comps = gemm_energy_components(32, 16, 1000, "DF1", CFG)
    # one tile, 1000 streamed cycles
    assert comps["adc"] == pytest.approx(1000 * expected_per_cycle)


def test_energy_per_mac_near_design_point():
    comps = gemm_energy_components(1024, 1024, 4096, "DF1", CFG)
    compute = sum(comps[name] for name in COMPUTE_COMPONENTS)
    per_mac = compute / (2 * 1024 * 1024 * 4096)
    assert per_mac == pytest.approx(PHOTONIC_REFERENCE_PJ_PER_MAC, rel=0.30)
    # converters dominate the compute energy at this design point
    assert comps["adc"] > comps["laser"]


def test_effective_adc_override():
    cfg = replace(CFG, converters=ConverterSpecs(adc_effective_energy_pj=0.1))
    comps = gemm_energy_components(32, 16, 100, "DF1", cfg)
    assert comps["adc"] == pytest.approx(100 * 2 * 32 * 3 * 0.1)


def test_energy_report_conserves_components():
    rep = energy_report(_workload(), "OPT2", CFG)
    assert rep.total == pytest.approx(sum(rep.components.values()))
    assert rep.total == pytest.approx(sum(r["energy_pj"] for r in rep.rows))
    assert rep.metrics["energy_per_mac_with_memory_pj"] >= rep.metrics["energy_per_mac_pj"]


def test_energy_report_deterministic():
    a = energy_report(_workload(), "OPT2", CFG)
    b = energy_report(_workload(), "OPT2", CFG)
    assert a.components == b.components
    assert a.metrics == b.metrics


def test_empty_workload_reports_zero():
    rep = energy_report(WorkloadSpec(name="none", batch_size=1, layers=[]),
                        "DF1", CFG)
    assert rep.total == 0.0
    assert rep.metrics["energy_per_mac_pj"] == 0.0
    assert rep.metrics["power_w"] == 0.0


def test_power_breakdown_is_sram_dominant():
    rep = energy_report(preset_workload("resnet18", batch_size=32), "OPT2", CFG)
    pb = rep.metrics["power_breakdown_w"]
    total = rep.metrics["power_w"]
    assert total == pytest.approx(sum(pb.values()))
    assert pb["sram"] == max(pb.values())
    assert pb["sram"] / total > 0.5


def test_cost_report_rejects_bad_totals():
    with pytest.raises(ValueError):
        CostReport(label="x", unit="pJ", components={"a": 1.0, "b": 2.0}, total=4.0)
    with pytest.raises(ValueError):
        CostReport(label="x", unit="pJ", components={"a": -1.0}, total=-1.0)


# ---------------------------------------------------------------------------
# sweep


def test_sweep_minimum_sits_at_four_bit_sixteen_groups():
    sweep = energy_per_mac_sweep(CFG)
    viable = {bg: v for bg, v in sweep.items() if accuracy_viable(*bg)}
    assert min(viable, key=viable.get) == (4, 16)


def test_sweep_is_u_shaped_in_group_size():
    sweep = energy_per_mac_sweep(CFG, b_values=(4,), g_values=(4, 8, 16, 32, 64))
    assert sweep[(4, 16)] < sweep[(4, 4)]
    assert sweep[(4, 16)] < sweep[(4, 32)] < sweep[(4, 64)]


def test_sweep_global_min_is_not_accuracy_viable():
    # three-bit mantissas are cheaper but drop training accuracy
    sweep = energy_per_mac_sweep(CFG)
    assert sweep[(3, 16)] < sweep[(4, 16)]
    assert not accuracy_viable(3, 16)
    assert accuracy_viable(4, 16)


# ---------------------------------------------------------------------------
# area


def test_area_components_hand_check():
    rep = area_report(CFG)
    # electronic chiplet, straight from the constants:
    # 144 DACs, 1536 ADCs, 80 of each conversion unit, 24 MB SRAM
    assert rep.components["dac"] == pytest.approx(144 * 0.072)
    assert rep.components["adc"] == pytest.approx(1536 * 0.03)
    assert rep.components["conversion_units"] == pytest.approx(
        80 * (1318.4 + 231.7 + 1545.8) * 1e-6)
    assert rep.components["sram"] == pytest.approx(24.0 * 7.748)
    assert rep.metrics["electronic_mm2"] == pytest.approx(242.65, abs=0.05)


def test_photonic_area_from_pitch():
    rep = area_report(CFG)
    assert rep.metrics["photonic_mm2"] == pytest.approx(234.0, rel=0.05)


def test_stacked_area_is_larger_chiplet():
    rep = area_report(CFG)
    assert rep.metrics["stacked_mm2"] == pytest.approx(
        max(rep.metrics["photonic_mm2"], rep.metrics["electronic_mm2"]))


def test_area_per_mac():
    rep = area_report(CFG)
    assert rep.metrics["area_per_mac_mm2"] == pytest.approx(
        rep.total / (8 * 32 * 16))
    assert rep.metrics["area_per_mac_mm2"] == pytest.approx(0.12, rel=0.05)


def test_area_total_conserved():
    rep = area_report(CFG)
    assert rep.total == pytest.approx(
        rep.metrics["photonic_mm2"] + rep.metrics["electronic_mm2"])


# ---------------------------------------------------------------------------
# systolic baseline


def test_systolic_known_formats():
    assert SYSTOLIC_FORMATS["FP32"] == (12.42, 9.6e-3, 500e6)
    assert SYSTOLIC_FORMATS["INT12"] == (0.71, 7.7e-4, 1e9)
    assert SYSTOLIC_FORMATS["FMAC"][1] is None


def test_systolic_energy_is_macs_times_constant():
    w = _workload()
    rep = systolic_baseline(w, "FP32")
    assert rep.total == pytest.approx(w.total_macs * 12.42)
    assert rep.metrics["energy_per_mac_pj"] == 12.42


def test_systolic_latency_hand_check():
    # single linear layer 32->32, batch 16: forward GEMM (32, 32, 16)
    w = WorkloadSpec(name="tiny", batch_size=16,
                     layers=[LayerShape(kind="linear", name="fc",
                                        in_features=32, out_features=32)])
    rep = systolic_baseline(w, "INT12", schedule="DF1")
    # DF1 on a 32x16 array: forward 2 tiles * (32 fill + 16 stream),
    # dgrad (32,32,16) same, wgrad (32,16,32) is 1 tile * (32 + 32)
    assert rep.rows[0]["cycles"] == 2 * 48
    assert rep.rows[1]["cycles"] == 2 * 48
    assert rep.rows[2]["cycles"] == 64
    assert rep.metrics["total_ns"] == pytest.approx((96 + 96 + 64) * 1.0)


def test_systolic_df3_allowed_and_opt2_uses_it_when_best():
    # K large relative to M, N: output-stationary streams K and wins
    w = WorkloadSpec(name="deep", batch_size=4,
                     layers=[LayerShape(kind="linear", name="fc",
                                        in_features=4096, out_features=16)])
    rep = systolic_baseline(w, "INT8", schedule="OPT2")
    fwd = rep.rows[0]
    assert fwd["dataflow"] == "DF3"


def test_systolic_unknown_format_rejected():
    with pytest.raises(ValueError):
        systolic_baseline(_workload(), "FP64")
    with pytest.raises(ValueError):
        systolic_baseline(_workload(), "FP32", arrays=0)


def test_systolic_more_arrays_not_slower():
    w = _workload()
    t1 = systolic_baseline(w, "INT8", arrays=1).metrics["total_ns"]
    t8 = systolic_baseline(w, "INT8", arrays=8).metrics["total_ns"]
    assert t8 <= t1


# ---------------------------------------------------------------------------
# iso scaling


def test_iso_energy_identity():
    # a format with the photonic per-MAC energy keeps the MAC count
    info = iso_scale("iso-energy", "FP32", CFG,
                     photonic_pj_per_mac=SYSTOLIC_FORMATS["FP32"][0])
    assert info["mac_count"] == pytest.approx(CFG.mac_slots)
    assert info["arrays"] == 8  # 4096 MACs / 512 per array


def test_iso_energy_fp32_collapses_to_one_array():
    info = iso_scale("iso-energy", "FP32", CFG)
    assert info["scale_factor"] == pytest.approx(0.21 / 12.42)
    assert info["arrays"] == 1


def test_iso_area_uses_stacked_footprint():
    info = iso_scale("iso-area", "INT8", CFG)
    stacked = area_report(CFG).metrics["stacked_mm2"]
    assert info["mac_count"] == pytest.approx(stacked / 4.1e-4)


def test_iso_area_rejects_formats_without_area():
    with pytest.raises(ValueError):
        iso_scale("iso-area", "FMAC", CFG)
    with pytest.raises(ValueError):
        iso_scale("iso-volume", "FP32", CFG)


# ---------------------------------------------------------------------------
# workload definitions


def test_alexnet_first_conv_gemms():
    w = preset_workload("alexnet", batch_size=256)
    rows = [r for r in w.training_gemms() if r[1] == "conv1"]
    shapes = {role: shape for _, _, role, shape in rows}
    # 224x224 input, 11x11 kernel, stride 4, pad 2 -> 55x55 output
    assert (shapes["forward"].m, shapes["forward"].k, shapes["forward"].n) \
        == (64, 363, 55 * 55 * 256)
    assert (shapes["dgrad"].m, shapes["dgrad"].k) == (363, 64)
    assert (shapes["wgrad"].k, shapes["wgrad"].n) == (55 * 55 * 256, 363)


def test_resnet18_classifier_shape():
    w = preset_workload("resnet18", batch_size=32)
    rows = [r for r in w.training_gemms() if r[1] == "fc"]
    fwd = {role: s for _, _, role, s in rows}["forward"]
    assert (fwd.m, fwd.k, fwd.n) == (1000, 512, 32)


def test_preset_names_and_rejection():
    assert set(PRESET_NAMES) == {"alexnet", "vgg16", "resnet18", "resnet50"}
    with pytest.raises(ValueError):
        preset_workload("lenet")


def test_workload_json_round_trip(tmp_path):
    w = preset_workload("resnet18", batch_size=8)
    path = tmp_path / "w.json"
    save_workload(w, path)
    again = load_workload(path)
    assert workload_to_dict(again) == workload_to_dict(w)
    assert again.total_macs == w.total_macs


def test_workload_schema_rejection():
    with pytest.raises(Exception):
        workload_from_dict({"name": "x", "batch_size": 0, "layers": []})
    with pytest.raises(Exception):
        workload_from_dict({"name": "x", "batch_size": 4,
                            "layers": [{"kind": "pooling"}]})


def test_saved_workload_is_byte_stable(tmp_path):
    w = preset_workload("alexnet", batch_size=16)
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_workload(w, p1)
    save_workload(w, p2)
    assert p1.read_bytes() == p2.read_bytes()
    json.loads(p1.read_text())  # well-formed
