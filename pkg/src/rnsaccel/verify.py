"""Self-check suites for the arithmetic and photonic models.

Each suite returns a list of (check_name, passed, detail) tuples so the
CLI can print a table and turn failures into a nonzero exit.  The checks
mirror the core invariants: exhaustive round trips, two-route agreement,
engine-versus-reference exactness, and the calibrated device figures.

The suites accept injectable inputs (a modulus set with possibly wrong
reconstruction constants, a reduced trial count) so tests can exercise
the failure paths too.
"""

from __future__ import annotations

import math

import numpy as np

from .bfp import dequantize_group, quantization_error_bound, quantize_group
from .gemm import EngineConfig, dequantized_reference, rns_gemm
from .photonics import (
    DeviceSpecs,
    NoiseParams,
    detect_phase,
    encoding_error_report,
    mdpu_phase,
    mmu_digit_shifts,
    mmu_length_mm,
    required_detector_power,
    shifter_length_mm,
)
from .rns import (
    ModulusSet,
    ResidueTensor,
    make_special_moduli,
    min_k,
    residue_mac,
    reverse_convert_crt,
    reverse_convert_special,
)

__all__ = ["SUITES", "run_suite", "run_suites", "format_results", "exit_code"]


def _check(name: str, passed: bool, detail: str = "") -> tuple:
    return (name, bool(passed), detail)


# ---------------------------------------------------------------------------
# suites


def rns_suite(k_values=(2, 3, 4), mset: ModulusSet | None = None) -> list:
    """Round trips and reconstruction-route agreement.

    ``mset`` substitutes the modulus set under test (the CLI tests inject
    one with corrupted reconstruction constants to prove failures surface).
    """
    results = []
    sets = [mset] if mset is not None else [make_special_moduli(k) for k in k_values]
    for ms in sets:
        values = np.arange(-ms.psi, ms.psi + 1, dtype=np.int64)
        rt = ResidueTensor.from_integers(values, ms)
        via_crt = reverse_convert_crt(rt, ms)
        label = f"k={ms.k}" if ms.k is not None else f"moduli={ms.moduli}"
        ok = bool(np.array_equal(via_crt, values))
        results.append(_check(
            f"rns.round_trip_crt[{label}]", ok,
            f"{values.size} values" if ok else "reconstruction mismatch"))
        if ms.k is not None:
            via_special = reverse_convert_special(rt, ms)
            ok = bool(np.array_equal(via_special, via_crt))
            results.append(_check(
                f"rns.special_equals_crt[{label}]", ok,
                "exhaustive" if ok else "routes disagree"))

    rng = np.random.default_rng(11)
    ms = sets[-1]
    ok = True
    for _ in range(200):
        g = int(rng.integers(1, 33))
        bound = int(math.isqrt(ms.psi // max(g, 1))) or 1
        a = rng.integers(-bound, bound + 1, size=g)
        b = rng.integers(-bound, bound + 1, size=g)
        got = residue_mac(ResidueTensor.from_integers(a, ms),
                          ResidueTensor.from_integers(b, ms), ms)
        want = int(np.dot(a, b))
        if reverse_convert_crt(got, ms) != want:
            ok = False
            break
    results.append(_check("rns.residue_mac_matches_integer_dot", ok,
                          "200 random dot products"))

    thresholds = [(3, 16, 4), (4, 16, 5), (5, 16, 6)]
    ok = all(min_k(b, g) == want for b, g, want in thresholds)
    results.append(_check("rns.min_k_thresholds", ok, str(thresholds)))
    return results


def bfp_suite(trials: int = 200) -> list:
    results = []
    rng = np.random.default_rng(5)

    ok = True
    for _ in range(trials):
        b = int(rng.integers(2, 9))
        g = int(rng.integers(2, 33))
        vals = rng.normal(0.0, rng.uniform(0.1, 100.0), size=g)
        grp = quantize_group(vals, b)
        err = np.abs(dequantize_group(grp) - vals).max()
        if err > quantization_error_bound(grp) + 1e-15:
            ok = False
            break
    results.append(_check("bfp.error_within_bound", ok, f"{trials} random groups"))

    ok = True
    for _ in range(trials):
        b = int(rng.integers(2, 9))
        grp = quantize_group(rng.normal(0.0, 4.0, size=8), b)
        again = quantize_group(dequantize_group(grp), b)
        if not np.array_equal(again.mantissas, grp.mantissas):
            ok = False
            break
    results.append(_check("bfp.grid_values_are_fixed_points", ok,
                          "requantization is idempotent"))

    ok = all(min_k(b, 16) == want for b, want in ((3, 4), (4, 5), (5, 6)))
    results.append(_check("bfp.range_guard_thresholds", ok, "g=16"))
    return results


def photonic_suite(random_vectors: int = 2000, noisy_trials: int = 20000) -> list:
    results = []
    specs = DeviceSpecs()
    noise = NoiseParams()
    rng = np.random.default_rng(3)

    ok = abs(shifter_length_mm(33, specs) - 0.57) <= 0.01
    results.append(_check("photonic.shifter_length_33", ok,
                          f"{shifter_length_mm(33, specs):.4f} mm"))
    ok = abs(mmu_length_mm(33, specs) - 0.8) <= 0.05
    results.append(_check("photonic.mmu_length_33", ok,
                          f"{mmu_length_mm(33, specs):.4f} mm"))

    ok = sum(mmu_digit_shifts(0b101, 0b011)) == 15
    results.append(_check("photonic.digit_shift_example", ok,
                          "x=0b101, w=0b011 accumulates 15 unit steps"))

    ok = True
    mset = make_special_moduli(5)
    for m in mset.moduli:
        power = required_detector_power(m, noise, specs)
        for _ in range(random_vectors // 3):
            g = int(rng.integers(1, 17))
            xs = rng.integers(0, m, size=g)
            ws = rng.integers(0, m, size=g)
            detected = detect_phase(mdpu_phase(xs, ws, m), power, m, specs=specs)
            want = residue_mac([xs % mm for mm in mset.moduli],
                               [ws % mm for mm in mset.moduli], mset)
            if detected != want[mset.moduli.index(m)]:
                ok = False
                break
    results.append(_check("photonic.noiseless_detection_exact", ok,
                          f"{random_vectors} random dot products"))

    rates = []
    m = 33
    for margin in (1.0, 4.0):
        power = margin * required_detector_power(m, noise, specs)
        residues = rng.integers(0, m, size=noisy_trials)
        phases = residues * (2.0 * math.pi / m)
        det = detect_phase(phases, power, m, noise=noise, specs=specs,
                           noisy=True, rng=rng)
        rates.append(float((det != residues).mean()))
    ok = rates[1] < rates[0] and rates[1] < 1e-2
    results.append(_check("photonic.misdetection_drops_with_margin", ok,
                          f"margin 1: {rates[0]:.3g}, margin 4: {rates[1]:.3g}"))

    rep = encoding_error_report()
    ok = abs(rep.error - 0.0444) <= 1e-3
    results.append(_check("photonic.encoding_error_operating_point", ok,
                          f"error {rep.error:.4f} vs budget {rep.threshold:.4f} "
                          f"(within: {rep.within_threshold})"))
    return results


def gemm_suite(trials: int = 50) -> list:
    results = []
    rng = np.random.default_rng(9)
    cfg = EngineConfig()

    ok = True
    worst = 0.0
    for _ in range(trials):
        m, k, n = (int(rng.integers(1, 65)) for _ in range(3))
        a = rng.normal(0.0, 2.0, size=(m, k))
        b = rng.normal(0.0, 2.0, size=(k, n))
        got = rns_gemm(a, b, cfg).output
        want = dequantized_reference(a, b, cfg)
        if not np.array_equal(got, want):
            ok = False
            worst = float(np.abs(got - want).max())
            break
    results.append(_check("gemm.ideal_equals_dequantized_reference", ok,
                          f"{trials} random GEMMs" if ok else f"max diff {worst}"))

    a = rng.normal(size=(8, 40))
    b = rng.normal(size=(40, 8))
    r1 = rns_gemm(a, b, cfg).output
    r2 = rns_gemm(a, b, cfg).output
    results.append(_check("gemm.deterministic", bool(np.array_equal(r1, r2)), ""))

    try:
        EngineConfig(mantissa_bits=4, group_size=16, k=4)
        ok = False
    except ValueError:
        ok = True
    results.append(_check("gemm.rejects_undersized_k", ok,
                          "k=4 cannot hold b=4, g=16"))
    return results


SUITES = {
    "rns": rns_suite,
    "bfp": bfp_suite,
    "photonic": photonic_suite,
    "gemm": gemm_suite,
}


def run_suite(name: str, **kwargs) -> list:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; one of {sorted(SUITES)} or 'all'")
    return SUITES[name](**kwargs)


def run_suites(names) -> list:
    results = []
    for name in names:
        results.extend(run_suite(name))
    return results


def format_results(results) -> str:
    width = max((len(name) for name, _, _ in results), default=10)
    lines = []
    for name, passed, detail in results:
        status = "PASS" if passed else "FAIL"
        line = f"{status}  {name:<{width}}"
        if detail:
            line += f"  {detail}"
        lines.append(line)
    n_fail = sum(1 for _, passed, _ in results if not passed)
    lines.append(f"{len(results) - n_fail}/{len(results)} checks passed")
    return "\n".join(lines)


def exit_code(results) -> int:
    return 0 if all(passed for _, passed, _ in results) else 1
