"""Command-line interface.

Subcommands:

    verify   run the self-check suites (exit 1 on any failure)
    gemm     run one GEMM through the engine, write matrices + diagnostics
    train    train the paired toy networks, write per-epoch metrics
    perf     latency/energy/power/area reports, sweeps, baselines

Every command is deterministic given a config file and seed; rerunning
writes byte-identical files.  JSON outputs are validated against the
schemas below before they are written.  Exit codes: 0 success, 1
verification failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import jsonschema
import numpy as np

from . import verify as verify_mod
from .config import ConfigError, RunConfig, load_config
from .gemm import dequantized_reference, rns_gemm
from .perf import (
    AcceleratorConfig,
    COMPUTE_COMPONENTS,
    CostReport,
    SCHEDULES,
    SYSTOLIC_FORMATS,
    accuracy_viable,
    area_report,
    energy_per_mac_sweep,
    energy_report,
    iso_scale,
    spatial_utilization,
    systolic_baseline,
    training_step_latency,
)
from .rns import min_k
from .training import train_toy
from .workloads import PRESET_NAMES

__all__ = [
    "main",
    "COST_REPORT_SCHEMA",
    "GEMM_DIAGNOSTICS_SCHEMA",
    "TRAINING_SUMMARY_SCHEMA",
    "ISO_SCALE_SCHEMA",
]


# ---------------------------------------------------------------------------
# output schemas

COST_REPORT_SCHEMA = {
    "type": "object",
    "required": ["label", "unit", "components", "total", "metrics", "assumptions"],
    "additionalProperties": False,
    "properties": {
        "label": {"type": "string"},
        "unit": {"type": "string"},
        "components": {
            "type": "object",
            "additionalProperties": {"type": "number", "minimum": 0},
        },
        "total": {"type": "number", "minimum": 0},
        "rows": {"type": "array", "items": {"type": "object"}},
        "metrics": {"type": "object"},
        "assumptions": {"type": "array", "items": {"type": "string"}},
    },
}

GEMM_DIAGNOSTICS_SCHEMA = {
    "type": "object",
    "required": ["mode", "shape", "tiles", "max_abs_diff", "mismatch_rate",
                 "engine"],
    "additionalProperties": False,
    "properties": {
        "mode": {"enum": ["ideal", "noisy"]},
        "shape": {
            "type": "object",
            "required": ["m", "k", "n"],
            "properties": {k: {"type": "integer", "minimum": 1}
                           for k in ("m", "k", "n")},
        },
        "tiles": {"type": "object"},
        "max_abs_diff": {"type": "number", "minimum": 0},
        "mismatch_rate": {"type": "number", "minimum": 0},
        "total_detections": {"type": "integer", "minimum": 0},
        "quant_error_a": {"type": "number", "minimum": 0},
        "quant_error_b": {"type": "number", "minimum": 0},
        "seed": {"type": "integer"},
        "engine": {"type": "object"},
    },
}

TRAINING_SUMMARY_SCHEMA = {
    "type": "object",
    "required": ["dataset", "seed", "epochs", "engine", "final"],
    "additionalProperties": False,
    "properties": {
        "dataset": {"type": "string"},
        "seed": {"type": "integer"},
        "epochs": {"type": "integer", "minimum": 1},
        "engine": {"type": "object"},
        "final": {
            "type": "object",
            "additionalProperties": {"type": "number"},
        },
    },
}

ISO_SCALE_SCHEMA = {
    "type": "object",
    "required": ["mode", "format", "scale_factor", "mac_count", "arrays",
                 "array_size"],
    "additionalProperties": False,
    "properties": {
        "mode": {"enum": ["iso-energy", "iso-area"]},
        "format": {"type": "string"},
        "scale_factor": {"type": "number", "minimum": 0},
        "mac_count": {"type": "number", "minimum": 0},
        "arrays": {"type": "integer", "minimum": 1},
        "array_size": {"type": "array", "items": {"type": "integer"},
                       "minItems": 2, "maxItems": 2},
    },
}


# ---------------------------------------------------------------------------
# deterministic writers


def _jsonify(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _write_json(path: Path, obj, schema=None) -> None:
    data = _jsonify(obj)
    if schema is not None:
        jsonschema.validate(data, schema)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _fmt_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, header: list, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt_cell(v) for v in row])


def _write_matrix(path: Path, arr: np.ndarray) -> None:
    np.savetxt(path, arr, delimiter=",", fmt="%.17g")


def _report_dict(rep: CostReport) -> dict:
    return {
        "label": rep.label,
        "unit": rep.unit,
        "components": rep.components,
        "total": rep.total,
        "rows": rep.rows,
        "metrics": rep.metrics,
        "assumptions": rep.assumptions,
    }


def _outdir(args, cfg: RunConfig) -> Path:
    out = Path(args.out) if args.out else cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_cfg(args) -> RunConfig:
    return load_config(getattr(args, "config", None))


# ---------------------------------------------------------------------------
# commands


def cmd_verify(args) -> int:
    names = list(verify_mod.SUITES) if args.suite == "all" else [args.suite]
    results = verify_mod.run_suites(names)
    print(verify_mod.format_results(results))
    return verify_mod.exit_code(results)


def _load_matrix(path: str) -> np.ndarray:
    p = Path(path)
    try:
        arr = np.load(p) if p.suffix == ".npy" else np.loadtxt(p, delimiter=",",
                                                               ndmin=2)
    except Exception as e:
        raise ConfigError(f"cannot read matrix {p}: {e}") from e
    return np.asarray(arr, dtype=np.float64)


def cmd_gemm(args) -> int:
    cfg = _load_cfg(args)
    ecfg = cfg.engine_config()
    out = _outdir(args, cfg)
    seed = cfg.seed if args.seed is None else args.seed

    if (args.a is None) != (args.b is None):
        raise ConfigError("supply both --a and --b, or neither")
    if args.a:
        a, b = _load_matrix(args.a), _load_matrix(args.b)
        if a.shape[1] != b.shape[0]:
            raise ConfigError(f"incompatible shapes {a.shape} x {b.shape}")
    else:
        m, k, n = args.dims
        rng_data = np.random.default_rng(seed)
        a = rng_data.normal(0.0, 2.0, size=(m, k))
        b = rng_data.normal(0.0, 2.0, size=(k, n))

    mode = args.mode or cfg.mode
    rng = np.random.default_rng(seed + 1) if mode == "noisy" else None
    result = rns_gemm(a, b, ecfg, mode=mode, rng=rng)
    reference = dequantized_reference(a, b, ecfg)
    diff = result.output - reference

    _write_matrix(out / "gemm_output.csv", result.output)
    _write_matrix(out / "gemm_reference.csv", reference)
    _write_matrix(out / "gemm_diff.csv", diff)

    diagnostics = {
        "mode": mode,
        "shape": {"m": result.plan.m, "k": result.plan.k, "n": result.plan.n},
        "tiles": {
            "row_tiles": result.plan.row_tiles,
            "k_tiles": result.plan.k_tiles,
            "spatial_fill": result.plan.spatial_fill,
        },
        "max_abs_diff": float(np.abs(diff).max()),
        "mismatch_rate": result.mismatch_rate,
        "total_detections": result.total_detections,
        "quant_error_a": result.quant_error_a,
        "quant_error_b": result.quant_error_b,
        "seed": seed,
        "engine": {
            "mantissa_bits": ecfg.mantissa_bits,
            "group_size": ecfg.group_size,
            "k": ecfg.k,
            "rows": ecfg.rows,
            "rounding": ecfg.rounding,
            "laser_power_margin": ecfg.laser_power_margin,
        },
    }
    _write_json(out / "gemm_diagnostics.json", diagnostics,
                schema=GEMM_DIAGNOSTICS_SCHEMA)

    if args.margins:
        rows = []
        for margin in args.margins:
            mcfg = replace(ecfg, laser_power_margin=margin)
            mres = rns_gemm(a, b, mcfg, mode="noisy",
                            rng=np.random.default_rng(seed + 1))
            rows.append([margin, mres.total_detections,
                         int(mres.residue_mismatches.sum()), mres.mismatch_rate])
        _write_csv(out / "misdetection_rates.csv",
                   ["laser_power_margin", "detections", "mismatches", "rate"],
                   rows)

    print(f"mode={mode}  shape={result.plan.m}x{result.plan.k}x{result.plan.n}  "
          f"max|output-reference|={diagnostics['max_abs_diff']:.3g}  "
          f"mismatch_rate={result.mismatch_rate:.3g}")
    print(f"wrote {out}/gemm_output.csv, gemm_reference.csv, gemm_diff.csv, "
          f"gemm_diagnostics.json"
          + (", misdetection_rates.csv" if args.margins else ""))
    return 0


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    out = _outdir(args, cfg)
    t = cfg.training
    seed = cfg.seed if args.seed is None else args.seed
    epochs = int(t.get("epochs", 30))

    result = train_toy(
        dataset=t.get("dataset", "blobs"),
        net_hidden=tuple(t.get("hidden", (16, 16))),
        engine_cfg=cfg.engine_config(),
        epochs=epochs,
        batch_size=int(t.get("batch_size", 32)),
        lr=float(t.get("lr", 0.5)),
        seed=seed,
        n_samples=int(t.get("n_samples", 400)),
        val_fraction=float(t.get("val_fraction", 0.25)),
        eval_engine_mode=bool(t.get("twin_eval", True)),
    )

    header = ["epoch"] + sorted(k for k in result.metrics[0] if k != "epoch")
    rows = [[m["epoch"]] + [m[k] for k in header[1:]] for m in result.metrics]
    _write_csv(out / "training_metrics.csv", header, rows)

    ecfg = cfg.engine_config()
    summary = {
        "dataset": str(t.get("dataset", "blobs")),
        "seed": seed,
        "epochs": epochs,
        "engine": {
            "mantissa_bits": ecfg.mantissa_bits,
            "group_size": ecfg.group_size,
            "k": ecfg.k,
            "rounding": ecfg.rounding,
        },
        "final": {k: float(v) for k, v in result.final.items()},
    }
    _write_json(out / "training_summary.json", summary,
                schema=TRAINING_SUMMARY_SCHEMA)

    f = result.final
    print(f"dataset={summary['dataset']}  epochs={epochs}  seed={seed}")
    print(f"engine val acc {f['engine_val_acc']:.4f}  "
          f"twin val acc {f['twin_val_acc']:.4f}")
    print(f"wrote {out}/training_metrics.csv, training_summary.json")
    return 0


def _sweep_bfp(out: Path, acfg: AcceleratorConfig) -> None:
    sweep = energy_per_mac_sweep(acfg)
    rows = [[b, g, min_k(b, g), pj, accuracy_viable(b, g)]
            for (b, g), pj in sorted(sweep.items())]
    _write_csv(out / "sweep_bfp.csv",
               ["mantissa_bits", "group_size", "k", "energy_per_mac_pj",
                "accuracy_viable"],
               rows)


def _sweep_mdpus(out: Path, workload, acfg: AcceleratorConfig) -> None:
    rows = []
    for r in (4, 8, 16, 32, 64, 128, 256):
        sub = replace(acfg, rows=r)
        mdpus = sub.units * len(sub.moduli) * r
        rows.append([r, mdpus, spatial_utilization(workload, sub)])
    _write_csv(out / "sweep_mdpus.csv",
               ["rows", "mdpus", "spatial_utilization"], rows)


def cmd_perf(args) -> int:
    cfg = _load_cfg(args)
    acfg = cfg.accelerator_config()
    workload = cfg.workload()
    out = _outdir(args, cfg)
    schedule = args.schedule

    try:
        latency = training_step_latency(workload, schedule, acfg)
        energy = energy_report(workload, schedule, acfg)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    area = area_report(acfg)

    _write_csv(out / f"latency_{schedule}.csv",
               ["layer", "role", "m", "k", "n", "dataflow", "cycles", "ns"],
               [[r["layer"], r["role"], r["m"], r["k"], r["n"],
                 r["dataflow"], r["cycles"], r["ns"]] for r in latency["rows"]])
    _write_json(out / "energy_report.json", _report_dict(energy),
                schema=COST_REPORT_SCHEMA)
    _write_json(out / "area_report.json", _report_dict(area),
                schema=COST_REPORT_SCHEMA)

    written = [f"latency_{schedule}.csv", "energy_report.json",
               "area_report.json"]

    if args.breakdown:
        pb = energy.metrics["power_breakdown_w"]
        total_w = energy.metrics["power_w"]
        _write_csv(out / "power_breakdown.csv",
                   ["component", "watts", "share"],
                   [[name, w, (w / total_w if total_w else 0.0)]
                    for name, w in sorted(pb.items())])
        _write_csv(out / "area_breakdown.csv",
                   ["component", "mm2", "share"],
                   [[name, a, a / area.total]
                    for name, a in sorted(area.components.items())])
        written += ["power_breakdown.csv", "area_breakdown.csv"]

    if args.sweep == "bfp":
        _sweep_bfp(out, acfg)
        written.append("sweep_bfp.csv")
    elif args.sweep == "mdpus":
        _sweep_mdpus(out, workload, acfg)
        written.append("sweep_mdpus.csv")

    if args.format:
        fmt = args.format
        try:
            base = systolic_baseline(workload, fmt, arrays=args.arrays,
                                     schedule=args.baseline_schedule)
        except ValueError as e:
            raise ConfigError(str(e)) from e
        _write_json(out / f"baseline_{fmt}.json", _report_dict(base),
                    schema=COST_REPORT_SCHEMA)
        comparison = [
            ["latency_ns", latency["total_ns"], base.metrics["total_ns"],
             base.metrics["total_ns"] / latency["total_ns"]],
            ["energy_pj", energy.total, base.total, base.total / energy.total],
            ["energy_per_mac_pj", energy.metrics["energy_per_mac_pj"],
             base.metrics["energy_per_mac_pj"],
             base.metrics["energy_per_mac_pj"]
             / energy.metrics["energy_per_mac_pj"]],
        ]
        _write_csv(out / f"comparison_{fmt}.csv",
                   ["metric", "photonic", fmt, "ratio_vs_photonic"],
                   comparison)
        written += [f"baseline_{fmt}.json", f"comparison_{fmt}.csv"]

        if args.iso:
            try:
                info = iso_scale(args.iso, fmt, acfg)
            except ValueError as e:
                raise ConfigError(str(e)) from e
            _write_json(out / f"iso_{args.iso}_{fmt}.json", info,
                        schema=ISO_SCALE_SCHEMA)
            written.append(f"iso_{args.iso}_{fmt}.json")
    elif args.iso:
        raise ConfigError("--iso needs --format to scale against")

    print(f"workload={workload.name}  batch={workload.batch_size}  "
          f"schedule={schedule}")
    print(f"latency {latency['total_ns']:.1f} ns  "
          f"energy/MAC {energy.metrics['energy_per_mac_pj']:.4f} pJ  "
          f"power {energy.metrics['power_w']:.2f} W  "
          f"area {area.total:.1f} mm2 "
          f"(stacked {area.metrics['stacked_mm2']:.1f})")
    print("wrote " + ", ".join(str(out / name) for name in written))
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rnsaccel",
        description="Residue-arithmetic photonic accelerator: functional "
                    "engine, toy training, and performance models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run self-check suites")
    p.add_argument("--suite", default="all",
                   choices=sorted(verify_mod.SUITES) + ["all"])
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gemm", help="run one GEMM through the engine")
    p.add_argument("--config", help="YAML run config")
    p.add_argument("--dims", nargs=3, type=int, default=[64, 32, 100],
                   metavar=("M", "K", "N"))
    p.add_argument("--a", help="left matrix file (.npy or .csv)")
    p.add_argument("--b", help="right matrix file (.npy or .csv)")
    p.add_argument("--mode", choices=["ideal", "noisy"])
    p.add_argument("--margins", type=float, nargs="+",
                   help="laser power margins for a mis-detection sweep")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gemm)

    p = sub.add_parser("train", help="train paired toy networks")
    p.add_argument("--config", help="YAML run config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("perf", help="performance and cost reports")
    p.add_argument("--config", help="YAML run config")
    p.add_argument("--schedule", default="OPT2",
                   choices=[s for s in SCHEDULES if s != "DF3"])
    p.add_argument("--format", choices=sorted(SYSTOLIC_FORMATS),
                   help="add a systolic baseline at this MAC format")
    p.add_argument("--arrays", type=int, default=1,
                   help="systolic array count for the baseline")
    p.add_argument("--baseline-schedule", default="OPT2", choices=list(SCHEDULES))
    p.add_argument("--iso", choices=["iso-energy", "iso-area"],
                   help="emit the array count matching the photonic target")
    p.add_argument("--sweep", choices=["bfp", "mdpus"])
    p.add_argument("--breakdown", action="store_true",
                   help="emit power and area component shares")
    p.add_argument("--out")
    p.set_defaults(func=cmd_perf)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
