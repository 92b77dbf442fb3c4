"""DNN workload descriptions: ordered layer shapes mapped to training GEMMs.

Each layer contributes three GEMMs per training step (forward, input
gradient, weight gradient).  Convolutions are lowered to GEMMs the same
way the engine executes them (im2col), so for a conv with C_out filters,
C_in*kh*kw patch length and L = OH*OW*batch output positions:

    forward   (M, K, N) = (C_out, C_in*kh*kw, L)
    dgrad     (M, K, N) = (C_in*kh*kw, C_out, L)
    wgrad     (M, K, N) = (C_out, L, C_in*kh*kw)
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import jsonschema

__all__ = [
    "LayerShape",
    "WorkloadSpec",
    "GemmShape",
    "WORKLOAD_SCHEMA",
    "load_workload",
    "save_workload",
    "workload_from_dict",
    "workload_to_dict",
    "preset_workload",
    "PRESET_NAMES",
]

TRAINING_GEMM_ROLES = ("forward", "dgrad", "wgrad")


@dataclass(frozen=True)
class GemmShape:
    m: int
    k: int
    n: int

    @property
    def macs(self) -> int:
        return self.m * self.k * self.n


@dataclass(frozen=True)
class LayerShape:
    """One layer: kind "conv" or "linear" plus its dimensions."""

    kind: str
    name: str = ""
    # linear
    in_features: int = 0
    out_features: int = 0
    # conv
    c_in: int = 0
    c_out: int = 0
    kernel: int = 0
    h_in: int = 0
    w_in: int = 0
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        if self.kind == "linear":
            if self.in_features <= 0 or self.out_features <= 0:
                raise ValueError(f"linear layer {self.name!r} needs positive dims")
        elif self.kind == "conv":
            dims = (self.c_in, self.c_out, self.kernel, self.h_in, self.w_in,
                    self.stride)
            if any(d <= 0 for d in dims) or self.padding < 0:
                raise ValueError(f"conv layer {self.name!r} needs positive dims")
            if self.out_hw()[0] <= 0 or self.out_hw()[1] <= 0:
                raise ValueError(f"conv layer {self.name!r} has empty output")
        else:
            raise ValueError(f"unknown layer kind {self.kind!r}")

    def out_hw(self) -> tuple[int, int]:
        oh = (self.h_in + 2 * self.padding - self.kernel) // self.stride + 1
        ow = (self.w_in + 2 * self.padding - self.kernel) // self.stride + 1
        return oh, ow

    def training_gemms(self, batch_size: int) -> dict[str, GemmShape]:
        """The three training GEMM shapes for this layer."""
        if self.kind == "linear":
            m, k, n = self.out_features, self.in_features, batch_size
        else:
            oh, ow = self.out_hw()
            m, k, n = self.c_out, self.c_in * self.kernel * self.kernel, oh * ow * batch_size
        return {
            "forward": GemmShape(m, k, n),
            "dgrad": GemmShape(k, m, n),
            "wgrad": GemmShape(m, n, k),
        }


@dataclass
class WorkloadSpec:
    name: str
    batch_size: int
    layers: list = field(default_factory=list)

    def __post_init__(self):
        if self.batch_size <= 0:
            raise ValueError("batch_size must be positive")

    def training_gemms(self):
        """Yield (layer_index, layer_name, role, GemmShape) for the whole net."""
        for i, layer in enumerate(self.layers):
            shapes = layer.training_gemms(self.batch_size)
            label = layer.name or f"layer{i}"
            for role in TRAINING_GEMM_ROLES:
                yield i, label, role, shapes[role]

    @property
    def total_macs(self) -> int:
        return sum(s.macs for _, _, _, s in self.training_gemms())


# ---------------------------------------------------------------------------
# JSON serialization

WORKLOAD_SCHEMA = {
    "type": "object",
    "required": ["name", "batch_size", "layers"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "batch_size": {"type": "integer", "minimum": 1},
        "layers": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["kind"],
                "properties": {
                    "kind": {"enum": ["conv", "linear"]},
                    "name": {"type": "string"},
                    "in_features": {"type": "integer", "minimum": 1},
                    "out_features": {"type": "integer", "minimum": 1},
                    "c_in": {"type": "integer", "minimum": 1},
                    "c_out": {"type": "integer", "minimum": 1},
                    "kernel": {"type": "integer", "minimum": 1},
                    "h_in": {"type": "integer", "minimum": 1},
                    "w_in": {"type": "integer", "minimum": 1},
                    "stride": {"type": "integer", "minimum": 1},
                    "padding": {"type": "integer", "minimum": 0},
                },
            },
        },
    },
}


def workload_to_dict(spec: WorkloadSpec) -> dict:
    layers = []
    for layer in spec.layers:
        if layer.kind == "linear":
            d = {"kind": "linear", "name": layer.name,
                 "in_features": layer.in_features,
                 "out_features": layer.out_features}
        else:
            d = {"kind": "conv", "name": layer.name, "c_in": layer.c_in,
                 "c_out": layer.c_out, "kernel": layer.kernel,
                 "h_in": layer.h_in, "w_in": layer.w_in,
                 "stride": layer.stride, "padding": layer.padding}
        layers.append(d)
    return {"name": spec.name, "batch_size": spec.batch_size, "layers": layers}


def workload_from_dict(data: dict) -> WorkloadSpec:
    jsonschema.validate(data, WORKLOAD_SCHEMA)
    layers = [LayerShape(**layer) for layer in data["layers"]]
    return WorkloadSpec(data["name"], data["batch_size"], layers)


def load_workload(path) -> WorkloadSpec:
    with open(path) as f:
        return workload_from_dict(json.load(f))


def save_workload(spec: WorkloadSpec, path):
    with open(path, "w") as f:
        json.dump(workload_to_dict(spec), f, indent=2, sort_keys=True)
        f.write("\n")


# ---------------------------------------------------------------------------
# named presets (standard architecture shapes; pooling folded into h_in/w_in)


def _conv(name, c_in, c_out, kernel, h, w=None, stride=1, padding=0):
    return LayerShape("conv", name=name, c_in=c_in, c_out=c_out, kernel=kernel,
                      h_in=h, w_in=w if w is not None else h,
                      stride=stride, padding=padding)


def _linear(name, n_in, n_out):
    return LayerShape("linear", name=name, in_features=n_in, out_features=n_out)


def _alexnet(batch_size):
    layers = [
        _conv("conv1", 3, 64, 11, 224, stride=4, padding=2),
        _conv("conv2", 64, 192, 5, 27, padding=2),
        _conv("conv3", 192, 384, 3, 13, padding=1),
        _conv("conv4", 384, 256, 3, 13, padding=1),
        _conv("conv5", 256, 256, 3, 13, padding=1),
        _linear("fc6", 9216, 4096),
        _linear("fc7", 4096, 4096),
        _linear("fc8", 4096, 1000),
    ]
    return WorkloadSpec("alexnet", batch_size, layers)


def _vgg16(batch_size):
    layers = []
    h = 224
    c_in = 3
    for stage, (c_out, reps) in enumerate(
            [(64, 2), (128, 2), (256, 3), (512, 3), (512, 3)], start=1):
        for r in range(reps):
            layers.append(_conv(f"conv{stage}_{r + 1}", c_in, c_out, 3, h, padding=1))
            c_in = c_out
        h //= 2
    layers += [_linear("fc1", 25088, 4096), _linear("fc2", 4096, 4096),
               _linear("fc3", 4096, 1000)]
    return WorkloadSpec("vgg16", batch_size, layers)


def _resnet18(batch_size):
    layers = [_conv("conv1", 3, 64, 7, 224, stride=2, padding=3)]
    h = 56  # after the stem max-pool
    c_in = 64
    for stage, c_out in enumerate([64, 128, 256, 512], start=1):
        for block in range(2):
            s = 2 if stage > 1 and block == 0 else 1
            name = f"layer{stage}.{block}"
            layers.append(_conv(f"{name}.conv1", c_in, c_out, 3, h,
                                stride=s, padding=1))
            h_out = h // s
            layers.append(_conv(f"{name}.conv2", c_out, c_out, 3, h_out, padding=1))
            if s != 1 or c_in != c_out:
                layers.append(_conv(f"{name}.down", c_in, c_out, 1, h, stride=s))
            c_in = c_out
            h = h_out
    layers.append(_linear("fc", 512, 1000))
    return WorkloadSpec("resnet18", batch_size, layers)


def _resnet50(batch_size):
    layers = [_conv("conv1", 3, 64, 7, 224, stride=2, padding=3)]
    h = 56
    c_in = 64
    for stage, (width, reps) in enumerate(
            [(64, 3), (128, 4), (256, 6), (512, 3)], start=1):
        c_out = width * 4
        for block in range(reps):
            s = 2 if stage > 1 and block == 0 else 1
            name = f"layer{stage}.{block}"
            layers.append(_conv(f"{name}.conv1", c_in, width, 1, h))
            layers.append(_conv(f"{name}.conv2", width, width, 3, h,
                                stride=s, padding=1))
            h_out = h // s
            layers.append(_conv(f"{name}.conv3", width, c_out, 1, h_out))
            if s != 1 or c_in != c_out:
                layers.append(_conv(f"{name}.down", c_in, c_out, 1, h, stride=s))
            c_in = c_out
            h = h_out
    layers.append(_linear("fc", 2048, 1000))
    return WorkloadSpec("resnet50", batch_size, layers)


_PRESETS = {
    "alexnet": _alexnet,
    "vgg16": _vgg16,
    "resnet18": _resnet18,
    "resnet50": _resnet50,
}

PRESET_NAMES = tuple(sorted(_PRESETS))


def preset_workload(name: str, batch_size: int = 256) -> WorkloadSpec:
    try:
        maker = _PRESETS[name]
    except KeyError:
        raise ValueError(
            f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}") from None
    return maker(batch_size)
