"""Experiment configuration: JSON files with unit-suffixed keys, plus presets."""

from __future__ import annotations

import copy
import json
from pathlib import Path

from .device import DeviceParams, NoiseModel, Partition

TASKS = ("airline", "gait-synthetic")

_DEVICE = {
    "rows": 128,
    "cols": 64,
    "v_set_volts": 2.5,
    "v_reset_volts": 1.7,
    "v_read_volts": 0.2,
    "v_gate0_volts": 1.0,
    "v_gate_max_volts": 1.6,
    "v_gate_min_volts": 0.7,
    "v_gate_reset_volts": 5.0,
    "dvgate_per_dG_volts_per_siemens": 1.02e4,
    "g_max_siemens": None,
    "wire_resistance_ohms": 0.3,
}

_NOISE = {
    "read_noise_rel": 0.0,
    "program_noise_siemens": 0.0,
    "quantization_levels": None,
    "init_spread_siemens": 1.0e-5,
}

PRESETS = {
    "airline": {
        "task": "airline",
        "seed": 0,
        "epochs": 800,
        "device": dict(_DEVICE),
        "noise": dict(_NOISE, init_spread_siemens=1.0e-5),
        "codec": {"g_per_w_siemens": 1.0e-4, "v_full_scale_volts": 0.2},
        "network": {
            "input_dim": 1,
            "hidden_dim": 15,
            "output_dim": 1,
            "lstm_bias": True,
            "fc_bias": True,
            "activation": "sigmoid",
            "lstm_partition": [0, 34, 0, 60],
            "fc_partition": [0, 32, 60, 1],
        },
        "optimizer": {"name": "sgdm", "learning_rate": 0.01, "momentum": 0.9, "decay": None, "epsilon": None},
        "training": {"batch_size": None, "window": 12, "shuffle": False},
        "data": {"n_train": 96, "headroom": 1.7, "signed_inputs": True, "source": None},
    },
    "gait-synthetic": {
        "task": "gait-synthetic",
        "seed": 0,
        "epochs": 50,
        "device": dict(_DEVICE),
        "noise": dict(_NOISE, init_spread_siemens=1.0e-5),
        "codec": {"g_per_w_siemens": 3.0e-4, "v_full_scale_volts": 0.2},
        "network": {
            "input_dim": 50,
            "hidden_dim": 14,
            "output_dim": 8,
            "lstm_bias": False,
            "fc_bias": False,
            "activation": "softmax",
            "lstm_partition": [0, 128, 0, 56],
            "fc_partition": [0, 28, 56, 8],
        },
        "optimizer": {"name": "rmsprop", "learning_rate": 0.01, "momentum": 0.0, "decay": 0.9, "epsilon": 1.0e-8},
        "training": {"batch_size": 50, "window": None, "shuffle": True},
        "data": {"n_sequences": 664, "n_classes": 8, "test_fraction": 0.1, "n_harmonics": 3, "float_baseline": True},
    },
}

# expected occupancy of each preset's layers on the array
PRESET_SHAPES = {
    "airline": {"lstm": (34, 60), "fc": (32, 1)},
    "gait-synthetic": {"lstm": (128, 56), "fc": (28, 8)},
}


class ConfigError(ValueError):
    pass


def preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return copy.deepcopy(PRESETS[name])


def load_config(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return cfg


def dump_config(cfg: dict, path):
    Path(path).write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")


def device_params(cfg: dict) -> DeviceParams:
    d = cfg["device"]
    return DeviceParams(
        v_set=d["v_set_volts"],
        v_reset=d["v_reset_volts"],
        v_read=d["v_read_volts"],
        v_gate0=d["v_gate0_volts"],
        v_gate_max=d["v_gate_max_volts"],
        v_gate_min=d["v_gate_min_volts"],
        v_gate_reset=d["v_gate_reset_volts"],
        dvgate_per_dG=d["dvgate_per_dG_volts_per_siemens"],
        g_max_override=d.get("g_max_siemens"),
        wire_resistance=d.get("wire_resistance_ohms", 0.3),
    )


def noise_model(cfg: dict) -> NoiseModel:
    n = cfg["noise"]
    return NoiseModel(n["read_noise_rel"], n["program_noise_siemens"], n.get("quantization_levels"))


def partitions(cfg: dict) -> dict[str, Partition]:
    net = cfg["network"]
    return {"lstm": Partition(*net["lstm_partition"]), "fc": Partition(*net["fc_partition"])}


_REQUIRED = {
    "device": tuple(k for k in _DEVICE if k not in ("g_max_siemens", "wire_resistance_ohms")),
    "noise": ("read_noise_rel", "program_noise_siemens"),
    "codec": ("g_per_w_siemens", "v_full_scale_volts"),
    "network": tuple(PRESETS["airline"]["network"]),
    "optimizer": ("name", "learning_rate", "momentum"),
    "training": ("batch_size",),
    "data": (),
}


def validate_config(cfg: dict) -> list[str]:
    """Every violated invariant as a human-readable string; empty when clean."""
    errors = []
    if cfg.get("task") not in TASKS:
        errors.append(f"task: must be one of {TASKS}, got {cfg.get('task')!r}")
    for key in ("seed", "epochs"):
        if not isinstance(cfg.get(key), int) or cfg[key] < 0:
            errors.append(f"{key}: must be a non-negative integer")
    for section, keys in _REQUIRED.items():
        if not isinstance(cfg.get(section), dict):
            errors.append(f"{section}: missing section")
            continue
        errors += [f"{section}.{k}: missing" for k in keys if k not in cfg[section]]
    if errors:
        return errors

    dev = cfg["device"]
    try:
        params = device_params(cfg)
    except ValueError as exc:
        errors.append(f"device: {exc}")
        params = None
    if not (dev["rows"] <= 128 and dev["cols"] <= 64) and not dev.get("allow_oversize"):
        errors.append("device: array larger than 128x64 requires allow_oversize")

    noise = cfg["noise"]
    for k in ("read_noise_rel", "program_noise_siemens", "init_spread_siemens"):
        if noise.get(k, 0) < 0:
            errors.append(f"noise.{k}: must be >= 0")
    q = noise.get("quantization_levels")
    if q is not None and (not isinstance(q, int) or q < 2):
        errors.append("noise.quantization_levels: must be an integer >= 2")

    codec = cfg["codec"]
    if codec["g_per_w_siemens"] <= 0:
        errors.append("codec.g_per_w_siemens: must be positive")
    if codec["v_full_scale_volts"] <= 0:
        errors.append("codec.v_full_scale_volts: must be positive")
    if codec["v_full_scale_volts"] > dev["v_read_volts"]:
        errors.append(
            f"codec.v_full_scale_volts: {codec['v_full_scale_volts']} V exceeds "
            f"v_read {dev['v_read_volts']} V (would disturb stored conductances)"
        )

    net = cfg["network"]
    if net["activation"] not in ("sigmoid", "softmax"):
        errors.append("network.activation: must be sigmoid or softmax")
    parts = {}
    for name in ("lstm", "fc"):
        raw = net[f"{name}_partition"]
        if not (isinstance(raw, list) and len(raw) == 4 and all(isinstance(v, int) for v in raw)):
            errors.append(f"network.{name}_partition: must be [row_start, row_count, col_start, col_count]")
            continue
        parts[name] = part = Partition(*raw)
        if not part.fits(dev["rows"], dev["cols"]):
            errors.append(f"network.{name}_partition: {raw} does not fit the {dev['rows']}x{dev['cols']} array")
    H = net["hidden_dim"]
    want = {
        "lstm": (2 * (net["input_dim"] + H + int(net["lstm_bias"])), 4 * H),
        "fc": (2 * (H + int(net["fc_bias"])), net["output_dim"]),
    }
    for name, part in parts.items():
        if part.shape != want[name]:
            errors.append(f"network.{name}_partition: shape {part.shape} does not match layer layout {want[name]}")
    if len(parts) == 2 and parts["lstm"].overlaps(parts["fc"]):
        errors.append("network: lstm_partition and fc_partition overlap")

    opt = cfg["optimizer"]
    if opt["name"] not in ("sgdm", "rmsprop"):
        errors.append("optimizer.name: must be sgdm or rmsprop")
    if opt["learning_rate"] <= 0:
        errors.append("optimizer.learning_rate: must be positive")
    if not 0 <= opt["momentum"] < 1:
        errors.append("optimizer.momentum: must lie in [0, 1)")
    if opt["name"] == "rmsprop":
        if opt.get("decay") is None or not 0 <= opt["decay"] < 1:
            errors.append("optimizer.decay: rmsprop needs a decay in [0, 1)")
        if opt.get("epsilon") is None or opt["epsilon"] <= 0:
            errors.append("optimizer.epsilon: rmsprop needs a positive epsilon")

    bs = cfg["training"]["batch_size"]
    if bs is not None and (not isinstance(bs, int) or bs < 1):
        errors.append("training.batch_size: must be a positive integer or null")
    win = cfg["training"].get("window")
    if win is not None and (not isinstance(win, int) or win < 1):
        errors.append("training.window: must be a positive integer or null")

    data = cfg["data"]
    if cfg["task"] == "airline":
        if data.get("headroom", 1.0) < 1.0:
            errors.append("data.headroom: must be >= 1")
        if net["input_dim"] != 1 or net["output_dim"] != 1:
            errors.append("network: airline task needs input_dim = output_dim = 1")
    else:
        if data.get("n_classes", 8) != net["output_dim"]:
            errors.append("network.output_dim: must equal data.n_classes")
        if net["input_dim"] != 50:
            errors.append("network.input_dim: gait features are 50-dimensional")
        if net["activation"] != "softmax":
            errors.append("network.activation: classification needs softmax")
    del params
    return errors
