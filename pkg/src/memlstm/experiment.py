"""Build a crossbar-backed network from a config, train it and write artifacts.

Output directory layout::

    state.json              config plus pointer to the full conductance map
    crossbar.txt            every cell of the array
    maps/<layer>_conductance.txt, maps/<layer>_weights.txt
    training_log.csv        per-batch and per-epoch records
    baseline_log.csv        float network trained on the same data (gait)
    predictions.csv         one row per input month (airline)
    metrics.json, summary.txt
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import codec as cd
from .config import PRESET_SHAPES, PRESETS, ConfigError, device_params, noise_model, partitions, validate_config
from .data import FeatureScaler, GaitDataset, load_airline, make_regression_pairs, sliding_windows, synth_gait_generator
from .device import Crossbar, init_array, load_map, read_conductances, save_map
from .network import (
    CrossbarEngine,
    FcLayerSpec,
    FloatEngine,
    LayerMapping,
    LstmLayerSpec,
    Network,
    classify_final_step,
    sequence_forward,
)
from .train import CLASSIFICATION, REGRESSION, Dataset, OptimizerState, train_loop

log = logging.getLogger(__name__)

STATE_FILE = "state.json"
CROSSBAR_FILE = "crossbar.txt"


@dataclass
class Hardware:
    xbar: Crossbar
    mappings: dict
    net: Network


def layer_specs(cfg: dict):
    n = cfg["network"]
    lstm = LstmLayerSpec(n["input_dim"], n["hidden_dim"], n["lstm_bias"])
    fc = FcLayerSpec(n["hidden_dim"], n["output_dim"], n["fc_bias"], n["activation"])
    return lstm, fc


def build_mappings(cfg: dict) -> dict:
    """Layer mappings from the config partitions.

    Preset tasks must land on their reference sub-array shapes.
    """
    lspec, fspec = layer_specs(cfg)
    parts = partitions(cfg)
    mappings = {}
    for name, spec in (("lstm", lspec), ("fc", fspec)):
        p = parts[name]
        mappings[name] = LayerMapping(name, p, spec.n_inputs, spec.n_outputs, int(spec.has_bias))
    shapes = PRESET_SHAPES.get(cfg["task"])
    if shapes and cfg["network"] == PRESETS[cfg["task"]]["network"]:
        for name, want in shapes.items():
            got = mappings[name].partition.shape
            if got != want:
                raise ValueError(f"{name} mapping occupies {got}, expected {want}")
    return mappings


def _codecs(cfg, params):
    c = cfg["codec"]
    wcodec = cd.WeightCodec(c["g_per_w_siemens"], params.g_max)
    vcodec = cd.VoltageCodec(v_full_scale=c["v_full_scale_volts"], v_read=params.v_read)
    return wcodec, vcodec


def build_hardware(cfg: dict, xbar_seed: int, conductances=None) -> Hardware:
    """Crossbar, mappings and a crossbar-backed network.

    With ``conductances`` the array is restored from a map instead of being
    initialized.
    """
    params = device_params(cfg)
    dev = cfg["device"]
    xbar = Crossbar(dev["rows"], dev["cols"], params, noise_model(cfg), xbar_seed, bool(dev.get("allow_oversize")))
    if conductances is None:
        init_array(xbar, spread=cfg["noise"].get("init_spread_siemens"))
    else:
        if np.shape(conductances) != xbar.g.shape:
            raise ValueError(f"conductance map {np.shape(conductances)} does not match {xbar.g.shape}")
        xbar.g[...] = conductances
    mappings = build_mappings(cfg)
    wcodec, vcodec = _codecs(cfg, params)
    lspec, fspec = layer_specs(cfg)
    net = Network(
        lspec,
        fspec,
        CrossbarEngine(xbar, mappings["lstm"], wcodec, vcodec),
        CrossbarEngine(xbar, mappings["fc"], wcodec, vcodec),
    )
    return Hardware(xbar, mappings, net)


def export_maps(xbar: Crossbar, mappings: dict, path, wcodec: cd.WeightCodec | None = None, seed: int = 0) -> list:
    """Conductance map per partition, plus decoded weights when a codec is given."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    written = []
    for name, m in mappings.items():
        g = read_conductances(xbar, m.partition)
        f = path / f"{name}_conductance.txt"
        save_map(f, g, "S", seed)
        written.append(f)
        if wcodec is not None:
            f = path / f"{name}_weights.txt"
            save_map(f, cd.decode_weights(*cd.unpair_rows(g), wcodec), "w", seed)
            written.append(f)
    return written


def _seeds(seed: int) -> dict:
    names = ("crossbar", "data", "shuffle")
    kids = np.random.SeedSequence(seed).spawn(len(names))
    return {n: int(k.generate_state(1)[0]) for n, k in zip(names, kids)}


def _opt_state(cfg):
    o = cfg["optimizer"]
    return OptimizerState(
        lr=o["learning_rate"],
        momentum=o["momentum"],
        decay=o["decay"] if o.get("decay") is not None else 0.9,
        eps=o["epsilon"] if o.get("epsilon") is not None else 1e-8,
    )


def _train(cfg, net, data, shuffle_seed, evaluate):
    t = cfg["training"]
    return train_loop(
        net,
        data,
        epochs=cfg["epochs"],
        optimizer=cfg["optimizer"]["name"],
        opt_state=_opt_state(cfg),
        batch_size=t["batch_size"],
        shuffle=t.get("shuffle", False),
        rng=np.random.default_rng(shuffle_seed),
        evaluate=evaluate,
    )


# -- airline -------------------------------------------------------------------


def airline_predict(net: Network, inputs, window: int | None):
    """One prediction per input month.

    With a window each month sees at most the ``window`` most recent inputs;
    otherwise the whole series runs as one sequence.
    """
    x = np.asarray(inputs, dtype=float)
    if window is None:
        y, _ = sequence_forward(net, x[None, :, None])
        return y[0, :, 0]
    out = np.empty(len(x))
    W = min(window, len(x))
    full, _ = sequence_forward(net, sliding_windows(x, W)[..., None])
    out[W - 1 :] = full[:, -1, 0]
    for t in range(W - 1):
        y, _ = sequence_forward(net, x[None, : t + 1, None])
        out[t] = y[0, -1, 0]
    return out


def pearson(a, b) -> float:
    return float(np.corrcoef(a, b)[0, 1])


def _run_airline(cfg, hw, seeds, out: Path):
    d = cfg["data"]
    series = load_airline(d.get("source"), d.get("n_train", 96))
    x, y, _, out_scaler = make_regression_pairs(series, d.get("headroom", 1.0), d.get("signed_inputs", False))
    n_pairs = series.n_train - 1
    window = cfg["training"].get("window")
    if window is None:
        inputs, targets = x[None, :n_pairs, None], y[None, :n_pairs, None]
    else:
        inputs = sliding_windows(x[:n_pairs], window)[..., None]
        targets = sliding_windows(y[:n_pairs], window)[..., None]
    data = Dataset(REGRESSION, inputs, targets)
    test = slice(n_pairs, None)

    def evaluate(net):
        return pearson(airline_predict(net, x, window)[test], y[test])

    tlog = _train(cfg, hw.net, data, seeds["shuffle"], evaluate)
    pred = airline_predict(hw.net, x, window)
    pred_count = out_scaler.inverse(pred)
    actual = series.values[1:]
    with open(out / "predictions.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("month", "split", "input", "predicted", "actual"))
        for k in range(len(pred)):
            split = "train" if k < n_pairs else "test"
            w.writerow((series.months[k + 1], split, repr(float(series.values[k])),
                        repr(float(pred_count[k])), repr(float(actual[k]))))
    losses = tlog.epoch_losses()
    metrics = {
        "loss_first": losses[0],
        "loss_final": losses[-1],
        "loss_ratio": losses[-1] / losses[0],
        "test_pearson": pearson(pred_count[test], actual[test]),
        "test_rmse_thousands": float(np.sqrt(np.mean((pred_count[test] - actual[test]) ** 2))),
        "n_predictions": len(pred),
    }
    return tlog, None, metrics


# -- gait ----------------------------------------------------------------------


def gait_arrays(ds: GaitDataset):
    """Train and test features mapped per dimension onto ``[-1, 1]``."""
    xtr, ytr = GaitDataset.arrays(ds.train, scale=1.0)
    xte, yte = GaitDataset.arrays(ds.test, scale=1.0)
    scaler = FeatureScaler.fit(xtr)
    return scaler.transform(xtr), ytr, scaler.transform(xte), yte


def accuracy(net: Network, x, labels) -> float:
    y, _ = sequence_forward(net, x)
    return float(np.mean(classify_final_step(y) == labels))


def _run_gait(cfg, hw, seeds, out: Path):
    d = cfg["data"]
    ds = synth_gait_generator(
        seeds["data"], d.get("n_classes", 8), d.get("n_sequences", 664),
        d.get("test_fraction", 0.1), d.get("n_harmonics", 3),
    )
    xtr, ytr, xte, yte = gait_arrays(ds)
    data = Dataset(CLASSIFICATION, xtr, ytr, ds.n_classes)

    def evaluate(net):
        return accuracy(net, xte, yte)

    base_log = None
    metrics = {"n_train": len(ytr), "n_test": len(yte)}
    if d.get("float_baseline", True):
        w = hw.net.weights()
        base = Network(hw.net.lstm_spec, hw.net.fc_spec, FloatEngine(w["lstm"]), FloatEngine(w["fc"]))
        base_log = _train(cfg, base, data, seeds["shuffle"], evaluate)
        acc = base_log.metrics()
        metrics.update(baseline_max_accuracy=max(acc), baseline_final_accuracy=acc[-1])
    tlog = _train(cfg, hw.net, data, seeds["shuffle"], evaluate)
    acc = tlog.metrics()
    losses = tlog.epoch_losses()
    metrics.update(
        max_accuracy=max(acc),
        final_accuracy=acc[-1],
        loss_first=losses[0],
        loss_final=losses[-1],
        loss_ratio=losses[-1] / losses[0],
    )
    if base_log is not None:
        metrics["accuracy_gap"] = metrics["baseline_max_accuracy"] - metrics["max_accuracy"]
    return tlog, base_log, metrics


# -- orchestration -------------------------------------------------------------


def write_state(cfg: dict, hw: Hardware, out: Path):
    save_map(out / CROSSBAR_FILE, hw.xbar.g, "S", cfg["seed"])
    state = {"config": cfg, "crossbar": CROSSBAR_FILE}
    (out / STATE_FILE).write_text(json.dumps(state, indent=2, sort_keys=True) + "\n")


def load_state(path) -> tuple[dict, Hardware]:
    """Config and rebuilt hardware from a :func:`write_state` directory."""
    path = Path(path)
    try:
        state = json.loads(path.read_text())
        cfg = state["config"]
        g, _ = load_map(path.parent / state["crossbar"])
    except (KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: not a state file ({exc})") from exc
    errors = validate_config(cfg)
    if errors:
        raise ConfigError("; ".join(errors))
    return cfg, build_hardware(cfg, _seeds(cfg["seed"])["crossbar"], conductances=g)


def _summary(cfg, metrics) -> str:
    lines = [f"task {cfg['task']}", f"seed {cfg['seed']}", f"epochs {cfg['epochs']}"]
    for k in sorted(metrics):
        v = metrics[k]
        lines.append(f"{k} {v:.6g}" if isinstance(v, float) else f"{k} {v}")
    return "\n".join(lines) + "\n"


def run_experiment(cfg: dict, out) -> dict:
    """Train per ``cfg`` and write every artifact into ``out``.

    With zero epochs only the initial maps and state are written. Returns
    the metrics dict (empty for zero epochs).
    """
    errors = validate_config(cfg)
    if errors:
        raise ConfigError("invalid config:\n  " + "\n  ".join(errors))
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = _seeds(cfg["seed"])
    hw = build_hardware(cfg, seeds["crossbar"])
    wcodec = hw.net.lstm.wcodec

    metrics = {}
    if cfg["epochs"] > 0:
        runner = _run_airline if cfg["task"] == "airline" else _run_gait
        tlog, base_log, metrics = runner(cfg, hw, seeds, out)
        tlog.write_csv(out / "training_log.csv")
        if base_log is not None:
            base_log.write_csv(out / "baseline_log.csv")
        metrics = {"task": cfg["task"], "seed": cfg["seed"], "epochs": cfg["epochs"], **metrics}
        (out / "metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
        (out / "summary.txt").write_text(_summary(cfg, metrics))
    export_maps(hw.xbar, hw.mappings, out / "maps", wcodec, cfg["seed"])
    write_state(cfg, hw, out)
    return metrics
