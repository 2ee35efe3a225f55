"""Command-line front end: ``mtjsnn <command> [--config run.yaml] [flags]``.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.
Every output file set carries the hash of the resolved configuration in its
JSON sidecar and in ``manifest.json``.
"""
import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import ConfigError
from .device import (InsufficientRangeError, InsufficientStatistics, SwitchingCharacteristic,
                     auto_characterize, calibrate_barrier, characterize_switching,
                     dwell_time_analysis, fit_sigmoid, retention_failure_probability,
                     retention_time)
from .energy import ReadEnergyModel, TargetUnreached, cumulative_components, report, write_comparison
from .library import device_entry, load_library, neuron_model
from .llgs import NumericalFailure, table1_device
from .mnist import bundled, load_dataset
from .network import bundled_network, load_network, oracle_accuracy
from .readout import ReadCircuitParams, characterize_async
from .snn import (SWEEP_KINDS, build_hardware, device_spike_rate, evaluate, sweep_variations,
                  variation_factory)

log = logging.getLogger("mtjsnn")

COMMANDS = ("characterize", "fit", "retention", "dwell", "simulate", "sweep", "energy-report")


def _warn(msg):
    # straight to stderr so warnings survive any logging setup of the host
    print(f"warning: {msg}", file=sys.stderr)


class UsageError(Exception):
    pass


class Run:
    """Resolved configuration plus the output directory and manifest."""

    def __init__(self, args):
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.workers is not None:
            overrides["workers"] = args.workers
        net = {}
        if args.mode is not None:
            net["mode"] = args.mode
        if args.fidelity is not None:
            net["fidelity"] = args.fidelity
        if getattr(args, "time", None) is not None:
            net["time_ns"] = args.time
        if getattr(args, "n_images", None) is not None:
            net["n_images"] = args.n_images
        if net:
            overrides["network"] = net
        self.cfg = cfgmod.load(args.config, overrides)
        self.hash = cfgmod.config_hash(self.cfg)
        self.out = cfgmod.output_dir(self.cfg, args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files = []
        self.command = args.command

    @property
    def seed(self):
        return int(self.cfg["seed"])

    @property
    def workers(self):
        return int(self.cfg.get("workers") or os.cpu_count() or 1)

    def path(self, name):
        p = self.out / name
        self.files.append(name)
        return p

    def write_json(self, name, doc):
        doc = dict(doc, config_hash=self.hash)
        with open(self.path(name), "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")

    def write_csv(self, name, header, rows):
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)

    def finish(self):
        manifest = {"command": self.command, "config_hash": self.hash, "config": self.cfg,
                    "files": sorted(self.files)}
        with open(self.out / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def _g(x):
    return f"{x:.10g}"


# ----------------------------------------------------------------- helpers

def _devices(cfg):
    return [(e, cfgmod.device_from_entry(e)) for e in cfg["devices"]]


def _sim(cfg):
    s = cfg["simulation"]
    return dict(dt=s["dt_ns"] * 1e-9, pulse_width=s["pulse_width_ns"] * 1e-9,
                warmup=s["warmup_ns"] * 1e-9, settle=s["settle_ns"] * 1e-9)


def _circuit(cfg, tau_rc=None):
    r = cfg["readout"]
    return ReadCircuitParams(read_current=r["read_current_ua"] * 1e-6,
                             read_time_sync=r["read_time_ns"] * 1e-9,
                             tau_rc=tau_rc if tau_rc is not None else r["tau_rc_ns"] * 1e-9,
                             sigma_level=r["sigma_level"],
                             **({"offset_per_sigma": r["offset_per_sigma"]}
                                if "offset_per_sigma" in r else {}))


def _dataset(cfg):
    d = cfg["dataset"]
    spec = d["images"]
    if spec.startswith("bundled:"):
        return bundled(spec.split(":", 1)[1])
    if not Path(spec).exists():
        raise ConfigError(f"dataset not found: {spec}")
    return load_dataset(spec, d.get("labels"))


def _network(cfg):
    spec = cfg["network"]["weights"]
    if spec.startswith("bundled:"):
        return bundled_network(spec.split(":", 1)[1])
    if not Path(spec).exists():
        raise ConfigError(f"weight file not found: {spec}")
    return load_network(spec)


def _library(cfg):
    return load_library(cfg["library"])


def _neuron(cfg, lib, name, mode):
    """NeuronModel for a library device or a config device characterised on the fly."""
    circuit = _circuit(cfg, tau_rc=lib["tau_rc_s"])
    if name in lib["devices"]:
        e = lib["devices"][name]
        if mode not in e:
            raise ConfigError(f"library device {name} has no {mode} characterisation")
        return neuron_model(lib, name, mode, circuit), e
    entries = {e["name"]: e for e in cfg["devices"]}
    if name not in entries:
        raise ConfigError(f"device {name!r} is neither in the library nor in the config")
    params = cfgmod.device_from_entry(entries[name])
    s = cfg["simulation"]
    e = device_entry(params, circuit, mode=mode, n_trials=s["n_trials"], seed=cfg["seed"],
                     dt=s["dt_ns"] * 1e-9)
    doc = {"tau_rc_s": lib["tau_rc_s"], "devices": {name: e}}
    return neuron_model(doc, name, mode, circuit), e


def _device_params(cfg, name, entry):
    """DeviceParams behind a library or config device name."""
    for e in cfg["devices"]:
        if e["name"] == name:
            return cfgmod.device_from_entry(e)
    if "preset" in entry:
        return table1_device(entry["preset"])
    raise ConfigError(f"no device geometry for {name!r}")


def _pick_device(cfg, lib, mode):
    name = cfg["network"].get("device")
    if name:
        return name
    for n, e in lib["devices"].items():
        if e["mode"] == mode:
            return n
    raise ConfigError(f"no {mode} device in the library")


# ----------------------------------------------------------------- commands

def cmd_characterize(run):
    cfg = run.cfg
    devs = _devices(cfg)
    if not devs:
        _warn("no devices configured; nothing to characterize")
        return
    s = cfg["simulation"]
    sim = _sim(cfg)
    mode_flag = cfg["network"]["mode"] if run.mode_given else None
    for entry, params in devs:
        delta = calibrate_barrier(params)
        seed = run.seed
        mode = entry.get("mode") or mode_flag or "sync"
        if mode == "async":
            cur = s.get("currents_ua")
            cur = None if cur is None else np.asarray(cur) * 1e-6
            ch = characterize_async(params, _circuit(cfg), cur, s["async_duration_ns"] * 1e-9, seed,
                                    dt=sim["dt"])
        elif "currents_ua" in s:
            ch = characterize_switching(params, sim["pulse_width"], np.asarray(s["currents_ua"]) * 1e-6,
                                        s["n_trials"], seed, dt=sim["dt"], warmup=sim["warmup"],
                                        settle=sim["settle"])
        else:
            ch = auto_characterize(params, sim["pulse_width"], s["n_trials"], seed,
                                   n_points=s["n_points"], span=s["span"], dt=sim["dt"],
                                   warmup=sim["warmup"], settle=sim["settle"])
        name = entry["name"]
        ch.to_csv(run.path(f"{name}_switching.csv"))
        run.write_json(f"{name}_switching.json", ch.sidecar(delta, device=name, mode=mode, seed=seed))
        log.info("%s: i_bias %.4g uA, i_o %.4g uA, residual %.3g", name, ch.i_bias * 1e6,
                 ch.i_o * 1e6, ch.fit_residual)


def cmd_fit(run):
    inputs = run.cfg.get("fit", {}).get("inputs", [])
    if not inputs:
        _warn("no fit inputs configured")
        return
    rows = []
    for path in inputs:
        if not Path(path).exists():
            raise ConfigError(f"fit input not found: {path}")
        ch = SwitchingCharacteristic.from_files(path)
        b, o, r = fit_sigmoid(ch.currents, ch.p_switch)
        stem = Path(path).stem
        run.write_json(f"{stem}_fit.json", {"source": str(path), "i_bias_A": b, "i_o_A": o,
                                            "residual": r})
        rows.append([stem, _g(b), _g(o), _g(r)])
    run.write_csv("fits.csv", ["source", "i_bias_A", "i_o_A", "residual"], rows)


def cmd_retention(run):
    s = run.cfg["simulation"]
    t_read = s["t_read_ns"]
    tau0 = s["tau0_ns"] * 1e-9
    rows = [[_g(d), _g(retention_time(d, tau0)), _g(retention_failure_probability(d, t_read))]
            for d in run.cfg["retention"]["deltas"]]
    run.write_csv("retention.csv", ["delta_kbt", "retention_time_s", "failure_probability"], rows)
    run.write_json("retention.json", {"t_read_ns": t_read, "tau0_s": tau0})


def cmd_dwell(run):
    devs = _devices(run.cfg)
    if not devs:
        _warn("no devices configured; nothing to analyse")
        return
    s = run.cfg["simulation"]
    for entry, params in devs:
        st = dwell_time_analysis(params, s["bias_current_ua"] * 1e-6, s["duration_ns"] * 1e-9,
                                 run.seed, dt=s["dt_ns"] * 1e-9, tau0=s["tau0_ns"] * 1e-9)
        name = entry["name"]
        rows = [["P", _g(d)] for d in st.dwell_p] + [["AP", _g(d)] for d in st.dwell_ap]
        run.write_csv(f"{name}_dwell.csv", ["state", "dwell_s"], rows)
        run.write_json(f"{name}_dwell.json", {
            "device": name, "barrier_kbt": st.barrier_height, "retention_time_s": st.retention_time,
            "p_occupancy": st.p_occupancy, "n_transitions": st.n_transitions,
            "mean_dwell_p_s": float(np.mean(st.dwell_p)) if len(st.dwell_p) else None,
            "mean_dwell_ap_s": float(np.mean(st.dwell_ap)) if len(st.dwell_ap) else None,
            "bias_current_A": s["bias_current_ua"] * 1e-6})


def _simulate_device_fidelity(run, lib, name, neuron, entry):
    # full-network LLGS is out of reach; validate single neurons instead
    params = _device_params(run.cfg, name, entry)
    n_steps = 400
    rows = []
    for k in (-1, 0, 1):
        drive = k * neuron.i_o
        r = device_spike_rate(params, neuron, drive, n_steps, run.seed + k + 1, n_neurons=8,
                              burn_in=50 if neuron.mode == "async" else 0)
        rows.append([_g(drive * 1e6), _g(float(r.mean())), _g(float(neuron.probability(drive)))])
    run.write_csv("device_fidelity.csv", ["drive_ua", "device_rate", "behavioral_p"], rows)


def cmd_simulate(run):
    cfg = run.cfg
    nc = cfg["network"]
    if nc["time_ns"] <= 0:
        raise UsageError("simulation time must be positive")
    mode = nc["mode"]
    lib = _library(cfg)
    name = _pick_device(cfg, lib, mode)
    neuron, entry = _neuron(cfg, lib, name, mode)
    if nc["fidelity"] == "device":
        _simulate_device_fidelity(run, lib, name, neuron, entry)
        return
    net = _network(cfg)
    x, y = _dataset(cfg)
    x, y = x[:nc["n_images"]], y[:nc["n_images"]]
    hw = build_hardware(net, neuron, g_o=nc["g_o_us"] * 1e-6)
    ev = evaluate(hw, x, y, nc["time_ns"] * 1e-9, run.seed, workers=run.workers, batch=nc["batch"])
    ev.to_csv(run.path("accuracy.csv"))
    run.write_json("energy.json", _energy_doc(ev, neuron, net, entry, nc["target_accuracy"], name))


def _energy_doc(ev, neuron, net, entry, target, name):
    try:
        rep = report(ev, neuron, net.n_neurons, target, device_delta=entry["delta_kbt"], device=name)
        doc = vars(rep).copy()
        doc["target_reached"] = True
    except TargetUnreached as e:
        _warn(str(e))
        nj, sj, rj = cumulative_components(ev, neuron, net.n_neurons)
        doc = {"neuron_j": nj[-1], "synapse_j": sj[-1], "read_j": rj[-1],
               "total_j": nj[-1] + sj[-1] + rj[-1], "mode": neuron.mode,
               "device_delta": entry["delta_kbt"], "time_to_target": None,
               "target_accuracy": target, "accuracy": float(ev.accuracy[-1]), "device": name,
               "target_reached": False, "best_accuracy": e.best}
    doc["final_accuracy"] = float(ev.accuracy[-1])
    return doc


def cmd_sweep(run):
    cfg = run.cfg
    sw = cfg.get("sweep")
    if not sw:
        raise ConfigError("no sweep defined in the config")
    kind = sw["kind"]
    if kind not in SWEEP_KINDS:
        raise UsageError(f"unknown sweep kind {kind!r}; choose from {', '.join(SWEEP_KINDS)}")
    nc = cfg["network"]
    mode = nc["mode"]
    lib = _library(cfg)
    name = _pick_device(cfg, lib, mode)
    neuron, entry = _neuron(cfg, lib, name, mode)
    net = _network(cfg)
    x, y = _dataset(cfg)
    x, y = x[:nc["n_images"]], y[:nc["n_images"]]
    recharacterize = None
    if kind == "temperature":
        params = _device_params(cfg, name, entry)
        circuit = neuron.circuit
        s = cfg["simulation"]

        def recharacterize(temp):
            e = device_entry(params.at_temperature(temp), circuit, mode=mode,
                             n_trials=s["n_trials"], seed=run.seed, dt=s["dt_ns"] * 1e-9)
            fit = e[mode]
            return fit["i_bias_A"], fit["i_o_A"]

    factory = variation_factory(net, neuron, g_o=nc["g_o_us"] * 1e-6, recharacterize=recharacterize,
                                supply_model=sw.get("supply_model", "shared"))
    means, stds = sweep_variations(factory, x, y, kind, sw["values"], sw.get("n_mc", 1), run.seed,
                                   nc["time_ns"] * 1e-9, workers=run.workers)
    rows = [[_g(v), f"{m:.6f}", f"{s:.6f}"] for v, m, s in zip(sw["values"], means, stds)]
    run.write_csv(f"sweep_{kind}.csv", ["sweep_value", "mean_accuracy", "std_accuracy"], rows)
    run.write_json(f"sweep_{kind}.json", {"kind": kind, "device": name, "mode": mode,
                                          "n_mc": sw.get("n_mc", 1), "n_images": len(y)})


def cmd_energy_report(run):
    cfg = run.cfg
    nc = cfg["network"]
    if nc["time_ns"] <= 0:
        raise UsageError("simulation time must be positive")
    lib = _library(cfg)
    net = _network(cfg)
    x, y = _dataset(cfg)
    x, y = x[:nc["n_images"]], y[:nc["n_images"]]
    reports = []
    for name, e in lib["devices"].items():
        neuron, entry = _neuron(cfg, lib, name, e["mode"])
        hw = build_hardware(net, neuron, g_o=nc["g_o_us"] * 1e-6)
        ev = evaluate(hw, x, y, nc["time_ns"] * 1e-9, run.seed, workers=run.workers,
                      batch=nc["batch"])
        ev.to_csv(run.path(f"{name}_accuracy.csv"))
        try:
            rep = report(ev, neuron, net.n_neurons, nc["target_accuracy"],
                         device_delta=entry["delta_kbt"], device=name)
        except TargetUnreached as err:
            _warn(f"{name}: {err}")
            continue
        reports.append(rep)
        run.write_json(f"{name}_energy.json", vars(rep))
    write_comparison(run.path("energy_comparison.csv"), reports)
    run.write_json("energy_summary.json", {
        "oracle_accuracy": oracle_accuracy(net, x, y), "n_images": len(y),
        "target_accuracy": nc["target_accuracy"], "read_model": vars(ReadEnergyModel()),
        "devices": [r.device for r in reports]})


HANDLERS = {
    "characterize": cmd_characterize,
    "fit": cmd_fit,
    "retention": cmd_retention,
    "dwell": cmd_dwell,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "energy-report": cmd_energy_report,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--workers", type=int, help="worker processes (default: all cores)")
    common.add_argument("--out", help=f"output directory (default: config, ${cfgmod.OUT_ENV}, ./mtjsnn-out)")
    common.add_argument("--fidelity", choices=["device", "behavioral"])
    common.add_argument("--mode", choices=["sync", "async"])
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="mtjsnn", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for c in COMMANDS:
        sp = sub.add_parser(c, parents=[common])
        if c in ("simulate", "sweep", "energy-report"):
            sp.add_argument("--time", type=float, help="inference time per image, ns")
            sp.add_argument("--n-images", type=int, dest="n_images")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="mtjsnn: %(levelname)s: %(message)s", stream=sys.stderr)
    try:
        if args.workers is not None and args.workers < 1:
            raise UsageError("--workers must be >= 1")
        if getattr(args, "time", None) is not None and not (args.time > 0 and math.isfinite(args.time)):
            raise UsageError("--time must be a positive number of nanoseconds")
        run = Run(args)
        run.mode_given = args.mode is not None
        HANDLERS[args.command](run)
        run.finish()
    except (ConfigError, UsageError, FileNotFoundError) as e:
        print(f"mtjsnn: error: {e}", file=sys.stderr)
        return 2
    except (NumericalFailure, InsufficientRangeError, InsufficientStatistics) as e:
        print(f"mtjsnn: numerical failure: {e}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
