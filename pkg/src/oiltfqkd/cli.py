"""Command-line entry point.

Usage::

    oiltfqkd <scenario> --config run.yaml [--seed N] [--out result.csv] [--format csv|table]
    oiltfqkd validate --config run.yaml

Scenarios: keyrate, optimize, attack-sweep, modulation, spectrum, budget.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np
import yaml

from ._validation import NonDistillableError
from .csvio import format_rows, records_to_csv
from .isolation import ProfileKind, SpectralProfile, budget_report
from .keyrate import ChannelModel, DetectorModel, ProtocolParams, compute_yields, secret_key_rate
from .modulation import LockedLaserResponse, ModulationPattern, apply_laser_response, synthesize_waveform
from .optimize import OptimizationResult, SweepRow, attack_sweep, optimize_params
from .watchdogs import (
    FastPDModel,
    PowerMeterModel,
    SNSPDModel,
    fast_pd_detect,
    optical_spectrum,
    power_meter_readout,
    sideband_monitor,
    snspd_counts,
)

log = logging.getLogger("oiltfqkd")

SCENARIOS = ("keyrate", "optimize", "attack-sweep", "modulation", "spectrum", "budget")
EXIT_CONFIG, EXIT_NUMERIC = 2, 3

_SECTIONS = {
    "keyrate": {"channel", "detector", "protocol", "distances"},
    "optimize": {"channel", "detector", "protocol", "distances", "optimizer"},
    "attack-sweep": {"channel", "detector", "protocol", "distances", "optimizer", "kappa"},
    "modulation": {"pattern", "response", "sampling", "power_meter", "fast_pd", "snspd",
                   "sideband"},
    "spectrum": {"pattern", "response", "sampling", "sideband"},
    "budget": {"wavelength_nm", "components", "pulse_rate", "max_photons_per_pulse",
               "reference_power", "reference_wavelength_nm"},
}
_TOP_LEVEL = {"scenario", "seed", "output", "parameters"}

_SUB_KEYS = {
    "distances": {"start", "stop", "step"},
    "optimizer": {"eps_bounds", "mu_bounds", "grid_size", "max_evals"},
    "sampling": {"sample_rate", "duration"},
    "power_meter": {"integration_times", "noise_rel_std", "windows"},
    "snspd": {f.name for f in dataclasses.fields(SNSPDModel)} | {"repetitions"},
    "sideband": {"reject_halfwidth", "threshold_rel"},
}

_DEFAULTS = {
    "sampling": {"sample_rate": 200e9, "duration": 1e-9},
    "power_meter": {"integration_times": [25e-6, 50e-6, 100e-6], "noise_rel_std": 1e-3,
                    "windows": 100_000},
    "sideband": {"reject_halfwidth": 0.5e9, "threshold_rel": 1e-6},
    "snspd": {"repetitions": 1_000_000},
}


class ConfigError(ValueError):
    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


# -- config parsing ------------------------------------------------------------

def load_config(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    data = yaml.safe_load(text) if text.strip() else {}
    if not isinstance(data, dict):
        raise ConfigError([f"{path}: top level must be a mapping"])
    return data


def _unknown(section: str, given: dict, allowed: set) -> list[str]:
    return [f"{section}: unknown key {k!r}" for k in sorted(set(given) - allowed)]


def _build(cls, section: str, raw: dict | None, errors: list[str]):
    raw = raw or {}
    if not isinstance(raw, dict):
        errors.append(f"{section}: expected a mapping")
        return None
    allowed = {f.name for f in dataclasses.fields(cls)}
    bad = _unknown(section, raw, allowed)
    if bad:
        errors.extend(bad)
        return None
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        errors.append(f"{section}: {exc}")
        return None


def _sub(params: dict, name: str, errors: list[str]) -> dict:
    raw = params.get(name) or {}
    if not isinstance(raw, dict):
        errors.append(f"{name}: expected a mapping")
        return dict(_DEFAULTS.get(name, {}))
    errors.extend(_unknown(name, raw, _SUB_KEYS[name]))
    return {**_DEFAULTS.get(name, {}), **raw}


def _distances(params: dict, errors: list[str]) -> list[float]:
    raw = params.get("distances", [0.0])
    if isinstance(raw, dict):
        errors.extend(_unknown("distances", raw, _SUB_KEYS["distances"]))
        try:
            start, stop, step = (float(raw[k]) for k in ("start", "stop", "step"))
        except (KeyError, TypeError, ValueError):
            errors.append("distances: start, stop and step are required numbers")
            return []
        if step <= 0 or stop < start:
            errors.append("distances: need step > 0 and stop >= start")
            return []
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        values = [start + i * step for i in range(n)]
    else:
        try:
            values = [float(v) for v in (raw if isinstance(raw, list) else [raw])]
        except (TypeError, ValueError):
            errors.append("distances: expected numbers")
            return []
    if any(v < 0 for v in values):
        errors.append("distances: must be non-negative")
    if any(b < a for a, b in zip(values, values[1:])):
        errors.append("distances: must be sorted ascending")
    return values


def resolve(config: dict, scenario: str | None = None, seed: int | None = None) -> dict:
    """Validate a raw config and build the typed objects for its scenario.

    Raises :class:`ConfigError` listing every violation found.
    """
    errors: list[str] = _unknown("config", config, _TOP_LEVEL)
    scenario = scenario or config.get("scenario")
    if scenario not in SCENARIOS:
        raise ConfigError(errors + [f"scenario must be one of {', '.join(SCENARIOS)}, "
                                    f"got {scenario!r}"])
    if config.get("scenario") not in (None, scenario):
        errors.append(f"config scenario {config['scenario']!r} does not match {scenario!r}")
    params = config.get("parameters") or {}
    if not isinstance(params, dict):
        raise ConfigError(errors + ["parameters: expected a mapping"])
    errors.extend(_unknown("parameters", params, _SECTIONS[scenario]))
    seed = seed if seed is not None else config.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        errors.append(f"seed must be a non-negative integer, got {seed!r}")
    out: dict = {"scenario": scenario, "seed": seed}

    if scenario in ("keyrate", "optimize", "attack-sweep"):
        ch = params.get("channel") or {}
        if "distance_km" in ch:
            errors.append("channel: give distances under parameters.distances, not distance_km")
        out["channel"] = _build(ChannelModel, "channel", ch, errors)
        out["detector"] = _build(DetectorModel, "detector", params.get("detector"), errors)
        out["protocol"] = _build(ProtocolParams, "protocol", params.get("protocol"), errors)
        if out["protocol"] is not None and scenario == "keyrate":
            errors.extend(out["protocol"].violations())
        out["distances"] = _distances(params, errors)
        if scenario != "keyrate":
            opt = _sub(params, "optimizer", errors)
            out["optimizer"] = {k: tuple(v) if k.endswith("bounds") else v for k, v in opt.items()}
        if scenario == "attack-sweep":
            kappa = params.get("kappa", 1.51)
            if not isinstance(kappa, (int, float)) or isinstance(kappa, bool) or not kappa > 0:
                errors.append(f"kappa must be a positive number, got {kappa!r}")
            out["kappa"] = kappa
    elif scenario in ("modulation", "spectrum"):
        out["pattern"] = _build(ModulationPattern, "pattern", params.get("pattern"), errors)
        out["response"] = _build(LockedLaserResponse, "response", params.get("response"), errors)
        out["sampling"] = _sub(params, "sampling", errors)
        out["sideband"] = _sub(params, "sideband", errors)
        if scenario == "modulation":
            pm = _sub(params, "power_meter", errors)
            out["power_meters"] = [
                m for m in (_build(PowerMeterModel, "power_meter",
                                   {"integration_time": t, "noise_rel_std": pm["noise_rel_std"]},
                                   errors) for t in pm["integration_times"]) if m is not None]
            out["windows"] = pm["windows"]
            out["fast_pd"] = _build(FastPDModel, "fast_pd", params.get("fast_pd"), errors)
            sn = _sub(params, "snspd", errors)
            out["repetitions"] = sn.pop("repetitions")
            out["snspd"] = _build(SNSPDModel, "snspd", sn, errors)
    else:
        for key in ("wavelength_nm", "pulse_rate", "max_photons_per_pulse"):
            if key not in params:
                errors.append(f"budget: {key} is required")
        out.update({k: params[k] for k in _SECTIONS["budget"] - {"components"} if k in params})
        out["components"] = _components(params.get("components") or [], errors)
    if errors:
        raise ConfigError(errors)
    return out


def _components(raw: list, errors: list[str]) -> list[SpectralProfile]:
    from importlib.resources import files

    comps = []
    for i, item in enumerate(raw):
        if isinstance(item, str):
            item = {"path": item}
        if not isinstance(item, dict):
            errors.append(f"components[{i}]: expected a mapping or path")
            continue
        errors.extend(_unknown(f"components[{i}]", item, {"path", "builtin", "kind", "name"}))
        try:
            if "builtin" in item:
                source = str(files("oiltfqkd") / "data" / f"{item['builtin']}.csv")
            else:
                source = item["path"]
            comps.append(SpectralProfile.from_csv(
                source, kind=ProfileKind(item.get("kind", "attenuation")),
                name=item.get("name") or Path(source).stem))
        except (KeyError, OSError, ValueError) as exc:
            errors.append(f"components[{i}]: {exc}")
    return comps


def validate(config: dict, scenario: str | None = None) -> list[str]:
    """Dry-run validation; returns the list of violations (empty when valid)."""
    try:
        resolve(config, scenario)
    except ConfigError as exc:
        return exc.violations
    return []


# -- scenarios -------------------------------------------------------------------

def _run_keyrate(cfg):
    ch0, det, p = cfg["channel"], cfg["detector"], cfg["protocol"]
    rows = []
    for d in cfg["distances"]:
        ch = dataclasses.replace(ch0, distance_km=d)
        # statistics come from the emitted intensity (kappa * mu); kappa = 1 is the honest case
        ys = compute_yields(p, det, ch, intensity=p.attacked_intensity)
        rate = secret_key_rate(p, det, ch, p.signal_intensity, p.attacked_intensity)
        rows.append([d, *dataclasses.astuple(ys), rate])
    header = ["distance_km", *[f.name for f in dataclasses.fields(ys)], "rate"]
    return format_rows(header, rows), {}


def _run_optimize(cfg):
    rows = []
    for d in cfg["distances"]:
        ch = dataclasses.replace(cfg["channel"], distance_km=d)
        res = optimize_params(cfg["detector"], ch, cfg["protocol"], **cfg["optimizer"])
        rows.append([d, *dataclasses.astuple(res)])
    header = ["distance_km", *[f.name for f in dataclasses.fields(OptimizationResult)]]
    return format_rows(header, rows), {}


def _run_attack_sweep(cfg):
    rows = attack_sweep(cfg["distances"], cfg["kappa"], cfg["detector"], cfg["protocol"],
                        fiber_loss_coeff=cfg["channel"].fiber_loss_coeff, **cfg["optimizer"])
    return records_to_csv(rows, SweepRow), {}


def _waveforms(cfg):
    s = cfg["sampling"]
    inj = synthesize_waveform(cfg["pattern"], s["duration"], s["sample_rate"])
    return inj, apply_laser_response(inj, cfg["response"])


def _run_modulation(cfg):
    inj, out = _waveforms(cfg)
    rows = []
    seeds = np.random.SeedSequence(cfg["seed"]).generate_state(2 * len(cfg["power_meters"]) + 1)
    k = 0
    for label, w in (("injected", inj), ("locked", out)):
        for pm in cfg["power_meters"]:
            r = power_meter_readout(w, pm, cfg["windows"], int(seeds[k % len(seeds)]))
            k += 1
            rows.append([label, "power_meter", pm.integration_time, "mean_deviation",
                         r.mean_deviation, r.detected])
            rows.append([label, "power_meter", pm.integration_time, "std_ratio", r.std_ratio,
                         r.detected])
        fp = fast_pd_detect(w, cfg["fast_pd"])
        rows.append([label, "fast_pd", cfg["fast_pd"].bandwidth, "peak_to_peak_w",
                     fp.peak_to_peak, fp.detected])
    sb = cfg["sideband"]
    spec = optical_spectrum(out, cfg["response"])
    power = sideband_monitor(spec, sb["reject_halfwidth"])
    rows.append(["locked", "sideband_monitor", sb["reject_halfwidth"], "sideband_power_w", power,
                 power > sb["threshold_rel"] * spec.total_power])
    sn = snspd_counts(out, cfg["snspd"], int(seeds[-1]), cfg["repetitions"])
    rows.append(["locked", "snspd", cfg["snspd"].bin_width, "relative_peak", sn.relative_peak,
                 False])
    header = ["waveform", "detector", "setting", "metric", "value", "detected"]
    return format_rows(header, rows), {"injected_waveform.csv": inj.to_csv(),
                                       "locked_waveform.csv": out.to_csv()}


def _run_spectrum(cfg):
    _, out = _waveforms(cfg)
    spec = optical_spectrum(out, cfg["response"])
    return spec.to_csv(), {}


def _run_budget(cfg):
    kwargs = {k: cfg[k] for k in ("reference_power", "reference_wavelength_nm") if k in cfg}
    rep = budget_report(cfg["wavelength_nm"], cfg["components"], cfg["pulse_rate"],
                        cfg["max_photons_per_pulse"], **kwargs)
    return records_to_csv([rep]), {}


_RUNNERS = {
    "keyrate": _run_keyrate, "optimize": _run_optimize, "attack-sweep": _run_attack_sweep,
    "modulation": _run_modulation, "spectrum": _run_spectrum, "budget": _run_budget,
}


def _as_table(csv_text: str) -> str:
    rows = [line.split(",") for line in csv_text.strip().splitlines()]
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows) + "\n"


def _tool_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def _jsonable(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def run(config: dict, scenario: str | None = None, *, seed: int | None = None,
        out: str | Path | None = None, fmt: str = "csv") -> tuple[str, dict]:
    """Execute a scenario; returns the main body and the extra artifacts.

    With ``out`` set the body, the extra artifacts (next to it, prefixed with
    its stem) and a ``<out>.meta.json`` sidecar are written to disk.
    """
    cfg = resolve(config, scenario, seed)
    body, extras = _RUNNERS[cfg["scenario"]](cfg)
    if fmt == "table":
        body = _as_table(body)
    if out is not None:
        out = Path(out)
        out.write_text(body, encoding="utf-8")
        for name, text in extras.items():
            out.with_name(f"{out.stem}_{name}").write_text(text, encoding="utf-8")
        meta = {"scenario": cfg["scenario"], "seed": cfg["seed"], "tool": "oiltfqkd",
                "version": _tool_version(), "format": fmt,
                "resolved_config": _jsonable({k: v for k, v in cfg.items()
                                              if k not in ("scenario", "seed", "components")}),
                "components": [c.name for c in cfg.get("components", [])],
                "artifacts": [out.name] + [f"{out.stem}_{n}" for n in extras]}
        Path(f"{out}.meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True),
                                            encoding="utf-8")
    return body, extras


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="YAML or JSON run configuration")
    common.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    common.add_argument("--out", default=None, help="output CSV path (stdout if omitted)")
    common.add_argument("--format", choices=("csv", "table"), default="csv")
    parser = argparse.ArgumentParser(prog="oiltfqkd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SCENARIOS + ("validate",):
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        config = load_config(args.config)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (yaml.YAMLError, ConfigError) as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "validate":
        problems = validate(config)
        for p in problems:
            print(p)
        return EXIT_CONFIG if problems else 0

    try:
        body, _ = run(config, args.command, seed=args.seed, out=args.out, fmt=args.format)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonDistillableError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure in {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"numerical failure in {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.out is None:
        sys.stdout.write(body)
    return 0


if __name__ == "__main__":
    sys.exit(main())
