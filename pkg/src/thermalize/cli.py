"""Command-line experiment runner.

Every subcommand reads an optional JSON config, lets flags override it, and
writes CSV tables (and/or SVG figures) into the output directory.

Exit codes: 0 success, 2 schema error, 3 assertion violation, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .dynamics import rates_from_calibration
from .errors import NumericError, SchemaError
from .hwemu import (
    BELEM_SCHEDULE,
    DEFAULT_SHOTS,
    MANILA_SCHEDULE,
    Schedule,
    emulate_experiment,
    load_json_text,
    record_from_json,
    record_to_json,
    validate_against,
)
from .plotting import family_plot, line_plot
from .spectral import critical_dephasing, find_qme_instance, predict_qme, qubit_rate_matrix
from .thermal import DEVICES, DeviceParams

log = logging.getLogger("thermalize")

EXIT_OK, EXIT_SCHEMA, EXIT_ASSERT, EXIT_NUMERIC = 0, 2, 3, 4

_POS = {"type": "number", "exclusiveMinimum": 0}
CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "device": {
            "oneOf": [
                {"enum": sorted(DEVICES)},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["omega_ghz", "t1_us", "t2_us", "teq_mk"],
                    "properties": {k: _POS for k in ("omega_ghz", "t1_us", "t2_us", "teq_mk")},
                },
            ]
        },
        "temperatures": {
            "oneOf": [
                {"type": "array", "items": _POS, "minItems": 1},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["min", "max", "steps"],
                    "properties": {"min": _POS, "max": _POS, "steps": {"type": "integer", "minimum": 1}},
                },
            ]
        },
        "schedule": {
            "type": "object",
            "additionalProperties": False,
            "required": ["n_snapshots", "spacing_us"],
            "properties": {
                "n_snapshots": {"type": "integer", "minimum": 1},
                "spacing_us": {"type": "number", "minimum": 0},
            },
        },
        "times_us": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "metric": {"enum": ["trace", "kl", "entropic"]},
        "metrics": {"type": "array", "items": {"enum": ["trace", "kl"]}, "minItems": 1},
        "prep": {"type": "string"},
        "preps": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "t_cold": _POS,
        "t_hot": _POS,
        "teq_mk": _POS,
        "shots": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer"},
        "tomography": {"type": "boolean"},
        "emulate": {"type": "boolean"},
        "fixed_rate": {"type": "boolean"},
        "gamma_z": {"type": "number", "minimum": 0},
        "gamma_z_over_critical": {"type": "number", "minimum": 0},
        "rate_matrix": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "levels_mk": {"type": "array", "items": {"type": "number"}},
        "search_seed": {"type": "integer"},
        "record": {"type": "string"},
        "frame": {"enum": ["rotating", "lab"]},
        "format": {"enum": ["csv", "svg", "both"]},
        "out": {"type": "string"},
    },
}

DEFAULT_DEVICE = {
    "mixing-probs": "belem",
    "dist-vs-temp": "manila",
    "hot-vs-cold": "manila",
    "equidistant": "belem",
    "qme-predict": "manila",
    "emulate": "manila",
    "fit": "manila",
}
DEFAULT_SCHEDULE = {
    "dist-vs-temp": MANILA_SCHEDULE,
    "hot-vs-cold": Schedule(101, 32.0),
    "equidistant": BELEM_SCHEDULE,
}


class AssertionViolation(Exception):
    pass


# --- config plumbing ------------------------------------------------------------------


def load_config(args) -> dict:
    cfg: dict = {}
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise SchemaError(f"cannot read config {args.config}: {exc}") from exc
        cfg = load_json_text(text, f"config {args.config}")
    validate_against(CONFIG_SCHEMA, cfg, "config")
    for key in ("seed", "out", "format", "metric", "frame", "device"):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def device_from(cfg: dict, command: str) -> DeviceParams:
    entry = cfg.get("device", DEFAULT_DEVICE[command])
    if isinstance(entry, str):
        try:
            return DEVICES[entry]
        except KeyError:
            raise SchemaError(f"$.device: unknown device {entry!r}; known: {sorted(DEVICES)}") from None
    try:
        return DeviceParams(**entry)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"$.device: {exc}") from exc


def temperatures_from(cfg: dict, default: tuple) -> np.ndarray:
    entry = cfg.get("temperatures")
    if entry is None:
        return ex.temperature_grid(*default)
    if isinstance(entry, list):
        return np.array(entry, dtype=float)
    if entry["max"] < entry["min"]:
        raise SchemaError("$.temperatures: max is below min")
    return ex.temperature_grid(entry["min"], entry["max"], entry["steps"])


def times_from(cfg: dict, command: str) -> np.ndarray:
    if "times_us" in cfg:
        times = np.array(sorted(set(cfg["times_us"])), dtype=float)
        return times
    if "schedule" in cfg:
        try:
            return Schedule(cfg["schedule"]["n_snapshots"], cfg["schedule"]["spacing_us"]).times
        except ValueError as exc:
            raise SchemaError(f"$.schedule: {exc}") from exc
    return DEFAULT_SCHEDULE.get(command, MANILA_SCHEDULE).times


def require_seed(cfg: dict, command: str) -> int:
    if "seed" not in cfg:
        raise SchemaError(f"{command}: a seed is required (config 'seed' or --seed)")
    return int(cfg["seed"])


# --- output ----------------------------------------------------------------------------


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".12g")
    return str(value)


def write_csv(path: Path, table: ex.Table) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([_cell(v) for v in row])
    return path


class Output:
    def __init__(self, cfg: dict):
        self.dir = Path(cfg.get("out", "out"))
        self.format = cfg.get("format", "csv")
        self.dir.mkdir(parents=True, exist_ok=True)

    @property
    def csv(self) -> bool:
        return self.format in ("csv", "both")

    @property
    def svg(self) -> bool:
        return self.format in ("svg", "both")

    def table(self, name: str, table: ex.Table) -> None:
        if self.csv:
            log.info("wrote %s", write_csv(self.dir / f"{name}.csv", table))

    def path(self, name: str) -> Path:
        return self.dir / name


# --- commands --------------------------------------------------------------------------


def cmd_mixing_probabilities(cfg: dict) -> int:
    device = device_from(cfg, "mixing-probs")
    temps = temperatures_from(cfg, (10.0, 300.0, 59))
    table = ex.mixing_probabilities(device, temps)
    out = Output(cfg)
    out.table("mixing_probabilities", table)
    if out.svg:
        line_plot(
            out.path("mixing_probabilities.svg"),
            table.column("T_mk"),
            {"p0": table.column("p0"), "p1": table.column("p1")},
            "T (mK)",
            "mixing probability",
        )
    return EXIT_OK


def cmd_distance_vs_temperature(cfg: dict) -> int:
    device = device_from(cfg, "dist-vs-temp")
    temps = temperatures_from(cfg, (60.0, 300.0, 49))
    times = times_from(cfg, "dist-vs-temp")
    metric = cfg.get("metric", "trace")
    report = ex.distance_vs_temperature(device, temps, times, metric, frame=cfg.get("frame", "rotating"))
    out = Output(cfg)
    out.table("distance_vs_temperature", report.table)
    if out.svg:
        d = report.table.column("distance").reshape(times.size, temps.size)
        picks = np.unique(np.linspace(0, times.size - 1, min(times.size, 6)).astype(int))
        family_plot(
            out.path("distance_vs_temperature.svg"),
            temps,
            {times[i]: d[i] for i in picks},
            "T (mK)",
            f"{metric} distance",
            label_fmt="t = {:g} µs",
        )
    if not report.ok:
        violations = ex.Table(["t_us", "T_low_mk", "T_high_mk", "drop"], list(report.violations))
        write_csv(out.path("monotonicity_violations.csv"), violations)
        raise AssertionViolation(f"distance decreases with temperature at {len(report.violations)} grid points")
    print(f"monotone in T at all {times.size} times ({temps.size} temperatures)")
    return EXIT_OK


def cmd_hot_vs_cold(cfg: dict) -> int:
    times = times_from(cfg, "hot-vs-cold")
    explicit_times = "times_us" in cfg or "schedule" in cfg
    t_cold = cfg.get("t_cold", 80.0)
    t_hot = cfg.get("t_hot", 90.0)
    if "rate_matrix" in cfg:
        if "levels_mk" not in cfg or "teq_mk" not in cfg:
            raise SchemaError("rate_matrix needs levels_mk and teq_mk")
        result = ex.hot_vs_cold_rate_matrix(
            cfg["rate_matrix"], cfg["levels_mk"], cfg["teq_mk"], t_cold, t_hot, times if explicit_times else None
        )
        metric = "entropic"
    else:
        device = device_from(cfg, "hot-vs-cold")
        metric = cfg.get("metric", "trace")
        result = ex.hot_vs_cold(device, t_cold, t_hot, times, metric, frame=cfg.get("frame", "rotating"))
    out = Output(cfg)
    out.table("hot_vs_cold", result.table)
    if out.svg:
        line_plot(
            out.path("hot_vs_cold.svg"),
            result.table.column("t_us"),
            {f"T = {t_cold:g} mK": result.table.column("d_cold"), f"T = {t_hot:g} mK": result.table.column("d_hot")},
            "t (µs)",
            f"{metric} distance",
        )
    if result.first_crossing_us is None:
        print("no crossing")
    else:
        print(f"first crossing at t = {result.first_crossing_us:.12g} µs")
    if result.prediction is not None:
        p = result.prediction
        print(f"spectral prediction: predicts_qme={p.predicts_qme} ({p.reason})")
    return EXIT_OK


def cmd_equidistant(cfg: dict) -> int:
    device = device_from(cfg, "equidistant")
    times = times_from(cfg, "equidistant")
    frame = cfg.get("frame", "rotating")
    gamma_z = cfg.get("gamma_z")
    if "gamma_z_over_critical" in cfg:
        gamma_z = cfg["gamma_z_over_critical"] * critical_dephasing(rates_from_calibration(device))
    preps = cfg.get("preps", ["psi1", "psi2"])
    metrics = cfg.get("metrics", [cfg["metric"]] if cfg.get("metric") in ("trace", "kl") else ["trace", "kl"])
    shots = seed = None
    if cfg.get("emulate", False):
        seed = require_seed(cfg, "equidistant")
        shots = cfg.get("shots", DEFAULT_SHOTS)

    columns = ["prep", "metric", "T_equidistant_mk", "t_us", "d_pure", "d_thermal"]
    if shots is not None:
        columns += ["d_pure_measured", "d_thermal_measured"]
    table = ex.Table(columns)
    out = Output(cfg)
    failures = []
    for prep in preps:
        for metric in metrics:
            res = ex.equidistant_quench(device, prep, metric, times, frame, gamma_z, shots, seed)
            for k, t in enumerate(res.times):
                row = [prep, metric, res.t_equidistant_mk, t, res.d_pure[k], res.d_thermal[k]]
                if shots is not None:
                    row += [res.d_pure_measured[k], res.d_thermal_measured[k]]
                table.rows.append(tuple(row))
            bad = res.ordering_violations()
            status = "ok" if bad.size == 0 else f"VIOLATED at {bad.size} times"
            print(f"{prep} {metric}: T_equidistant = {res.t_equidistant_mk:.6g} mK, pure faster: {status}")
            if bad.size:
                failures.append((prep, metric, bad))
            if out.svg:
                series = {"pure": res.d_pure, "thermal": res.d_thermal}
                markers = {}
                if shots is not None:
                    series.update({"pure (emulated)": res.d_pure_measured, "thermal (emulated)": res.d_thermal_measured})
                    markers = {"pure (emulated)": "o", "thermal (emulated)": "s"}
                line_plot(
                    out.path(f"equidistant_{prep}_{metric}.svg"),
                    res.times,
                    series,
                    "t (µs)",
                    f"{metric} distance",
                    title=f"{prep}, T* = {res.t_equidistant_mk:.4g} mK",
                    markers=markers,
                )
    out.table("equidistant", table)
    if failures:
        raise AssertionViolation(
            "pure state not faster than equidistant thermal state for "
            + ", ".join(f"{p}/{m}" for p, m, _ in failures)
        )
    return EXIT_OK


def cmd_qme_predict(cfg: dict) -> int:
    out = Output(cfg)
    if "search_seed" in cfg:
        inst, pred = find_qme_instance(cfg["search_seed"])
        r, levels, teq, t_cold, t_hot = inst.rate_matrix, inst.levels, inst.t_eq, inst.t_cold, inst.t_hot
        instance = {
            "rate_matrix": r.tolist(),
            "levels_mk": levels.tolist(),
            "teq_mk": teq,
            "t_cold": t_cold,
            "t_hot": t_hot,
        }
        path = out.path("qme_instance.json")
        path.write_text(json.dumps(instance, indent=1) + "\n", encoding="utf-8")
        log.info("wrote %s", path)
    elif "rate_matrix" in cfg:
        if "levels_mk" not in cfg or "teq_mk" not in cfg:
            raise SchemaError("rate_matrix needs levels_mk and teq_mk")
        r, levels, teq = np.array(cfg["rate_matrix"]), np.array(cfg["levels_mk"]), cfg["teq_mk"]
        t_cold, t_hot = cfg.get("t_cold", 2 * teq), cfg.get("t_hot", 3 * teq)
        pred = predict_qme(r, levels, t_cold, t_hot, teq)
    else:
        device = device_from(cfg, "qme-predict")
        rates = rates_from_calibration(device)
        teq = device.teq_mk
        t_cold, t_hot = cfg.get("t_cold", 80.0), cfg.get("t_hot", 90.0)
        pred = predict_qme(qubit_rate_matrix(rates), device.levels, t_cold, t_hot, teq)
    table = ex.Table(
        ["T_cold_mk", "T_hot_mk", "T_eq_mk", "lambda2", "lambda3", "a2_cold", "a2_hot", "predicts_qme", "reason"],
        [(t_cold, t_hot, teq, pred.lambda2, pred.lambda3, pred.a2_cold, pred.a2_hot, pred.predicts_qme, pred.reason)],
    )
    out.table("qme_prediction", table)
    print(f"predicts_qme={pred.predicts_qme} ({pred.reason}); lambda2={pred.lambda2:.6g}, lambda3={pred.lambda3:.6g}")
    return EXIT_OK


def cmd_emulate(cfg: dict) -> int:
    device = device_from(cfg, "emulate")
    seed = require_seed(cfg, "emulate")
    schedule = _schedule(cfg, device)
    record = emulate_experiment(
        device,
        cfg.get("prep", "0"),
        schedule,
        cfg.get("shots", DEFAULT_SHOTS),
        seed,
        tomography=cfg.get("tomography", False),
        frame=cfg.get("frame", "rotating"),
    )
    out = Output(cfg)
    path = out.path(f"record_{record.prep}.json")
    path.write_text(record_to_json(record) + "\n", encoding="utf-8")
    print(f"wrote {path} ({len(record.snapshots)} count records)")
    return EXIT_OK


def _schedule(cfg: dict, device: DeviceParams) -> Schedule:
    if "schedule" in cfg:
        try:
            return Schedule(cfg["schedule"]["n_snapshots"], cfg["schedule"]["spacing_us"])
        except ValueError as exc:
            raise SchemaError(f"$.schedule: {exc}") from exc
    return BELEM_SCHEDULE if device == DEVICES["belem"] else MANILA_SCHEDULE


def cmd_fit(cfg: dict) -> int:
    out = Output(cfg)
    if "record" in cfg:
        try:
            text = Path(cfg["record"]).read_text(encoding="utf-8")
        except OSError as exc:
            raise SchemaError(f"cannot read record {cfg['record']}: {exc}") from exc
        outcomes = [ex.fit_record(record_from_json(text), fixed_rate=cfg.get("fixed_rate", False))]
    else:
        device = device_from(cfg, "fit")
        seed = require_seed(cfg, "fit")
        schedule = _schedule(cfg, device)
        preps = cfg.get("preps", ["0", "1"])
        outcomes = []
        for i, prep in enumerate(preps):
            record = emulate_experiment(
                device,
                prep,
                schedule,
                cfg.get("shots", DEFAULT_SHOTS),
                seed + i,
                tomography=cfg.get("tomography", False),
                frame=cfg.get("frame", "rotating"),
            )
            outcomes.append(ex.fit_record(record, fixed_rate=cfg.get("fixed_rate", False)))

    report = ex.Table(
        ["prep", "p00_eq", "p00_eq_stderr", "rate_per_us", "amplitude", "residual_rms", "T_eq_mk", "T_eq_stderr_mk", "no_decay"]
    )
    print(f"{'prep':>6} {'p00_eq':>12} {'rate (1/us)':>12} {'T_eq (mK)':>14} {'rms':>10}")
    for o in outcomes:
        f = o.fit
        t_val = o.temperature.value if o.temperature else None
        t_err = o.temperature.stderr if o.temperature else None
        report.rows.append((o.prep, f.p00_eq, math.sqrt(f.covariance_diag[2]), f.rate, f.amplitude, f.residual_rms, t_val, t_err, f.no_decay))
        t_txt = f"{t_val:.2f} ± {t_err:.2f}" if t_val is not None else "n/a"
        print(f"{o.prep:>6} {f.p00_eq:12.6f} {f.rate:12.6g} {t_txt:>14} {f.residual_rms:10.3g}" + ("  NO DECAY" if f.no_decay else ""))
        resid = ex.Table(["t_us", "p00", "model", "residual"])
        model = f.predict(o.times)
        for t, y, m in zip(o.times, o.p00, model):
            resid.rows.append((t, y, m, y - m))
        out.table(f"fit_residuals_{o.prep}", resid)
        if out.svg:
            line_plot(
                out.path(f"fit_{o.prep}.svg"),
                o.times,
                {"data": o.p00, "fit": model},
                "t (µs)",
                "ground population",
                markers={"data": "o"},
            )
    out.table("fit_report", report)
    return EXIT_OK


COMMANDS = {
    "mixing-probs": (cmd_mixing_probabilities, "Boltzmann mixing probabilities versus temperature"),
    "dist-vs-temp": (cmd_distance_vs_temperature, "distance to equilibrium versus temperature at each snapshot"),
    "hot-vs-cold": (cmd_hot_vs_cold, "relaxation of a hot and a cold thermal state"),
    "equidistant": (cmd_equidistant, "pure state against the equidistant thermal state"),
    "qme-predict": (cmd_qme_predict, "spectral Mpemba prediction"),
    "emulate": (cmd_emulate, "emulate a shot-level experiment and write its record"),
    "fit": (cmd_fit, "fit relaxation curves and estimate the bath temperature"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thermalize", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH")
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--seed", type=int)
        p.add_argument("--format", choices=["csv", "svg", "both"])
        p.add_argument("--metric", choices=["trace", "kl", "entropic"])
        p.add_argument("--frame", choices=["rotating", "lab"])
        p.add_argument("--device", choices=sorted(DEVICES))
        if name == "fit":
            p.add_argument("record", nargs="?", help="experiment record JSON (emulates one if omitted)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    func, _ = COMMANDS[args.command]
    try:
        cfg = load_config(args)
        if getattr(args, "record", None):
            cfg["record"] = args.record
        return func(cfg)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except AssertionViolation as exc:
        print(f"assertion violated: {exc}", file=sys.stderr)
        return EXIT_ASSERT
    except (NumericError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
