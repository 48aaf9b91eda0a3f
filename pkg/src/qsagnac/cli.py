"""Command line interface: simulate raw data, fit it, evaluate designs.

All commands consume one JSON config (see the bundled recipes) and write
their products plus a manifest into --out.  Relative input paths in a
config are resolved against --out, so a fit can chain onto a simulate
run in the same directory.  Exit codes: 0 success, 2 bad config or
input, 3 fit or feasibility failure.
"""

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .analysis import (DegenerateDesignError, FitError, UndefinedRatioError,
                       calibrate_scale_factor, demodulate_trace,
                       enhancement_factor, extract_earth_phase,
                       fit_angle_sweep, fit_switch_pair,
                       group_records_by_angle, mc_uncertainty)
from .expsim import (NoiseConfig, RateConfig, SwitchSchedule, angle_sweep,
                     read_counts_csv, read_trace_csv, simulate_polarimeter,
                     write_counts_csv, write_trace_csv)
from .probe import NOON2, SINGLE
from .sagnac import CONSTANTS, InterferometerGeometry, scale_factor
from .sensedesign import (InfeasibleDesignError, design_from_dict, landscape,
                          optimize_gfring, rotation_resolution)

SCHEMA_VERSION = 1

_KINDS = {"noon": NOON2, "single": SINGLE}


def _load_config(path):
    try:
        with open(path) as f:
            config = json.load(f)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON: {exc}") from exc
    version = config.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"{path}: schema_version {version!r}, "
                         f"this build reads {SCHEMA_VERSION}")
    return config


def _geometry_from(cfg):
    if cfg is None:
        raise ValueError("config needs a 'geometry' section")
    kwargs = {
        "frame_angle": math.radians(float(cfg.get("frame_angle_deg", 0.0))),
        "latitude": math.radians(float(cfg.get("latitude_deg", 0.0))),
        "wavelength": float(cfg.get("wavelength_m", 1550e-9)),
    }
    if cfg.get("effective_area_m2") is not None:
        kwargs["effective_area"] = float(cfg["effective_area_m2"])
    shape = cfg.get("shape", "square")
    if shape == "square":
        return InterferometerGeometry.square(float(cfg["fiber_length_m"]),
                                             int(cfg["turns"]), **kwargs)
    if shape == "circular":
        return InterferometerGeometry.circular(float(cfg["fiber_length_m"]),
                                               float(cfg["perimeter_m"]), **kwargs)
    raise ValueError(f"unknown loop shape {shape!r}")


def _schedule_from(cfg):
    cfg = cfg or {}
    return SwitchSchedule(
        frequency=float(cfg.get("frequency_hz", 0.1)),
        duty=float(cfg.get("duty", 0.5)),
        transition_halfwidth=float(cfg.get("transition_halfwidth_s", 0.010)))


def _rates_from(cfg):
    cfg = cfg or {}
    base = RateConfig()
    return RateConfig(
        pair_rate_detected=float(cfg.get("pair_rate_detected_hz",
                                         base.pair_rate_detected)),
        heralded_single_rate=float(cfg.get("heralded_single_rate_hz",
                                           base.heralded_single_rate)),
        cw_sample_rate=float(cfg.get("cw_sample_rate_hz", base.cw_sample_rate)),
        coincidence_window=float(cfg.get("coincidence_window_s",
                                         base.coincidence_window)))


def _noise_from(cfg):
    cfg = cfg or {}
    base = NoiseConfig()
    return NoiseConfig(
        dark_rate=float(cfg.get("dark_rate_hz", base.dark_rate)),
        motor_sigma=float(cfg.get("motor_sigma_rad", base.motor_sigma)),
        drift_rate=float(cfg.get("drift_rate_rad_s", base.drift_rate)),
        walk_sigma=float(cfg.get("walk_sigma_rad", base.walk_sigma)),
        polarimeter_sigma=float(cfg.get("polarimeter_sigma_rad",
                                        base.polarimeter_sigma)),
        leakage_fraction=float(cfg.get("leakage_fraction", base.leakage_fraction)))


def _per_kind(value, kind, default=None):
    if isinstance(value, dict):
        value = value.get(kind, default)
    return default if value is None else value


def _resolve(path, out_dir):
    return path if os.path.isabs(path) else os.path.join(out_dir, path)


def _write_manifest(out_dir, command, args, config, outputs):
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "command": command,
        "seed": args.seed if args.seed is not None else config.get("seed", 0),
        "fast": bool(getattr(args, "fast", False)),
        "config_sha256": hashlib.sha256(
            json.dumps(config, sort_keys=True).encode()).hexdigest(),
        "config": config,
        "outputs": outputs,
    }
    path = os.path.join(out_dir, f"manifest_{command}.json")
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2)
    return path


def _seed_of(args, config):
    return args.seed if args.seed is not None else int(config.get("seed", 0))


def cmd_simulate(args):
    config = _load_config(args.config)
    sim = config.get("simulate")
    if sim is None:
        raise ValueError("config has no 'simulate' section")
    geom = _geometry_from(sim.get("geometry") or config.get("geometry"))
    schedule = _schedule_from(sim.get("schedule") or config.get("schedule"))
    rates = _rates_from(sim.get("rates") or config.get("rates"))
    noise = _noise_from(sim.get("noise") or config.get("noise"))
    true_omega = float(sim.get("true_omega_rad_s", CONSTANTS.omega_earth))
    thetas = [math.radians(float(t))
              for t in sim.get("theta_deg", [math.degrees(geom.frame_angle)])]
    kinds = sim.get("kinds", ["noon"])
    os.makedirs(args.out, exist_ok=True)

    root = np.random.SeedSequence(_seed_of(args, config))
    outputs = []
    for kind in kinds:
        if kind not in _KINDS:
            raise ValueError(f"unknown probe kind {kind!r}")
        phi0 = _per_kind(sim.get("phi0_rad"), kind)
        if phi0 is None:
            raise ValueError(f"simulate.phi0_rad missing for kind {kind!r}")
        records = angle_sweep(
            _KINDS[kind], geom, thetas, [float(p) for p in phi0], true_omega,
            root.spawn(1)[0],
            base_phase=_per_kind(sim.get("base_phase_rad"), kind, 0.0),
            duration_s=float(_per_kind(sim.get("duration_s"), kind, 1800.0)),
            schedule=schedule, rates=rates, noise=noise,
            visibility=_per_kind(sim.get("visibility"), kind),
            channel_asymmetry=float(_per_kind(sim.get("channel_asymmetry"), kind, 0.0)),
            sample_poisson=bool(sim.get("sample_poisson", True)))
        name = f"counts_{kind}.csv"
        write_counts_csv(records, os.path.join(args.out, name))
        outputs.append(name)
        print(f"wrote {name}: {len(records)} records over {len(thetas)} angle(s)")

    trace_cfg = sim.get("trace")
    if trace_cfg is not None:
        t_geom = replace(geom, frame_angle=math.radians(
            float(trace_cfg.get("theta_deg", math.degrees(geom.frame_angle)))))
        t_sched = schedule
        if trace_cfg.get("transition_halfwidth_s") is not None:
            t_sched = replace(schedule, transition_halfwidth=float(
                trace_cfg["transition_halfwidth_s"]))
        trace = simulate_polarimeter(t_geom, true_omega,
                                     float(trace_cfg.get("total_time_s", 600.0)),
                                     root.spawn(1)[0], schedule=t_sched,
                                     rates=rates, noise=noise)
        write_trace_csv(trace, os.path.join(args.out, "trace.csv"))
        outputs.append("trace.csv")
        print(f"wrote trace.csv: {len(trace.t)} samples")

    _write_manifest(args.out, "simulate", args, config, outputs)
    return 0


def _fit_one_kind(kind, records, mc_n, motor_sigma, root):
    rows = []
    for theta, recs in group_records_by_angle(records).items():
        fit_on, fit_off, _ = fit_switch_pair(recs, model=kind)
        mc = mc_uncertainty(recs, kind, n_samples=mc_n,
                            motor_sigma=motor_sigma, seed=root.spawn(1)[0])
        earth = extract_earth_phase(fit_on, fit_off, mc)
        rows.append({"theta": theta, "fit_on": fit_on, "fit_off": fit_off,
                     "mc": mc, "earth": earth})
    return rows


_TABLE_COLUMNS = ("theta_deg", "v_on_pct", "v_on_sigma_pct", "v_off_pct",
                  "v_off_sigma_pct", "phi_on_mrad", "phi_on_sigma_mrad",
                  "phi_off_mrad", "phi_off_sigma_mrad", "phi_e_mrad",
                  "phi_e_sigma_mrad")


def _write_table_csv(path, rows):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(_TABLE_COLUMNS)
        for row in rows:
            mc = row["mc"]
            on_m, off_m = mc.param_means["on"], mc.param_means["off"]
            on_s, off_s = mc.param_sigmas["on"], mc.param_sigmas["off"]
            writer.writerow([f"{math.degrees(row['theta']):.10g}"] + [
                f"{v:.6g}" for v in (
                    100.0 * on_m["visibility"], 100.0 * on_s["visibility"],
                    100.0 * off_m["visibility"], 100.0 * off_s["visibility"],
                    1e3 * on_m["phase"], 1e3 * on_s["phase"],
                    1e3 * off_m["phase"], 1e3 * off_s["phase"],
                    1e3 * mc.phi_e_mean, 1e3 * mc.phi_e_sigma)])


def cmd_fit(args):
    config = _load_config(args.config)
    fit_cfg = config.get("fit")
    if fit_cfg is None:
        raise ValueError("config has no 'fit' section")
    os.makedirs(args.out, exist_ok=True)
    mc_n = 1000 if args.fast else int(fit_cfg.get("mc_samples", 100_000))
    motor_sigma = fit_cfg.get("motor_sigma_rad")
    if motor_sigma is not None:
        motor_sigma = float(motor_sigma)

    scale = fit_cfg.get("scale_factor_s")
    geom_cfg = fit_cfg.get("geometry") or config.get("geometry")
    if scale is None and geom_cfg is not None:
        scale = scale_factor(_geometry_from(geom_cfg))
    root = np.random.SeedSequence(_seed_of(args, config))
    report = {"schema_version": SCHEMA_VERSION, "package_version": __version__,
              "seed": _seed_of(args, config), "kinds": {}}
    outputs = []
    sweeps = {}

    counts = fit_cfg.get("counts", {})
    if isinstance(counts, str):
        counts = {"noon": counts}
    for kind, path in counts.items():
        if kind not in _KINDS:
            raise ValueError(f"unknown probe kind {kind!r}")
        records = read_counts_csv(_resolve(path, args.out))
        if not records:
            raise ValueError(f"{path}: no count records")
        rows = _fit_one_kind(kind, records, mc_n, motor_sigma, root)
        kind_report = {"angles": []}
        for row in rows:
            kind_report["angles"].append({
                "theta_deg": math.degrees(row["theta"]),
                "fit_on": row["fit_on"].to_dict(),
                "fit_off": row["fit_off"].to_dict(),
                "mc": row["mc"].to_dict(),
                "earth_phase": row["earth"].to_dict(),
            })
            print(f"{kind} theta={math.degrees(row['theta']):+7.2f} deg: "
                  f"phi_e = {1e3 * row['earth'].phi_e:+.3f} "
                  f"+- {1e3 * row['earth'].phi_e_sigma:.3f} mrad")
        table_name = f"table_{kind}.csv"
        _write_table_csv(os.path.join(args.out, table_name), rows)
        outputs.append(table_name)

        if len(rows) >= 3:
            if scale is None:
                raise ValueError("angle sweep needs fit.scale_factor_s or geometry")
            sweep = fit_angle_sweep(
                [row["theta"] for row in rows],
                [row["earth"].phi_e for row in rows],
                [row["earth"].phi_e_sigma for row in rows],
                float(scale), enhancement=_KINDS[kind].enhancement)
            sweeps[kind] = sweep
            kind_report["angle_sweep"] = sweep.to_dict()
            print(f"{kind} sweep: amplitude = {1e3 * sweep.amplitude:.2f} "
                  f"+- {1e3 * sweep.amplitude_sigma:.2f} mrad, "
                  f"omega = {sweep.omega:.3e} +- {sweep.omega_sigma:.1e} rad/s")
        report["kinds"][kind] = kind_report

    if "noon" in report["kinds"] and "single" in report["kinds"]:
        if "noon" in sweeps and "single" in sweeps:
            pair2 = (sweeps["noon"].amplitude, sweeps["noon"].amplitude_sigma)
            pair1 = (sweeps["single"].amplitude, sweeps["single"].amplitude_sigma)
        else:
            e2 = report["kinds"]["noon"]["angles"][0]["earth_phase"]
            e1 = report["kinds"]["single"]["angles"][0]["earth_phase"]
            pair2 = (e2["phi_e"], e2["phi_e_sigma"])
            pair1 = (e1["phi_e"], e1["phi_e_sigma"])
        value, sigma = enhancement_factor(pair2, pair1)
        report["enhancement"] = {"value": value, "sigma": sigma}
        print(f"enhancement: {value:.2f} +- {sigma:.2f}")

    trace_path = fit_cfg.get("trace")
    if trace_path is not None:
        schedule = _schedule_from(fit_cfg.get("schedule") or config.get("schedule"))
        if fit_cfg.get("trace_transition_halfwidth_s") is not None:
            schedule = replace(schedule, transition_halfwidth=float(
                fit_cfg["trace_transition_halfwidth_s"]))
        demod = demodulate_trace(read_trace_csv(_resolve(trace_path, args.out)),
                                 schedule)
        report["demodulation"] = demod.to_dict()
        print(f"demodulated trace: phi_s = {1e3 * demod.phi_s:.3f} mrad")

    cal_cfg = fit_cfg.get("calibration")
    if cal_cfg is not None:
        cal = calibrate_scale_factor(
            [math.radians(float(a)) for a in cal_cfg["angles_deg"]],
            [float(p) for p in cal_cfg["phases_rad"]],
            [float(s) for s in cal_cfg["sigmas_rad"]],
            omega_earth=float(cal_cfg.get("omega_earth_rad_s",
                                          CONSTANTS.omega_earth)),
            n_samples=1000 if args.fast else int(cal_cfg.get("mc_samples", 10_000)),
            seed=root.spawn(1)[0])
        report["calibration"] = cal.to_dict()
        print(f"calibration: S = {cal.scale_factor:.2f} "
              f"+- {cal.scale_factor_sigma:.2f} s, "
              f"theta_offset = {math.degrees(cal.theta_offset):+.3f} "
              f"+- {math.degrees(cal.theta_offset_sigma):.3f} deg")

    with open(os.path.join(args.out, "fit_report.json"), "w") as f:
        json.dump(report, f, indent=2)
    outputs.append("fit_report.json")
    _write_manifest(args.out, "fit", args, config, outputs)
    return 0


_DESIGN_COLUMNS = ("name", "shape", "fiber_length_m", "perimeter_m", "turns",
                   "effective_area_m2", "scale_factor_s", "delta_phi_rad",
                   "delta_omega_rad_s")


def cmd_design(args):
    config = _load_config(args.config)
    design_cfg = config.get("design")
    if design_cfg is None:
        raise ValueError("config has no 'design' section")
    os.makedirs(args.out, exist_ok=True)
    specs = [design_from_dict(d) for d in design_cfg.get("specs", [])]
    reports = [rotation_resolution(s) for s in specs]
    outputs = []
    out_json = {"schema_version": SCHEMA_VERSION, "package_version": __version__,
                "designs": [r.to_dict() for r in reports]}

    if reports:
        with open(os.path.join(args.out, "designs.csv"), "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(_DESIGN_COLUMNS)
            for r in reports:
                # quoted delta_phi follows the projected-axis convention
                writer.writerow([r.name, r.shape] + [f"{v:.6g}" for v in (
                    r.fiber_length, r.perimeter, r.turns, r.effective_area,
                    r.scale_factor, r.delta_phi_projected, r.delta_omega)])
        outputs.append("designs.csv")
        for r in reports:
            print(f"{r.name}: S = {r.scale_factor:.4g} s, "
                  f"delta_phi = {r.delta_phi_projected:.3g} rad, "
                  f"delta_omega = {r.delta_omega:.3g} rad/s")

    if design_cfg.get("landscape"):
        rows = landscape(specs)
        with open(os.path.join(args.out, "landscape.csv"), "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(("name", "log10_area", "log10_delta_omega", "label"))
            for row in rows:
                writer.writerow([row.name, f"{row.log10_area:.6g}",
                                 f"{row.log10_delta_omega:.6g}", row.label])
        outputs.append("landscape.csv")
        out_json["landscape"] = [row.to_dict() for row in rows]

    if args.optimize_gfring:
        g = design_cfg.get("gfring")
        if g is None:
            raise ValueError("--optimize-gfring needs a design.gfring section")
        optimum = optimize_gfring(
            latitude=math.radians(float(g["latitude_deg"])),
            alpha_db_per_km=float(g.get("alpha_db_per_km", 0.16)),
            pair_rate_in=float(g.get("pair_rate_in_hz", 1e10)),
            integration_time=float(g.get("integration_time_s", 5.56e6)),
            target_snr=float(g.get("target_snr", 3.0)),
            wavelength=float(g.get("wavelength_m", 1550e-9)),
            nt_max=int(g.get("nt_max", 64)),
            l_min=float(g.get("l_min_m", 100.0)))
        out_json["gfring_optimum"] = optimum.to_dict()
        print(f"gfring optimum: L = {optimum.fiber_length / 1e3:.2f} km, "
              f"n_t = {optimum.turns}, "
              f"delta_omega = {optimum.report.delta_omega:.3g} rad/s")

    with open(os.path.join(args.out, "design_report.json"), "w") as f:
        json.dump(out_json, f, indent=2)
    outputs.append("design_report.json")
    _write_manifest(args.out, "design", args, config, outputs)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qsagnac",
        description="Photon-pair Sagnac gyroscope: simulate, fit, design.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("simulate", cmd_simulate), ("fit", cmd_fit),
                     ("design", cmd_design)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run config")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--fast", action="store_true",
                       help="cut Monte-Carlo sample counts to 1000")
        if name == "design":
            p.add_argument("--optimize-gfring", action="store_true",
                           help="run the giant-ring length/turns optimizer")
        p.set_defaults(fn=fn)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (FitError, DegenerateDesignError, InfeasibleDesignError,
            UndefinedRatioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, KeyError, TypeError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
