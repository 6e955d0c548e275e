"""Command-line entry point: ``nvdnp <command> [--config FILE] [--out DIR] ...``."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import analysis, optimize, powder, pulsepol
from .config import ConfigError, Param, RunConfig, parse_config, render
from .constants import (
    B_POLARIZATION,
    D_NV,
    DIAMOND_ATOM_DENSITY,
    GAMMA_13C,
    GAMMA_1H,
    NU_XBAND,
)
from .parallel import thread_count
from .powder import write_csv
from .spin import NvSystem
from .svg import line_plot, write_text_atomic

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC = 0, 2, 3

PULSES = tuple(pulsepol.PULSE_TABLE)
_SPIN = {"D": Param("frequency", D_NV), "e_x": Param("frequency", 0.0)}
_BROADENING = {"lw": Param("number", 0.4), "lw_unit": Param("str", "mT", ("mT", "MHz")),
               "ex_fwhm": Param("frequency", 21.0)}
_GRID = {"n_theta": Param("int", 180), "n_phi": Param("int", 8), "n_strain": Param("int", 7)}
_SEQUENCE = {
    "variant": Param("str", "phase-offset", ("standard", "phase-offset")),
    "phi": Param("angle", None),
    "pulse": Param("str", "normal", PULSES),
    "a_list": Param("list:number", None),
    "M": Param("int", 20),
    "omega1": Param("frequency", 10.5),
    "detuning": Param("frequency", 0.0),
    "B": Param("field", B_POLARIZATION),
    "larmor": Param("frequency", None),
    "n": Param("number", 4.5),
    "model": Param("str", "reduced", ("reduced", "full-n14")),
    "a_zx": Param("frequency", 0.08),
    "a_zy": Param("frequency", 0.0),
    "a_zz": Param("frequency", 0.0),
}

SCHEMAS = {
    "spectrum": {
        "mode": Param("str", "field", ("field", "frequency")),
        "axis_min": Param("number", 250.0), "axis_max": Param("number", 420.0),
        "n_points": Param("int", 341), "nu": Param("frequency", NU_XBAND),
        "B": Param("field", B_POLARIZATION), "p_nv": Param("number", 0.0),
        "temperature": Param("temperature", 293.0),
        "strain_sampling": Param("str", "quadrature", ("quadrature", "monte-carlo")),
        **_SPIN, **_BROADENING, **_GRID,
    },
    "freq-dist": {
        "B": Param("field", B_POLARIZATION), "axis_min": Param("frequency", 0.0),
        "axis_max": Param("frequency", 12000.0), "n_points": Param("int", 1201),
        **_SPIN, **_BROADENING, **_GRID,
    },
    "fraction": {
        "B": Param("field", B_POLARIZATION), "carrier": Param("frequency", None),
        "delta_pol": Param("frequency", 15.0), **_SPIN, **_BROADENING,
        "lw_unit": Param("str", "MHz", ("mT", "MHz")),
        "n_theta": Param("int", 1500), "n_phi": Param("int", 24), "n_strain": Param("int", 21),
    },
    "heat": {
        "powers": Param("list:power", None), "fields": Param("list:field", None),
        "nu": Param("frequency", NU_XBAND), "at_power": Param("power", 420.0),
    },
    "pulsepol-tau": {
        **_SEQUENCE, "n_min": Param("number", 0.5), "n_max": Param("number", 8.0),
        "n_points": Param("int", 751),
    },
    "pulsepol-detuning": {
        **_SEQUENCE, "span": Param("number", 1.5), "n_points": Param("int", 121),
        "threshold": Param("number", 0.8),
    },
    "inversion": {
        "pulse": Param("str", "2-sideband", PULSES), "a_list": Param("list:number", None),
        "omega1": Param("frequency", 10.5), "span": Param("number", 1.5),
        "n_points": Param("int", 301),
    },
    "pulse-opt": {
        "n_sidebands": Param("int", 2), "threshold": Param("number", 0.99),
        "omega1": Param("frequency", 10.5), "budget": Param("int", 4000),
        "restarts": Param("int", 16),
    },
    "fit": {
        "input": Param("str", None),
        "model": Param("str", "saturation", ("saturation", "decay", "rotation")),
    },
    "dnp-enhance": {
        "s_hp": Param("number", 1.407), "s_ref": Param("number", 5.420),
        "mass": Param("number", 12.0), "abundance": Param("number", 0.0107),
        "molar_mass": Param("number", 12.011), "gamma": Param("number", GAMMA_13C),
        "ref_mass": Param("number", 40.0), "ref_abundance": Param("number", 0.9998),
        "ref_molar_mass": Param("number", 18.015), "ref_gamma": Param("number", GAMMA_1H),
        "ref_atoms": Param("int", 2), "B_detect": Param("field", 1004.0),
        "B_pol": Param("field", B_POLARIZATION), "temperature": Param("temperature", 293.0),
    },
    "estimate": {
        "d_spin": Param("number", 6.7e-15), "t_pol": Param("time", 30e6),
        "conc": Param("concentration", 8.2), "lattice_density": Param("number", DIAMOND_ATOM_DENSITY),
        "radius": Param("number", 80.0), "eta": Param("number", 1.4),
        "temperature": Param("temperature", 293.0), "angle_window": Param("angle", math.radians(2.5)),
        "cycle_time": Param("time", 1500.0), "t_laser": Param("time", 400.0),
        "peak_power": Param("power", 1600.0), "M": Param("int", 68), "n": Param("number", 4.5),
        "larmor": Param("frequency", None), "B": Param("field", B_POLARIZATION),
    },
}


class NumericFailure(RuntimeError):
    pass


def _system(p):
    return NvSystem(D=p["D"], e_x=p["e_x"])


def _broadening(p):
    return powder.BroadeningModel(p["lw"], p["ex_fwhm"], p["lw_unit"])


def _shape(p):
    if p.get("a_list") is not None:
        return pulsepol.PulseShape(p["a_list"], "custom")
    return pulsepol.PULSE_TABLE[p["pulse"]]


def _sequence(p):
    phi = p["phi"]
    if phi is None:
        phi = pulsepol.PHI_STANDARD if p["variant"] == "standard" else pulsepol.PHI_OFFSET
    larmor = p["larmor"] if p["larmor"] is not None else pulsepol.larmor_13c(p["B"])
    spec = pulsepol.SequenceSpec(phi=phi, n=p["n"], M=p["M"], omega1=p["omega1"],
                                 detuning=p["detuning"], pulse=_shape(p), larmor=larmor)
    model = pulsepol.SpinModel(kind=p["model"], a_zx=p["a_zx"], a_zy=p["a_zy"], a_zz=p["a_zz"],
                               B=p["B"])
    return spec, model


def _finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(np.asarray(a, dtype=float))):
            raise NumericFailure("non-finite values in result")


class Run:
    def __init__(self, out_dir, plot, threads, seed):
        self.out_dir = out_dir
        self.plot = plot
        self.threads = threads
        self.seed = seed
        self.outputs = []
        self.warnings = []
        self.summary = {}

    def csv(self, name, header, rows):
        path = os.path.join(self.out_dir, name)
        write_csv(path, header, rows)
        self.outputs.append(path)

    def svg(self, name, x, series, xlabel, ylabel, title=""):
        if not self.plot:
            return
        path = os.path.join(self.out_dir, name)
        write_text_atomic(path, line_plot(x, series, xlabel, ylabel, title))
        self.outputs.append(path)

    def say(self, key, value, text):
        self.summary[key] = value
        print(text)


def cmd_spectrum(p, run: Run):
    req = powder.SpectrumRequest(mode=p["mode"], axis_min=p["axis_min"], axis_max=p["axis_max"],
                                 n_points=p["n_points"], nu=p["nu"], field=p["B"], p_nv=p["p_nv"],
                                 temperature=p["temperature"], n_theta=p["n_theta"],
                                 n_phi=p["n_phi"], n_strain=p["n_strain"], seed=run.seed,
                                 strain_sampling=p["strain_sampling"])
    sp = powder.simulate_spectrum(_system(p), req, _broadening(p))
    _finite(sp.intensity)
    run.csv("spectrum.csv", ["axis", "intensity"], np.column_stack([sp.axis, sp.intensity]))
    unit = "mT" if p["mode"] == "field" else "MHz"
    run.svg("spectrum.svg", sp.axis, [("intensity", sp.intensity)], unit, "intensity (a.u.)")
    peaks = sp.peak_positions(2)
    run.say("peaks", peaks.tolist(), "strongest maxima: " + ", ".join(f"{x:.2f} {unit}" for x in peaks))
    if sp.metadata["n_in_window"] == 0:
        run.warnings.append("no resonance inside the axis window")


def cmd_freq_dist(p, run: Run):
    sp = powder.frequency_distribution(_system(p), p["B"], _broadening(p), p["axis_min"],
                                       p["axis_max"], p["n_points"], p["n_theta"], p["n_phi"],
                                       p["n_strain"])
    _finite(sp.intensity)
    run.csv("freq-dist.csv", ["axis", "intensity"], np.column_stack([sp.axis, sp.intensity]))
    run.svg("freq-dist.svg", sp.axis, [("weight", sp.intensity)], "frequency (MHz)", "weight")
    run.say("support", [sp.metadata["nu_min"], sp.metadata["nu_max"]],
            f"transition frequencies span {sp.metadata['nu_min']:.1f} to {sp.metadata['nu_max']:.1f} MHz")


def cmd_fraction(p, run: Run):
    sys_ = _system(p)
    carrier = p["carrier"]
    if carrier is None:
        carrier = powder.perpendicular_carrier(sys_, p["B"], p["delta_pol"])
    f = powder.bandwidth_fraction(sys_, carrier, p["B"], p["delta_pol"], _broadening(p),
                                  p["n_theta"], p["n_phi"], p["n_strain"])
    _finite(list(f.values()))
    run.csv("fraction.csv", ["transition", "fraction"], [[k, v] for k, v in f.items()])
    run.say("fraction", f, f"carrier {carrier:.3f} MHz, window {p['delta_pol']:g} MHz: "
            f"s1-s2 {100 * f['s1s2']:.2f}%, s2-s3 {100 * f['s2s3']:.3f}%")


def cmd_heat(p, run: Run):
    if p["powers"] is None or p["fields"] is None:
        raise ConfigError("heat needs 'powers' and 'fields'")
    if len(p["powers"]) != len(p["fields"]):
        raise ConfigError("'powers' and 'fields' must have equal length")
    res = powder.heating_analysis(list(zip(p["powers"], p["fields"])), p["nu"])
    _finite(res.D, res.delta_T, [res.rate])
    run.csv("heat.csv", ["power", "D", "delta_T"], np.column_stack([res.powers, res.D, res.delta_T]))
    run.svg("heat.svg", res.powers, [("delta T", res.delta_T)], "laser power (mW)", "delta T (K)")
    dT = res.delta_t_at(p["at_power"])
    run.say("rate", res.rate, f"heating rate {res.rate:.4f} K/mW; delta T at {p['at_power']:g} mW = {dT:.1f} K")


def cmd_pulsepol_tau(p, run: Run):
    spec, model = _sequence(p)
    lo = pulsepol.resonance_tau(p["n_min"], spec.larmor)
    hi = pulsepol.resonance_tau(p["n_max"], spec.larmor)
    res = pulsepol.scan_tau(model, spec, (lo, hi), p["n_points"], run.threads)
    _finite(res.nv_polarization, res.nuclear_polarization)
    run.csv("pulsepol-tau.csv", ["x", "nv_polarization", "nuclear_polarization"],
            np.column_stack([res.x, res.nv_polarization, res.nuclear_polarization]))
    run.svg("pulsepol-tau.svg", res.x, [("NV", res.nv_polarization), ("nucleus", res.nuclear_polarization)],
            "tau (us)", "polarization")
    dips = res.resonances(0.05, pulsepol.resonance_tau(0.3, spec.larmor)) * 2 * spec.larmor
    run.say("dips_n", dips.tolist(), "dips at n = " + ", ".join(f"{d:.2f}" for d in dips))


def cmd_pulsepol_detuning(p, run: Run):
    spec, model = _sequence(p)
    deltas = np.linspace(-p["span"] * spec.omega1, p["span"] * spec.omega1, p["n_points"])
    res = pulsepol.scan_detuning(model, spec, deltas, run.threads)
    _finite(res.nv_polarization, res.nuclear_polarization)
    run.csv("pulsepol-detuning.csv", ["x", "nv_polarization", "nuclear_polarization"],
            np.column_stack([res.x, res.nv_polarization, res.nuclear_polarization]))
    run.svg("pulsepol-detuning.svg", res.x, [("nucleus", res.nuclear_polarization)],
            "detuning (MHz)", "nuclear polarization")
    y = np.abs(res.nuclear_polarization)
    y0 = y[int(np.argmin(np.abs(deltas)))]
    width = pulsepol.contiguous_width(deltas, y, p["threshold"] * y0) if y0 > 0 else 0.0
    run.say("bandwidth", width, f"transfer band {width:.2f} MHz = {width / spec.omega1:.3f} x omega1")


def cmd_inversion(p, run: Run):
    shape = _shape(p)
    deltas = np.linspace(-p["span"] * p["omega1"], p["span"] * p["omega1"], p["n_points"])
    z = pulsepol.inversion_profile(shape, p["omega1"], deltas)
    _finite(z)
    run.csv("inversion.csv", ["detuning", "sigma_z"], np.column_stack([deltas, z]))
    run.svg("inversion.svg", deltas, [("sigma_z", z)], "detuning (MHz)", "<sigma_z>")
    d, pw = optimize.accounting(shape.a_list)
    run.say("accounting", [d, pw], f"duration {d:.3f}, power {pw:.3f} (pi-pulse units)")


def cmd_pulse_opt(p, run: Run):
    cfg = optimize.OptimizerConfig(n_sidebands=p["n_sidebands"], fidelity_threshold=p["threshold"],
                                   budget=p["budget"], seed=run.seed, restarts=p["restarts"],
                                   threads=run.threads)
    cand = optimize.optimize(cfg, p["omega1"])
    if not cand.feasible:
        run.warnings.append("no candidate met the fidelity threshold; rectangular baseline returned")
    path = os.path.join(run.out_dir, "pulse-opt.csv")
    cand.to_csv(path)
    run.outputs.append(path)
    run.say("a_list", list(cand.a_list), "a_list = [" + ", ".join(f"{a:.3f}" for a in cand.a_list)
            + f"], band {cand.bandwidth:.3f} MHz = {cand.bandwidth / p['omega1']:.3f} x omega1")


def cmd_fit(p, run: Run):
    if p["input"] is None:
        raise ConfigError("fit needs 'input'", key="input")
    try:
        series = analysis.TimeSeries.from_csv(p["input"])
    except OSError as exc:
        raise ConfigError(f"cannot read input: {exc}", key="input")
    if p["model"] == "rotation":
        res = analysis.fit_rotation_response(series)
    else:
        res = analysis.fit_stretched_exp(series, p["model"])
    if not res.converged:
        run.warnings.append(res.message or "fit flagged as not converged")
    path = os.path.join(run.out_dir, "fit.csv")
    res.to_csv(path)
    run.outputs.append(path)
    report = os.path.join(run.out_dir, "fit.txt")
    write_text_atomic(report, res.report() + "\n")
    run.outputs.append(report)
    run.say("params", {k: float(v) for k, v in res.params.items()}, res.report())


def cmd_dnp_enhance(p, run: Run):
    diamond = analysis.SampleSpec(p["mass"], p["abundance"], p["molar_mass"], p["gamma"])
    ref = analysis.SampleSpec(p["ref_mass"], p["ref_abundance"], p["ref_molar_mass"],
                              p["ref_gamma"], p["ref_atoms"])
    g = analysis.gamma_ref(diamond, ref)
    p_det = analysis.thermal_polarization(p["B_detect"] / 1e3, p["temperature"], p["gamma"])
    p_pol = analysis.thermal_polarization(p["B_pol"] / 1e3, p["temperature"], p["gamma"])
    p_abs = analysis.absolute_polarization(p["s_hp"], p["s_ref"], g, p_det)
    eps = analysis.enhancement(p_abs, p_pol)
    rows = [["gamma_ref", g], ["p_thermal_detection", p_det], ["p_thermal_polarization", p_pol],
            ["p_absolute", p_abs], ["enhancement", eps]]
    _finite([r[1] for r in rows])
    run.csv("dnp-enhance.csv", ["quantity", "value"], rows)
    run.say("enhancement", eps, f"gamma_ref = 1/{1 / g:.1f}; p = {p_abs:.3e}; enhancement = {eps:.0f}")


def cmd_estimate(p, run: Run):
    larmor = p["larmor"] if p["larmor"] is not None else pulsepol.larmor_13c(p["B"])
    tumb = analysis.tumbling(p["radius"], p["eta"], p["temperature"], p["angle_window"],
                             p["cycle_time"] / 1e3)
    pt = analysis.ProtocolTiming(p["t_laser"], p["cycle_time"], p["M"], p["peak_power"])
    tau = pulsepol.resonance_tau(p["n"], larmor)
    rows = [
        ["diffusion_length_nm", analysis.diffusion_length(p["d_spin"], p["t_pol"] / 1e6)],
        ["nn_distance_nm", analysis.nn_distance(p["conc"], p["lattice_density"])],
        ["rotational_diffusion_per_s", tumb.d_r],
        ["residence_ms", tumb.residence],
        ["cycles", tumb.cycles],
        ["average_laser_power_mW", analysis.protocol_power(pt)],
        ["tau_us", tau],
        ["sequence_time_us", p["M"] * tau],
    ]
    _finite([r[1] for r in rows])
    run.csv("estimate.csv", ["quantity", "value"], rows)
    for k, v in rows:
        print(f"{k} = {v:.4g}")
    run.summary.update({k: float(v) for k, v in rows})


COMMANDS = {
    "spectrum": cmd_spectrum, "freq-dist": cmd_freq_dist, "fraction": cmd_fraction,
    "heat": cmd_heat, "pulsepol-tau": cmd_pulsepol_tau, "pulsepol-detuning": cmd_pulsepol_detuning,
    "inversion": cmd_inversion, "pulse-opt": cmd_pulse_opt, "fit": cmd_fit,
    "dnp-enhance": cmd_dnp_enhance, "estimate": cmd_estimate,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="nvdnp", description=__doc__)
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="key = value configuration file")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--plot", action="store_true", help="also write an SVG plot")
    ap.add_argument("--threads", type=int, default=None,
                    help="worker threads (default: NVDNP_THREADS or 1)")
    ap.add_argument("--variant", choices=("standard", "phase-offset"),
                    help="PulsePol variant, overriding the config")
    return ap


def load_config(args) -> RunConfig:
    schema = SCHEMAS[args.command]
    text = ""
    if args.config is not None:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}")
        if not any(line.split("#", 1)[0].strip() for line in text.splitlines()):
            raise ConfigError("config file is empty")
    cfg = parse_config(text, args.command, schema)
    if args.variant is not None:
        if "variant" not in schema:
            raise ConfigError(f"--variant does not apply to '{args.command}'")
        cfg.params["variant"] = args.variant
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    os.makedirs(args.out, exist_ok=True)
    started = time.perf_counter()
    report = {"command": args.command, "argv": list(sys.argv[1:] if argv is None else argv),
              "seed": args.seed, "outputs": [], "warnings": []}
    run = None
    code = EXIT_OK
    try:
        threads = thread_count(args.threads)
        cfg = load_config(args)
        report["config"] = render(cfg, SCHEMAS[args.command])
        run = Run(args.out, args.plot, threads, args.seed)
        with np.errstate(invalid="raise", divide="raise", over="raise"):
            COMMANDS[args.command](cfg.params, run)
    except ConfigError as exc:
        code = EXIT_VALIDATION
        report["error"] = str(exc)
    except (NumericFailure, FloatingPointError, np.linalg.LinAlgError, RuntimeError) as exc:
        code = EXIT_NUMERIC
        report["error"] = f"{type(exc).__name__}: {exc}"
    except ValueError as exc:
        code = EXIT_VALIDATION
        report["error"] = str(exc)
    except Exception as exc:  # still leave a report behind
        code = EXIT_NUMERIC
        report["error"] = f"unexpected {type(exc).__name__}: {exc}"
    if run is not None:
        report["outputs"] = run.outputs
        report["warnings"] = run.warnings
        report["summary"] = run.summary
    if "error" in report:
        print(f"error: {report['error']}", file=sys.stderr)
    report["exit_code"] = code
    report["wall_time_s"] = round(time.perf_counter() - started, 4)
    write_text_atomic(os.path.join(args.out, "run_report.json"),
                      json.dumps(report, indent=2, default=_json_default) + "\n")
    return code


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


if __name__ == "__main__":
    sys.exit(main())
