"""Config-driven runner for the simulation scenarios.

Usage::

    python -m eitmem --config configs/store.toml --out results/

Frequencies in the config are in MHz (cyclic, converted with 2π) and times
in ns; everything is converted to SI angular units once, on load.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__, coincidence, eit_medium, memory_sim, spdc_source
from .io import read_csv, write_json
from .waveforms import frequency_grid

SCENARIOS = ("spectrum", "slowlight", "store", "sweep-xi", "coincidence", "fit-g2", "fit-od")
MHZ = 2 * np.pi * 1e6
NS = 1e-9

# section -> key -> accepted types
SCHEMA = {
    "": {"scenario": str, "seed": int, "out": str},
    "grid": {"n": int, "half_span_MHz": float},
    "source": {"bandwidth_MHz": float, "escape": float, "kappa_MHz": float,
               "gamma_s_MHz": float, "gamma_i_MHz": float, "Gamma_s_MHz": float,
               "Gamma_i_MHz": float, "Omega_q_MHz": float, "Omega_r_MHz": float,
               "omega_pump_MHz": float},
    "medium": {"optical_depth": float, "Gamma_MHz": float, "Omega_c_MHz": float,
               "group_delay_ns": float, "gamma_0_MHz": float, "gamma_0_over_Gamma": float,
               "delta_ge_MHz": float, "delta_gs_MHz": float},
    "schedule": {"t_off_ns": float, "storage_ns": float, "xi": float, "switch_ns": float,
                 "xi_values": list, "readout_ns": float, "nz": int},
    "decoherence": {"gamma_s": float, "k_over_Gamma": float, "power_exponent": float,
                    "calibrate": bool},
    "detection": {"collection_eff": float, "dark_rate_Hz": float, "accidental_rate_Hz": float,
                  "leak_coeff": float, "n_triggers": int, "fiber_delay_ns": float,
                  "window_start_ns": float, "bin_ns": float, "n_bins": int,
                  "target_source_g2": float, "target_g2": float, "waveform": str},
    "fit_g2": {"data": str, "xi_values": list, "gamma_s": float, "leak_coeff": float,
               "N_b": float, "g2_at_1": float, "noise": float},
    "fit_od": {"data": str, "optical_depth": float, "Omega_c_MHz": float,
               "gamma_gs_MHz": float, "span_MHz": float, "n_points": int, "noise": float},
}


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending key path."""


def _check_types(cfg: dict) -> None:
    if not cfg:
        raise ConfigError("<root>: configuration is empty")
    for key, val in cfg.items():
        if isinstance(val, dict):
            if key not in SCHEMA or key == "":
                raise ConfigError(f"{key}: unknown section")
            for sub, v in val.items():
                _check_key(f"{key}.{sub}", SCHEMA[key].get(sub), v)
        else:
            _check_key(key, SCHEMA[""].get(key), val)


def _check_key(path, typ, val):
    if typ is None:
        raise ConfigError(f"{path}: unknown key")
    if typ is float:
        ok = isinstance(val, (int, float)) and not isinstance(val, bool)
    elif typ is int:
        ok = isinstance(val, int) and not isinstance(val, bool)
    else:
        ok = isinstance(val, typ)
    if not ok:
        raise ConfigError(f"{path}: expected {typ.__name__}, got {type(val).__name__}")
    if typ is list and not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in val):
        raise ConfigError(f"{path}: expected a list of numbers")


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"<file>: {exc}") from exc
    _check_types(cfg)
    return cfg


# ------------------------------------------------------------ resolution

def _section(cfg, name):
    return cfg.get(name, {})


def _guard(path, fn, *a, **kw):
    """Run a constructor and prefix validation failures with ``path``."""
    try:
        return fn(*a, **kw)
    except (ValueError, TypeError, OSError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def resolve(cfg: dict) -> dict:
    """Turn the unit-bearing config into validated SI model objects."""
    op = memory_sim.reference_operating_point()
    g = _section(cfg, "grid")
    n = g.get("n", memory_sim.SIM_GRID_N)
    half = g.get("half_span_MHz", memory_sim.SIM_GRID_HALF_SPAN / MHZ)
    if n < 16 or half <= 0:
        raise ConfigError("grid: n must be >= 16 and half_span_MHz > 0")
    grid = frequency_grid(n, half * MHZ)

    s = _section(cfg, "source")
    bw = s.get("bandwidth_MHz", spdc_source.SOURCE_BANDWIDTH_HZ / 1e6)
    if bw <= 0:
        raise ConfigError("source.bandwidth_MHz: must be positive")
    base = _guard("source", spdc_source.CavitySpdcParams.reference_source, bw * 1e6)
    if "escape" in s:
        base = _guard("source.escape", spdc_source.CavitySpdcParams.symmetric,
                      base.Gamma_s, base.kappa, s["escape"])
    over = {k[:-4]: v * MHZ for k, v in s.items() if k.endswith("_MHz") and k != "bandwidth_MHz"}
    source = _guard("source", replace, base, **over)

    m = _section(cfg, "medium")
    Gamma = m.get("Gamma_MHz", eit_medium.GAMMA_D2 / MHZ) * MHZ
    if "gamma_0_MHz" in m and "gamma_0_over_Gamma" in m:
        raise ConfigError("medium.gamma_0_MHz: give either gamma_0_MHz or gamma_0_over_Gamma")
    gamma_0 = (m["gamma_0_MHz"] * MHZ if "gamma_0_MHz" in m
               else m.get("gamma_0_over_Gamma", op.gamma_0 / op.medium.Gamma) * Gamma)
    medium = _guard("medium", eit_medium.EitParams,
                    optical_depth=m.get("optical_depth", op.medium.optical_depth), Gamma=Gamma,
                    gamma_gs=gamma_0, delta_ge=m.get("delta_ge_MHz", 0.0) * MHZ,
                    delta_gs=m["delta_gs_MHz"] * MHZ if "delta_gs_MHz" in m else None)
    if "Omega_c_MHz" in m:
        rabi = m["Omega_c_MHz"] * MHZ
    else:
        td = m.get("group_delay_ns", op.group_delay / NS) * NS
        rabi = _guard("medium.group_delay_ns", eit_medium.rabi_for_delay, medium, td)
    medium = _guard("medium.Omega_c_MHz", medium.with_, Omega_c=rabi)

    sc = _section(cfg, "schedule")
    t_off = sc.get("t_off_ns", op.schedule.t_off / NS) * NS
    storage = sc.get("storage_ns", op.schedule.storage_time / NS) * NS
    sched = _guard("schedule", memory_sim.CouplingSchedule, write_rabi=rabi, t_off=t_off,
                   t_on=t_off + storage, xi=sc.get("xi", 1.0),
                   switch_duration=sc.get("switch_ns", op.schedule.switch_duration / NS) * NS)
    xi_values = np.asarray(sc.get("xi_values", memory_sim.REF_XI), dtype=float)
    if xi_values.size == 0 or np.any(xi_values <= 0) or np.any(xi_values > 16):
        raise ConfigError("schedule.xi_values: values must lie in (0, 16]")

    dc = _section(cfg, "decoherence")
    dec = _guard("decoherence", memory_sim.DecoherenceModel, gamma_0=gamma_0,
                 gamma_s_coeff=dc.get("gamma_s", op.decoherence.gamma_s_coeff),
                 k=dc.get("k_over_Gamma", op.decoherence.k / op.medium.Gamma) * Gamma,
                 power_exponent=dc.get("power_exponent", op.decoherence.power_exponent))

    dt = _section(cfg, "detection")
    detection = _guard("detection", coincidence.DetectionParams,
                       collection_eff=dt.get("collection_eff", 0.25),
                       dark_rate=dt.get("dark_rate_Hz", 0.0),
                       accidental_rate=dt.get("accidental_rate_Hz", 0.0),
                       leak_coeff=dt.get("leak_coeff", 0.0),
                       n_triggers=dt.get("n_triggers", 30000),
                       fiber_delay=dt.get("fiber_delay_ns", coincidence.FIBER_DELAY / NS) * NS,
                       window_start=dt.get("window_start_ns", coincidence.WINDOW_START / NS) * NS,
                       bin_width=dt.get("bin_ns", coincidence.BIN_WIDTH / NS) * NS,
                       n_bins=dt.get("n_bins", coincidence.N_BINS))
    if dt.get("waveform", "store") not in ("source", "slowlight", "store"):
        raise ConfigError("detection.waveform: must be one of source, slowlight, store")

    return {"grid": grid, "source": source, "medium": medium, "schedule": sched,
            "xi_values": xi_values, "decoherence": dec, "detection": detection,
            "calibrate_k": dc.get("calibrate", False),
            "nz": sc.get("nz", 201), "readout": sc.get("readout_ns", 700.0) * NS}


def _describe(r: dict) -> dict:
    """JSON-friendly echo of the resolved parameters (SI units)."""
    grid = r["grid"]
    return {
        "grid": {"n": int(grid.size), "step_rad_s": float(grid[1] - grid[0])},
        "source": asdict(r["source"]),
        "medium": asdict(r["medium"]),
        "schedule": asdict(r["schedule"]),
        "xi_values": r["xi_values"].tolist(),
        "decoherence": asdict(r["decoherence"]),
        "detection": asdict(r["detection"]),
        "nz": r["nz"], "readout_s": r["readout"],
    }


# -------------------------------------------------------------- scenarios

def _source(r):
    return spdc_source.biphoton_spectrum(r["source"], r["grid"], normalize=True)


def _maybe_calibrate(r, spec):
    if not r["calibrate_k"]:
        return r["decoherence"]
    return memory_sim.calibrate_decoherence(
        spdc_source.signal_field(spec), r["medium"], r["schedule"], r["decoherence"],
        xis=r["xi_values"], nz=r["nz"], readout=r["readout"])


def _run_spectrum(r, out, stem, seed):
    spec = _source(r)
    g2 = spdc_source.g2_waveform_from_spectrum(spec)
    spec.to_csv(out / f"{stem}_spectrum.csv")
    g2.window(-500 * NS, 500 * NS).to_csv(out / f"{stem}_g2.csv")
    return {"spectral_fwhm_Hz": spec.fwhm() / (2 * np.pi), "g2_fwhm_s": g2.fwhm(),
            "bandwidth_Hz": g2.bandwidth_hz()}, [f"{stem}_spectrum.csv", f"{stem}_g2.csv"]


def _slow_params(r, dec):
    return r["medium"].with_(gamma_gs=dec.write_rate)


def _run_slowlight(r, out, stem, seed):
    spec = _source(r)
    dec = _maybe_calibrate(r, spec)
    p = _slow_params(r, dec)
    res = memory_sim.slow_light(spec, p)
    res.g2.window(-500 * NS, 1500 * NS).to_csv(out / f"{stem}_g2.csv")
    det = np.linspace(-20, 20, 801) * r["medium"].Gamma
    eit_medium.write_transmission_csv(out / f"{stem}_transmission.csv", det,
                                      eit_medium.transmission_spectrum(p, det))
    return {"efficiency": res.efficiency, "bandwidth_Hz": res.bandwidth_hz,
            "peak_delay_s": res.delay, "group_delay_s": eit_medium.group_delay(p),
            "eit_bandwidth_Hz": eit_medium.eit_bandwidth(p) / (2 * np.pi),
            "k": dec.k}, [f"{stem}_g2.csv", f"{stem}_transmission.csv"]


def _run_store(r, out, stem, seed):
    spec = _source(r)
    dec = _maybe_calibrate(r, spec)
    res = memory_sim.simulate_storage(spdc_source.signal_field(spec), r["medium"],
                                      r["schedule"], dec, nz=r["nz"], readout=r["readout"])
    res.out_field.to_g2().to_csv(out / f"{stem}_g2.csv")
    return {"efficiency": res.efficiency, "efficiency_excl_switch": res.efficiency_excl_switch,
            "retrieved_bandwidth_Hz": res.retrieved_bandwidth_hz, "leaked": res.leaked,
            "dissipated": res.dissipated, "energy_closure_error": res.closure_error,
            "k": dec.k}, [f"{stem}_g2.csv"]


def _run_sweep(r, out, stem, seed):
    spec = _source(r)
    dec = _maybe_calibrate(r, spec)
    try:
        sw = memory_sim.bandwidth_vs_xi(r["xi_values"], spdc_source.signal_field(spec),
                                        r["medium"], r["schedule"], dec,
                                        nz=r["nz"], readout=r["readout"])
    except memory_sim.SweepError as exc:
        exc.partial.to_csv(out / f"{stem}_sweep.csv")
        exc.files = [f"{stem}_sweep.csv"]
        raise
    sw.to_csv(out / f"{stem}_sweep.csv")
    gs, amp, r2 = sw.exponential_fit()
    c, p = sw.power_law_fit()
    return {"gamma_s": gs, "efficiency_amplitude": amp, "exp_fit_r2": r2,
            "bandwidth_prefactor_Hz": c, "bandwidth_exponent": p, "k": dec.k,
            "rows": len(sw.xi)}, [f"{stem}_sweep.csv"]


def _run_coincidence(r, out, stem, seed, cfg):
    dt = _section(cfg, "detection")
    d = r["detection"]
    spec = _source(r)
    g2_src = spdc_source.g2_waveform_from_spectrum(spec)
    which = dt.get("waveform", "store")
    xi = r["schedule"].xi
    if which == "source":
        g2, xi = g2_src, 0.0
    elif which == "slowlight":
        dec = _maybe_calibrate(r, spec)
        g2 = memory_sim.slow_light(spec, _slow_params(r, dec)).g2
        xi = 1.0
    else:
        dec = _maybe_calibrate(r, spec)
        res = memory_sim.simulate_storage(spdc_source.signal_field(spec), r["medium"],
                                          r["schedule"], dec, nz=r["nz"], readout=r["readout"])
        g2 = res.out_field.to_g2()
    if "target_source_g2" in dt:
        acc = coincidence.calibrate_accidental_rate(g2_src, replace(d, leak_coeff=0.0),
                                                    dt["target_source_g2"])
        d = replace(d, accidental_rate=acc)
    if "target_g2" in dt and xi > 0:
        d = replace(d, leak_coeff=coincidence.calibrate_leak_coeff(g2, d, xi, dt["target_g2"]))
    h = coincidence.monte_carlo_histogram(g2, d, xi, seed=seed)
    h.to_csv(out / f"{stem}_histogram.csv")
    est = coincidence.estimate_g2(h)
    return {"g2": est.g2, "g2_uncertainty": est.uncertainty, "tau_d_s": est.tau_d,
            "floor_mean": est.floor_mean, "analytic_g2": coincidence.analytic_g2(g2, d, xi),
            "above_classical_limit": est.above_classical_limit,
            "sparse_warning": h.sparse_warning, "accidental_rate_Hz": d.accidental_rate,
            "leak_coeff": d.leak_coeff, "total_counts": int(h.counts.sum())}, \
        [f"{stem}_histogram.csv"]


def _run_fit_g2(r, out, stem, seed, cfg):
    fc = _section(cfg, "fit_g2")
    if "data" in fc:
        cols = _guard("fit_g2.data", read_csv, fc["data"], ["xi", "g2", "sigma"])
        xi, g2, sig = cols["xi"], cols["g2"], cols["sigma"]
        floor = cols.get("floor")
        n_b = None if floor is not None else fc.get("N_b")
    else:
        truth = coincidence.G2Model(1.0, fc.get("gamma_s", 0.055), fc.get("leak_coeff", 0.43),
                                    fc.get("N_b", 2.8)).scaled_to(1.0, fc.get("g2_at_1", 5.8))
        xi = np.asarray(fc.get("xi_values", memory_sim.REF_XI), dtype=float)
        rng = np.random.default_rng(seed)
        noise = fc.get("noise", 0.05)
        clean = coincidence.g2_peak_model(truth, xi)
        g2 = clean * (1 + noise * rng.standard_normal(xi.size))
        sig = np.maximum(noise, 1e-6) * clean
        floor, n_b = truth.floor(xi), None
    fit = _guard("fit_g2", coincidence.fit_g2_model, xi, g2, sig, floor=floor, N_b=n_b)
    fit.to_json(out / f"{stem}_model.json")
    xs, gmax = coincidence.model_maximum(fit.model)
    return {**asdict(fit.model), "reduced_chi2": fit.residual, "xi_at_max": xs,
            "g2_max": gmax}, [f"{stem}_model.json"]


def _run_fit_od(r, out, stem, seed, cfg):
    fc = _section(cfg, "fit_od")
    Gamma = r["medium"].Gamma
    if "data" in fc:
        det, T = _guard("fit_od.data", eit_medium.read_transmission_csv, fc["data"])
    else:
        truth = eit_medium.EitParams(fc.get("optical_depth", 55.0), Gamma,
                                     fc.get("Omega_c_MHz", 10.0) * MHZ,
                                     fc.get("gamma_gs_MHz", 0.2) * MHZ)
        span = fc.get("span_MHz", 30.0) * MHZ
        det = np.linspace(-span, span, fc.get("n_points", 301))
        rng = np.random.default_rng(seed)
        T = eit_medium.transmission_spectrum(truth, det) + fc.get("noise", 0.01) * rng.standard_normal(det.size)
        eit_medium.write_transmission_csv(out / f"{stem}_synthetic.csv", det, T)
    res = _guard("fit_od", eit_medium.fit_optical_depth, det, T, Gamma)
    p = res.params
    files = [] if "data" in fc else [f"{stem}_synthetic.csv"]
    return {"optical_depth": p.optical_depth, "Omega_c_Hz": p.Omega_c / (2 * np.pi),
            "gamma_gs_Hz": p.gamma_gs / (2 * np.pi), "rms_residual": res.rms_residual}, files


RUNNERS = {"spectrum": _run_spectrum, "slowlight": _run_slowlight, "store": _run_store,
           "sweep-xi": _run_sweep}
NEEDS_CFG = {"coincidence": _run_coincidence, "fit-g2": _run_fit_g2, "fit-od": _run_fit_od}


def config_hash(cfg: dict, scenario: str, seed: int) -> str:
    blob = json.dumps({"cfg": cfg, "scenario": scenario, "seed": seed}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:10]


def run(config_path, out=None, seed=None, scenario=None) -> int:
    """Run one scenario; returns the process exit status."""
    try:
        cfg = load_config(config_path)
        scenario = scenario or cfg.get("scenario")
        if scenario is None:
            raise ConfigError("scenario: missing (set it in the config or pass --scenario)")
        if scenario not in SCENARIOS:
            raise ConfigError(f"scenario: unknown scenario {scenario!r}")
        seed = seed if seed is not None else cfg.get("seed", 0)
        resolved = resolve(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    outdir = Path(out or cfg.get("out", "."))
    outdir.mkdir(parents=True, exist_ok=True)
    stem = f"{scenario}-{config_hash(cfg, scenario, seed)}"
    manifest = {"scenario": scenario, "seed": seed, "version": __version__,
                "config": cfg, "parameters": _describe(resolved)}
    status = 0
    try:
        if scenario in RUNNERS:
            results, files = RUNNERS[scenario](resolved, outdir, stem, seed)
        else:
            results, files = NEEDS_CFG[scenario](resolved, outdir, stem, seed, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except memory_sim.SweepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        results = {"error": str(exc), "completed_rows": len(exc.partial.xi)}
        files = getattr(exc, "files", [])
        status = 1
    manifest["results"] = results
    manifest["outputs"] = files
    write_json(outdir / f"{stem}_manifest.json", manifest)
    print(outdir / f"{stem}_manifest.json")
    return status


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="eitmem", description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True, help="TOML experiment file")
    ap.add_argument("--seed", type=int, default=None, help="RNG seed (overrides config)")
    ap.add_argument("--out", default=None, help="output directory (overrides config)")
    ap.add_argument("--scenario", choices=SCENARIOS, default=None,
                    help="scenario to run (overrides config)")
    args = ap.parse_args(argv)
    return run(args.config, out=args.out, seed=args.seed, scenario=args.scenario)


if __name__ == "__main__":
    sys.exit(main())
