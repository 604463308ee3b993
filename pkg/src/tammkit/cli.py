"""``tammkit <module> <verb> [flags]``.

Exit codes: 0 success, 2 configuration or usage error, 3 numerical or
convergence failure, 4 file I/O error. Every run that gets past argument
parsing writes ``manifest.json`` into its output directory.
"""

import argparse
import json
import os
import sys
import traceback

import numpy as np

from . import __version__, config
from .exceptions import (BoundsError, CalibrationError, ConvergenceError, DomainError,
                         EmptyDispersionError, InstabilityError, InsufficientDataError,
                         InvalidMaterialError, NoSignalError, ParseError, StructuralError,
                         TammkitError)
from .io import OutputSet, write_manifest
from .units import HC_EV_NM

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

CONFIG_ERRORS = (DomainError, ParseError, InvalidMaterialError, StructuralError, BoundsError)
NUMERIC_ERRORS = (ConvergenceError, CalibrationError, EmptyDispersionError, InstabilityError,
                  InsufficientDataError, NoSignalError, FloatingPointError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def exit_code_for(exc):
    if isinstance(exc, (UsageError, *CONFIG_ERRORS)):
        return EXIT_CONFIG
    if isinstance(exc, NUMERIC_ERRORS):
        return EXIT_NUMERIC
    if isinstance(exc, OSError):
        return EXIT_IO
    # anything else is an unexpected numerical failure
    return EXIT_NUMERIC


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


# ------------------------------------------------------------------ context

class Run:
    """State shared by one invocation: resolved config, inputs and outputs."""

    def __init__(self, args, cfg):
        self.args = args
        self.cfg = cfg
        self.inputs = []
        self.out = OutputSet(args.out, {"command": f"{args.module} {args.verb}"})
        self.summary = {}

    def opt(self, name, default):
        """Flag value, else ``studies.<module>.<verb>.<name>`` from config, else ``default``."""
        v = getattr(self.args, name, None)
        if v is not None:
            return v
        study = self.cfg.get("studies", {}).get(f"{self.args.module}.{self.args.verb}", {})
        return study.get(name, default)

    def read(self, path):
        path = str(config.resolve_data_path(path))
        if not os.path.isfile(path):
            raise FileNotFoundError(f"no such file: {path}")
        self.inputs.append(path)
        return path

    def progress(self, label=""):
        from .fdtd.solver import stderr_progress
        return stderr_progress(label)


def _stack(run, path=None, metal_thickness=None):
    from .stack import Stack, default_tamm_stack
    if path:
        with open(run.read(path)) as fh:
            return Stack.from_json(fh.read())
    return default_tamm_stack(metal_thickness, cfg=run.cfg)


def _window(run, stack):
    lo, hi = run.opt("emin", None), run.opt("emax", None)
    if lo is None and hi is None:
        return None
    if lo is None or hi is None:
        raise DomainError("give both --emin and --emax")
    return (lo, hi)


# ---------------------------------------------------------------- commands

def cmd_materials_fit_drude(run):
    from .materials import fit_drude, read_material_csv
    table = read_material_csv(run.read(run.args.table))
    target = run.opt("target", "full-complex")
    model, resid = fit_drude(list(zip(table.energies, table.indices)), fit_target=target)
    doc = {"eps_b": model.eps_b, "e_p_ev": model.e_p, "gamma_ev": model.gamma,
           "residual_norm": float(resid), "fit_target": target}
    run.out.json("drude_fit.json", doc)
    run.summary = doc


def cmd_materials_calibrate(run):
    from .materials import Drude
    from .tmm.resonance import calibrate_gold
    g = run.cfg["gold"]
    q = run.opt("target_q", run.cfg["tamm"]["target_q"])
    e = run.opt("target_energy", run.cfg["tamm"]["target_energy_ev"])
    model, n = calibrate_gold(q, e, Drude(g["eps_b"], g["e_p_ev"], g["gamma_ev"], name="gold"))
    doc = {"eps_b": model.eps_b, "e_p_ev": model.e_p, "gamma_ev": model.gamma,
           "target_q": q, "n_at_target": [n.real, n.imag]}
    run.out.json("gold_calibrated.json", doc)
    run.summary = doc


def cmd_stack_build(run):
    from .stack import default_tamm_stack
    t = run.opt("metal_thickness", run.cfg["gold"]["thickness_nm"])
    pairs = run.opt("pairs", run.cfg["dbr"]["pairs"])
    st = default_tamm_stack(t, cfg=run.cfg, pairs=pairs)
    name = run.opt("name", "stack.json")
    run.out.text(name, st.to_json(indent=2))
    run.summary = {"layers": len(st.layers), "total_thickness_nm": st.total_thickness}


def cmd_tmm_reflectivity(run):
    from .tmm.engine import reflectivity
    from .tmm.resonance import find_resonance
    st = _stack(run, run.args.stack)
    e = np.arange(run.opt("emin", 1.30), run.opt("emax", 1.48) + 1e-12, run.opt("step", 2e-4))
    pol = run.opt("polarization", run.cfg["tmm"]["polarization"])
    kx = run.opt("kx", run.cfg["tmm"]["kx_inv_nm"])
    _, R = reflectivity(st, e, kx, pol)
    run.out.csv("reflectivity.csv", ("energy_ev", "R"), zip(e, R),
                meta={"kx_inv_nm": kx, "polarization": pol})
    win = (float(e[0]), float(e[-1]))
    rec = find_resonance(st, win, kx, pol)
    run.summary = {"resonance": None if rec is None else {"E0_ev": rec.E0, "Q": rec.Q}}
    if rec is not None:
        print(f"dip at {rec.E0:.5f} eV, Q = {rec.Q:.0f}")


def cmd_tmm_resonance(run):
    from .tmm.resonance import find_resonance
    st = _stack(run, run.args.stack)
    rec = find_resonance(st, _window(run, st), run.opt("kx", 0.0),
                         run.opt("polarization", "TE"), run.opt("method", "lorentzian-dip"))
    doc = None if rec is None else {"E0_ev": rec.E0, "Q": rec.Q, "fwhm_ev": rec.fwhm,
                                    "provenance": rec.provenance}
    run.out.json("resonance.json", {"resonance": doc})
    run.summary = {"resonance": doc}
    print("no Tamm mode" if rec is None else f"E0 = {rec.E0:.6f} eV, Q = {rec.Q:.1f}")


def cmd_tmm_dispersion(run):
    from .tmm.resonance import dispersion, fit_parabolic_dispersion
    st = _stack(run, run.args.stack)
    ks = np.linspace(0.0, run.opt("kmax", 0.004), int(run.opt("nk", 21)))
    disp = dispersion(st, ks, run.opt("polarization", "TE"), _window(run, st))
    run.out.csv("dispersion.csv", ("kx_inv_nm", "energy_ev", "Q"),
                [(k, r.E0, r.Q) if r else (k, "nan", "nan") for k, r in disp])
    try:
        e0, c, rms = fit_parabolic_dispersion(disp)
        run.summary = {"E0_ev": e0, "C_ev_nm2": c, "rms_ev": rms}
    except InsufficientDataError:
        run.summary = {"parabola": None}


def cmd_tmm_field_profile(run):
    from .tmm.engine import PlaneWaveQuery, field_profile
    from .tmm.resonance import find_resonance
    st = _stack(run, run.args.stack)
    e = run.opt("energy", None)
    if e is None:
        rec = find_resonance(st, _window(run, st))
        if rec is None:
            raise DomainError("no resonance found; pass --energy")
        e = rec.E0
    prof = field_profile(st, PlaneWaveQuery(e, run.opt("kx", 0.0), run.opt("polarization", "TE")),
                         dz=run.opt("dz", 1.0), above=run.opt("above", 200.0))
    run.out.csv("field_profile.csv", ("z_nm", "intensity", "eps_real"),
                zip(prof.z, prof.intensity, prof.eps.real), meta={"energy_ev": e})
    top = st.metadata.get("metal_thickness_nm") or 0.0
    below = prof.z > top
    zmax = float(prof.z[below][np.argmax(prof.intensity[below])] - top)
    run.summary = {"energy_ev": e, "peak_below_interface_nm": zmax}


def cmd_tmm_thickness_sweep(run):
    from .tmm.resonance import thickness_sweep, threshold_thickness
    ts = np.arange(run.opt("tmin", 5.0), run.opt("tmax", 60.0) + 1e-9, run.opt("tstep", 5.0))
    sweep = thickness_sweep(ts, lambda t: _stack(run, None, t))
    run.out.csv("thickness_sweep.csv", ("thickness_nm", "mode", "energy_ev", "Q"),
                [(t, int(r is not None), r.E0 if r else "nan", r.Q if r else "nan")
                 for t, r in sweep])
    run.summary = {"threshold_nm": threshold_thickness(sweep)}


def _dispersion_input(run):
    from .tmm.resonance import dispersion, fit_parabolic_dispersion
    from .report import _kgrid
    st = _stack(run, run.args.stack)
    disp = dispersion(st, _kgrid(run.diameters))
    if run.opt("parabolic", False):
        e0, c, _ = fit_parabolic_dispersion(disp)
        return st, disp, (e0, c)
    return st, disp, disp


def cmd_ctp_modes(run):
    from .ctp import MODE_TABLE_HEADER, mode_table
    from .tmm.engine import PlaneWaveQuery, field_profile
    run.diameters = run.opt("diameters", [2.0, 2.5, 3.0, 3.5, 4.0])
    st, disp, use = _dispersion_input(run)
    prof = field_profile(st, PlaneWaveQuery(disp[0][1].E0), dz=0.5)
    rows = mode_table(run.diameters, use, prof, q=run.opt("q", None),
                      l_max=int(run.opt("l_max", 1)), p_max=int(run.opt("p_max", 2)))
    run.out.csv("modes.csv", MODE_TABLE_HEADER, rows)
    run.summary = {"fundamental_ev": [min(r[3] for r in rows if r[0] == d)
                                      for d in run.diameters]}


def cmd_ctp_purcell(run):
    from .ctp import mode_volume, pillar_profile, purcell_factor
    from .tmm.engine import PlaneWaveQuery, field_profile
    from .tmm.resonance import find_resonance
    st = _stack(run, run.args.stack)
    rec = find_resonance(st)
    if rec is None:
        raise DomainError("stack has no Tamm resonance")
    prof = field_profile(st, PlaneWaveQuery(rec.E0), dz=0.5)
    d, q = run.opt("diameter", 2.6), run.opt("q", 490.0)
    n = float(run.opt("n", run.cfg["dbr"]["n_high"]))
    v, v3 = mode_volume(prof, d, index_at_antinode=n)
    fp = purcell_factor(q, v, HC_EV_NM / rec.E0, n)
    pp, _ = pillar_profile(rec.E0)
    vp, _ = mode_volume(pp, d, index_at_antinode=n)
    doc = {"diameter_um": d, "Q": q, "V_eff_um3": v, "V_eff_lambda_n3": v3, "F_p": fp,
           "pillar_V_eff_um3": vp, "volume_ratio": v / vp, "energy_ev": rec.E0}
    run.out.json("purcell.json", doc)
    run.summary = doc
    print(f"V = {v:.4f} um^3, F_p = {fp:.3f}, V/V_pillar = {v / vp:.3f}")


def cmd_ctp_metrics(run):
    from .ctp import acceleration_factor, beta_fraction, inhibition_factor, quantum_efficiency_bound
    d = run.cfg["decay"]
    ref, ref_err = run.opt("tau_ref", d["tau_ref_ns"]), run.opt("tau_ref_err", d["tau_ref_err_ns"])
    doc = {"tau_ref_ns": ref}
    long_ = run.opt("tau_long", None)
    if long_ is not None:
        g, ge = inhibition_factor(long_, ref, run.opt("tau_long_err", 0.0), ref_err)
        doc.update(inhibition=g, inhibition_err=ge,
                   quantum_efficiency_bound=quantum_efficiency_bound(long_, ref))
    tau = run.opt("tau", None)
    if tau is not None:
        a, ae = acceleration_factor(tau, ref, run.opt("tau_err", 0.0), ref_err)
        doc.update(acceleration=a, acceleration_err=ae)
    fp = run.opt("fp", None)
    if fp is not None and long_ is not None:
        doc["beta"] = beta_fraction(fp, ref / long_)
    run.out.json("metrics.json", doc)
    run.summary = doc


def cmd_ctp_pattern(run):
    from .ctp import main_lobe_width, radiation_pattern
    pat = radiation_pattern(int(run.opt("l", 0)), int(run.opt("p", 1)), run.opt("diameter", 2.5),
                            run.opt("energy", 1.36), run.opt("na", 1.0))
    run.out.csv("pattern.csv", ("theta_deg", "intensity", "in_aperture"),
                zip(pat.theta_deg, pat.intensity, pat.mask.astype(int)))
    run.summary = {"main_lobe_fwhm_deg": main_lobe_width(pat)}


def _scene(run):
    from .fdtd.model import Scene
    from .fdtd.study import default_scene
    if run.args.scene:
        path = run.read(run.args.scene)
        with open(path) as fh:
            return Scene.from_json(fh.read(), base_dir=os.path.dirname(path))
    return default_scene(run.opt("diameter", 2.5), run.cfg)


def cmd_fdtd_run(run):
    from .fdtd.analysis import field_map, lateral_fraction, write_field_map, write_probe_csv
    from .fdtd.model import grid_for_scene
    from .fdtd.solver import Simulation
    from .fdtd.study import run_scene
    scene = _scene(run)
    grid = grid_for_scene(scene, run.opt("dr", None), run.opt("dz", None), run.opt("m", None),
                          cfg=run.cfg)
    if run.opt("steps", None):
        res = Simulation(scene, grid).run(int(run.args.steps), progress=run.progress())
        modes, fund = [], None
    else:
        res, modes, fund = run_scene(scene, run.cfg, run.opt("ringdown", None),
                                     progress=run.progress(), grid=grid)
    for j in range(res.probes.shape[0]):
        name = f"probe{j}.csv"
        write_probe_csv(run.out.path(name), res.times_fs, res.probes[j])
        run.out.adopt(name, {"probe_rz_nm": list(scene.probes[j])})
    run.out.csv("modes.csv", ("energy_ev", "Q", "amplitude"),
                [(m.E0, m.Q, m.amplitude) for m in modes])
    run.summary = {"steps": res.steps, "dt_fs": res.dt_fs,
                   "modes": [{"E0_ev": m.E0, "Q": m.Q} for m in modes]}
    if res.dft and fund is not None:
        fmap = field_map(res, fund.E0)
        write_field_map(fmap, run.out.path("field_abs_er"))
        run.out.adopt("field_abs_er.f32")
        run.out.adopt("field_abs_er.json")
        if scene.disk is not None:
            run.summary["lateral_fraction"] = lateral_fraction(fmap, scene.disk.diameter * 500.0)
    run.out.json("scene.json", scene.to_dict())


def cmd_fdtd_modes(run):
    from .fdtd.study import MODE_TABLE_HEADER, fdtd_mode_table
    ds = run.opt("diameters", [2.0, 2.5, 3.0, 3.5, 4.0])
    rows, summary = fdtd_mode_table(ds, run.cfg, jobs=run.args.jobs,
                                    ringdown_fs=run.opt("ringdown", None),
                                    progress=run.progress("diameter "))
    run.out.csv("fdtd_modes.csv", MODE_TABLE_HEADER, rows)
    run.summary = {"fundamental": [{"diameter_um": d, "hardwall_ev": hw,
                                    "E0_ev": None if f is None else f.E0,
                                    "Q": None if f is None else f.Q,
                                    "lateral_fraction": frac} for d, hw, f, frac in summary]}


def cmd_fdtd_pml_check(run):
    from .fdtd.solver import measure_pml_reflection
    db, e, ratio = measure_pml_reflection()
    run.out.csv("pml_reflection.csv", ("energy_ev", "ratio"), zip(e, ratio))
    run.summary = {"max_reflection_db": db}
    print(f"max reflection {db:.1f} dB")


def cmd_decay_simulate(run):
    from .decay import simulate_decay, write_trace_csv
    from .units import fwhm_to_sigma
    tr = simulate_decay(run.opt("tau", 1.3), int(run.opt("counts", 100000)),
                        run.opt("window", 12.5), run.opt("bin_width", 0.004),
                        fwhm_to_sigma(run.opt("irf_fwhm", run.cfg["decay"]["irf_fwhm_ns"])),
                        run.opt("background", 0.0), int(run.opt("seed", 0)))
    name = run.opt("name", "trace.csv")
    write_trace_csv(run.out.path(name), tr)
    run.out.adopt(name, {"seed": int(run.opt("seed", 0)), "t0_ns": tr.t0})
    run.summary = {"bins": int(tr.counts.size), "total": int(tr.counts.sum()), "t0_ns": tr.t0}


def cmd_decay_fit(run):
    from .decay import fit_monoexponential, read_trace_csv, write_fit_json
    from .units import fwhm_to_sigma
    tr = read_trace_csv(run.read(run.args.trace), t0=run.opt("t0", 0.0))
    fwhm = run.opt("irf_fwhm", run.cfg["decay"]["irf_fwhm_ns"])
    res = fit_monoexponential(tr, fwhm_to_sigma(fwhm) if fwhm > 0 else 0.0,
                              fit_start=run.opt("fit_start", None))
    write_fit_json(run.out.path("fit.json"), res)
    run.out.adopt("fit.json")
    run.summary = res.to_dict()
    print(f"tau = {res.tau:.4g} +/- {res.tau_uncertainty:.2g} ns")


def cmd_report(run):
    from .report import build
    opts = {"diameters": run.opt("diameters", None), "fdtd": run.opt("fdtd", False),
            "jobs": run.args.jobs, "q_table": run.args.q_table and run.read(run.args.q_table),
            "diameter": run.opt("diameter", 2.5), "progress": run.progress()}
    run.summary = build(run.args.verb, run.out, run.cfg, opts)


# ------------------------------------------------------------------ parser

def _common(p):
    p.add_argument("--config", help="JSON config file (overrides built-in defaults)")
    p.add_argument("--out", default=None, help="output directory (default ./tammkit-out)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for independent points")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one config value (JSON literal)")


def _stack_flag(p):
    p.add_argument("--stack", help="Stack JSON (default: config-default Tamm structure)")


COMMANDS = {}


def build_parser():
    top = _Parser(prog="tammkit", description="Tamm-plasmon modelling toolkit")
    top.add_argument("--version", action="version", version=f"tammkit {__version__}")
    mods = top.add_subparsers(dest="module", parser_class=_Parser)

    def verb(module, name, fn, helptext):
        if module not in mods.choices:
            m = mods.add_parser(module)
            m.add_subparsers(dest="verb", parser_class=_Parser)
        sub = next(a for a in mods.choices[module]._actions
                   if isinstance(a, argparse._SubParsersAction))
        p = sub.add_parser(name, help=helptext)
        _common(p)
        COMMANDS[(module, name)] = fn
        return p

    p = verb("materials", "fit-drude", cmd_materials_fit_drude, "fit a Drude model to n,k data")
    p.add_argument("--table", required=True, help="energy_ev,n,k CSV ($TAMMKIT_DATA_DIR aware)")
    p.add_argument("--target", choices=("real-part-only", "full-complex"))
    p = verb("materials", "calibrate", cmd_materials_calibrate, "tune gold damping to a planar Q")
    p.add_argument("--target-q", type=float)
    p.add_argument("--target-energy", type=float)

    p = verb("stack", "build", cmd_stack_build, "write the default Tamm stack as JSON")
    p.add_argument("--metal-thickness", type=float)
    p.add_argument("--pairs", type=int)
    p.add_argument("--name")

    p = verb("tmm", "reflectivity", cmd_tmm_reflectivity, "reflectivity spectrum")
    _stack_flag(p)
    for f in ("--emin", "--emax", "--step", "--kx"):
        p.add_argument(f, type=float)
    p.add_argument("--polarization", choices=("TE", "TM"))
    p = verb("tmm", "resonance", cmd_tmm_resonance, "locate the Tamm resonance")
    _stack_flag(p)
    for f in ("--emin", "--emax", "--kx"):
        p.add_argument(f, type=float)
    p.add_argument("--polarization", choices=("TE", "TM"))
    p.add_argument("--method", choices=("lorentzian-dip", "complex-pole"))
    p = verb("tmm", "dispersion", cmd_tmm_dispersion, "planar dispersion E(k_x)")
    _stack_flag(p)
    for f in ("--kmax", "--emin", "--emax"):
        p.add_argument(f, type=float)
    p.add_argument("--nk", type=int)
    p.add_argument("--polarization", choices=("TE", "TM"))
    p = verb("tmm", "field-profile", cmd_tmm_field_profile, "|E|^2 along z")
    _stack_flag(p)
    for f in ("--energy", "--kx", "--dz", "--above", "--emin", "--emax"):
        p.add_argument(f, type=float)
    p.add_argument("--polarization", choices=("TE", "TM"))
    p = verb("tmm", "thickness-sweep", cmd_tmm_thickness_sweep, "mode presence vs. gold thickness")
    for f in ("--tmin", "--tmax", "--tstep"):
        p.add_argument(f, type=float)

    p = verb("ctp", "modes", cmd_ctp_modes, "hard-wall confined modes vs. diameter")
    _stack_flag(p)
    p.add_argument("--diameters", type=_floats)
    p.add_argument("--parabolic", action="store_const", const=True)
    p.add_argument("--q", type=float)
    p.add_argument("--l-max", type=int)
    p.add_argument("--p-max", type=int)
    p = verb("ctp", "purcell", cmd_ctp_purcell, "mode volume and Purcell factor")
    _stack_flag(p)
    for f in ("--diameter", "--q", "--n"):
        p.add_argument(f, type=float)
    p = verb("ctp", "metrics", cmd_ctp_metrics, "inhibition, acceleration, beta, QE bound")
    for f in ("--tau-long", "--tau-long-err", "--tau-ref", "--tau-ref-err", "--tau", "--tau-err",
              "--fp"):
        p.add_argument(f, type=float)
    p = verb("ctp", "pattern", cmd_ctp_pattern, "far-field radiation pattern")
    p.add_argument("--l", type=int)
    p.add_argument("--p", type=int)
    for f in ("--diameter", "--energy", "--na"):
        p.add_argument(f, type=float)

    p = verb("fdtd", "run", cmd_fdtd_run, "one BOR-FDTD scene")
    p.add_argument("--scene", help="Scene JSON (default: config-default disk scene)")
    for f in ("--diameter", "--dr", "--dz", "--ringdown"):
        p.add_argument(f, type=float)
    p.add_argument("--m", type=int)
    p.add_argument("--steps", type=int)
    p = verb("fdtd", "modes", cmd_fdtd_modes, "diameter batch of FDTD runs")
    p.add_argument("--diameters", type=_floats)
    p.add_argument("--ringdown", type=float)
    verb("fdtd", "pml-check", cmd_fdtd_pml_check, "normal-incidence PML reflection")

    p = verb("decay", "simulate", cmd_decay_simulate, "synthetic photon-counting trace")
    for f in ("--tau", "--window", "--bin-width", "--irf-fwhm", "--background"):
        p.add_argument(f, type=float)
    p.add_argument("--counts", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--name")
    p = verb("decay", "fit", cmd_decay_fit, "mono-exponential fit of a trace")
    p.add_argument("--trace", required=True, help="time_ns,counts CSV")
    p.add_argument("--irf-fwhm", type=float)
    p.add_argument("--fit-start", type=float)
    p.add_argument("--t0", type=float, help="excitation time on the file's axis (default 0)")

    from .report import FIGURES
    for fig in FIGURES:
        p = verb("report", fig, cmd_report, f"dataset bundle for {fig}")
        p.add_argument("--diameters", type=_floats)
        p.add_argument("--diameter", type=float)
        p.add_argument("--fdtd", action="store_const", const=True,
                       help="add BOR-FDTD points (slow)")
        p.add_argument("--q-table", help="diameter_um,Q CSV for fig3d")
    return top


def _overrides(pairs):
    out = {}
    for item in pairs:
        key, sep, raw = item.partition("=")
        if not sep or "." not in key:
            raise UsageError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return out


def _resolve_config(args):
    if args.config and not os.path.isfile(args.config):
        raise FileNotFoundError(f"no such config file: {args.config}")
    try:
        cfg = config.load(args.config, _overrides(args.set))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{args.config}: {exc}") from None
    if not isinstance(cfg.get("studies", {}), dict):
        raise ParseError("config 'studies' must be an object")
    return cfg


def _out_dir(argv):
    for i, a in enumerate(argv):
        if a == "--out" and i + 1 < len(argv):
            return argv[i + 1]
        if a.startswith("--out="):
            return a.split("=", 1)[1]
    return os.path.join(os.getcwd(), "tammkit-out")


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.module or not getattr(args, "verb", None):
            raise UsageError("usage: tammkit <module> <verb> [flags]; see tammkit --help")
        if args.jobs < 1:
            raise UsageError("tammkit: --jobs must be >= 1")
    except UsageError as exc:
        print(exc, file=sys.stderr)
        parser.print_usage(sys.stderr)
        try:
            write_manifest(_out_dir(argv), argv, {}, [], {}, EXIT_CONFIG, str(exc))
        except OSError:
            pass
        return EXIT_CONFIG
    args.out = args.out or _out_dir([])
    run, cfg, code, err = None, {}, EXIT_OK, None
    try:
        cfg = _resolve_config(args)
        run = Run(args, cfg)
        if args.config:
            run.inputs.append(args.config)
        np.seterr(all="ignore")
        COMMANDS[(args.module, args.verb)](run)
    except Exception as exc:                      # mapped to exit codes below
        code = exit_code_for(exc)
        err = f"{type(exc).__name__}: {exc}"
        if not isinstance(exc, (TammkitError, UsageError, OSError)):
            traceback.print_exc(file=sys.stderr)
        print(f"tammkit: {err}", file=sys.stderr)
    resolved = {"config": cfg, "args": {k: v for k, v in vars(args).items()
                                        if k not in ("set",)}}
    try:
        write_manifest(args.out, argv, resolved, run.inputs if run else [],
                       run.out.files if run else {}, code, err,
                       summary=run.summary if run is not None and code == EXIT_OK else None)
    except OSError as exc:
        print(f"tammkit: cannot write manifest: {exc}", file=sys.stderr)
        return code or EXIT_IO
    return code


if __name__ == "__main__":
    sys.exit(main())
