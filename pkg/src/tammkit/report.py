"""Figure datasets: CSV bundles plus gnuplot scripts.

Every builder takes an :class:`~tammkit.io.OutputSet`, the resolved config
and an options dict, writes its files and returns a small summary dict.
Plot scripts are plain gnuplot (``gnuplot figXX.gp`` inside the output
directory writes ``figXX.png``).
"""

import numpy as np

from .ctp import MODE_TABLE_HEADER, confined_modes, mode_table
from .exceptions import DomainError
from .stack import default_dbr, default_materials, default_tamm_stack, tamm_stack
from .tmm.engine import PlaneWaveQuery, field_profile, reflectivity, reflectivity_map
from .tmm.resonance import dispersion, find_resonance, fit_parabolic_dispersion
from .units import HBARC_EV_NM, HC_EV_NM

FIGURES = ("fig1b", "fig1c", "fig1d", "fig2a", "fig2c", "fig2d", "fig3d")
PLOT_DIALECT = "gnuplot"

DEFAULT_DIAMETERS = (1.5, 2.0, 2.5, 3.0, 3.5, 4.0)


def _gp(name, body):
    return (f"set terminal pngcairo size 800,600\nset output '{name}.png'\n"
            "set datafile separator ','\nset key autotitle columnhead\n" + body)


def _planar(cfg):
    return default_tamm_stack(cfg=cfg)


def _kgrid(diameters, e0=1.36):
    """k samples up to the largest hard-wall k in use, capped below the
    ambient light line where the reflectivity dip disappears."""
    k_top = 2 * 7.0156 / (min(diameters) * 1000.0)   # alpha_12 sets the largest k needed
    k_light = e0 / HBARC_EV_NM
    return np.linspace(0.0, min(1.1 * k_top, 0.9 * k_light), 23)


def fig1b(out, cfg, opts):
    """Normal-incidence reflectivity of the bare DBR and of the Tamm structure."""
    e = np.arange(opts.get("emin", 1.30), opts.get("emax", 1.48) + 1e-12, opts.get("step", 2e-4))
    bare = tamm_stack(default_dbr(cfg), substrate=default_materials(cfg)["GaAs"])
    tamm = _planar(cfg)
    _, r_bare = reflectivity(bare, e)
    _, r_tamm = reflectivity(tamm, e)
    rec = find_resonance(tamm)
    out.csv("fig1b_reflectivity.csv", ("energy_ev", "R_dbr", "R_tamm"), zip(e, r_bare, r_tamm),
            meta={"figure": "fig1b", "metal_thickness_nm": cfg["gold"]["thickness_nm"]})
    out.text("fig1b.gp", _gp("fig1b", "set xlabel 'Energy (eV)'\nset ylabel 'R'\n"
                             "plot 'fig1b_reflectivity.csv' u 1:2 w l lc 'black', "
                             "'' u 1:3 w l lc 'red'\n"))
    return {"tamm_energy_ev": None if rec is None else rec.E0,
            "tamm_q": None if rec is None else rec.Q}


def fig1c(out, cfg, opts):
    """|E|^2 along z at the planar Tamm resonance, with the index profile."""
    st = _planar(cfg)
    rec = find_resonance(st)
    if rec is None:
        raise DomainError("no planar Tamm resonance to profile")
    prof = field_profile(st, PlaneWaveQuery(rec.E0), dz=opts.get("dz", 1.0), above=200.0,
                         below=0.0)
    peak = prof.intensity / prof.intensity.max()
    n = np.sqrt(prof.eps).real
    out.csv("fig1c_profile.csv", ("z_nm", "intensity_norm", "n_real"), zip(prof.z, peak, n),
            meta={"figure": "fig1c", "energy_ev": rec.E0,
                  "z_origin": "top of the metal film, increasing into the stack"})
    mt = cfg["gold"]["thickness_nm"]
    below = prof.z > mt
    z_max = float(prof.z[below][np.argmax(prof.intensity[below])] - mt)
    out.text("fig1c.gp", _gp("fig1c", "set xlabel 'z (nm)'\nset ylabel '|E|^2'\n"
                             "set y2tics\nset y2label 'n'\nset xrange [-200:1500]\n"
                             "plot 'fig1c_profile.csv' u 1:2 w l lc 'red', "
                             "'' u 1:3 axes x1y2 w l lc 'grey'\n"))
    return {"energy_ev": rec.E0, "peak_below_interface_nm": z_max}


def fig1d(out, cfg, opts):
    """BOR-FDTD |E_r| map at the fundamental confined mode of one disk."""
    from .fdtd.analysis import field_map, lateral_fraction, write_field_map
    from .fdtd.study import default_scene, run_scene

    d = float(opts.get("diameter", 2.5))
    scene = default_scene(d, cfg)
    res, modes, fund = run_scene(scene, cfg, progress=opts.get("progress"))
    if fund is None:
        raise DomainError("no resonance found in the FDTD run")
    fmap = field_map(res, fund.E0)
    stem = out.path("fig1d_abs_er")
    write_field_map(fmap, stem)
    frac = lateral_fraction(fmap, d * 500.0)
    meta = {"figure": "fig1d", "diameter_um": d, "mode_energy_ev": fund.E0, "Q": fund.Q,
            "lateral_fraction": frac}
    out.adopt("fig1d_abs_er.f32", meta)
    out.adopt("fig1d_abs_er.json", meta)
    out.csv("fig1d_modes.csv", ("energy_ev", "Q", "amplitude"),
            [(m.E0, m.Q, m.amplitude) for m in modes], meta={"figure": "fig1d"})
    nr, nz = fmap.values.shape
    out.text("fig1d.gp", _gp("fig1d", (
        f"set xlabel 'r (nm)'\nset ylabel 'z (nm)'\nset yrange [] reverse\nset view map\n"
        f"dr = {fmap.r[1] - fmap.r[0]}; r0 = {fmap.r[0]}; dz = {fmap.z[1] - fmap.z[0]}; "
        f"z0 = {fmap.z[0]}\n"
        f"plot 'fig1d_abs_er.f32' binary array=({nz},{nr}) format='%float32' endian=little "
        "dx=dz dy=dr origin=(z0,r0) transpose with image\n")))
    return {"diameter_um": d, "mode_energy_ev": fund.E0, "Q": fund.Q, "lateral_fraction": frac}


def fig2a(out, cfg, opts):
    """Angle-resolved reflectivity of the planar structure and its dispersion."""
    st = _planar(cfg)
    k_max = opts.get("k_max", 0.004)
    ks = np.linspace(0.0, k_max, int(opts.get("nk", 41)))
    rec = find_resonance(st)
    e = np.arange(rec.E0 - 0.004, rec.E0 + 0.03, opts.get("step", 2e-4))
    R = reflectivity_map(st, e, ks)
    rows = [(k, en, R[i, j]) for j, k in enumerate(ks) for i, en in enumerate(e)]
    out.csv("fig2a_map.csv", ("kx_inv_um", "energy_ev", "R"),
            [(k * 1000.0, en, r) for k, en, r in rows], meta={"figure": "fig2a"})
    disp = dispersion(st, ks)
    e0, c, rms = fit_parabolic_dispersion(disp)
    out.csv("fig2a_dispersion.csv", ("kx_inv_um", "energy_ev", "Q", "parabola_ev"),
            [(k * 1000.0, r.E0, r.Q, e0 + c * k * k) for k, r in disp if r is not None],
            meta={"figure": "fig2a", "E0_ev": e0, "C_ev_nm2": c, "rms_ev": rms})
    out.text("fig2a.gp", _gp("fig2a", (
        "set xlabel 'k_x (um^-1)'\nset ylabel 'Energy (eV)'\nset view map\n"
        "splot 'fig2a_map.csv' u 1:2:(1-$3) w image, "
        "'fig2a_dispersion.csv' u 1:2:(0) w l lc 'white' nocontour\n")))
    return {"E0_ev": e0, "C_ev_nm2": c, "rms_ev": rms}


def _hardwall_rows(cfg, diameters, q=None):
    st = _planar(cfg)
    disp = dispersion(st, _kgrid(diameters))
    e0, c, _ = fit_parabolic_dispersion(disp)
    prof = field_profile(st, PlaneWaveQuery(disp[0][1].E0), dz=0.5)
    sampled = mode_table(diameters, disp, prof, q=q, l_max=1, p_max=2)
    parab = []
    for d in diameters:
        for m in confined_modes((e0, c), d, l_max=1, p_max=2, q=q).modes:
            parab.append((d, *m.labels, m.E0))
    return st, disp, sampled, parab


def _fdtd_rows(cfg, diameters, opts):
    from .fdtd.study import MODE_TABLE_HEADER as FH, fdtd_mode_table
    rows, summary = fdtd_mode_table(diameters, cfg, jobs=opts.get("jobs", 1),
                                    progress=opts.get("progress"))
    return FH, rows, summary


def fig2c(out, cfg, opts):
    """Confined-mode energies against diameter (hard-wall model, optional FDTD)."""
    diameters = tuple(opts.get("diameters") or DEFAULT_DIAMETERS)
    _, _, sampled, parab = _hardwall_rows(cfg, diameters)
    out.csv("fig2c_hardwall.csv", MODE_TABLE_HEADER[:5], [r[:5] for r in sampled],
            meta={"figure": "fig2c", "dispersion": "sampled TMM"})
    out.csv("fig2c_hardwall_parabolic.csv", ("diameter_um", "l", "p", "energy_ev"), parab,
            meta={"figure": "fig2c", "dispersion": "parabolic fit"})
    summary = {"diameters_um": list(diameters),
               "fundamental_ev": [min(r[3] for r in sampled if r[0] == d) for d in diameters]}
    plot = ("set xlabel 'Diameter (um)'\nset ylabel 'Energy (eV)'\n"
            "plot 'fig2c_hardwall.csv' u 1:4 w p pt 7, "
            "'fig2c_hardwall_parabolic.csv' u 1:4 w p pt 6")
    if opts.get("fdtd"):
        header, rows, fs = _fdtd_rows(cfg, diameters, opts)
        out.csv("fig2c_fdtd.csv", header, rows, meta={"figure": "fig2c", "solver": "bor-fdtd"})
        summary["fdtd_fundamental_ev"] = [None if f is None else f.E0 for _, _, f, _ in fs]
        plot += ", 'fig2c_fdtd.csv' u 1:3 w p pt 5"
    out.text("fig2c.gp", _gp("fig2c", plot + "\n"))
    return summary


def fig2d(out, cfg, opts):
    """Quality factor against diameter: planar Q, hard-wall Q(k) and optional FDTD."""
    diameters = tuple(opts.get("diameters") or DEFAULT_DIAMETERS)
    st, disp, sampled, _ = _hardwall_rows(cfg, diameters)
    planar = find_resonance(st, method="complex-pole").Q
    fund = [min((r for r in sampled if r[0] == d), key=lambda r: r[3]) for d in diameters]
    rows = [(d, r[4], planar) for d, r in zip(diameters, fund)]
    out.csv("fig2d_q.csv", ("diameter_um", "Q_hardwall", "Q_planar"), rows,
            meta={"figure": "fig2d", "note": "hard-wall Q is the planar Q at k = 2 alpha/d"})
    plot = ("set xlabel 'Diameter (um)'\nset ylabel 'Q'\n"
            "plot 'fig2d_q.csv' u 1:2 w lp, '' u 1:3 w l dt 2")
    summary = {"planar_q": planar, "q_hardwall": [r[1] for r in rows]}
    if opts.get("fdtd"):
        header, frows, fs = _fdtd_rows(cfg, diameters, opts)
        out.csv("fig2d_fdtd.csv", ("diameter_um", "energy_ev", "Q"),
                [(d, f.E0, f.Q) for d, _, f, _ in fs if f is not None],
                meta={"figure": "fig2d", "solver": "bor-fdtd"})
        summary["q_fdtd"] = [None if f is None else f.Q for _, _, f, _ in fs]
        plot += ", 'fig2d_fdtd.csv' u 1:3 w p pt 5"
    out.text("fig2d.gp", _gp("fig2d", plot + "\n"))
    return summary


def read_q_table(path):
    """``diameter_um,Q`` CSV (e.g. measured quality factors)."""
    import csv
    from .exceptions import ParseError
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != ["diameter_um", "Q"]:
        raise ParseError(f"{path}: expected header diameter_um,Q")
    try:
        return [(float(a), float(b)) for a, b in rows[1:] if a.strip()]
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None


def fig3d(out, cfg, opts):
    """Expected Purcell factor against diameter from Q(d) and the mode volume."""
    from .ctp import mode_volume, purcell_factor
    st = _planar(cfg)
    if opts.get("q_table"):
        qd = read_q_table(opts["q_table"])
        source = "q-table"
    else:
        diameters = tuple(opts.get("diameters") or DEFAULT_DIAMETERS)
        _, _, sampled, _ = _hardwall_rows(cfg, diameters)
        qd = [(d, min((r for r in sampled if r[0] == d), key=lambda r: r[3])[4])
              for d in diameters]
        source = "hard-wall chain"
    rec = find_resonance(st)
    prof = field_profile(st, PlaneWaveQuery(rec.E0), dz=0.5)
    n = float(np.real(default_materials(cfg)["GaAs"].n))
    lam = HC_EV_NM / rec.E0
    rows = []
    for d, q in qd:
        v, v_cubic = mode_volume(prof, d, index_at_antinode=n)
        rows.append((d, q, v, v_cubic, purcell_factor(q, v, lam, n)))
    out.csv("fig3d_purcell.csv", ("diameter_um", "Q", "V_eff_um3", "V_eff_lambda_n3", "F_p"),
            rows, meta={"figure": "fig3d", "q_source": source})
    out.text("fig3d.gp", _gp("fig3d", "set xlabel 'Diameter (um)'\nset ylabel 'F_p'\n"
                             "plot 'fig3d_purcell.csv' u 1:5 w l\n"))
    return {"q_source": source, "F_p": [r[4] for r in rows]}


BUILDERS = {"fig1b": fig1b, "fig1c": fig1c, "fig1d": fig1d, "fig2a": fig2a,
            "fig2c": fig2c, "fig2d": fig2d, "fig3d": fig3d}


def build(figure, out, cfg, opts=None):
    if figure not in BUILDERS:
        raise DomainError(f"unknown figure {figure!r}; choose from {', '.join(FIGURES)}")
    return BUILDERS[figure](out, cfg, dict(opts or {}))
