"""Default Tamm-disk scenes and the diameter batch."""

import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..config import DEFAULTS
from ..ctp import DiskGeometry, confined_modes
from ..exceptions import DomainError
from ..materials import Drude
from ..stack import default_tamm_stack
from ..tmm.resonance import calibrate_gold, dispersion, find_resonance
from .analysis import extract_resonances, field_map, lateral_fraction
from .model import Scene, SourceSpec, grid_for_scene
from .solver import Simulation

MODE_TABLE_HEADER = ("diameter_um", "mode", "energy_ev", "Q", "hardwall_ev", "rel_dev")


def fdtd_gold(cfg=None):
    """Drude gold with the damping tuned to the configured planar Q."""
    cfg = cfg or DEFAULTS
    g, t = cfg["gold"], cfg["tamm"]
    seed = Drude(g["eps_b"], g["e_p_ev"], g["gamma_ev"], name="gold")
    model, _ = calibrate_gold(t["target_q"], t["target_energy_ev"], seed,
                              stack_factory=lambda mt: default_tamm_stack(metal=mt, cfg=cfg))
    return model


def fdtd_stack(cfg=None, gold=None):
    cfg = cfg or DEFAULTS
    gold = gold or fdtd_gold(cfg)
    return default_tamm_stack(metal=gold, cfg=cfg, pairs=cfg["fdtd"]["dbr_pairs"])


def hardwall_fundamental(stack, diameter):
    """Lowest hard-wall mode energy (eV) from the sampled dispersion of ``stack``."""
    k_need = 2 * 2.4048255577 / (diameter * 1000.0)
    ks = np.linspace(0.0, 1.2 * k_need, 13)
    return confined_modes(dispersion(stack, ks), diameter, l_max=0, p_max=1).fundamental.E0


def default_scene(diameter, cfg=None, stack=None, dft_span=0.006, n_dft=13):
    """Disk scene with an on-axis in-plane dipole at the emitter depth.

    ``diameter=None`` gives the planar structure. DFT monitors comb
    ``dft_span`` eV around the hard-wall (or planar) prediction.
    """
    cfg = cfg or DEFAULTS
    stack = stack or fdtd_stack(cfg)
    mt = stack.layers[stack.metadata["metal_layer"]].thickness
    depth = mt + cfg["tamm"]["emitter_depth_nm"]
    if diameter is None:
        disk, guess = None, find_resonance(stack).E0
    else:
        disk, guess = DiskGeometry(diameter, mt), hardwall_fundamental(stack, diameter)
    f = cfg["fdtd"]
    src = SourceSpec(0.0, depth, "in-plane", round(guess, 4), f["source_bandwidth_ev"])
    dft = tuple(np.round(guess + np.linspace(-dft_span, dft_span, n_dft), 5))
    radius = 0.0 if disk is None else diameter * 500.0
    probes = ((0.0, depth), (0.0, depth - 30.0), (0.5 * radius + 100.0, depth))
    lateral = radius + 1000.0 * f["lateral_margin_um"]
    return Scene(stack, disk, src, probes, dft, f["air_nm"], f["substrate_nm"], lateral,
                 metadata={"hardwall_ev": guess})


def fundamental(modes, guess, rel_amp=0.1):
    """Lowest mode whose envelope is at least ``rel_amp`` of the strongest one,
    searched from 1% below ``guess``."""
    cand = [m for m in modes if m.E0 >= guess * 0.99]
    if not cand:
        return None
    a = max(m.amplitude for m in cand)
    return min((m for m in cand if m.amplitude >= rel_amp * a), key=lambda m: m.E0)


def run_scene(scene, cfg=None, ringdown_fs=None, progress=None, grid=None):
    """Run ``scene`` and extract its resonances; returns ``(result, modes, fundamental)``."""
    cfg = cfg or DEFAULTS
    f = cfg["fdtd"]
    grid = grid or grid_for_scene(scene, cfg=cfg)
    sim = Simulation(scene, grid)
    res = sim.run(ringdown_fs=f["ringdown_fs"] if ringdown_fs is None else ringdown_fs,
                  progress=progress)
    guess = scene.metadata.get("hardwall_ev", scene.source.energy)
    band = (guess - 0.03, guess + 0.06)
    modes = []
    start = res.source_off_fs + 50.0
    for j in range(res.probes.shape[0]):
        modes.extend(extract_resonances(res.times_fs, res.probes[j], t_start_fs=start, band=band))
    # merge detections of one mode seen by several probes
    merged = []
    for m in sorted(modes, key=lambda m: -m.amplitude):
        if all(abs(m.E0 - k.E0) > 2e-3 for k in merged):
            merged.append(m)
    merged.sort(key=lambda m: m.E0)
    return res, merged, fundamental(merged, guess)


def _batch_point(args):
    d, cfg, stack, ringdown = args
    scene = default_scene(d, cfg, stack)
    res, modes, fund = run_scene(scene, cfg, ringdown)
    frac = None
    if fund is not None and d is not None:
        frac = lateral_fraction(field_map(res, fund.E0), d * 500.0)
    return d, scene.metadata["hardwall_ev"], modes, fund, frac


def fdtd_mode_table(diameters, cfg=None, jobs=1, ringdown_fs=None, progress=None):
    """Run one scene per diameter; rows follow :data:`MODE_TABLE_HEADER`.

    Returns ``(rows, summary)`` with summary entries
    ``(diameter, hardwall_ev, fundamental ModeRecord | None, lateral_fraction)``
    in input order regardless of completion order.
    """
    cfg = cfg or DEFAULTS
    diameters = [float(d) for d in diameters]
    if not diameters or any(d <= 0 for d in diameters):
        raise DomainError("diameters must be positive")
    stack = fdtd_stack(cfg)
    work = [(d, cfg, stack, ringdown_fs) for d in diameters]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(_batch_point, work))
    else:
        out = []
        for n, w in enumerate(work):
            out.append(_batch_point(w))
            if progress is not None:
                progress(n + 1, len(work))
    rows, summary = [], []
    for d, hw, modes, fund, frac in out:
        for n, m in enumerate(modes):
            tag = "fundamental" if m is fund else f"mode{n}"
            rows.append((d, tag, m.E0, m.Q, hw, (m.E0 - hw) / hw))
        summary.append((d, hw, fund, frac))
    return rows, summary


def strictly_decreasing(values):
    return all(b < a for a, b in zip(values, values[1:])) and not any(
        v is None or math.isnan(v) for v in values)
