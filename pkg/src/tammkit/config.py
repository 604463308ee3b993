"""Built-in defaults. Everything here is overridable from a config file or CLI flag."""

import copy
import json
import os
from pathlib import Path

DEFAULTS = {
    "dbr": {
        "design_energy_ev": 1.42,
        "pairs": 40,
        "n_high": 3.54,   # GaAs
        "n_low": 3.05,    # Al0.95Ga0.05As
    },
    "gold": {
        # real part pinned to n = 0.03 + 5.72i at 1.359 eV; gamma is then
        # recalibrated against the measured planar Q
        "eps_b": 9.5,
        "e_p_ev": 8.8302,
        "gamma_ev": 0.0109,
        "thickness_nm": 50.0,
        "constant_n": 0.03,
        "constant_k": 5.72,
    },
    "tamm": {
        "target_energy_ev": 1.359,
        "target_q": 1200.0,
        "emitter_depth_nm": 40.0,
    },
    "tmm": {
        "polarization": "TE",
        "kx_inv_nm": 0.0,
        "dip_threshold": 0.98,
        "coarse_step_ev": 2e-4,
        "e0_tol_ev": 2e-5,
    },
    "pillar": {
        "top_pairs": 20,
        "bottom_pairs": 30,
    },
    "fdtd": {
        "dr_nm": 10.0,
        "dz_nm": 5.0,
        "courant": 0.95,
        "pml_cells": 12,
        "pml_order": 3,
        "pml_kappa_max": 5.0,
        "pml_alpha_max": 0.05,
        "pml_reflection": 1e-8,
        "dbr_pairs": 30,
        "air_nm": 300.0,
        "substrate_nm": 200.0,
        "lateral_margin_um": 1.0,
        "m": 1,
        "source_bandwidth_ev": 0.08,
        "ringdown_fs": 2000.0,
    },
    "decay": {
        "irf_fwhm_ns": 0.3,
        "tau_ref_ns": 1.3,
        "tau_ref_err_ns": 0.2,
    },
}


def defaults():
    return copy.deepcopy(DEFAULTS)


def merge(base, override):
    """Recursive dict merge; ``override`` wins."""
    out = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = value
    return out


def load(path=None, overrides=None):
    cfg = defaults()
    if path is not None:
        cfg = merge(cfg, json.loads(Path(path).read_text()))
    return merge(cfg, overrides)


DATA_DIR_ENV = "TAMMKIT_DATA_DIR"


def resolve_data_path(path):
    """Relative material-table paths fall back to ``$TAMMKIT_DATA_DIR``."""
    p = Path(path)
    if p.is_absolute() or p.exists():
        return p
    base = os.environ.get(DATA_DIR_ENV)
    if base and (Path(base) / p).exists():
        return Path(base) / p
    return p
