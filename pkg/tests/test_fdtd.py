import math

import numpy as np
import pytest

from tammkit.ctp import DiskGeometry
from tammkit.exceptions import DomainError, InvalidMaterialError, ParseError, StructuralError
from tammkit.fdtd import (FieldMap, GridSpec, Scene, Simulation, SourceSpec, extract_resonances,
                          grid_for_scene, lateral_fraction, rasterize)
from tammkit.fdtd.analysis import read_field_map, read_probe_csv, write_field_map, write_probe_csv
from tammkit.fdtd.model import bor_courant_limit, courant_limit
from tammkit.fdtd.solver import measure_pml_reflection
from tammkit.materials import ConstantIndex, Drude
from tammkit.stack import Layer, Stack, default_tamm_stack
from tammkit.units import HBAR_EV_FS

VAC = ConstantIndex(1.0, name="vacuum")
FIELDS = ("er", "ep", "ez", "hr", "hp", "hz")


def vacuum_scene(amplitude=1.0, orientation="in-plane"):
    st = Stack(VAC, (Layer(400.0, VAC),), VAC, {"metal_layer": None})
    src = SourceSpec(z=200.0, energy=1.4, bandwidth=0.2, amplitude=amplitude,
                     orientation=orientation)
    return Scene(st, None, src, probes=((0.0, 150.0),), air=100, substrate=100,
                 lateral_extent=500)


def small_tamm_scene(disk=None, metal_nm=0.0, orientation="in-plane"):
    gold = Drude(9.5, 8.83, 0.01, name="gold")
    st = default_tamm_stack(metal_nm, metal=gold, pairs=3)
    src = SourceSpec(z=metal_nm + 40.0, energy=1.4, bandwidth=0.2, orientation=orientation)
    return Scene(st, disk, src, probes=((0.0, metal_nm + 40.0),), air=100, substrate=100,
                 lateral_extent=600)


def test_courant_limits_and_rejection():
    assert courant_limit(10, 5) == pytest.approx(1 / math.sqrt(0.01 + 0.04))
    assert bor_courant_limit(10, 5, 1) < courant_limit(10, 5)
    g = GridSpec(10, 5, 60, 60)
    assert g.dt == pytest.approx(0.95 * bor_courant_limit(10, 5, 1))
    with pytest.raises(DomainError):
        GridSpec(10, 5, 60, 60, dt=courant_limit(10, 5) * 1.01, courant=1.0)
    with pytest.raises(DomainError):
        GridSpec(10, 5, 60, 60, dt=0.99 * courant_limit(10, 5), m=2, courant=1.0)
    with pytest.raises(DomainError):
        GridSpec(10, 5, 20, 60)


def test_source_and_scene_validation():
    with pytest.raises(DomainError):
        SourceSpec(orientation="tilted")
    with pytest.raises(StructuralError):
        Scene(default_tamm_stack(), DiskGeometry(4.0), SourceSpec(), lateral_extent=1000)
    with pytest.raises(ParseError):
        Scene.from_json("{not json")
    with pytest.raises(ParseError):
        Scene.from_dict({"source": {}})


def test_scene_round_trip():
    sc = small_tamm_scene(DiskGeometry(1.0, 50.0), metal_nm=50.0)
    back = Scene.from_dict(sc.to_dict())
    assert back.disk == sc.disk and back.source == sc.source and back.probes == sc.probes
    assert back.stack.total_thickness == pytest.approx(sc.stack.total_thickness)


def test_rasterize_vacuum_is_uniform():
    sc = vacuum_scene()
    g = grid_for_scene(sc)
    ras = rasterize(sc, g)
    for c in ("er", "ep", "ez"):
        assert np.allclose(ras.coef[c], g.dt)
        assert ras.drude[c].ii.size == 0


def test_rasterize_metal_cells_and_disk():
    sc = small_tamm_scene(metal_nm=50.0)
    g = grid_for_scene(sc)
    ras = rasterize(sc, g)
    metal_id = next(i for i, m in enumerate(ras.media) if m[2])
    col = ras.medium["ep"][5]
    assert np.count_nonzero(col == metal_id) == math.ceil(50 / g.dz)
    disk = sc.with_disk(0.4)
    ras_d = rasterize(disk, grid_for_scene(disk))
    i_in, i_out = 5, int(300 / g.dr)
    assert np.any(ras_d.medium["ep"][i_in] == metal_id)
    assert not np.any(ras_d.medium["ep"][i_out] == metal_id)


def test_rasterize_rejects_lossy_constant_index():
    st = Stack(VAC, (Layer(100, ConstantIndex(0.2 + 5j)),), VAC, {"metal_layer": None})
    sc = Scene(st, None, SourceSpec(z=-50.0), probes=((0, -50.0),), air=100, substrate=100,
               lateral_extent=500)
    with pytest.raises(InvalidMaterialError):
        rasterize(sc, grid_for_scene(sc))


def test_zero_source_gives_exact_null_evolution():
    sc = vacuum_scene(amplitude=0.0)
    sim = Simulation(sc, grid_for_scene(sc))
    for _ in range(400):
        sim.step()
    assert all(not np.any(getattr(sim, f)) for f in FIELDS)


@pytest.mark.parametrize("m", [0, 1, 2])
def test_closed_lossless_cavity_conserves_energy(m):
    sc = small_tamm_scene(orientation="in-plane" if m else "axial")
    g = grid_for_scene(sc, m=m)
    sim = Simulation(sc, g, pml_sides=())
    for _ in range(int(sc.source.turn_off_fs / g.dt_fs) + 2):
        sim.step()
    energies = []
    for _ in range(4):
        for _ in range(499):
            sim.step()
        prev = (sim.er.copy(), sim.ep.copy(), sim.ez.copy())
        sim.step()
        energies.append(sim.energy(prev))
    energies = np.array(energies)
    assert energies[0] > 0
    assert np.max(np.abs(energies / energies[0] - 1)) < 1e-10


def test_axial_dipole_m0_leaves_ephi_zero():
    sc = small_tamm_scene(orientation="axial")
    sim = Simulation(sc, grid_for_scene(sc, m=0))
    for _ in range(600):
        sim.step()
    assert np.abs(sim.ez).max() > 0
    assert not np.any(sim.ep) and not np.any(sim.hr) and not np.any(sim.hz)


def test_axial_dipole_requires_m0():
    with pytest.raises(DomainError):
        Simulation(small_tamm_scene(orientation="axial"), grid_for_scene(small_tamm_scene(), m=1))


def test_probe_inside_metal_is_rejected():
    sc = small_tamm_scene(metal_nm=50.0)
    bad = Scene(sc.stack, None, sc.source, probes=((0.0, 25.0),), air=100, substrate=100,
                lateral_extent=600)
    with pytest.raises(StructuralError):
        Simulation(bad, grid_for_scene(bad))


def test_drude_metal_run_stays_finite_and_decays():
    sc = small_tamm_scene(metal_nm=50.0)
    sim = Simulation(sc, grid_for_scene(sc))
    res = sim.run(ringdown_fs=60.0)
    assert np.all(np.isfinite(res.probes)) and np.abs(res.probes).max() > 0


def damped(t, e, q, amp=1.0, phase=0.3):
    g = e / (2 * HBAR_EV_FS * q)
    return amp * np.exp(-g * t) * np.cos(e / HBAR_EV_FS * t + phase)


def test_extract_single_damped_sinusoid():
    t = np.arange(0, 3000, 0.5)
    modes = extract_resonances(t, damped(t, 1.36, 500.0), band=(1.2, 1.5))
    assert len(modes) == 1
    assert modes[0].E0 == pytest.approx(1.36, rel=1e-5)
    assert modes[0].Q == pytest.approx(500.0, rel=0.05)


def test_extract_two_modes_with_noise():
    rng = np.random.default_rng(0)
    t = np.arange(0, 4000, 0.5)
    x = damped(t, 1.36, 800.0) + 0.5 * damped(t, 1.39, 300.0, phase=1.0)
    x += 1e-3 * rng.standard_normal(t.size)
    modes = extract_resonances(t, x, band=(1.3, 1.45))
    assert [round(m.E0, 3) for m in modes] == [1.36, 1.39]
    assert modes[0].Q == pytest.approx(800.0, rel=0.05)
    assert modes[1].Q == pytest.approx(300.0, rel=0.05)


def test_extract_noise_only_and_errors():
    t = np.arange(0, 3000, 0.5)
    noise = np.random.default_rng(1).standard_normal(t.size)
    assert extract_resonances(t, noise, band=(1.2, 1.5)) == []
    assert extract_resonances(t, np.zeros_like(t)) == []
    with pytest.raises(DomainError):
        extract_resonances(t[:10], noise[:10])
    with pytest.raises(DomainError):
        extract_resonances(t[:100], noise[:100], band=(1.2, 1.5))


def test_lateral_fraction_and_io(tmp_path):
    r = np.arange(0, 1000, 10.0) + 5
    z = np.arange(0, 100, 5.0)
    v = np.outer(np.where(r < 500, 1.0, 0.0), np.ones(z.size))
    fmap = FieldMap("abs_er", r, z, v, 1.36)
    assert lateral_fraction(fmap, 500.0) == pytest.approx(1.0)
    half = FieldMap("abs_er", r, z, np.ones_like(v), 1.36)
    expect = np.sum(r[r < 500]) / np.sum(r)
    assert lateral_fraction(half, 500.0) == pytest.approx(expect)
    write_field_map(half, tmp_path / "m")
    back = read_field_map(tmp_path / "m")
    assert np.array_equal(back.values, half.values) and back.energy == 1.36
    write_probe_csv(tmp_path / "p.csv", r, np.sin(r))
    t, x = read_probe_csv(tmp_path / "p.csv")
    assert np.allclose(t, r) and np.allclose(x, np.sin(r), atol=1e-8)
    with pytest.raises(DomainError):
        FieldMap("abs_er", r, z, v[:, :3], 1.36)


@pytest.mark.slow
def test_pml_reflection_below_minus_60_db():
    db, _, _ = measure_pml_reflection()
    assert db < -60.0
