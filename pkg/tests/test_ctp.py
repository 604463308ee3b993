import math

import numpy as np
import pytest
from scipy import special

from tammkit.ctp import (DiskGeometry, EmitterMetrics, acceleration_factor, bessel_zero,
                         beta_fraction, confined_modes, inhibition_factor, lateral_area,
                         main_lobe_width, mode_table, mode_volume, pillar_profile,
                         purcell_factor, quantum_efficiency_bound, radiation_pattern,
                         transform_power_ratio, vertical_length)
from tammkit.exceptions import DomainError, EmptyDispersionError
from tammkit.records import ModeRecord
from tammkit.stack import default_tamm_stack
from tammkit.tmm.engine import PlaneWaveQuery, field_profile
from tammkit.units import HC_EV_NM


@pytest.mark.parametrize("l,p,x", [(0, 1, 2.404825557695773), (1, 1, 3.831705970207512),
                                   (0, 2, 5.520078110286311)])
def test_bessel_zeros(l, p, x):
    assert bessel_zero(l, p) == pytest.approx(x, abs=1e-13)


def test_bessel_zero_range():
    with pytest.raises(DomainError):
        bessel_zero(11, 1)
    with pytest.raises(DomainError):
        bessel_zero(0, 0)


def test_geometry_validation():
    with pytest.raises(DomainError):
        DiskGeometry(0.0)
    with pytest.raises(DomainError):
        DiskGeometry(2.0, 50.0, surround=60.0)


def test_parabolic_hardwall_energies_and_ordering():
    e0, c, d = 1.36, 1250.0, 2.5
    ms = confined_modes((e0, c), d, l_max=2, p_max=2, q=900.0)
    fund = ms.fundamental
    assert fund.labels == (0, 1)
    assert fund.E0 == pytest.approx(e0 + c * (2 * 2.404825557695773 / 2500.0) ** 2, rel=1e-14)
    assert fund.Q == pytest.approx(900.0)
    energies = [m.E0 for m in ms.modes]
    assert energies == sorted(energies)
    assert [m.labels for m in ms.modes[:3]] == [(0, 1), (1, 1), (2, 1)]


def test_sampled_dispersion_and_extrapolation_flag():
    ks = np.linspace(0, 0.002, 5)
    disp = [(k, ModeRecord(1.36 + 1000 * k * k, 0.0012)) for k in ks]
    inside = confined_modes(disp, 4.0, l_max=0, p_max=1)
    assert not inside.metadata["extrapolated"]
    # chord interpolation overshoots a convex parabola by at most C h^2 / 4
    exact = 1.36 + 1000 * (2 * 2.404825557695773 / 4000) ** 2
    assert exact <= inside.fundamental.E0 <= exact + 1000 * 0.0005 ** 2 / 4
    outside = confined_modes(disp, 1.0, l_max=0, p_max=1)
    assert outside.metadata["extrapolated"]
    assert outside.fundamental.E0 == pytest.approx(1.36 + 1000 * (2 * 2.404825557695773 / 1000) ** 2,
                                                   rel=1e-9)
    with pytest.raises(EmptyDispersionError):
        confined_modes([(0.0, None)], 2.0)


def test_smaller_disk_blue_shifts():
    e = [confined_modes((1.36, 1250.0), d, l_max=0, p_max=1).fundamental.E0 for d in (1.5, 2, 3, 4)]
    assert all(b < a for a, b in zip(e, e[1:]))


def test_lateral_area_closed_form():
    # int_0^R J0^2(alpha r/R) r dr = R^2 J1(alpha)^2 / 2
    a = 2.404825557695773
    assert lateral_area(0, 1, 2.0) == pytest.approx(math.pi * special.j1(a) ** 2, rel=1e-10)
    assert lateral_area(0, 1, 4.0) == pytest.approx(4 * lateral_area(0, 1, 2.0), rel=1e-10)
    assert lateral_area(1, 1, 2.0) > 0


def test_vertical_length_matches_quadrature():
    st = default_tamm_stack()
    prof = field_profile(st, PlaneWaveQuery(1.3607), dz=0.05)
    eps = prof.eps.real
    inside = (prof.layer >= 0) & (eps > 0)
    w = np.where(inside, eps * prof.intensity, 0.0)
    expect = np.trapezoid(w, prof.z) / w.max()
    assert vertical_length(prof) == pytest.approx(expect, rel=2e-3)


def test_vertical_length_rejects_unnormalised_or_tm():
    st = default_tamm_stack()
    prof = field_profile(st, PlaneWaveQuery(1.3607, kx=0.001, polarization="TM"), dz=1.0)
    with pytest.raises(DomainError):
        vertical_length(prof)


def test_mode_volume_scales_with_area():
    prof = field_profile(default_tamm_stack(), PlaneWaveQuery(1.3607), dz=0.5)
    v2, _ = mode_volume(prof, 2.0)
    v4, vn = mode_volume(prof, 4.0)
    assert v4 == pytest.approx(4 * v2, rel=1e-10) and vn > 0


def test_purcell_formula():
    lam, n = 911.0, 3.54
    V = (lam * 1e-3 / n) ** 3
    assert purcell_factor(1000.0, V, lam, n) == pytest.approx(3000.0 / (4 * math.pi ** 2))
    with pytest.raises(DomainError):
        purcell_factor(0.0, V, lam, n)


def test_emitter_metrics():
    assert beta_fraction(3.0, 1.0) == pytest.approx(0.75)
    r, e = inhibition_factor(52.0, 1.3, 4.0, 0.1)
    assert r == pytest.approx(40.0)
    assert e == pytest.approx(40.0 * math.hypot(4 / 52, 0.1 / 1.3))
    a, ea = acceleration_factor(0.4, 1.3)
    assert a == pytest.approx(3.25) and ea == 0
    assert quantum_efficiency_bound(52.0, 1.3) == pytest.approx(52 / 53.3)
    assert quantum_efficiency_bound(math.inf, 1.3) == 1.0
    m = EmitterMetrics(F_p=3.0, gamma=0.025)
    assert m.inhibition == pytest.approx(40.0) and m.beta == pytest.approx(3 / 3.025)
    with pytest.raises(DomainError):
        inhibition_factor(-1.0, 1.3)


@pytest.mark.parametrize("l,p", [(0, 1), (1, 1), (0, 2)])
def test_hankel_parseval(l, p):
    assert transform_power_ratio(l, p, 2500.0) == pytest.approx(1.0, abs=1e-3)


def test_radiation_pattern():
    pat = radiation_pattern(0, 1, 2.5, 1.36)
    assert pat.intensity.max() == pytest.approx(1.0)
    assert pat.intensity[0] == pytest.approx(1.0)
    clipped = radiation_pattern(0, 1, 2.5, 1.36, na_clip=0.5)
    assert not clipped.mask[-1] and np.all(clipped.intensity[~clipped.mask] == 0)
    widths = [main_lobe_width(radiation_pattern(0, 1, d, 1.36)) for d in (1.5, 2.5, 4.0)]
    assert all(b < a for a, b in zip(widths, widths[1:]))
    with pytest.raises(DomainError):
        radiation_pattern(0, 1, 2.5, 1.36, na_clip=0.0)


def test_pillar_profile_resonant():
    prof, st = pillar_profile(1.36)
    assert prof.query.E == pytest.approx(1.36, abs=2e-3)
    assert vertical_length(prof) > 0


def test_mode_table_rows():
    prof = field_profile(default_tamm_stack(), PlaneWaveQuery(1.3607), dz=0.5)
    rows = mode_table([2.0, 3.0], (1.36, 1250.0), prof, q=1000.0, l_max=1, p_max=1)
    assert len(rows) == 4
    d, l, p, e, q, v, fp = rows[0]
    assert (d, l, p) == (2.0, 0, 1) and q == 1000.0
    assert fp == pytest.approx(purcell_factor(q, v, HC_EV_NM / e, 3.54), rel=1e-12)
