import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone

from tammkit.exceptions import DomainError, InsufficientDataError, ParseError, RangeError
from tammkit.materials import (ConstantIndex, Drude, DrudeRegressor, Tabulated, fit_drude,
                               material_from_dict, material_to_dict, principal_index,
                               read_material_csv, with_gamma, write_material_csv)
from tammkit.units import (HBARC_EV_NM, HC_EV_NM, energy_to_vacuum_wavelength, fwhm_to_sigma,
                           vacuum_wavenumber, wavelength_to_energy)


def test_wavelength_of_1eV_is_hc():
    assert energy_to_vacuum_wavelength(1.0) == pytest.approx(HC_EV_NM, rel=1e-15)
    assert energy_to_vacuum_wavelength(1.359) == pytest.approx(912.319, abs=1e-3)


def test_wavelength_energy_round_trip_vectorised():
    e = np.linspace(0.5, 3.0, 11)
    assert np.allclose(wavelength_to_energy(energy_to_vacuum_wavelength(e)), e, rtol=1e-14)


@pytest.mark.parametrize("bad", [0.0, -1.0, np.inf, np.nan])
def test_non_positive_energy_rejected(bad):
    with pytest.raises(DomainError):
        energy_to_vacuum_wavelength(bad)


def test_wavenumber_and_fwhm():
    assert vacuum_wavenumber(1.0) == pytest.approx(1 / HBARC_EV_NM)
    assert fwhm_to_sigma(2.3548200450309493) == pytest.approx(1.0, rel=1e-12)


def test_constant_index_permittivity_is_square():
    m = ConstantIndex(0.03 + 5.72j)
    assert m.permittivity(1.36) == pytest.approx((0.03 + 5.72j) ** 2)
    assert m.is_metal and not ConstantIndex(3.54).is_metal


def test_drude_closed_form():
    m = Drude(9.5, 8.83, 0.01)
    E = 1.36
    assert m.permittivity(E) == pytest.approx(9.5 - 8.83 ** 2 / (E * E + 0.01j * E), rel=1e-14)
    n = m.refractive_index(E)
    assert n.imag > 0 and n * n == pytest.approx(m.permittivity(E), rel=1e-12)


@pytest.mark.parametrize("args", [(0.5, 8.0, 0.1), (9.0, 0.0, 0.1), (9.0, 8.0, -0.1)])
def test_drude_rejects_unphysical_parameters(args):
    with pytest.raises(DomainError):
        Drude(*args)


@settings(max_examples=200, deadline=None)
@given(st.floats(-100, 100), st.floats(0, 100))
def test_principal_index_squares_back_with_non_negative_k(re, im):
    eps = complex(re, im)
    n = principal_index(eps)
    assert n.imag >= 0
    assert abs(n * n - eps) <= 1e-12 * max(1.0, abs(eps))


def test_tabulated_interpolates_and_range_checks():
    t = Tabulated((1.0, 2.0), (1 + 1j, 3 + 2j))
    assert t.refractive_index(1.5) == pytest.approx(2 + 1.5j)
    with pytest.raises(RangeError):
        t.refractive_index(2.5)
    with pytest.raises(DomainError):
        Tabulated((2.0, 1.0), (1, 1))


def test_material_csv_round_trip(tmp_path):
    t = Tabulated((1.2, 1.3, 1.4), (0.1 + 5j, 0.09 + 5.5j, 0.08 + 6j), name="au")
    p = tmp_path / "au.csv"
    write_material_csv(t, p)
    back = read_material_csv(p)
    assert back.energies == t.energies and np.allclose(back.indices, t.indices)


def test_material_csv_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("e,n\n1,2\n")
    with pytest.raises(ParseError):
        read_material_csv(p)


def test_material_csv_negative_k(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("energy_ev,n,k\n1,0.1,-3\n2,0.1,3\n")
    with pytest.raises(ParseError):
        read_material_csv(p)


def test_material_dict_round_trip():
    for m in (ConstantIndex(3.54, "GaAs"), Drude(9.5, 8.8, 0.01, "gold"),
              Tabulated((1.0, 2.0), (1 + 1j, 2 + 1j), "t")):
        assert material_from_dict(material_to_dict(m), m.name) == m


def test_material_dict_csv_kind_uses_data_dir(tmp_path, monkeypatch):
    t = Tabulated((1.0, 2.0, 3.0), (0.1 + 5j, 0.1 + 6j, 0.1 + 7j))
    write_material_csv(t, tmp_path / "gold.csv")
    monkeypatch.chdir(tmp_path.parent)
    monkeypatch.setenv("TAMMKIT_DATA_DIR", str(tmp_path))
    m = material_from_dict({"kind": "csv", "path": "gold.csv"}, "gold")
    assert np.allclose(m.indices, t.indices)


def _drude_table(m, energies):
    return [(e, complex(m.refractive_index(e))) for e in energies]


def test_drude_fit_round_trip_exact():
    truth = Drude(9.5, 8.8302, 0.0109)
    model, resid = fit_drude(_drude_table(truth, np.linspace(1.1, 1.7, 25)))
    for a, b in ((model.eps_b, truth.eps_b), (model.e_p, truth.e_p), (model.gamma, truth.gamma)):
        assert abs(a - b) <= 1e-6 * abs(b)
    assert resid < 1e-9


def test_drude_fit_real_part_only_keeps_initial_gamma():
    truth = Drude(9.0, 8.5, 0.05)
    model, _ = fit_drude(_drude_table(truth, np.linspace(1.1, 1.7, 25)), "real-part-only",
                         init=Drude(8.0, 8.0, 0.05))
    assert model.gamma == 0.05
    assert model.eps_b == pytest.approx(9.0, rel=1e-3)
    assert model.e_p == pytest.approx(8.5, rel=1e-4)


def test_drude_fit_needs_three_points():
    with pytest.raises(InsufficientDataError):
        fit_drude([(1.0, 1 + 5j), (1.1, 1 + 5j)])


def test_drude_regressor_follows_estimator_contract():
    truth = Drude(9.5, 8.83, 0.02)
    E = np.linspace(1.1, 1.7, 20)
    n = truth.refractive_index(E)
    est = DrudeRegressor()
    assert clone(est).get_params() == est.get_params()
    est.fit(E, n)
    assert est.model_.e_p == pytest.approx(8.83, rel=1e-8)
    assert np.allclose(est.predict(E), truth.permittivity(E), rtol=1e-9)
    assert est.score(E, n) == pytest.approx(1.0, abs=1e-12)


def test_with_gamma_replaces_only_damping():
    m = with_gamma(Drude(9.5, 8.8, 0.01, "g"), 0.02)
    assert (m.eps_b, m.e_p, m.gamma, m.name) == (9.5, 8.8, 0.02, "g")
