import math

import numpy as np
import pytest

from tammkit.exceptions import DomainError, InvalidMaterialError, ParseError, StructuralError
from tammkit.materials import ConstantIndex, Drude, Tabulated
from tammkit.stack import (EmitterPlan, Layer, Stack, default_dbr, default_tamm_stack,
                           quarter_wave_dbr, stopband_edges, tamm_stack)
from tammkit.units import HC_EV_NM

GAAS, ALAS = ConstantIndex(3.54, "GaAs"), ConstantIndex(3.05, "AlGaAs")


def test_quarter_wave_thicknesses():
    dbr = quarter_wave_dbr(1.42, GAAS, ALAS, 3)
    lam = HC_EV_NM / 1.42
    assert len(dbr.layers) == 6
    assert dbr.layers[0].thickness == pytest.approx(lam / (4 * 3.54), rel=1e-14)
    assert dbr.layers[1].thickness == pytest.approx(lam / (4 * 3.05), rel=1e-14)
    assert dbr.layers[0].material is GAAS


def test_low_first_order():
    dbr = quarter_wave_dbr(1.42, GAAS, ALAS, 2, order="low-first")
    assert [la.material.name for la in dbr.layers] == ["AlGaAs", "GaAs"] * 2


@pytest.mark.parametrize("pairs", [0, -1, 2.5])
def test_bad_pair_count(pairs):
    with pytest.raises(DomainError):
        quarter_wave_dbr(1.42, GAAS, ALAS, pairs)


def test_metal_is_not_a_dbr_dielectric():
    with pytest.raises(InvalidMaterialError):
        quarter_wave_dbr(1.42, Drude(9.5, 8.8, 0.01), ALAS, 3)


def test_stopband_closed_form_is_centred_on_design():
    lo, hi = stopband_edges(default_dbr())
    half = (2 / math.pi) * math.asin(0.49 / 6.59) * 1.42
    assert (lo, hi) == pytest.approx((1.42 - half, 1.42 + half), rel=1e-14)


def test_tamm_stack_metadata():
    st = default_tamm_stack()
    assert st.metadata["metal_layer"] == 0
    assert st.metadata["metal_thickness_nm"] == 50.0
    assert len(st.layers) == 81
    assert st.layers[0].thickness == 50.0 and st.layers[1].material.name == "GaAs"


def test_bare_dbr_has_no_metal_layer():
    st = tamm_stack(default_dbr(), metal_thickness=0.0)
    assert st.metadata["metal_layer"] is None and len(st.layers) == 80


def test_negative_metal_thickness():
    with pytest.raises(DomainError):
        tamm_stack(default_dbr(), metal=ConstantIndex(0.03 + 5.72j), metal_thickness=-1)


@pytest.mark.parametrize("t", [0.0, -3.0, math.inf, math.nan])
def test_layer_thickness_must_be_positive(t):
    with pytest.raises(StructuralError):
        Layer(t, GAAS)


def test_tabulated_substrate_rejected():
    tab = Tabulated((1.0, 2.0), (3.5, 3.6))
    with pytest.raises(StructuralError):
        Stack(ConstantIndex(1.0), (Layer(10, GAAS),), tab)


def test_interfaces_and_total_thickness():
    st = Stack(ConstantIndex(1.0), (Layer(10, GAAS), Layer(20, ALAS)), GAAS)
    assert np.allclose(st.interfaces, [0, 10, 30]) and st.total_thickness == 30
    assert st.optical_path(1.4) == pytest.approx(10 * 3.54 + 20 * 3.05)


def test_json_round_trip_keeps_layers_and_metadata():
    st = default_tamm_stack()
    back = Stack.from_json(st.to_json())
    assert back.layers == st.layers and back.ambient == st.ambient
    assert back.metadata["stopband_ev"] == st.metadata["stopband_ev"]
    assert back.metadata["metal_layer"] == 0


def test_json_without_metadata_infers_metal_layer():
    st = default_tamm_stack()
    doc = st.to_dict()
    doc.pop("metadata")
    back = Stack.from_dict(doc)
    assert back.metadata["metal_layer"] == 0 and back.metadata["metal_thickness_nm"] == 50.0


def test_json_unresolved_material():
    doc = {"ambient": "air", "layers": [], "substrate": "x", "materials": {"air": {"kind": "constant", "n": 1}}}
    with pytest.raises(ParseError):
        Stack.from_dict(doc)


def test_json_malformed():
    with pytest.raises(ParseError):
        Stack.from_json("{not json")
    with pytest.raises(ParseError):
        Stack.from_dict({"layers": []})


def test_name_collision_detected():
    st = Stack(ConstantIndex(1.0, "m"), (Layer(10, ConstantIndex(2.0, "m")),), GAAS)
    with pytest.raises(StructuralError):
        st.to_dict()


def test_emitter_plan_validation():
    st = default_tamm_stack()
    EmitterPlan(90.0).validate(st)
    with pytest.raises(StructuralError):
        EmitterPlan(-1.0).validate(st)
    with pytest.raises(DomainError):
        EmitterPlan(90.0, "diagonal").validate(st)
