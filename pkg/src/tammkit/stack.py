"""Multilayer geometry: quarter-wave DBRs and Tamm structures.

Layers are listed from the incidence (ambient) side towards the substrate.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULTS
from .exceptions import DomainError, InvalidMaterialError, ParseError, StructuralError
from .materials import (ConstantIndex, Drude, Tabulated, material_from_dict,
                        material_to_dict)
from .units import HC_EV_NM


@dataclass(frozen=True)
class Layer:
    thickness: float
    material: object

    def __post_init__(self):
        if not (math.isfinite(self.thickness) and self.thickness > 0):
            raise StructuralError(f"layer thickness must be positive, got {self.thickness}")


@dataclass(frozen=True)
class Stack:
    ambient: object
    layers: tuple
    substrate: object
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        for side, m in (("ambient", self.ambient), ("substrate", self.substrate)):
            if isinstance(m, Tabulated):
                raise StructuralError(f"{side} must be ConstantIndex or Drude, not tabulated")

    @property
    def thicknesses(self):
        return np.array([layer.thickness for layer in self.layers])

    @property
    def total_thickness(self):
        return float(math.fsum(layer.thickness for layer in self.layers))

    @property
    def interfaces(self):
        """Depth of every interface below the top of the first layer."""
        return np.concatenate([[0.0], np.cumsum(self.thicknesses)])

    def optical_path(self, energy_ev):
        return float(sum(layer.thickness * np.real(layer.material.refractive_index(energy_ev))
                         for layer in self.layers))

    # ---- JSON ---------------------------------------------------------
    def to_dict(self):
        materials = {}

        def ref(m):
            prev = materials.get(m.name)
            if prev is not None and prev is not m and prev != m:
                raise StructuralError(f"two different materials share the name {m.name!r}")
            materials[m.name] = m
            return m.name

        doc = {
            "ambient": ref(self.ambient),
            "layers": [{"thickness_nm": layer.thickness, "material": ref(layer.material)}
                       for layer in self.layers],
            "substrate": ref(self.substrate),
        }
        doc["materials"] = {k: material_to_dict(v) for k, v in materials.items()}
        if self.metadata:
            doc["metadata"] = {k: list(v) if isinstance(v, tuple) else v
                               for k, v in self.metadata.items()}
        return doc

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, doc):
        try:
            mats = {name: material_from_dict(d, name) for name, d in doc["materials"].items()}

            def resolve(name):
                if name not in mats:
                    raise ParseError(f"unresolved material reference {name!r}")
                return mats[name]

            layers = [Layer(float(entry["thickness_nm"]), resolve(entry["material"]))
                      for entry in doc["layers"]]
            meta = dict(doc.get("metadata") or {})
            if "metal_layer" not in meta:
                metal = [i for i, la in enumerate(layers) if getattr(la.material, "is_metal", False)]
                meta["metal_layer"] = metal[0] if metal else None
                meta["metal_thickness_nm"] = layers[metal[0]].thickness if metal else 0.0
            if "stopband_ev" in meta:
                meta["stopband_ev"] = tuple(meta["stopband_ev"])
            return cls(resolve(doc["ambient"]), tuple(layers), resolve(doc["substrate"]), meta)
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed stack document: {exc!r}") from exc

    @classmethod
    def from_json(cls, text):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(str(exc)) from exc
        return cls.from_dict(doc)


@dataclass(frozen=True)
class DBRFragment:
    layers: tuple
    design_energy: float
    high: object
    low: object
    pairs: int
    order: str


@dataclass(frozen=True)
class EmitterPlan:
    depth_below_top_interface: float
    dipole_orientation: str = "in-plane"

    def validate(self, stack):
        if not 0 < self.depth_below_top_interface < stack.total_thickness:
            raise StructuralError("emitter depth must lie inside the stack")
        if self.dipole_orientation not in ("in-plane", "axial"):
            raise DomainError(f"unknown dipole orientation {self.dipole_orientation!r}")


def _real_index(material, energy):
    n = complex(material.refractive_index(energy))
    if n.real <= 1 or n.imag > 0.1 * n.real or getattr(material, "is_metal", False):
        raise InvalidMaterialError(
            f"material {material.name!r} (n={n:.3g}) is not a usable DBR dielectric")
    return n.real


def quarter_wave_dbr(design_energy, high, low, pairs, order="high-first"):
    if int(pairs) != pairs or pairs < 1:
        raise DomainError(f"pairs must be a positive integer, got {pairs!r}")
    if design_energy <= 0:
        raise DomainError("design energy must be positive")
    if order not in ("high-first", "low-first"):
        raise DomainError(f"unknown order {order!r}")
    lam = HC_EV_NM / design_energy
    n_h, n_l = _real_index(high, design_energy), _real_index(low, design_energy)
    lh = Layer(lam / (4 * n_h), high)
    ll = Layer(lam / (4 * n_l), low)
    pair = (lh, ll) if order == "high-first" else (ll, lh)
    return DBRFragment(pair * int(pairs), float(design_energy), high, low, int(pairs), order)


def tamm_stack(dbr, top_spacer=(), metal=None, metal_thickness=0.0, ambient=None,
               substrate=None):
    """Assemble ambient / metal film / spacers / DBR / substrate.

    ``metal_thickness == 0`` gives the bare-DBR reference structure.
    """
    if metal_thickness < 0:
        raise DomainError("metal thickness must be >= 0")
    ambient = ambient or ConstantIndex(1.0, name="vacuum")
    substrate = substrate or dbr.high
    layers = []
    if metal_thickness > 0:
        if metal is None:
            raise DomainError("metal_thickness > 0 needs a metal model")
        layers.append(Layer(float(metal_thickness), metal))
    layers.extend(top_spacer)
    layers.extend(dbr.layers)
    dbr_layers = dbr.layers
    stack = Stack(ambient, tuple(layers), substrate)
    dielectric = [layer for layer in layers if not getattr(layer.material, "is_metal", False)]
    meta = {
        "metal_thickness_nm": float(metal_thickness),
        "metal_layer": 0 if metal_thickness > 0 else None,
        "dbr_start_index": len(layers) - len(dbr_layers),
        "dbr_period_nm": dbr_layers[0].thickness + dbr_layers[1].thickness,
        "design_energy_ev": dbr.design_energy,
        "optical_path_nm": float(sum(
            layer.thickness * np.real(layer.material.refractive_index(dbr.design_energy))
            for layer in dielectric)),
        "stopband_ev": stopband_edges(dbr),
    }
    stack.metadata.update(meta)
    return stack


def stopband_edges(dbr):
    """Closed-form normal-incidence stopband edges of a quarter-wave DBR."""
    n_h = float(np.real(dbr.high.refractive_index(dbr.design_energy)))
    n_l = float(np.real(dbr.low.refractive_index(dbr.design_energy)))
    half = (2 / math.pi) * math.asin(abs(n_h - n_l) / (n_h + n_l)) * dbr.design_energy
    return (dbr.design_energy - half, dbr.design_energy + half)


# ------------------------------------------------------------ default builders

def default_materials(cfg=None):
    cfg = cfg or DEFAULTS
    d, g = cfg["dbr"], cfg["gold"]
    gaas = ConstantIndex(d["n_high"], name="GaAs")
    algaas = ConstantIndex(d["n_low"], name="AlGaAs")
    gold_const = ConstantIndex(complex(g["constant_n"], g["constant_k"]), name="gold")
    gold_drude = Drude(g["eps_b"], g["e_p_ev"], g["gamma_ev"], name="gold")
    return {"GaAs": gaas, "AlGaAs": algaas, "gold": gold_const, "gold_drude": gold_drude,
            "vacuum": ConstantIndex(1.0, name="vacuum")}


def default_dbr(cfg=None, pairs=None):
    cfg = cfg or DEFAULTS
    m = default_materials(cfg)
    d = cfg["dbr"]
    return quarter_wave_dbr(d["design_energy_ev"], m["GaAs"], m["AlGaAs"],
                            pairs or d["pairs"], "high-first")


def default_tamm_stack(metal_thickness=None, metal=None, cfg=None, pairs=None):
    """Default structure: vacuum / gold / 40-pair GaAs-AlGaAs DBR / GaAs."""
    cfg = cfg or DEFAULTS
    m = default_materials(cfg)
    t = cfg["gold"]["thickness_nm"] if metal_thickness is None else metal_thickness
    dbr = default_dbr(cfg, pairs)
    return tamm_stack(dbr, (), metal or m["gold"], t, m["vacuum"], m["GaAs"])
