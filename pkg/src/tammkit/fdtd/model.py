"""Grid, source and scene descriptions for the BOR-FDTD solver.

Scene coordinates: ``r`` in nm from the symmetry axis, ``z`` in nm measured
downwards from the top surface of the first stack layer (the metal film), so
air has ``z < 0``.
"""

import json
import math
from dataclasses import asdict, dataclass, field, replace

from ..config import DEFAULTS
from ..ctp import DiskGeometry
from ..exceptions import DomainError, ParseError, StructuralError
from ..stack import Stack
from ..units import C_NM_PER_FS


def courant_limit(dr, dz):
    """Cartesian 2-D limit ``1/sqrt(1/dr^2 + 1/dz^2)`` (c = 1, nm)."""
    return 1.0 / math.sqrt(1.0 / dr ** 2 + 1.0 / dz ** 2)


def bor_courant_limit(dr, dz, m):
    """Stability limit including the ``m/r`` terms next to the axis."""
    return 1.0 / math.sqrt(((abs(m) + 1) / dr) ** 2 + 1.0 / dz ** 2)


@dataclass(frozen=True)
class GridSpec:
    dr: float
    dz: float
    Nr: int
    Nz: int
    dt: float = None        # nm of light travel; None -> courant * BOR limit
    m: int = 1
    pml_cells: int = 12
    courant: float = 0.95

    def __post_init__(self):
        if not (self.dr > 0 and self.dz > 0):
            raise DomainError("cell sizes must be > 0")
        if int(self.m) != self.m or self.m < 0:
            raise DomainError("azimuthal mode number must be an integer >= 0")
        if self.pml_cells < 8:
            raise DomainError("need at least 8 PML cells per boundary")
        if min(self.Nr, self.Nz) <= 2 * self.pml_cells + 2:
            raise DomainError("grid too small for its PML")
        if not 0 < self.courant <= 1:
            raise DomainError("Courant safety factor must lie in (0, 1]")
        dt = self.dt
        if dt is None:
            dt = self.courant * bor_courant_limit(self.dr, self.dz, self.m)
            object.__setattr__(self, "dt", dt)
        if not dt > 0:
            raise DomainError("time step must be > 0")
        if dt > self.courant * courant_limit(self.dr, self.dz) * (1 + 1e-12):
            raise DomainError(f"dt = {dt:.4g} nm violates the Courant bound "
                              f"{self.courant * courant_limit(self.dr, self.dz):.4g} nm")
        if dt > bor_courant_limit(self.dr, self.dz, self.m) * (1 + 1e-12):
            raise DomainError(f"dt = {dt:.4g} nm exceeds the on-axis stability limit "
                              f"{bor_courant_limit(self.dr, self.dz, self.m):.4g} nm for m = {self.m}")

    @property
    def dt_fs(self):
        return self.dt / C_NM_PER_FS

    def check_resolution(self, n_max, e_max_ev, cells=20):
        """Raise unless the shortest material wavelength spans ``cells`` cells."""
        lam = 1239.8419843320025 / e_max_ev / n_max
        if lam < cells * max(self.dr, self.dz):
            raise DomainError(f"shortest wavelength {lam:.1f} nm is resolved by fewer than "
                              f"{cells} cells (dr = {self.dr}, dz = {self.dz})")


@dataclass(frozen=True)
class SourceSpec:
    r: float = 0.0                      # nm
    z: float = 90.0                     # nm below the top surface
    orientation: str = "in-plane"       # in-plane (m = 1) or axial (m = 0)
    energy: float = 1.36                # eV, centre
    bandwidth: float = 0.08             # eV, spectral fwhm
    amplitude: float = 1.0
    offset_widths: float = 5.0          # peak delay in units of the temporal sigma

    def __post_init__(self):
        if self.orientation not in ("in-plane", "axial"):
            raise DomainError("source orientation must be 'in-plane' or 'axial'")
        if not (self.energy > 0 and self.bandwidth > 0):
            raise DomainError("source energy and bandwidth must be > 0")

    @property
    def sigma_fs(self):
        """Temporal sigma of the Gaussian envelope."""
        sigma_e = self.bandwidth / (2 * math.sqrt(2 * math.log(2)))
        return 0.6582119569 / sigma_e

    @property
    def peak_fs(self):
        return self.offset_widths * self.sigma_fs

    @property
    def turn_off_fs(self):
        return 2 * self.peak_fs


@dataclass(frozen=True)
class Scene:
    stack: Stack
    disk: DiskGeometry | None
    source: SourceSpec
    probes: tuple = ((0.0, 90.0),)
    dft_energies: tuple = ()
    air: float = 300.0                  # nm kept above the metal before the PML
    substrate: float = 200.0            # nm of substrate before the PML
    lateral_extent: float | None = None # nm of radius before the PML
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "probes", tuple(tuple(map(float, p)) for p in self.probes))
        object.__setattr__(self, "dft_energies", tuple(float(e) for e in self.dft_energies))
        if self.lateral_extent is None:
            radius = self.disk.diameter * 500.0 if self.disk else 0.0
            margin = DEFAULTS["fdtd"]["lateral_margin_um"] * 1000.0
            object.__setattr__(self, "lateral_extent", radius + margin)
        if self.disk is not None and self.disk.diameter * 500.0 > self.lateral_extent:
            raise StructuralError("disk does not fit the lateral extent")
        if self.air < 0 or self.substrate < 0:
            raise StructuralError("air and substrate padding must be >= 0")

    @property
    def depth(self):
        return self.stack.total_thickness

    def to_dict(self, stack_ref=None):
        doc = {
            "stack": stack_ref if stack_ref is not None else self.stack.to_dict(),
            "disk": None if self.disk is None else asdict(self.disk),
            "source": asdict(self.source),
            "probes": [list(p) for p in self.probes],
            "dft_energies_ev": list(self.dft_energies),
            "air_nm": self.air,
            "substrate_nm": self.substrate,
            "lateral_extent_nm": self.lateral_extent,
        }
        return doc

    @classmethod
    def from_dict(cls, doc, base_dir=None):
        """Build a scene; ``doc['stack']`` is an inline stack or a path to a Stack JSON."""
        import os
        try:
            st = doc["stack"]
            if isinstance(st, str):
                path = st if base_dir is None or os.path.isabs(st) else os.path.join(base_dir, st)
                with open(path) as fh:
                    stack = Stack.from_json(fh.read())
            else:
                stack = Stack.from_dict(st)
            disk = None if doc.get("disk") is None else DiskGeometry(**doc["disk"])
            src = SourceSpec(**doc.get("source", {}))
            return cls(stack, disk, src,
                       probes=tuple(tuple(p) for p in doc.get("probes", [(0.0, src.z)])),
                       dft_energies=tuple(doc.get("dft_energies_ev", ())),
                       air=doc.get("air_nm", 300.0), substrate=doc.get("substrate_nm", 200.0),
                       lateral_extent=doc.get("lateral_extent_nm"))
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed scene document: {exc}") from None

    @classmethod
    def from_json(cls, text, base_dir=None):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"scene JSON: {exc}") from None
        return cls.from_dict(doc, base_dir)

    def with_disk(self, diameter):
        disk = DiskGeometry(diameter, self.disk.metal_thickness if self.disk else 50.0,
                            self.disk.surround if self.disk else 0.0)
        margin = DEFAULTS["fdtd"]["lateral_margin_um"] * 1000.0
        return replace(self, disk=disk, lateral_extent=diameter * 500.0 + margin)


def grid_for_scene(scene, dr=None, dz=None, m=None, pml_cells=None, courant=None, cfg=None):
    """Grid covering the scene plus PML, with the metal top on a grid line."""
    f = (cfg or DEFAULTS)["fdtd"]
    dr = dr or f["dr_nm"]
    dz = dz or f["dz_nm"]
    pml = pml_cells or f["pml_cells"]
    m = f["m"] if m is None else m
    nr = int(math.ceil(scene.lateral_extent / dr)) + pml
    nz = (int(math.ceil(scene.air / dz)) + int(math.ceil(scene.depth / dz))
          + int(math.ceil(scene.substrate / dz)) + 2 * pml)
    return GridSpec(dr, dz, nr, nz, None, m, pml, courant or f["courant"])
