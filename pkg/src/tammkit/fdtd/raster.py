"""Scene to Yee-grid material coefficients."""

import math
from dataclasses import dataclass

import numpy as np

from ..exceptions import BoundsError, InvalidMaterialError, StructuralError
from ..materials import ConstantIndex, Drude
from ..units import HBARC_EV_NM

SUBSAMPLES = 4

# component -> (r offset, z offset, direction)
COMPONENTS = {
    "er": (0.5, 0.0, "r"),
    "ep": (0.0, 0.0, "phi"),
    "ez": (0.0, 0.5, "z"),
}


@dataclass
class DrudeCells:
    ii: np.ndarray
    kk: np.ndarray
    bj: np.ndarray


@dataclass
class Raster:
    coef: dict              # component -> dt/eps array
    drude: dict             # component -> DrudeCells
    kj: float               # current decay factor per step
    medium: dict            # component -> majority medium id per cell
    media: list             # medium id -> (name, eps_inf, is_metal)
    k_top: int              # grid line of the metal top surface
    n_max: float

    def z_of(self, k, offset=0.0, dz=1.0):
        return (k + offset - self.k_top) * dz


def _medium_params(material):
    if isinstance(material, Drude):
        return float(material.eps_b), material
    if isinstance(material, ConstantIndex):
        n = material.n
        if abs(n.imag) > 1e-12:
            raise InvalidMaterialError(
                f"{material.name}: lossy constant index {n} has no time-domain model; "
                "use a Drude material")
        return float(n.real ** 2), None
    raise InvalidMaterialError(f"{type(material).__name__} is not supported in FDTD scenes")


def _media(scene):
    st = scene.stack
    mats = [st.ambient] + [layer.material for layer in st.layers] + [st.substrate]
    out, drude = [], None
    for mat in mats:
        eps, dr = _medium_params(mat)
        if dr is not None:
            if drude is not None and dr != drude:
                raise StructuralError("FDTD scenes support a single Drude metal")
            drude = dr
        out.append((getattr(mat, "name", "?"), eps, dr is not None))
    return out, drude


def _fine_ids(scene, grid, k_top, offset_r, offset_z, n_r, n_z):
    """Medium id of every subsample, shape (n_r, S, n_z, S)."""
    S = SUBSAMPLES
    sub = (np.arange(S) + 0.5) / S - 0.5
    r = np.abs(((np.arange(n_r) + offset_r)[:, None] + sub[None, :]) * grid.dr)
    z = ((np.arange(n_z) + offset_z - k_top)[:, None] + sub[None, :]) * grid.dz
    interfaces = scene.stack.interfaces
    n_layers = len(scene.stack.layers)
    zid = np.searchsorted(interfaces, z, side="right")       # 0 ambient, 1..L layers, L+1 substrate
    zid = np.minimum(zid, n_layers + 1)
    ids = np.broadcast_to(zid[None, None, :, :], (n_r, S, n_z, S)).copy()
    metal_layer = scene.stack.metadata.get("metal_layer")
    if scene.disk is not None and metal_layer is not None:
        lid = metal_layer + 1
        radius = scene.disk.diameter * 500.0
        outside = r >= radius
        in_layer = zid == lid
        keep = np.zeros_like(in_layer)
        if scene.disk.surround > 0:
            t = scene.stack.layers[metal_layer].thickness
            keep = in_layer & (z >= t - scene.disk.surround)
        strip = in_layer & ~keep
        mask = outside[:, :, None, None] & strip[None, None, :, :]
        ids[mask] = 0
    return ids


def rasterize(scene, grid):
    """Per-component update coefficients with sub-cell material averaging.

    Tangential components take the arithmetic mean of the permittivity over
    the cell, normal components the harmonic mean along their direction;
    where metal lies on the normal path the majority medium wins. Drude
    strength is scaled by the metal fraction of tangential cells.
    """
    media, metal = _media(scene)
    eps_tab = np.array([m[1] for m in media])
    metal_tab = np.array([m[2] for m in media])
    pml = grid.pml_cells
    k_top = pml + int(math.ceil(scene.air / grid.dz))
    depth_cells = int(math.ceil((scene.depth + scene.substrate) / grid.dz))
    if k_top + depth_cells > grid.Nz - pml:
        raise BoundsError("stack and substrate exceed the grid")
    if scene.lateral_extent > (grid.Nr - pml) * grid.dr + 1e-9:
        raise BoundsError("lateral extent exceeds the grid")
    mt = scene.stack.metadata.get("metal_thickness_nm") or 0.0
    if mt and abs(mt / grid.dz - round(mt / grid.dz)) > 1e-9:
        raise BoundsError(f"metal thickness {mt} nm is not a whole number of dz cells")

    dt = grid.dt
    if metal is not None:
        wp = metal.e_p / HBARC_EV_NM
        gam = metal.gamma / HBARC_EV_NM
        kj = math.exp(-gam * dt)
        bj_full = wp * wp * (-math.expm1(-gam * dt) / gam if gam > 0 else dt)
    else:
        kj, bj_full = 1.0, 0.0

    shapes = {"er": (grid.Nr, grid.Nz + 1), "ep": (grid.Nr + 1, grid.Nz + 1),
              "ez": (grid.Nr + 1, grid.Nz)}
    coef, drude, medium = {}, {}, {}
    for comp, (orr, oz, direction) in COMPONENTS.items():
        n_r, n_z = shapes[comp]
        ids = _fine_ids(scene, grid, k_top, orr, oz, n_r, n_z)
        e = eps_tab[ids]
        met = metal_tab[ids]
        frac = met.mean(axis=(1, 3))
        arith = e.mean(axis=(1, 3))
        if direction == "phi":
            eps, dfrac = arith, frac
        else:
            along = 1 if direction == "r" else 3
            across = 3 if direction == "r" else 1
            harm = 1.0 / (1.0 / e).mean(axis=along)
            eps = harm.mean(axis=across - 1 if across > along else across)
            line_frac = met.mean(axis=along)
            mixed_line = np.any((line_frac > 0) & (line_frac < 1),
                                axis=across - 1 if across > along else across)
            # dielectric-only harmonic mean for minority-metal normal cells
            w = np.where(met, 0.0, 1.0)
            inv_d = (w / e).sum(axis=(1, 3)) / np.maximum(w.sum(axis=(1, 3)), 1)
            diel = np.where(inv_d > 0, 1.0 / np.where(inv_d > 0, inv_d, 1.0), arith)
            metal_eps = eps_tab[metal_tab].max() if metal_tab.any() else 1.0
            normal = mixed_line
            eps = np.where(frac > 0, arith, eps)
            dfrac = frac.copy()
            maj = normal & (frac >= 0.5)
            mino = normal & (frac < 0.5)
            eps = np.where(maj, metal_eps, np.where(mino, diel, eps))
            dfrac = np.where(maj, 1.0, np.where(mino, 0.0, dfrac))
        coef[comp] = dt / eps
        ii, kk = np.nonzero(dfrac > 0)
        drude[comp] = DrudeCells(ii.astype(np.int64), kk.astype(np.int64),
                                 (dfrac[ii, kk] * bj_full).astype(np.float64))
        # medium at the sample nearest the component position, for probes and display
        medium[comp] = ids[:, SUBSAMPLES // 2, :, SUBSAMPLES // 2]
    n_max = float(np.sqrt(eps_tab[~metal_tab].max()))
    return Raster(coef, drude, kj, medium, media, k_top, n_max)
