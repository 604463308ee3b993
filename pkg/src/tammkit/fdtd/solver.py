"""Time stepping, sources, probes and running DFT monitors."""

import math
import sys
from dataclasses import dataclass, field

import numpy as np

from ..config import DEFAULTS
from ..exceptions import DomainError, InstabilityError, StructuralError
from ..units import C_NM_PER_FS, HBARC_EV_NM
from . import kernels
from .raster import rasterize

CHECK_EVERY = 1000


@dataclass
class PMLSettings:
    order: int = 3
    kappa_max: float = 5.0
    alpha_max: float = 0.05       # fraction of the source angular frequency
    reflection: float = 1e-8

    @classmethod
    def from_config(cls, cfg=None):
        f = (cfg or DEFAULTS)["fdtd"]
        return cls(f["pml_order"], f["pml_kappa_max"], f["pml_alpha_max"], f["pml_reflection"])


@dataclass
class RunResult:
    times_fs: np.ndarray
    probes: np.ndarray                  # (n_probe, n_time)
    dft: dict = field(default_factory=dict)   # energy -> complex e_r map (Nr, nz window)
    dft_z: np.ndarray | None = None     # nm, z axis of the DFT window
    dft_r: np.ndarray | None = None     # nm, r axis of e_r
    source_off_fs: float = 0.0
    steps: int = 0
    dt_fs: float = 0.0


class Simulation:
    """Owns the field state for one scene on one grid.

    ``pml_sides`` selects which boundaries carry CPML: any of
    ``"r"``, ``"z-"`` (top) and ``"z+"`` (bottom); the rest are PEC.
    """

    def __init__(self, scene, grid, pml=None, pml_sides=("r", "z-", "z+"), check_resolution=True):
        self.scene = scene
        self.grid = grid
        self.raster = rasterize(scene, grid)
        if check_resolution:
            src = scene.source
            grid.check_resolution(self.raster.n_max, src.energy + src.bandwidth)
        self.pml = pml or PMLSettings.from_config()
        g = grid
        self.er = np.zeros((g.Nr, g.Nz + 1))
        self.ep = np.zeros((g.Nr + 1, g.Nz + 1))
        self.ez = np.zeros((g.Nr + 1, g.Nz))
        self.hr = np.zeros((g.Nr + 1, g.Nz))
        self.hp = np.zeros((g.Nr, g.Nz))
        self.hz = np.zeros((g.Nr, g.Nz + 1))
        self.psi = {name: np.zeros_like(getattr(self, arr)) for name, arr in (
            ("hr_z", "hr"), ("hp_z", "hp"), ("hp_r", "hp"), ("hz_r", "hz"),
            ("er_z", "er"), ("ep_z", "ep"), ("ep_r", "ep"), ("ez_r", "ez"),
            ("hr_a", "hr"), ("hz_a", "hz"), ("er_a", "er"), ("ez_a", "ez"))}
        self._build_pml(pml_sides)
        self.cur = {c: np.zeros(d.ii.size) for c, d in self.raster.drude.items()}
        self.n = 0
        self._place_source()
        self._place_probes()

    # ------------------------------------------------------------ setup
    def _build_pml(self, sides):
        g, p = self.grid, self.pml
        w0 = self.scene.source.energy / HBARC_EV_NM
        alpha = p.alpha_max * w0
        n_top = math.sqrt(self.raster.media[0][1])
        n_bot = math.sqrt(self.raster.media[-1][1])
        n_z = 0.5 * (n_top + n_bot)
        args = dict(pml=g.pml_cells, dt=g.dt, order=p.order, kappa_max=p.kappa_max,
                    alpha_max=alpha, reflection=p.reflection)
        r_on = "r" in sides
        zl, zh = "z-" in sides, "z+" in sides
        self.pr_h, self.ikr_h, self.br_h, self.ar_h = kernels.cpml_profile(
            g.Nr, d=g.dr, n_medium=1.0, staggered=True, high_side=r_on, low_side=False, **args)
        self.pr_e, self.ikr_e, self.br_e, self.ar_e = kernels.cpml_profile(
            g.Nr, d=g.dr, n_medium=1.0, staggered=False, high_side=r_on, low_side=False, **args)
        # averaged radial stretching seen by the 1/r terms
        _, self.ika_h, self.ba_h, self.aa_h = kernels.cpml_profile(
            g.Nr, d=g.dr, n_medium=1.0, staggered=True, high_side=r_on, low_side=False,
            radial_average=True, **args)
        _, self.ika_e, self.ba_e, self.aa_e = kernels.cpml_profile(
            g.Nr, d=g.dr, n_medium=1.0, staggered=False, high_side=r_on, low_side=False,
            radial_average=True, **args)
        self.pz_h, self.ikz_h, self.bz_h, self.az_h = kernels.cpml_profile(
            g.Nz, d=g.dz, n_medium=n_z, staggered=True, high_side=zh, low_side=zl, **args)
        self.pz_e, self.ikz_e, self.bz_e, self.az_e = kernels.cpml_profile(
            g.Nz, d=g.dz, n_medium=n_z, staggered=False, high_side=zh, low_side=zl, **args)

    def k_of(self, z, half=False):
        """Grid index of scene depth ``z`` (nm) for integer or half-integer rows."""
        off = 0.5 if half else 0.0
        return int(round(z / self.grid.dz - off)) + self.raster.k_top

    def _inside(self, r, z):
        g = self.grid
        i = int(r // g.dr)
        k = self.k_of(z)
        p = g.pml_cells
        return 0 <= i < g.Nr - p and p <= k <= g.Nz - p, i, k

    def _place_source(self):
        s = self.scene.source
        ok, i, k = self._inside(s.r, s.z)
        if not ok:
            raise StructuralError("source lies outside the non-PML region")
        if s.orientation == "in-plane":
            self.src = ("er", i, k)
        else:
            if self.grid.m != 0:
                raise DomainError("an axial dipole needs m = 0")
            self.src = ("ez", int(round(s.r / self.grid.dr)), self.k_of(s.z, half=True))
        w = s.energy / HBARC_EV_NM
        sig = s.sigma_fs * C_NM_PER_FS
        t0 = s.peak_fs * C_NM_PER_FS
        self._src = (s.amplitude, w, sig, t0, s.turn_off_fs * C_NM_PER_FS)

    def _place_probes(self):
        self.probe_idx = []
        for r, z in self.scene.probes:
            ok, i, k = self._inside(r, z)
            if not ok:
                raise StructuralError(f"probe ({r}, {z}) lies outside the non-PML region")
            mid = self.raster.medium["er"][i, k]
            if self.raster.media[mid][2]:
                raise StructuralError(f"probe ({r}, {z}) lies inside metal")
            self.probe_idx.append((i, k))

    # ------------------------------------------------------------ stepping
    def source_value(self, t):
        amp, w, sig, t0, t_off = self._src
        if amp == 0 or t > t_off:
            return 0.0
        x = (t - t0) / sig
        return amp * math.exp(-0.5 * x * x) * math.sin(w * (t - t0))

    def step(self):
        g = self.grid
        kernels.update_h(self.er, self.ep, self.ez, self.hr, self.hp, self.hz, g.m, g.dt, g.dr, g.dz,
                         self.ikr_h, self.ikz_h, self.pr_h, self.pz_h, self.br_h, self.ar_h,
                         self.bz_h, self.az_h, self.psi["hr_z"], self.psi["hp_z"],
                         self.psi["hp_r"], self.psi["hz_r"],
                         self.ika_e, self.ba_e, self.aa_e, self.ika_h, self.ba_h, self.aa_h,
                         self.psi["hr_a"], self.psi["hz_a"])
        fields = {"er": self.er, "ep": self.ep, "ez": self.ez}
        dr_cells = self.raster.drude
        for c, d in dr_cells.items():
            if d.ii.size:
                kernels.drude_current(fields[c], d.ii, d.kk, d.bj, self.cur[c], self.raster.kj)
        co = self.raster.coef
        kernels.update_e(self.er, self.ep, self.ez, self.hr, self.hp, self.hz, g.m, g.dr, g.dz,
                         co["er"], co["ep"], co["ez"], self.ikr_e, self.ikz_e, self.pr_e, self.pz_e,
                         self.br_e, self.ar_e, self.bz_e, self.az_e, self.psi["er_z"],
                         self.psi["ep_z"], self.psi["ep_r"], self.psi["ez_r"],
                         self.ika_e, self.ba_e, self.aa_e, self.ika_h, self.ba_h, self.aa_h,
                         self.pr_h, self.psi["er_a"], self.psi["ez_a"])
        for c, d in dr_cells.items():
            if d.ii.size:
                kernels.drude_apply(fields[c], co[c], d.ii, d.kk, self.cur[c])
        j = self.source_value((self.n + 0.5) * g.dt)
        if j != 0.0:
            comp, i, k = self.src
            fields[comp][i, k] -= co[comp][i, k] * j
        self.n += 1

    def check_finite(self):
        for name in ("er", "ep", "ez", "hr", "hp", "hz"):
            a = getattr(self, name)
            if not np.isfinite(a).all():
                cell = np.unravel_index(np.argmax(~np.isfinite(a)), a.shape)
                raise InstabilityError(f"non-finite {name} at cell {tuple(map(int, cell))} "
                                       f"after step {self.n}", cell=(name,) + tuple(map(int, cell)),
                                       step=self.n)

    def energy(self, e_prev=None):
        """Discrete field energy ``sum w (eps E_prev.E + H.H) / 2`` per radian.

        ``e_prev`` holds (er, ep, ez) from before the last step; with it this is
        the quantity the leapfrog scheme conserves in closed lossless cavities.
        """
        g = self.grid
        co = self.raster.coef
        ri = np.arange(g.Nr + 1) * g.dr
        rh = (np.arange(g.Nr) + 0.5) * g.dr
        w_ez = ri.copy()
        w_ez[0] = g.dr / 8.0 if g.m == 0 else 0.0
        eps = {c: g.dt / co[c] for c in co}
        ep = (self.er, self.ep, self.ez) if e_prev is None else e_prev
        u = (np.sum(rh[:, None] * eps["er"] * self.er * ep[0])
             + np.sum(ri[:, None] * eps["ep"] * self.ep * ep[1])
             + np.sum(w_ez[:, None] * eps["ez"] * self.ez * ep[2]))
        u += (np.sum(ri[:, None] * self.hr ** 2) + np.sum(rh[:, None] * self.hp ** 2)
              + np.sum(rh[:, None] * self.hz ** 2))
        return 0.5 * u * g.dr * g.dz

    # ------------------------------------------------------------ running
    def run(self, steps=None, ringdown_fs=None, probe_stride=4, dft_stride=20,
            dft_after_source=True, progress=None, component="er"):
        """Advance ``steps`` (or source duration + ``ringdown_fs``) and record.

        Probes sample ``component`` every ``probe_stride`` steps. DFT monitors
        accumulate e_r over the non-PML region every ``dft_stride`` steps,
        from source turn-off onward when ``dft_after_source``.
        """
        g = self.grid
        s = self.scene.source
        if steps is None:
            ring = DEFAULTS["fdtd"]["ringdown_fs"] if ringdown_fs is None else ringdown_fs
            steps = int(math.ceil((s.turn_off_fs + ring) / g.dt_fs))
        if steps < s.turn_off_fs / g.dt_fs:
            raise DomainError("run shorter than the source duration")
        sample = getattr(self, component)
        n_rec = steps // probe_stride
        series = np.zeros((len(self.probe_idx), n_rec))
        times = np.zeros(n_rec)
        p = g.pml_cells
        k0, k1 = p, g.Nz + 1 - p
        energies = np.array(self.scene.dft_energies, dtype=float)
        w = energies / HBARC_EV_NM
        dft_re = np.zeros((energies.size, g.Nr, k1 - k0))
        dft_im = np.zeros_like(dft_re)
        t_start = s.turn_off_fs * C_NM_PER_FS if dft_after_source else 0.0
        rec = 0
        for step in range(steps):
            self.step()
            t = self.n * g.dt
            if (step + 1) % probe_stride == 0 and rec < n_rec:
                for j, (i, k) in enumerate(self.probe_idx):
                    series[j, rec] = sample[i, k]
                times[rec] = t / C_NM_PER_FS
                rec += 1
            if energies.size and t >= t_start and step % dft_stride == 0:
                kernels.dft_accumulate(self.er, dft_re, dft_im, np.cos(w * t) * g.dt * dft_stride,
                                       np.sin(w * t) * g.dt * dft_stride, k0, k1)
            if (step + 1) % CHECK_EVERY == 0:
                self.check_finite()
                if progress is not None:
                    progress(step + 1, steps)
        self.check_finite()
        dft = {float(e): dft_re[f] + 1j * dft_im[f] for f, e in enumerate(energies)}
        z_axis = (np.arange(k0, k1) - self.raster.k_top) * g.dz
        r_axis = (np.arange(g.Nr) + 0.5) * g.dr
        return RunResult(times, series, dft, z_axis, r_axis, s.turn_off_fs, steps, g.dt_fs)


def stderr_progress(label=""):
    def report(done, total):
        print(f"{label}step {done}/{total}", file=sys.stderr, flush=True)
    return report


def run(scene, grid, steps=None, **kw):
    """Build a simulation for ``scene`` on ``grid`` and run it."""
    sim_kw = {k: kw.pop(k) for k in ("pml", "pml_sides", "check_resolution") if k in kw}
    return Simulation(scene, grid, **sim_kw).run(steps, **kw)


def measure_pml_reflection(dr=None, dz=None, pml_cells=None, pml=None, energy=1.36,
                           band=0.08, pulse_bandwidth=0.5, beam_waist=1500.0, gap=400.0,
                           extension=8000.0):
    """Normal-incidence CPML reflection in vacuum, in dB over ``energy +/- band``.

    An m = 1 Gaussian-beam current sheet launches a plane-like pulse towards
    the top PML; the field at a probe between sheet and PML is compared with
    a reference run whose PMLs sit ``extension`` nm further away.
    Returns ``(max_db, energies, ratio)``.
    """
    from ..materials import ConstantIndex
    from ..stack import Layer, Stack
    from .model import Scene, SourceSpec, grid_for_scene

    vac = ConstantIndex(1.0, name="vacuum")
    f = DEFAULTS["fdtd"]
    dr, dz = dr or f["dr_nm"], dz or f["dz_nm"]
    traces = []
    for ext in (0.0, extension):
        body = 2 * gap + 200.0
        stack = Stack(vac, (Layer(body, vac),), vac, {"metal_layer": None})
        src = SourceSpec(r=0.0, z=gap + 200.0, energy=energy, bandwidth=pulse_bandwidth,
                         amplitude=0.0)
        scene = Scene(stack, None, src, probes=((0.0, gap),), air=ext + dz, substrate=ext + dz,
                      lateral_extent=beam_waist * 1.8)
        grid = grid_for_scene(scene, dr=dr, dz=dz, m=1, pml_cells=pml_cells)
        sim = Simulation(scene, grid, pml=pml, check_resolution=False)
        k_s = sim.k_of(src.z)
        rh = (np.arange(grid.Nr) + 0.5) * dr
        ri = np.arange(grid.Nr + 1) * dr
        prof_r = np.exp(-(rh / beam_waist) ** 2)
        prof_p = np.exp(-(ri / beam_waist) ** 2)
        prof_p[0] = 0.0
        w = energy / HBARC_EV_NM
        sig = src.sigma_fs * C_NM_PER_FS
        t0 = src.peak_fs * C_NM_PER_FS
        i_p, k_p = sim.probe_idx[0]
        t_window = 2 * t0 + 2 * (gap + 200.0) + 4 * gap
        steps = int(math.ceil(t_window / grid.dt))
        rec = np.zeros(steps)
        for n in range(steps):
            sim.step()
            t = (n + 0.5) * grid.dt
            x = (t - t0) / sig
            j = math.exp(-0.5 * x * x) * math.sin(w * (t - t0))
            sim.er[:, k_s] -= sim.raster.coef["er"][:, k_s] * j * prof_r
            sim.ep[:, k_s] += sim.raster.coef["ep"][:, k_s] * j * prof_p
            rec[n] = sim.er[i_p, k_p]
        traces.append(rec)
    test, ref = traces
    nfft = 1 << int(math.ceil(math.log2(8 * test.size)))
    e = np.fft.rfftfreq(nfft, grid.dt_fs) * 2 * math.pi * 0.6582119569
    sel = (e >= energy - band) & (e <= energy + band)
    ratio = np.abs(np.fft.rfft(test - ref, nfft))[sel] / np.abs(np.fft.rfft(ref, nfft))[sel]
    return float(20 * np.log10(ratio.max())), e[sel], ratio
