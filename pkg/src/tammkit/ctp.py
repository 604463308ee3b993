"""Confined Tamm-plasmon modes under a metal disk.

Lateral confinement uses a hard-wall circular waveguide: the mode with
azimuthal index ``l`` and radial index ``p`` has in-plane wavevector
``k = 2*alpha_lp/d`` where ``alpha_lp`` is the p-th zero of ``J_l``, and its
energy follows the planar Tamm dispersion at that wavevector.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special

from .config import DEFAULTS
from .exceptions import DomainError, EmptyDispersionError
from .records import ModeRecord
from .stack import Layer, Stack, quarter_wave_dbr
from .materials import ConstantIndex
from .tmm.engine import PlaneWaveQuery, field_profile
from .tmm.resonance import find_resonance
from .units import HBARC_EV_NM, HC_EV_NM


def bessel_zero(l, p):
    """p-th positive zero of J_l (l <= 10, p <= 10), Newton-polished."""
    if int(l) != l or int(p) != p or not (0 <= l <= 10 and 1 <= p <= 10):
        raise DomainError(f"bessel_zero supports 0 <= l <= 10, 1 <= p <= 10, got ({l}, {p})")
    x = float(special.jn_zeros(int(l), int(p))[-1])
    for _ in range(3):
        x -= special.jv(l, x) / special.jvp(l, x)
    return x


@dataclass(frozen=True)
class DiskGeometry:
    diameter: float                 # um
    metal_thickness: float = 50.0   # nm
    surround: float = 0.0           # nm of thin metal film around the disk; 0 = bare

    def __post_init__(self):
        if not self.diameter > 0:
            raise DomainError("disk diameter must be > 0")
        if not 0 <= self.surround < self.metal_thickness:
            raise DomainError("surround film must be thinner than the disk")


@dataclass(frozen=True)
class ConfinedModeSet:
    geometry: DiskGeometry
    modes: tuple
    dispersion_fit: tuple | None = None
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def fundamental(self):
        return self.modes[0]


def _dispersion_callable(disp):
    """Return ``(E(k), Q(k) or None, k_max, (E0, C) or None)``."""
    if isinstance(disp, tuple) and len(disp) in (2, 3) and np.isscalar(disp[0]):
        e0, c = float(disp[0]), float(disp[1])
        return (lambda k: e0 + c * k * k), None, math.inf, (e0, c)
    pts = [(k, r) for k, r in disp if r is not None]
    if not pts:
        raise EmptyDispersionError("empty dispersion")
    ks = np.array([p[0] for p in pts])
    es = np.array([p[1].E0 for p in pts])
    qs = np.array([p[1].Q for p in pts])
    if ks.size >= 2:
        # parabola through the last points for extrapolation beyond the samples
        tail = slice(max(ks.size - 5, 0), ks.size)
        coef = np.polyfit(ks[tail] ** 2, es[tail], 1)
    else:
        coef = (0.0, es[0])

    def energy(k):
        k = np.asarray(k, dtype=float)
        inside = np.interp(k, ks, es)
        outside = coef[1] + coef[0] * k * k
        return np.where(k <= ks[-1], inside, outside)

    def quality(k):
        return np.interp(k, ks, qs)

    return energy, quality, ks[-1], None


def confined_modes(disp, diameter, l_max=2, p_max=2, q=None, geometry=None):
    """Hard-wall confined modes for a disk of ``diameter`` um.

    ``disp`` is either a sampled dispersion ``[(kx, ModeRecord|None), ...]``
    or a parabola ``(E0, C)`` with ``C`` in eV*nm^2. For the parabolic input
    every mode gets quality factor ``q`` (default: configured target Q).
    """
    geometry = geometry or DiskGeometry(diameter)
    if not diameter > 0:
        raise DomainError("diameter must be > 0")
    energy, quality, k_cover, fit = _dispersion_callable(disp)
    d_nm = diameter * 1000.0
    q = q or DEFAULTS["tamm"]["target_q"]
    modes = []
    extrapolated = False
    for l in range(l_max + 1):
        for p in range(1, p_max + 1):
            alpha = bessel_zero(l, p)
            k = 2 * alpha / d_nm
            extrapolated |= k > k_cover
            e = float(energy(k))
            qq = float(quality(min(k, k_cover))) if quality is not None else q
            modes.append((alpha, ModeRecord.from_q(e, qq, provenance="analytic", labels=(l, p))))
    modes.sort(key=lambda t: (t[1].E0, t[0]))
    meta = {"extrapolated": bool(extrapolated), "k_cover_inv_nm": float(k_cover)}
    return ConfinedModeSet(geometry, tuple(m for _, m in modes), fit, meta)


# ------------------------------------------------------------------ volumes

def _lateral_max(l, alpha):
    if l == 0:
        return 1.0
    # first maximum of J_l sits at the first zero of J_l'
    x = float(special.jnp_zeros(l, 1)[0])
    if x > alpha:
        x = alpha
    return float(special.jv(l, x) ** 2)


def lateral_area(l, p, diameter):
    """``A_eff = int J_l^2(2 alpha r/d) r dr dphi / max J_l^2`` over the disk, in um^2."""
    alpha = bessel_zero(l, p)
    R = diameter / 2.0
    val, _ = integrate.quad(lambda r: special.jv(l, alpha * r / R) ** 2 * r, 0.0, R,
                            epsabs=0, epsrel=1e-12, limit=200)
    return 2 * math.pi * val / _lateral_max(l, alpha)


def _layer_integral(a_f, a_b, kz, d):
    """Exact  int_{-d}^{0} |a_f e^{i kz u} + a_b e^{-i kz u}|^2 du."""

    def exp_int(c):
        if abs(c * d) < 1e-12:
            return d
        return (1 - np.exp(-c * d)) / c

    return float(abs(a_f) ** 2 * exp_int(-2 * kz.imag).real
                 + abs(a_b) ** 2 * exp_int(2 * kz.imag).real
                 + 2 * (a_f * np.conj(a_b) * exp_int(2j * kz.real)).real)


def _layer_peak(a_f, a_b, kz, d, u0):
    """Refine the maximum of |E(u)|^2 near the sample ``u0``."""
    def f(u):
        return -abs(a_f * np.exp(1j * kz * u) + a_b * np.exp(-1j * kz * u)) ** 2
    h = min(d / 4, 2.0)
    lo, hi = max(u0 - h, -d), min(u0 + h, 0.0)
    res = optimize.minimize_scalar(f, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-10})
    return max(-res.fun, -f(u0), -f(lo), -f(hi))


def vertical_length(profile):
    """``int eps|E|^2 dz / max(eps|E|^2)`` over the dielectric layers, in nm.

    Metal layers (Re eps < 0) and the semi-infinite media are excluded. Both
    the integral and the maximum are evaluated from the exact layer
    amplitudes carried by the profile.
    """
    if abs(profile.intensity.max() - 1.0) > 1e-12:
        raise DomainError("profile must be max-normalised")
    if not profile.amplitudes:
        raise DomainError("profile carries no layer amplitudes")
    if profile.polarization == "TM" and profile.query.kx > 0:
        raise DomainError("vertical length is defined for TE or normal incidence")
    total, peak = 0.0, 0.0
    for j, (a_f, a_b, kz, d) in enumerate(profile.amplitudes):
        m = profile.layer == j
        eps = profile.eps[m][0].real if m.any() else 0.0
        if eps <= 0:
            continue
        total += eps * _layer_integral(a_f, a_b, kz, d)
        i = int(np.argmax(profile.intensity[m]))
        u0 = profile.z[m][i] - profile.interfaces[j] - d
        peak = max(peak, eps * _layer_peak(a_f, a_b, kz, d, u0))
    if peak == 0:
        raise DomainError("profile has no dielectric layers")
    return total / peak


def pillar_stack(energy, n_high=None, n_low=None, top_pairs=None, bottom_pairs=None):
    """GaAs lambda-cavity between quarter-wave DBRs, resonant at ``energy``."""
    d = DEFAULTS["dbr"]
    p = DEFAULTS["pillar"]
    high = ConstantIndex(n_high or d["n_high"], name="GaAs")
    low = ConstantIndex(n_low or d["n_low"], name="AlGaAs")
    top = quarter_wave_dbr(energy, high, low, top_pairs or p["top_pairs"], "high-first")
    bottom = quarter_wave_dbr(energy, high, low, bottom_pairs or p["bottom_pairs"], "low-first")
    cavity = Layer(HC_EV_NM / (energy * high.n.real), high)
    stack = Stack(ConstantIndex(1.0, name="vacuum"), top.layers + (cavity,) + bottom.layers, high)
    stack.metadata["stopband_ev"] = (energy - 0.02, energy + 0.02)
    return stack


def pillar_profile(energy, dz=0.5, **kw):
    stack = pillar_stack(energy, **kw)
    rec = find_resonance(stack, (energy - 0.01, energy + 0.01), coarse_step=2e-5)
    e = rec.E0 if rec is not None else energy
    return field_profile(stack, PlaneWaveQuery(e), dz=dz), stack


def mode_volume(profile, diameter, l=0, p=1, index_at_antinode=None):
    """Effective volume of a confined mode: vertical length x lateral area.

    Returns ``(V in um^3, V in units of (lambda/n)^3)``.
    """
    n = index_at_antinode
    if n is None:
        n = math.sqrt(max(profile.eps.real))
    v = vertical_length(profile) * 1e-3 * lateral_area(l, p, diameter)
    lam_n = HC_EV_NM / profile.query.E / n * 1e-3
    return v, v / lam_n ** 3


def purcell_factor(Q, V, wavelength_nm, n):
    """``F_p = 3/(4 pi^2) (lambda/n)^3 Q / V`` with V in um^3."""
    for v in (Q, V, wavelength_nm, n):
        if not v > 0:
            raise DomainError("Purcell inputs must be positive")
    lam = wavelength_nm * 1e-3 / n
    return 3.0 / (4.0 * math.pi ** 2) * lam ** 3 * Q / V


# --------------------------------------------------------- emitter metrics

@dataclass(frozen=True)
class EmitterMetrics:
    F_p: float
    gamma: float
    tau_ref: float | None = None
    tau_measured: float | None = None

    @property
    def beta(self):
        return beta_fraction(self.F_p, self.gamma)

    @property
    def inhibition(self):
        return 1.0 / self.gamma if self.gamma > 0 else math.inf


def beta_fraction(F_p, gamma):
    """Fraction of emission into the mode, ``F_p / (F_p + gamma)``."""
    if not F_p > 0 or gamma < 0:
        raise DomainError("need F_p > 0 and gamma >= 0")
    return F_p / (F_p + gamma)


def inhibition_factor(tau_measured, tau_ref, tau_measured_err=0.0, tau_ref_err=0.0):
    """``tau_measured / tau_ref`` with first-order (quadrature) error propagation."""
    if not (tau_measured > 0 and tau_ref > 0):
        raise DomainError("lifetimes must be positive")
    ratio = tau_measured / tau_ref
    rel = math.hypot(tau_measured_err / tau_measured, tau_ref_err / tau_ref)
    return ratio, ratio * rel


def acceleration_factor(tau_measured, tau_ref, tau_measured_err=0.0, tau_ref_err=0.0):
    """Measured Purcell acceleration ``tau_ref / tau_measured``."""
    inv, err = inhibition_factor(tau_measured, tau_ref, tau_measured_err, tau_ref_err)
    return 1.0 / inv, err / inv ** 2


def quantum_efficiency_bound(tau_long, tau_ref):
    """Lower bound ``tau_long / (tau_long + tau_ref)`` on the quantum efficiency."""
    if math.isinf(tau_long):
        return 1.0
    if not (tau_long > 0 and tau_ref > 0):
        raise DomainError("lifetimes must be positive")
    return tau_long / (tau_long + tau_ref)


# -------------------------------------------------------- radiation pattern

def _hankel_hardwall(l, alpha, R, kt):
    """Order-l Hankel transform of J_l(alpha r/R) on [0, R] (closed form)."""
    a = alpha / R
    kt = np.asarray(kt, dtype=float)
    num = R * a * special.jv(l + 1, alpha) * special.jv(l, kt * R)
    den = a * a - kt * kt
    near = np.abs(den) < 1e-9 * a * a
    out = np.empty_like(kt)
    out[~near] = num[~near] / den[~near]
    if near.any():
        # k -> a limit of the Lommel integral
        out[near] = 0.5 * R * R * special.jv(l + 1, alpha) ** 2
    return out


def hankel_transform(l, p, diameter_nm, kt):
    return _hankel_hardwall(l, bessel_zero(l, p), diameter_nm / 2.0, kt)


@dataclass(frozen=True)
class RadiationPattern:
    theta_deg: np.ndarray
    intensity: np.ndarray
    mask: np.ndarray


def radiation_pattern(l, p, diameter, energy, na_clip=1.0, n_theta=361):
    """Far-field intensity vs polar angle for the hard-wall ``(l, p)`` mode.

    Intensity is ``|H_l(k0 sin(theta))|^2`` normalised to its maximum over the
    hemisphere; samples beyond ``asin(na_clip)`` are zeroed and flagged in
    ``mask``.
    """
    if not 0 < na_clip <= 1:
        raise DomainError("numerical aperture must lie in (0, 1]")
    theta = np.linspace(0.0, 90.0, n_theta)
    kt = energy / HBARC_EV_NM * np.sin(np.radians(theta))
    amp = hankel_transform(l, p, diameter * 1000.0, kt)
    inten = amp ** 2
    peak = inten.max()
    inten = inten / peak if peak > 0 else inten
    keep = np.sin(np.radians(theta)) <= na_clip + 1e-15
    return RadiationPattern(theta, np.where(keep, inten, 0.0), keep)


def main_lobe_width(pattern):
    """Full angular width (deg) of the central lobe at half maximum."""
    i = np.argmax(pattern.intensity < 0.5)
    if i == 0:
        return math.nan
    t, y = pattern.theta_deg, pattern.intensity
    return 2 * (t[i - 1] + (0.5 - y[i - 1]) * (t[i] - t[i - 1]) / (y[i] - y[i - 1]))


def transform_power_ratio(l, p, diameter_nm, k_max_factor=400.0):
    """``int |H_l|^2 k dk / int |f|^2 r dr`` for the hard-wall profile (Parseval: 1).

    The integral runs to ``k_max_factor * alpha / R`` with the asymptotic
    ``k^-4`` tail added analytically.
    """
    alpha = bessel_zero(l, p)
    R = diameter_nm / 2.0
    a = alpha / R
    space, _ = integrate.quad(lambda r: special.jv(l, a * r) ** 2 * r, 0, R,
                              epsabs=0, epsrel=1e-13, limit=400)
    kmax = k_max_factor * a
    edges = np.concatenate([np.linspace(0, 4 * a, 41), np.geomspace(4 * a, kmax, 120)[1:]])
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, _ = integrate.quad(lambda k: _hankel_hardwall(l, alpha, R, np.array([k]))[0] ** 2 * k,
                              lo, hi, epsabs=0, epsrel=1e-12, limit=200)
        total += v
    # <J_l^2(kR)> -> 1/(pi k R) on average
    c = (R * a * special.jv(l + 1, alpha)) ** 2 / (math.pi * R)
    total += c / (3 * kmax ** 3)
    return total / space


MODE_TABLE_HEADER = ("diameter_um", "l", "p", "energy_ev", "Q", "V_eff_um3", "F_p")


def mode_table(diameters, disp, profile, q=None, l_max=1, p_max=2):
    """Rows ``(diameter_um, l, p, energy_ev, Q, V_eff_um3, F_p)`` for each disk."""
    n = math.sqrt(max(profile.eps.real))
    rows = []
    for d in diameters:
        ms = confined_modes(disp, d, l_max=l_max, p_max=p_max, q=q)
        for rec in ms.modes:
            l, p = rec.labels
            v, _ = mode_volume(profile, d, l, p, index_at_antinode=n)
            fp = purcell_factor(rec.Q, v, HC_EV_NM / rec.E0, n)
            rows.append((float(d), l, p, rec.E0, rec.Q, v, fp))
    return rows
