"""Resonance extraction, field maps and FDTD output formats."""

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, signal

from ..exceptions import DomainError, ParseError
from ..records import ModeRecord
from ..units import HBAR_EV_FS

NOISE_FACTOR = 50.0


def _peaks(freq, power, band, floor, min_sep):
    sel = (freq >= band[0]) & (freq <= band[1])
    idx = np.nonzero(sel)[0]
    if idx.size < 3:
        return []
    p = power[idx]
    cand, _ = signal.find_peaks(p, height=floor)
    cand = sorted(cand, key=lambda j: -p[j])
    keep = []
    for j in cand:
        if all(abs(freq[idx[j]] - freq[idx[q]]) > min_sep for q in keep):
            keep.append(j)
    return [int(idx[j]) for j in keep]


def _envelope_fit(t, x, e_center, half_width):
    """Band-pass around ``e_center`` and fit log-envelope and phase lines."""
    n = x.size
    dt = t[1] - t[0]
    nfft = 1 << int(math.ceil(math.log2(2 * n)))
    spec = np.fft.rfft(x, nfft)
    e = np.fft.rfftfreq(nfft, dt) * 2 * math.pi * HBAR_EV_FS
    sigma = half_width
    spec *= np.exp(-0.5 * ((e - e_center) / sigma) ** 2)
    y = np.fft.irfft(spec, nfft)[:n]
    z = signal.hilbert(y)
    env = np.abs(z)
    # drop the filter transients at both ends
    guard = int(math.ceil(3 * HBAR_EV_FS / sigma / dt))
    lo, hi = guard, n - guard
    if hi - lo < 20:
        return None
    seg = slice(lo, hi)
    keep = env[seg] > env[seg].max() * 1e-3
    tt = t[seg][keep]
    if tt.size < 20:
        return None
    logv = np.log(env[seg][keep])
    slope, icpt = np.polyfit(tt, logv, 1)
    fitted = slope * tt + icpt
    ss = np.sum((logv - logv.mean()) ** 2)
    r2 = 1 - np.sum((logv - fitted) ** 2) / ss if ss > 0 else 0.0
    phase = np.unwrap(np.angle(z[seg][keep]))
    w = np.polyfit(tt, phase, 1)[0]
    return float(-slope), float(abs(w) * HBAR_EV_FS), float(r2), float(env[seg].max())


def extract_resonances(times_fs, series, t_start_fs=None, band=None, max_modes=6,
                       min_periods=20, noise_factor=NOISE_FACTOR, min_r2=0.9, rel_floor=1e-8):
    """Damped-mode content of a probe series after ``t_start_fs``.

    Peaks of the Hann-windowed spectrum that exceed ``noise_factor`` times the
    median in-band power are kept; each is band-filtered and its analytic
    envelope fitted: energy from the phase slope, amplitude decay rate
    ``g`` from the log-envelope slope, and ``Q = E0 / (2 hbar g)``.
    Returns ModeRecords sorted by energy (empty for incoherent input).
    """
    t = np.asarray(times_fs, dtype=float)
    x = np.asarray(series, dtype=float)
    if t.shape != x.shape or t.size < 16:
        raise DomainError("need matching time and value arrays with >= 16 samples")
    if t_start_fs is not None:
        m = t >= t_start_fs
        t, x = t[m], x[m]
    dt = t[1] - t[0]
    if not np.allclose(np.diff(t), dt, rtol=1e-6):
        raise DomainError("samples must be uniform in time")
    if not np.any(x):
        return []
    span = t[-1] - t[0]
    nyquist = math.pi * HBAR_EV_FS / dt
    band = band or (0.0, nyquist)
    if band[0] > 0 and span < min_periods * 2 * math.pi * HBAR_EV_FS / band[0]:
        raise DomainError(f"window of {span:.1f} fs is shorter than {min_periods} periods")
    nfft = 1 << int(math.ceil(math.log2(8 * x.size)))
    spec = np.fft.rfft((x - x.mean()) * np.hanning(x.size), nfft)
    e = np.fft.rfftfreq(nfft, dt) * 2 * math.pi * HBAR_EV_FS
    power = np.abs(spec) ** 2
    inband = (e >= band[0]) & (e <= band[1])
    # absolute floor from the median, relative floor against window leakage
    floor = max(noise_factor * np.median(power[inband]), rel_floor * power[inband].max())
    resolution = 2 * math.pi * HBAR_EV_FS / span
    peaks = _peaks(e, power, band, floor, 2 * resolution)[:max_modes]
    peaks = sorted(peaks, key=lambda j: e[j])
    out = []
    for n, j in enumerate(peaks):
        neigh = [abs(e[j] - e[q]) for q in peaks if q != j]
        half = min([0.35 * d for d in neigh] + [0.01])
        half = max(half, 2 * resolution)
        fit = _envelope_fit(t, x, e[j], half)
        if fit is None:
            continue
        g, energy, r2, amp = fit
        if r2 < min_r2 or not g > 0:
            continue
        out.append((energy, g, amp))
    if len(out) > 1:
        out = _joint_refine(t, x, band, out)
    recs = [ModeRecord.from_q(float(e), float(e / (2 * HBAR_EV_FS * g)), provenance="fdtd-decay",
                              amplitude=float(a)) for e, g, a in out]
    return sorted(recs, key=lambda r: r.E0)


def _basis(tt, params):
    cols = []
    for e, g in zip(params[0::2], params[1::2]):
        env = np.exp(-g * tt)
        w = e / HBAR_EV_FS
        cols += [env * np.cos(w * tt), env * np.sin(w * tt)]
    return np.column_stack(cols)


def _joint_refine(t, x, band, modes):
    """Least-squares fit of all modes at once (amplitudes projected out).

    Separate band-pass fits of close modes leak into each other; the
    joint fit removes that bias. The input is band-limited first so
    out-of-band content does not enter the model.
    """
    n = x.size
    dt = t[1] - t[0]
    nfft = 1 << int(math.ceil(math.log2(2 * n)))
    e = np.fft.rfftfreq(nfft, dt) * 2 * math.pi * HBAR_EV_FS
    lo, hi = band[0], band[1]
    margin = 0.1 * (hi - lo)
    edge = np.clip(np.minimum(e - (lo - margin), (hi + margin) - e) / margin, 0.0, 1.0)
    y = np.fft.irfft(np.fft.rfft(x, nfft) * np.sin(0.5 * math.pi * edge) ** 2, nfft)[:n]
    guard = int(math.ceil(3 * HBAR_EV_FS / margin / dt))
    # decimate to about 8 samples per period of the highest band energy
    stride = max(int(2 * math.pi * HBAR_EV_FS / (hi + margin) / 8 / dt), 1)
    tt = t[guard:n - guard:stride] - t[guard]
    yy = y[guard:n - guard:stride]
    if tt.size < 8 * len(modes):
        return modes
    p0 = np.ravel([(m[0], m[1]) for m in modes])
    lower = np.ravel([(lo, 0.0) for _ in modes])
    upper = np.ravel([(hi, np.inf) for _ in modes])
    p0 = np.clip(p0, lower + 1e-12, np.where(np.isinf(upper), p0 + 1.0, upper) - 1e-12)

    def resid(p):
        a = _basis(tt, p)
        c = np.linalg.lstsq(a, yy, rcond=None)[0]
        return a @ c - yy

    scale = np.ravel([(1e-3, max(m[1], 1e-6)) for m in modes])
    fit = optimize.least_squares(resid, p0, bounds=(lower, upper), x_scale=scale,
                                 xtol=1e-12, ftol=1e-12)
    if not fit.success:
        return modes
    p = fit.x
    c = np.linalg.lstsq(_basis(tt, p), yy, rcond=None)[0]
    out = []
    for j, m in enumerate(modes):
        amp = math.hypot(c[2 * j], c[2 * j + 1]) * math.exp(-p[2 * j + 1] * (t[guard] - t[0]))
        out.append((p[2 * j], p[2 * j + 1], amp))
    return out


# ------------------------------------------------------------- field maps

@dataclass(frozen=True)
class FieldMap:
    component: str
    r: np.ndarray            # nm
    z: np.ndarray            # nm, downward from the metal top surface
    values: np.ndarray       # (len(r), len(z)) real amplitudes
    energy: float            # eV

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (len(self.r), len(self.z)):
            raise DomainError("field map shape does not match its axes")
        if not np.all(np.isfinite(v)):
            raise DomainError("field map contains non-finite values")


def field_map(run_result, energy):
    """|E_r| map from the DFT monitor nearest ``energy``."""
    if not run_result.dft:
        raise DomainError("run carries no DFT monitors")
    e = min(run_result.dft, key=lambda k: abs(k - energy))
    return FieldMap("abs_er", run_result.dft_r, run_result.dft_z, np.abs(run_result.dft[e]), e)


def lateral_fraction(fmap, radius_nm, r_max=None):
    """Share of ``int |E_r|^2 r dr dz`` lying at ``r < radius_nm``."""
    w = fmap.values ** 2 * fmap.r[:, None]
    if r_max is not None:
        w = w[fmap.r <= r_max]
        r = fmap.r[fmap.r <= r_max]
    else:
        r = fmap.r
    total = w.sum()
    if total == 0:
        raise DomainError("field map is identically zero")
    return float(w[r < radius_nm].sum() / total)


def write_field_map(fmap, path_stem):
    """``<stem>.f32`` little-endian float32 (r-major) plus ``<stem>.json`` sidecar."""
    np.asarray(fmap.values, dtype="<f4").tofile(f"{path_stem}.f32")
    sidecar = {"component": fmap.component, "energy_ev": fmap.energy,
               "shape": list(np.shape(fmap.values)), "order": "r-major",
               "dtype": "float32-le", "units": {"r": "nm", "z": "nm", "values": "arb."},
               "r_nm": [float(v) for v in fmap.r], "z_nm": [float(v) for v in fmap.z]}
    with open(f"{path_stem}.json", "w") as fh:
        json.dump(sidecar, fh, indent=1)


def read_field_map(path_stem):
    try:
        with open(f"{path_stem}.json") as fh:
            meta = json.load(fh)
        vals = np.fromfile(f"{path_stem}.f32", dtype="<f4").reshape(meta["shape"])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"{path_stem}: {exc}") from None
    return FieldMap(meta["component"], np.array(meta["r_nm"]), np.array(meta["z_nm"]),
                    vals.astype(float), float(meta["energy_ev"]))


def write_probe_csv(path, times_fs, values):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_fs", "field"])
        for t, v in zip(times_fs, values):
            w.writerow([f"{t:.9g}", f"{v:.9g}"])


def read_probe_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != ["time_fs", "field"]:
        raise ParseError(f"{path}: expected header time_fs,field")
    try:
        data = np.array([[float(a), float(b)] for a, b in rows[1:] if a])
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return data[:, 0], data[:, 1]
