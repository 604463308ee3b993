"""Characteristic-matrix transfer-matrix engine.

Conventions: fields vary as ``exp(i(kx*x + kz*z - w*t))`` with ``z`` pointing
from the ambient into the stack. TE uses the tangential admittance
``q = kz/k0``; TM uses ``q = eps*k0/kz`` so that for both polarisations
``H_t = q * E_t`` for a forward wave (H in units of 1/Z0).
"""

from dataclasses import dataclass

import numpy as np

from ..exceptions import DomainError, SamplingError, StructuralError
from ..units import vacuum_wavenumber

POLARIZATIONS = ("TE", "TM")


@dataclass(frozen=True)
class PlaneWaveQuery:
    E: float
    kx: float = 0.0
    polarization: str = "TE"

    def __post_init__(self):
        if not self.E > 0:
            raise DomainError("query energy must be > 0")
        if not self.kx >= 0:
            raise DomainError("in-plane wavevector must be >= 0")
        if self.polarization not in POLARIZATIONS:
            raise DomainError(f"polarization must be TE or TM, got {self.polarization!r}")


def _check_pol(pol):
    if pol not in POLARIZATIONS:
        raise DomainError(f"polarization must be TE or TM, got {pol!r}")


def _kz(eps, k0, kx):
    """Longitudinal wavevector on the ``Im(kz) >= 0`` branch."""
    if np.all(np.asarray(kx) == 0):
        kz = np.sqrt(eps + 0j) * k0
    else:
        kz = np.sqrt(eps * k0 * k0 - kx * kx + 0j)
    flip = (kz.imag < 0) | ((kz.imag == 0) & (kz.real < 0))
    return np.where(flip, -kz, kz)


def _kz_continued(eps, k0, kx, eps_ref, k0_ref):
    """kz at complex energy, on the branch continuous with the physical
    branch at the real energy ``k0_ref`` (used for pole searches)."""
    kz = _kz(eps, k0, kx)
    ref = _kz(eps_ref, k0_ref, kx)
    return np.where(np.abs(kz - ref) <= np.abs(-kz - ref), kz, -kz)


def _admittance(eps, k0, kz, pol):
    if pol == "TE":
        return kz / k0
    return eps * k0 / kz


def _eval_eps(material, E):
    return np.asarray(material.permittivity(E), dtype=complex)


def _prepare(stack, E, kx, pol):
    _check_pol(pol)
    E = np.asarray(E)
    if np.any(np.asarray(kx) < 0):
        raise DomainError("in-plane wavevector must be >= 0")
    k0 = vacuum_wavenumber(E)
    complex_e = np.iscomplexobj(E)
    eps_layers = [_eval_eps(layer.material, E) for layer in stack.layers]
    eps0 = _eval_eps(stack.ambient, E)
    eps_s = _eval_eps(stack.substrate, E)
    if complex_e:
        Er = E.real
        k0r = vacuum_wavenumber(Er)
        kz0 = _kz_continued(eps0, k0, kx, _eval_eps(stack.ambient, Er), k0r)
        kzs = _kz_continued(eps_s, k0, kx, _eval_eps(stack.substrate, Er), k0r)
    else:
        kz0 = _kz(eps0, k0, kx)
        kzs = _kz(eps_s, k0, kx)
    q0 = _admittance(eps0, k0, kz0, pol)
    qs = _admittance(eps_s, k0, kzs, pol)
    kz_layers = [_kz(eps, k0, kx) for eps in eps_layers]
    return k0, eps_layers, kz_layers, q0, qs, eps0, kz0, eps_s, kzs


def _solve(stack, E, kx=0.0, pol="TE"):
    """Propagate (E_t, H_t) from the substrate to the top of the stack.

    Returns ``(q0, qs, B, C, log_scale)`` where ``(B, C)`` are the top
    tangential fields for a transmitted wave of amplitude ``exp(-log_scale)``.
    The pair is renormalised after every layer so 40-pair stacks with
    evanescent layers cannot overflow.
    """
    k0, eps_l, kz_l, q0, qs, *_ = _prepare(stack, E, kx, pol)
    shape = np.broadcast(np.asarray(E), np.asarray(kx)).shape
    e_t = np.ones(shape, dtype=complex)
    h_t = np.broadcast_to(qs, shape).astype(complex)
    log_scale = np.zeros(shape)
    for layer, eps, kz in zip(reversed(stack.layers), reversed(eps_l), reversed(kz_l)):
        q = _admittance(eps, k0, kz, pol)
        delta = kz * layer.thickness
        c, s = np.cos(delta), np.sin(delta)
        e_t, h_t = c * e_t - 1j * s / q * h_t, -1j * q * s * e_t + c * h_t
        norm = np.maximum(np.abs(e_t), np.abs(h_t))
        norm = np.where(norm > 0, norm, 1.0)
        e_t, h_t = e_t / norm, h_t / norm
        log_scale += np.log(norm)
    return q0, qs, e_t, h_t, log_scale


def reflection_coefficient(stack, E, kx=0.0, polarization="TE"):
    """Complex amplitude reflection coefficient (tangential E)."""
    q0, _, B, C, _ = _solve(stack, E, kx, polarization)
    return (q0 * B - C) / (q0 * B + C)


def reflectivity(stack, E, kx=0.0, polarization="TE"):
    """Return ``(r, R)``; vectorised over ``E`` and ``kx`` by broadcasting."""
    if np.iscomplexobj(np.asarray(E)):
        raise DomainError("reflectivity needs a real energy; use the pole search for complex E")
    if np.any(np.asarray(E) <= 0):
        raise DomainError("photon energy must be > 0")
    if np.any(np.abs(np.imag(stack.ambient.refractive_index(np.ravel(E)))) > 0):
        raise StructuralError("ambient medium must be lossless for R to be defined")
    r = reflection_coefficient(stack, E, kx, polarization)
    R = np.abs(r) ** 2
    if np.ndim(R) == 0:
        return complex(r), float(R)
    return r, R


def transmittance(stack, E, kx=0.0, polarization="TE"):
    """Power transmittance into the substrate (zero for evanescent substrates)."""
    q0, qs, B, C, log_scale = _solve(stack, E, kx, polarization)
    T = 4 * q0.real * qs.real / np.abs(q0 * B + C) ** 2 * np.exp(-2 * log_scale)
    return float(T) if np.ndim(T) == 0 else T


def reflectivity_map(stack, energies, kxs, polarization="TE"):
    """``R[i, j]`` at ``(energies[i], kxs[j])``."""
    energies = np.asarray(energies, dtype=float)
    kxs = np.asarray(kxs, dtype=float)
    for name, g in (("energy", energies), ("kx", kxs)):
        if g.ndim != 1 or g.size == 0:
            raise DomainError(f"{name} grid must be a non-empty 1D array")
        if np.any(np.diff(g) <= 0):
            raise DomainError(f"{name} grid must be strictly increasing")
    _, R = reflectivity(stack, energies[:, None], kxs[None, :], polarization)
    return np.asarray(R).reshape(energies.size, kxs.size)


# --------------------------------------------------------------- field profile

@dataclass(frozen=True)
class FieldProfile1D:
    z: np.ndarray
    intensity: np.ndarray
    eps: np.ndarray
    layer: np.ndarray          # -1 ambient, len(layers) substrate
    polarization: str
    query: PlaneWaveQuery
    interfaces: np.ndarray
    continuity_error: float
    # per layer (a_forward, a_backward, kz, thickness), normalised like
    # ``intensity``: E(u) = a_f exp(i kz u) + a_b exp(-i kz u), u = s - d
    amplitudes: tuple = ()

    def region(self, start, stop):
        m = (self.z >= start) & (self.z < stop)
        return self.z[m], self.intensity[m]


def field_profile(stack, q, dz=1.0, above=0.0, below=0.0, check_continuity=True):
    """|E|^2 along z for a unit plane wave incident from the ambient.

    ``z`` is measured from the top interface, positive into the stack;
    ``above``/``below`` extend the sampling into the semi-infinite media.
    The result is max-normalised.
    """
    if not dz > 0:
        raise SamplingError("dz must be > 0")
    if stack.layers and dz > min(layer.thickness for layer in stack.layers) / 4:
        raise SamplingError(
            f"dz={dz} nm exceeds a quarter of the thinnest layer "
            f"({min(layer.thickness for layer in stack.layers):.3g} nm)")
    pol = q.polarization
    E = float(q.E)
    kx = float(q.kx)
    k0, eps_l, kz_l, q0, qs, eps0, kz0, eps_s, kzs = _prepare(stack, E, kx, pol)

    zs, ex, hy, epss, idx = [], [], [], [], []

    # substrate: transmitted wave of unit tangential amplitude at the bottom
    total = stack.total_thickness
    if below > 0:
        s = np.arange(dz, below + dz / 2, dz)
        ph = np.exp(1j * kzs * s)
        zs.append(total + s)
        ex.append(ph)
        hy.append(qs * ph)
        epss.append(np.full(s.shape, eps_s))
        idx.append(np.full(s.shape, len(stack.layers)))
    e_b, h_b = 1.0 + 0j, complex(qs)
    tops = stack.interfaces
    worst = 0.0
    per_layer = []
    amps = []
    for j in range(len(stack.layers) - 1, -1, -1):
        d = stack.layers[j].thickness
        eps, kz = complex(eps_l[j]), complex(kz_l[j])
        qj = complex(_admittance(eps, k0, kz, pol))
        a_f = 0.5 * (e_b + h_b / qj)      # forward amplitude at the layer bottom
        a_b = 0.5 * (e_b - h_b / qj)      # backward amplitude at the layer bottom
        n_s = max(int(np.ceil(d / dz)), 1)
        s = np.linspace(0.0, d, n_s, endpoint=False)
        u = s - d
        fwd, bwd = np.exp(1j * kz * u), np.exp(-1j * kz * u)
        e_s = a_f * fwd + a_b * bwd
        h_s = qj * (a_f * fwd - a_b * bwd)
        per_layer.append((tops[j] + s, e_s, h_s, np.full(s.shape, eps), np.full(s.shape, j)))
        amps.append((a_f, a_b, kz, d))
        # matrix propagation to the layer top for the continuity cross-check
        delta = kz * d
        c, sn = np.cos(delta), np.sin(delta)
        e_top = c * e_b - 1j * sn / qj * h_b
        h_top = -1j * qj * sn * e_b + c * h_b
        scale = max(abs(e_top), abs(h_top))
        worst = max(worst, abs(e_s[0] - e_top) / scale, abs(h_s[0] - h_top) / scale)
        e_b, h_b = e_top, h_top
    for chunk in per_layer:
        zs.insert(0, chunk[0])
        ex.insert(0, chunk[1])
        hy.insert(0, chunk[2])
        epss.insert(0, chunk[3])
        idx.insert(0, chunk[4])
    if check_continuity and worst > 1e-8:
        raise StructuralError(f"tangential field continuity violated ({worst:.2e})")

    # ambient: incident + reflected
    a_inc = 0.5 * (e_b + h_b / q0)
    a_ref = 0.5 * (e_b - h_b / q0)
    if above > 0 or not stack.layers:
        s = np.arange(-above, 0.0 + (0.0 if stack.layers else dz / 2), dz)
        if s.size:
            e_s = a_inc * np.exp(1j * kz0 * s) + a_ref * np.exp(-1j * kz0 * s)
            h_s = q0 * (a_inc * np.exp(1j * kz0 * s) - a_ref * np.exp(-1j * kz0 * s))
            zs.insert(0, s)
            ex.insert(0, e_s)
            hy.insert(0, h_s)
            epss.insert(0, np.full(s.shape, eps0))
            idx.insert(0, np.full(s.shape, -1))

    z = np.concatenate(zs) if zs else np.zeros(0)
    e_t = np.concatenate(ex) / a_inc
    h_t = np.concatenate(hy) / a_inc
    eps_z = np.concatenate(epss)
    inten = np.abs(e_t) ** 2
    if pol == "TM" and kx > 0:
        inten = inten + np.abs(kx * h_t / (k0 * eps_z)) ** 2
    peak = inten.max() if inten.size else 1.0
    scale = 1.0 / (a_inc * np.sqrt(peak))
    amps = tuple((a_f * scale, a_b * scale, kz, d) for a_f, a_b, kz, d in reversed(amps))
    return FieldProfile1D(z, inten / peak, eps_z, np.concatenate(idx), pol, q,
                          tops, worst, amps)
