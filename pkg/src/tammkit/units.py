"""Energy/wavelength conversions. Lengths are nm, energies eV throughout."""

import numpy as np

from .exceptions import DomainError

#: h*c in eV*nm
HC_EV_NM = 1239.8420
#: hbar*c in eV*nm
HBARC_EV_NM = HC_EV_NM / (2.0 * np.pi)
#: hbar in eV*fs
HBAR_EV_FS = 0.6582119569
#: speed of light in nm/fs
C_NM_PER_FS = 299.792458


def _check_positive(x, what):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f"{what} must be positive and finite, got {x!r}")
    return arr


def energy_to_vacuum_wavelength(energy_ev):
    """Vacuum wavelength in nm of a photon of ``energy_ev``."""
    e = _check_positive(energy_ev, "photon energy")
    out = HC_EV_NM / e
    return float(out) if out.ndim == 0 else out


def wavelength_to_energy(wavelength_nm):
    lam = _check_positive(wavelength_nm, "wavelength")
    out = HC_EV_NM / lam
    return float(out) if out.ndim == 0 else out


def vacuum_wavenumber(energy_ev):
    """k0 = 2*pi/lambda in nm^-1. Accepts complex energies (no domain check)."""
    return np.asarray(energy_ev) / HBARC_EV_NM


def fwhm_to_sigma(fwhm):
    return fwhm / (2.0 * np.sqrt(2.0 * np.log(2.0)))
