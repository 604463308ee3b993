"""Leapfrog update kernels for the body-of-revolution Yee grid.

Array layout (index [i, k], r = i*dr, z = k*dz):

    er (Nr,   Nz+1)  at (i+1/2, k)      hr (Nr+1, Nz)    at (i, k+1/2)
    ep (Nr+1, Nz+1)  at (i, k)          hp (Nr,   Nz)    at (i+1/2, k+1/2)
    ez (Nr+1, Nz)    at (i, k+1/2)      hz (Nr,   Nz+1)  at (i+1/2, k)

Fields vary as cos(m phi) for er, ez, hp and sin(m phi) for ep, hr, hz.
Units: c = eps0 = mu0 = 1, lengths and time in nm. The outer boundary is PEC.
CPML auxiliary arrays are only touched where the 1-D flags are set.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def update_h(er, ep, ez, hr, hp, hz, m, dt, dr, dz,
             ikr_h, ikz_h, pr_h, pz_h, br_h, ar_h, bz_h, az_h,
             psi_hr_z, psi_hp_z, psi_hp_r, psi_hz_r,
             ika_e, ba_e, aa_e, ika_h, ba_h, aa_h, psi_hr_a, psi_hz_a):
    nr = hp.shape[0]
    nz = hp.shape[1]
    # h_r at (i, k+1/2); axis value stays zero for every m
    for i in range(1, nr):
        r = i * dr
        for k in range(nz):
            d = (ep[i, k + 1] - ep[i, k]) / dz
            if pz_h[k]:
                psi_hr_z[i, k] = bz_h[k] * psi_hr_z[i, k] + az_h[k] * d
                d = d * ikz_h[k] + psi_hr_z[i, k]
            c = m * ez[i, k] / r
            if ba_e[i] != 0.0:
                psi_hr_a[i, k] = ba_e[i] * psi_hr_a[i, k] + aa_e[i] * c
                c = c * ika_e[i] + psi_hr_a[i, k]
            hr[i, k] += dt * (c + d)
    # h_phi at (i+1/2, k+1/2)
    for i in range(nr):
        for k in range(nz):
            dzr = (er[i, k + 1] - er[i, k]) / dz
            if pz_h[k]:
                psi_hp_z[i, k] = bz_h[k] * psi_hp_z[i, k] + az_h[k] * dzr
                dzr = dzr * ikz_h[k] + psi_hp_z[i, k]
            drz = (ez[i + 1, k] - ez[i, k]) / dr
            if pr_h[i]:
                psi_hp_r[i, k] = br_h[i] * psi_hp_r[i, k] + ar_h[i] * drz
                drz = drz * ikr_h[i] + psi_hp_r[i, k]
            hp[i, k] += dt * (drz - dzr)
    # h_z at (i+1/2, k); k = 0 and Nz are normal to the PEC walls
    for i in range(nr):
        rh = (i + 0.5) * dr
        for k in range(1, nz):
            d = (ep[i + 1, k] - ep[i, k]) / dr
            if pr_h[i]:
                psi_hz_r[i, k] = br_h[i] * psi_hz_r[i, k] + ar_h[i] * d
                d = d * ikr_h[i] + psi_hz_r[i, k]
            c = (ep[i + 1, k] + ep[i, k]) / (2.0 * rh) + m * er[i, k] / rh
            if pr_h[i]:
                psi_hz_a[i, k] = ba_h[i] * psi_hz_a[i, k] + aa_h[i] * c
                c = c * ika_h[i] + psi_hz_a[i, k]
            hz[i, k] -= dt * (d + c)


@njit(cache=True)
def update_e(er, ep, ez, hr, hp, hz, m, dr, dz, cer, cep, cez,
             ikr_e, ikz_e, pr_e, pz_e, br_e, ar_e, bz_e, az_e,
             psi_er_z, psi_ep_z, psi_ep_r, psi_ez_r,
             ika_e, ba_e, aa_e, ika_h, ba_h, aa_h, pr_h, psi_er_a, psi_ez_a):
    nr = hp.shape[0]
    nz = hp.shape[1]
    # e_r at (i+1/2, k), k = 0 and Nz tangential to PEC
    for i in range(nr):
        rh = (i + 0.5) * dr
        for k in range(1, nz):
            d = (hp[i, k] - hp[i, k - 1]) / dz
            if pz_e[k]:
                psi_er_z[i, k] = bz_e[k] * psi_er_z[i, k] + az_e[k] * d
                d = d * ikz_e[k] + psi_er_z[i, k]
            c = m * hz[i, k] / rh
            if pr_h[i]:
                psi_er_a[i, k] = ba_h[i] * psi_er_a[i, k] + aa_h[i] * c
                c = c * ika_h[i] + psi_er_a[i, k]
            er[i, k] += cer[i, k] * (c - d)
    # e_phi at (i, k); zero on the axis and on the walls
    for i in range(1, nr):
        for k in range(1, nz):
            dzh = (hr[i, k] - hr[i, k - 1]) / dz
            if pz_e[k]:
                psi_ep_z[i, k] = bz_e[k] * psi_ep_z[i, k] + az_e[k] * dzh
                dzh = dzh * ikz_e[k] + psi_ep_z[i, k]
            drh = (hz[i, k] - hz[i - 1, k]) / dr
            if pr_e[i]:
                psi_ep_r[i, k] = br_e[i] * psi_ep_r[i, k] + ar_e[i] * drh
                drh = drh * ikr_e[i] + psi_ep_r[i, k]
            ep[i, k] += cep[i, k] * (dzh - drh)
    # e_z at (i, k+1/2)
    for i in range(1, nr):
        r = i * dr
        for k in range(nz):
            d = (hp[i, k] - hp[i - 1, k]) / dr
            if pr_e[i]:
                psi_ez_r[i, k] = br_e[i] * psi_ez_r[i, k] + ar_e[i] * d
                d = d * ikr_e[i] + psi_ez_r[i, k]
            c = (hp[i, k] + hp[i - 1, k]) / (2.0 * r) - m * hr[i, k] / r
            if pr_e[i]:
                psi_ez_a[i, k] = ba_e[i] * psi_ez_a[i, k] + aa_e[i] * c
                c = c * ika_e[i] + psi_ez_a[i, k]
            ez[i, k] += cez[i, k] * (d + c)
    if m == 0:
        # on-axis Ampere loop of radius dr/2
        for k in range(nz):
            ez[0, k] += cez[0, k] * 4.0 * hp[0, k] / dr


@njit(cache=True)
def drude_current(field, ii, kk, bj, cur, kj):
    for n in range(ii.size):
        cur[n] = kj * cur[n] + bj[n] * field[ii[n], kk[n]]


@njit(cache=True)
def drude_apply(field, coef, ii, kk, cur):
    for n in range(ii.size):
        field[ii[n], kk[n]] -= coef[ii[n], kk[n]] * cur[n]


@njit(cache=True)
def dft_accumulate(field, re, im, cos_w, sin_w, k0, k1):
    nf = cos_w.size
    for f in range(nf):
        c = cos_w[f]
        s = sin_w[f]
        for i in range(field.shape[0]):
            for k in range(k0, k1):
                v = field[i, k]
                re[f, i, k - k0] += v * c
                im[f, i, k - k0] += v * s


def cpml_coefficients(sigma, kappa, alpha, dt):
    """Recursive-convolution coefficients ``(b, a)`` for ``s = kappa + sigma/(alpha - i w)``."""
    b = np.exp(-(sigma / kappa + alpha) * dt)
    denom = sigma * kappa + kappa * kappa * alpha
    safe = np.where(denom > 0, denom, 1.0)
    a = np.where(denom > 0, sigma * (b - 1.0) / safe, 0.0)
    return b, a


def cpml_profile(n_cells, pml, d, dt, order, kappa_max, alpha_max, n_medium, reflection,
                 staggered, high_side=True, low_side=True, radial_average=False):
    """1-D CPML coefficients at integer (``staggered=False``) or half-integer
    positions of a line with ``n_cells`` cells.

    With ``radial_average`` the profile is the running mean ``(1/r) int_0^r``
    of the stretching, which is what the ``1/r`` terms of the cylindrical
    equations see. Returns ``(flag, inv_kappa, b, a)`` sized
    ``n_cells + (0 if staggered else 1)``.
    """
    size = n_cells if staggered else n_cells + 1
    pos = np.arange(size) + (0.5 if staggered else 0.0)
    depth = np.zeros(size)
    if low_side:
        depth = np.maximum(depth, (pml - pos) / pml)
    if high_side:
        depth = np.maximum(depth, (pos - (n_cells - pml)) / pml)
    depth = np.clip(depth, 0.0, 1.0)
    thick = pml * d
    sigma_max = -(order + 1) * np.log(reflection) / (2.0 * thick * n_medium)
    if radial_average:
        r = np.maximum(pos * d, 1e-30)
        shape = thick * depth ** (order + 1) / ((order + 1) * r)
    else:
        shape = depth ** order
    sigma = sigma_max * shape
    kappa = 1.0 + (kappa_max - 1.0) * shape
    alpha = alpha_max * (1.0 - depth)
    flag = depth > 0
    b, a = cpml_coefficients(sigma, kappa, alpha, dt)
    return flag, 1.0 / kappa, np.where(flag, b, 0.0), a
