"""Resonance location, Q extraction and planar Tamm dispersion."""

import math

import numpy as np
from scipy.optimize import brentq, curve_fit

from ..config import DEFAULTS
from ..exceptions import (CalibrationError, ConvergenceError, DomainError,
                          EmptyDispersionError, InsufficientDataError)
from ..materials import with_gamma
from ..records import ModeRecord
from .engine import reflection_coefficient, reflectivity

METHODS = ("lorentzian-dip", "complex-pole")


def default_window(stack, margin=0.004):
    """Stopband interior, trimmed by ``margin`` eV on both sides."""
    try:
        lo, hi = stack.metadata["stopband_ev"]
    except KeyError:
        raise DomainError("stack carries no stopband metadata; pass an explicit window") from None
    return lo + margin, hi - margin


def _lorentz(E, A, E0, w, c):
    return A / (1.0 + 4.0 * ((E - E0) / w) ** 2) + c


def _half_width(E, A, i_min):
    """Full width at half depth of the absorption peak ``A`` around ``i_min``."""
    half = 0.5 * (A[i_min] + min(A[0], A[-1]))
    j = i_min
    while j > 0 and A[j] > half:
        j -= 1
    k = i_min
    while k < A.size - 1 and A[k] > half:
        k += 1
    if j == 0 or k == A.size - 1:
        return None

    def cross(a, b):
        return E[a] + (half - A[a]) * (E[b] - E[a]) / (A[b] - A[a])
    return cross(k - 1, k) - cross(j, j + 1)


def _complex_pole(stack, seed, kx, pol, tol=1e-12, max_iter=60):
    """Newton iteration on ``1/r(E) = 0`` in the complex energy plane."""
    E = complex(seed)
    for _ in range(max_iter):
        g = 1.0 / reflection_coefficient(stack, np.array([E]), kx, pol)[0]
        h = 1e-7
        dg = (1.0 / reflection_coefficient(stack, np.array([E + h]), kx, pol)[0] - g) / h
        step = g / dg
        E -= step
        if not E.real > 0:
            raise ConvergenceError("complex pole search left the physical half-plane", best=E)
        if E.imag > 0:
            E = complex(E.real, -abs(E.imag))
        if abs(step) < tol:
            return E
    raise ConvergenceError("complex pole search did not converge", best=E)


def find_resonance(stack, window=None, kx=0.0, polarization="TE", method="lorentzian-dip",
                   threshold=None, coarse_step=None, tol=None):
    """Locate a reflectivity dip inside ``window`` and return a ModeRecord.

    Returns ``None`` when the deepest interior minimum is not below
    ``threshold`` (default 0.98): that is the "no Tamm mode" outcome.
    """
    if method not in METHODS:
        raise DomainError(f"method must be one of {METHODS}")
    cfg = DEFAULTS["tmm"]
    threshold = cfg["dip_threshold"] if threshold is None else threshold
    step = coarse_step or cfg["coarse_step_ev"]
    tol = tol or cfg["e0_tol_ev"]
    lo, hi = window if window is not None else default_window(stack)
    if not 0 < lo < hi:
        raise DomainError(f"bad energy window ({lo}, {hi})")

    grid = np.arange(lo, hi + step / 2, step)
    _, R = reflectivity(stack, grid, kx, polarization)
    i = int(np.argmin(R))
    if R[i] >= threshold or i == 0 or i == grid.size - 1:
        return None
    # two bisection-style refinements of the bracketing interval
    a, b = grid[i - 1], grid[i + 1]
    for _ in range(2):
        sub = np.linspace(a, b, 21)
        _, Rs = reflectivity(stack, sub, kx, polarization)
        k = int(np.argmin(Rs))
        a, b = sub[max(k - 1, 0)], sub[min(k + 1, sub.size - 1)]
    e_min = 0.5 * (a + b)

    # width estimate from a local grid, widened until both half points lie inside
    span = 10 * step
    for _ in range(8):
        loc = np.linspace(max(e_min - span, lo), min(e_min + span, hi), 801)
        _, Rl = reflectivity(stack, loc, kx, polarization)
        fw = _half_width(loc, 1 - Rl, int(np.argmin(Rl)))
        if fw is not None:
            break
        span *= 2
    if fw is None:
        return None

    if method == "complex-pole":
        pole = _complex_pole(stack, complex(e_min, -fw / 2), kx, polarization)
        return ModeRecord(pole.real, 2 * abs(pole.imag), provenance="tmm-pole")

    fit_e = np.linspace(e_min - 3 * fw, e_min + 3 * fw, 241)
    _, Rf = reflectivity(stack, fit_e, kx, polarization)
    A = 1 - Rf
    p0 = (A.max() - A.min(), e_min, fw, A.min())
    try:
        popt, _ = curve_fit(_lorentz, fit_e, A, p0=p0, xtol=1e-12, maxfev=5000)
    except RuntimeError as exc:
        raise ConvergenceError(f"Lorentzian fit failed: {exc}", best=p0) from exc
    E0, w = float(popt[1]), abs(float(popt[2]))
    if abs(E0 - e_min) > max(fw, tol):
        raise ConvergenceError("Lorentzian centre drifted away from the dip", best=popt)
    return ModeRecord(E0, w, provenance="tmm-dip")


def tamm_energy_estimate(E_dbr, n1, n2, eps_b, e_plasma):
    """Closed-form Tamm energy ``E_DBR / (1 + eta*E_DBR/E_p)`` with
    ``eta = 2|n1 - n2| / (pi*sqrt(eps_b))``."""
    for v in (E_dbr, n1, n2, eps_b, e_plasma):
        if not v > 0:
            raise DomainError("all inputs to the Tamm estimate must be positive")
    eta = 2 * abs(n1 - n2) / (math.pi * math.sqrt(eps_b))
    return E_dbr / (1 + eta * E_dbr / e_plasma)


def dispersion(stack, kxs, polarization="TE", window=None, method="complex-pole"):
    """Track the Tamm resonance over increasing ``kx``.

    Returns ``[(kx, ModeRecord | None), ...]``; ``None`` marks a gap where the
    mode left the search window.
    """
    kxs = np.asarray(kxs, dtype=float)
    if kxs.ndim != 1 or kxs.size == 0 or np.any(np.diff(kxs) <= 0) or kxs[0] < 0:
        raise DomainError("kx grid must be non-empty, non-negative and increasing")
    lo, hi = window if window is not None else default_window(stack)
    first = find_resonance(stack, (lo, hi), 0.0, polarization, method)
    if first is None:
        raise EmptyDispersionError("no resonance at kx = 0")
    out = []
    prev = []
    for k in kxs:
        if k == 0:
            rec = first
        else:
            guess = prev[-1][1] if prev else first.E0
            if len(prev) >= 2:
                (k1, e1), (k2, e2) = prev[-2], prev[-1]
                guess = e2 + (e2 - e1) * (k - k2) / (k2 - k1)
            half = max(10 * first.fwhm, 0.004)
            win = (max(guess - half, lo), guess + half + 0.5 * abs(guess - (prev[-1][1] if prev else guess)))
            try:
                rec = find_resonance(stack, win, float(k), polarization, method)
            except ConvergenceError:
                rec = None
        out.append((float(k), rec))
        if rec is not None:
            prev.append((float(k), rec.E0))
    return out


def fit_parabolic_dispersion(disp, k_max_fraction=1.0):
    """Least-squares ``E(k) = E0 + C k^2``; returns ``(E0, C, rms_residual)``."""
    pts = [(k, r.E0) for k, r in disp if r is not None]
    if not pts:
        raise InsufficientDataError("empty dispersion")
    k_all = np.array([p[0] for p in pts])
    kmax = k_max_fraction * np.max([k for k, _ in disp])
    sel = k_all <= kmax if k_max_fraction > 0 else np.zeros(k_all.size, bool)
    if sel.sum() < 5:
        raise InsufficientDataError(f"need >= 5 dispersion points below k_max, got {int(sel.sum())}")
    k = k_all[sel]
    e = np.array([p[1] for p in pts])[sel]
    A = np.stack([np.ones_like(k), k * k], axis=1)
    coef, *_ = np.linalg.lstsq(A, e, rcond=None)
    resid = e - A @ coef
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(resid ** 2)))


def planar_q(stack, window=None, method="complex-pole"):
    rec = find_resonance(stack, window, 0.0, "TE", method)
    return None if rec is None else rec.Q


def calibrate_gold(target_Q, target_E, drude, stack_factory=None, free=("gamma",),
                   method="complex-pole", rtol=1e-3, gamma_max=2.0):
    """Tune the Drude damping so the planar Tamm Q equals ``target_Q``.

    ``stack_factory(metal)`` builds the planar structure (default: the
    config-default Tamm stack). Returns ``(Drude, index_at_target_E)``.
    """
    if tuple(free) != ("gamma",):
        raise DomainError("only the damping can be calibrated")
    if not target_Q > 0:
        raise DomainError("target Q must be positive")
    if stack_factory is None:
        from ..stack import default_tamm_stack

        def stack_factory(metal):
            return default_tamm_stack(metal=metal)

    ref = find_resonance(stack_factory(drude), method="complex-pole")
    if ref is None:
        raise CalibrationError("no planar Tamm resonance for the initial Drude model")
    seed = [complex(ref.E0, -ref.fwhm / 2)]

    def q_of(gamma):
        pole = _complex_pole(stack_factory(with_gamma(drude, gamma)), seed[0], 0.0, "TE")
        seed[0] = pole
        return pole.real / (2 * abs(pole.imag))

    q_floor = q_of(0.0)
    if target_Q >= q_floor:
        raise CalibrationError(
            f"target Q={target_Q:g} exceeds the lossless-metal limit Q={q_floor:.4g}")
    q_now = q_of(drude.gamma)
    if abs(q_now - target_Q) <= 1e-9 * target_Q:
        g = drude.gamma
    else:
        lo, hi = 0.0, max(drude.gamma, 1e-3)
        while q_of(hi) > target_Q:
            lo, hi = hi, 2 * hi
            if hi > gamma_max:
                raise CalibrationError("could not bracket the target Q")
        g = brentq(lambda x: q_of(x) - target_Q, lo, hi, xtol=1e-14, rtol=1e-13)
    model = with_gamma(drude, g)
    q_final = q_of(g)
    if abs(q_final - target_Q) > 0.01 * target_Q:
        raise CalibrationError(f"calibrated Q={q_final:.4g} misses target {target_Q:g}")
    return model, complex(model.refractive_index(target_E))


def thickness_sweep(thicknesses, stack_factory=None, method="lorentzian-dip", window=None):
    """Resonance (or ``None``) for each metal thickness in nm.

    ``stack_factory(t)`` builds the structure (default: config-default Tamm
    stack with the constant gold index). Returns ``[(t, ModeRecord | None)]``.
    """
    if stack_factory is None:
        from ..stack import default_tamm_stack
        stack_factory = default_tamm_stack
    return [(float(t), find_resonance(stack_factory(float(t)), window, method=method))
            for t in thicknesses]


def threshold_thickness(sweep):
    """Smallest thickness from which every thicker sample shows a mode; ``None`` if the thickest has none."""
    found = None
    for t, rec in sorted(sweep, key=lambda x: -x[0]):
        if rec is None:
            break
        found = t
    return found
