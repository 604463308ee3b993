"""Optical material models and Drude fitting.

Three model kinds are supported: a constant complex index, a Drude metal
``eps_B - Ep**2 / (E**2 + i*Gamma*E)`` and a tabulated ``(E, n, k)`` table
interpolated linearly in ``(n, k)``. The time convention is ``exp(-i w t)``
so absorbing media have ``k >= 0``.
"""

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._lsq import levenberg_marquardt
from .config import resolve_data_path
from .exceptions import (DomainError, InsufficientDataError, ParseError,
                         RangeError)


def _energies(E, allow_complex=True):
    arr = np.asarray(E)
    if np.iscomplexobj(arr):
        if not allow_complex:
            raise DomainError("tabulated materials cannot be evaluated at complex energy")
        if np.any(arr.real <= 0):
            raise DomainError("photon energy must have a positive real part")
        return arr
    arr = arr.astype(float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f"photon energy must be positive, got {E!r}")
    return arr


def _out(x):
    return complex(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class ConstantIndex:
    n: complex
    name: str = "constant"

    def __post_init__(self):
        object.__setattr__(self, "n", complex(self.n))

    def permittivity(self, E):
        E = _energies(E)
        return _out(np.full(np.shape(E), self.n ** 2, dtype=complex))

    def refractive_index(self, E):
        E = _energies(E)
        return _out(np.full(np.shape(E), self.n, dtype=complex))

    @property
    def is_metal(self):
        return self.n.real < 1 and self.n.imag > 1


@dataclass(frozen=True)
class Drude:
    """Drude metal. ``eps_b`` background permittivity, ``e_p`` plasma energy
    and ``gamma`` damping energy, both in eV."""

    eps_b: float
    e_p: float
    gamma: float
    name: str = "drude"

    def __post_init__(self):
        if not self.eps_b >= 1:
            raise DomainError(f"Drude eps_b must be >= 1, got {self.eps_b}")
        if not self.e_p > 0:
            raise DomainError(f"Drude plasma energy must be > 0, got {self.e_p}")
        if not self.gamma >= 0:
            raise DomainError(f"Drude damping must be >= 0, got {self.gamma}")

    def permittivity(self, E):
        E = _energies(E)
        return _out(self.eps_b - self.e_p ** 2 / (E * E + 1j * self.gamma * E))

    def refractive_index(self, E):
        return _out(principal_index(self.permittivity(E)))

    is_metal = True


@dataclass(frozen=True)
class Tabulated:
    energies: tuple
    indices: tuple
    name: str = "tabulated"
    _e: np.ndarray = field(init=False, repr=False, compare=False)
    _n: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        n = np.asarray(self.indices, dtype=complex)
        if e.ndim != 1 or e.size < 2 or e.size != n.size:
            raise DomainError("tabulated material needs >= 2 (energy, index) pairs")
        if np.any(np.diff(e) <= 0):
            raise DomainError("tabulated energies must be strictly increasing")
        if np.any(n.imag < 0):
            raise DomainError("tabulated extinction coefficient must be >= 0")
        object.__setattr__(self, "energies", tuple(e.tolist()))
        object.__setattr__(self, "indices", tuple(n.tolist()))
        object.__setattr__(self, "_e", e)
        object.__setattr__(self, "_n", n)

    def refractive_index(self, E):
        E = _energies(E, allow_complex=False)
        if np.any(E < self._e[0]) or np.any(E > self._e[-1]):
            raise RangeError(
                f"energy outside tabulated range [{self._e[0]}, {self._e[-1]}] eV")
        n = np.interp(E, self._e, self._n.real) + 1j * np.interp(E, self._e, self._n.imag)
        return _out(n)

    def permittivity(self, E):
        return _out(np.asarray(self.refractive_index(E)) ** 2)

    @property
    def is_metal(self):
        return bool(np.any((self._n.real < 1) & (self._n.imag > 1)))


MaterialModel = ConstantIndex | Drude | Tabulated


def principal_index(eps):
    """Square root of a permittivity on the branch with ``Im(n) >= 0``."""
    n = np.sqrt(np.asarray(eps, dtype=complex))
    flip = (n.imag < 0) | ((n.imag == 0) & (n.real < 0))
    return np.where(flip, -n, n)


def permittivity(material, E):
    return material.permittivity(E)


def refractive_index(material, E):
    return material.refractive_index(E)


def read_material_csv(path, name=None):
    """Read a ``energy_ev,n,k`` table into a :class:`Tabulated` model."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [h.strip() for h in reader.fieldnames] != ["energy_ev", "n", "k"]:
            raise ParseError(f"{path}: expected header 'energy_ev,n,k'")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            try:
                e, n, k = (float(row[c]) for c in ("energy_ev", "n", "k"))
            except (TypeError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            if not all(np.isfinite([e, n, k])):
                raise ParseError(f"{path}:{lineno}: non-finite value")
            if k < 0:
                raise ParseError(f"{path}:{lineno}: negative extinction coefficient")
            rows.append((e, complex(n, k)))
    try:
        return Tabulated(tuple(r[0] for r in rows), tuple(r[1] for r in rows),
                         name=name or path.stem)
    except DomainError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def write_material_csv(material, path):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["energy_ev", "n", "k"])
        for e, n in zip(material.energies, material.indices):
            w.writerow([repr(e), repr(n.real), repr(n.imag)])


# --------------------------------------------------------------------- fitting

def _drude_eps(params, E):
    eps_b, e_p, gamma = params
    return eps_b - e_p ** 2 / (E * E + 1j * gamma * E)


def _drude_residuals(params, E, eps, target):
    diff = _drude_eps(params, E) - eps
    if target == "real-part-only":
        return diff.real
    return np.concatenate([diff.real, diff.imag])


def _drude_jacobian(params, E, target):
    eps_b, e_p, gamma = params
    den = E * E + 1j * gamma * E
    cols = [np.ones_like(den), -2 * e_p / den, e_p ** 2 * 1j * E / den ** 2]
    J = np.stack(cols, axis=1)
    if target == "real-part-only":
        return J.real
    return np.concatenate([J.real, J.imag])


def fit_drude(table, fit_target="full-complex", init=None, xtol=1e-10, max_iter=200):
    """Fit Drude parameters to tabulated ``(energy, complex index)`` pairs.

    Returns ``(Drude, residual_norm)``. With ``fit_target="real-part-only"``
    only ``Re(eps)`` enters the objective; the damping is then left at its
    initial value since it barely affects the real part.
    """
    if fit_target not in ("real-part-only", "full-complex"):
        raise DomainError(f"unknown fit_target {fit_target!r}")
    if isinstance(table, Tabulated):
        E, n = table._e, table._n
    else:
        table = list(table)
        if len(table) < 3:
            raise InsufficientDataError(f"need at least 3 table points, got {len(table)}")
        E = np.array([t[0] for t in table], dtype=float)
        n = np.array([t[1] for t in table], dtype=complex)
    if E.size < 3:
        raise InsufficientDataError(f"need at least 3 table points, got {E.size}")
    eps = n ** 2
    init = init or Drude(9.0, 9.0, 0.07, name="gold")
    x0 = np.array([init.eps_b, init.e_p, init.gamma])

    if fit_target == "real-part-only":
        # Re(eps) is insensitive to small gamma; fit (eps_b, e_p) only
        g = init.gamma

        def fun(p):
            return _drude_residuals((p[0], p[1], g), E, eps, fit_target)

        def jac(p):
            return _drude_jacobian((p[0], p[1], g), E, fit_target)[:, :2]

        res = levenberg_marquardt(fun, x0[:2], jac=jac, lower=[1.0, 1e-12],
                                  xtol=xtol, max_iter=max_iter)
        params = (res.x[0], res.x[1], g)
    else:
        res = levenberg_marquardt(
            lambda p: _drude_residuals(p, E, eps, fit_target), x0,
            jac=lambda p: _drude_jacobian(p, E, fit_target),
            lower=[1.0, 1e-12, 0.0], xtol=xtol, max_iter=max_iter)
        params = tuple(res.x)
    model = Drude(float(params[0]), float(params[1]), float(params[2]), name=init.name)
    return model, float(np.linalg.norm(res.residual))


class DrudeRegressor(RegressorMixin, BaseEstimator):
    """Estimator wrapper around :func:`fit_drude`.

    ``fit(E, n)`` takes photon energies (eV) and complex refractive indices;
    ``predict(E)`` returns the complex permittivity of the fitted model.
    """

    def __init__(self, fit_target="full-complex", eps_b=9.0, e_p=9.0, gamma=0.07,
                 xtol=1e-10, max_iter=200):
        self.fit_target = fit_target
        self.eps_b = eps_b
        self.e_p = e_p
        self.gamma = gamma
        self.xtol = xtol
        self.max_iter = max_iter

    def fit(self, X, y):
        E = np.asarray(X, dtype=float).reshape(-1)
        n = np.asarray(y, dtype=complex).reshape(-1)
        if E.size != n.size:
            raise DomainError("X and y have different lengths")
        self.model_, self.residual_norm_ = fit_drude(
            list(zip(E, n)), self.fit_target,
            Drude(self.eps_b, self.e_p, self.gamma), self.xtol, self.max_iter)
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return np.asarray(self.model_.permittivity(np.asarray(X, dtype=float).reshape(-1)))

    def score(self, X, y):
        # R^2 on |eps| residuals; the mixin's version cannot digest complex targets
        eps = np.asarray(y, dtype=complex).reshape(-1) ** 2
        pred = self.predict(X)
        ss_res = np.sum(np.abs(pred - eps) ** 2)
        ss_tot = np.sum(np.abs(eps - eps.mean()) ** 2)
        return 1.0 - ss_res / ss_tot


def with_gamma(model, gamma):
    return replace(model, gamma=float(gamma))


# ----------------------------------------------------------- (de)serialisation

def material_to_dict(m):
    if isinstance(m, ConstantIndex):
        return {"kind": "constant", "n": m.n.real, "k": m.n.imag}
    if isinstance(m, Drude):
        return {"kind": "drude", "eps_b": m.eps_b, "e_p_ev": m.e_p, "gamma_ev": m.gamma}
    if isinstance(m, Tabulated):
        return {"kind": "tabulated", "energy_ev": list(m.energies),
                "n": [c.real for c in m.indices], "k": [c.imag for c in m.indices]}
    raise TypeError(f"not a material model: {m!r}")


def material_from_dict(d, name):
    try:
        kind = d["kind"]
        if kind == "constant":
            return ConstantIndex(complex(d["n"], d.get("k", 0.0)), name=name)
        if kind == "drude":
            return Drude(d["eps_b"], d["e_p_ev"], d["gamma_ev"], name=name)
        if kind == "tabulated":
            return Tabulated(tuple(d["energy_ev"]),
                             tuple(complex(a, b) for a, b in zip(d["n"], d["k"])), name=name)
        if kind == "csv":
            return read_material_csv(resolve_data_path(d["path"]), name=name)
    except (KeyError, TypeError, DomainError) as exc:
        raise ParseError(f"material {name!r}: {exc}") from exc
    raise ParseError(f"material {name!r}: unknown kind {kind!r}")
