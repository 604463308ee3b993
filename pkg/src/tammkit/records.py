"""Result records shared between the planar, confined-mode and FDTD solvers."""

from dataclasses import dataclass

from .exceptions import DomainError

PROVENANCES = ("tmm-dip", "tmm-pole", "fdtd-decay", "analytic")


@dataclass(frozen=True)
class ModeRecord:
    """A resonance. ``Q`` is always ``E0 / fwhm``."""

    E0: float
    fwhm: float
    provenance: str = "analytic"
    labels: tuple | None = None
    amplitude: float | None = None      # spectral weight, when the solver reports one

    def __post_init__(self):
        if not self.fwhm > 0:
            raise DomainError(f"fwhm must be > 0, got {self.fwhm}")
        if not self.E0 > 0:
            raise DomainError(f"E0 must be > 0, got {self.E0}")
        if self.provenance not in PROVENANCES:
            raise DomainError(f"unknown provenance {self.provenance!r}")

    @property
    def Q(self):
        return self.E0 / self.fwhm

    @classmethod
    def from_q(cls, E0, Q, **kw):
        return cls(E0, E0 / Q, **kw)
