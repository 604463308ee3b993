"""Photon-counting decay traces: simulation and mono-exponential fitting.

The model for the expected counts in a bin ``[a, b)`` is

    N * [G(b - t0) - G(a - t0)] + B

where ``G`` is the cumulative distribution of an exponential lifetime ``tau``
blurred by a Gaussian instrument response of width ``sigma`` (an
exponentially modified Gaussian), ``N`` the number of decay photons and ``B``
a flat background per bin.
"""

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._lsq import levenberg_marquardt
from .exceptions import ConvergenceError, DomainError, NoSignalError, ParseError
from .units import fwhm_to_sigma


@dataclass(frozen=True)
class DecayTrace:
    bin_width: float        # ns
    counts: np.ndarray      # int64, one per bin
    t0: float = 0.0         # ns, excitation reference

    def __post_init__(self):
        c = np.asarray(self.counts)
        if not self.bin_width > 0:
            raise DomainError("bin width must be > 0")
        if c.ndim != 1 or c.size == 0:
            raise DomainError("counts must be a non-empty 1-D array")
        if np.any(c < 0):
            raise DomainError("counts must be non-negative")
        object.__setattr__(self, "counts", c.astype(np.int64))

    @property
    def window(self):
        return self.bin_width * self.counts.size

    @property
    def edges(self):
        return self.bin_width * np.arange(self.counts.size + 1)

    @property
    def times(self):
        """Bin centres in ns."""
        return self.bin_width * (np.arange(self.counts.size) + 0.5)


@dataclass(frozen=True)
class DecayFitResult:
    tau: float
    amplitude: float            # decay photons N
    background: float           # counts / bin
    tau_uncertainty: float
    reduced_residual: float
    window: tuple               # (start_ns, end_ns)
    residuals: np.ndarray | None = None
    n_iter: int = 0

    def to_dict(self):
        return {"tau_ns": self.tau, "tau_err_ns": self.tau_uncertainty,
                "amplitude": self.amplitude, "background": self.background,
                "reduced_residual": self.reduced_residual,
                "window": {"start_ns": self.window[0], "end_ns": self.window[1]}}


def emg_cdf(x, tau, sigma):
    """CDF of an exponential(tau) delay convolved with a Gaussian(sigma)."""
    x = np.asarray(x, dtype=float)
    if sigma == 0:
        return np.where(x > 0, -np.expm1(-np.maximum(x, 0) / tau), 0.0)
    u = x / sigma
    # exp(-x/tau + s^2/2tau^2) * Phi(u - s/tau), evaluated in log space
    log_tail = -x / tau + 0.5 * (sigma / tau) ** 2 + special.log_ndtr(u - sigma / tau)
    return special.ndtr(u) - np.exp(log_tail)


def expected_counts(edges, t0, tau, amplitude, background, sigma):
    g = emg_cdf(np.asarray(edges) - t0, tau, sigma)
    return amplitude * np.diff(g) + background


def simulate_decay(tau, total_counts, window, bin_width, irf_sigma=0.0,
                   background=0.0, seed=0, t0=None):
    """Poisson-sampled decay trace.

    ``total_counts`` is the number of decay photons emitted (those arriving
    after the window are lost); ``background`` is the mean count per bin.
    ``t0`` defaults to ``5 * irf_sigma`` so the full response fits the window.
    """
    for name, v in (("tau", tau), ("window", window), ("bin width", bin_width)):
        if not v > 0:
            raise DomainError(f"{name} must be > 0")
    if irf_sigma < 0 or background < 0 or total_counts < 0:
        raise DomainError("irf_sigma, background and counts must be >= 0")
    nbins = int(round(window / bin_width))
    if nbins < 1 or abs(nbins * bin_width - window) > 1e-9 * window:
        raise DomainError("window must be a whole number of bins")
    t0 = 5.0 * irf_sigma if t0 is None else float(t0)
    edges = bin_width * np.arange(nbins + 1)
    mu = expected_counts(edges, t0, tau, total_counts, background, irf_sigma)
    rng = np.random.default_rng(seed)
    return DecayTrace(bin_width, rng.poisson(np.maximum(mu, 0.0)), t0)


def runs_test(residuals):
    """Two-sided Wald-Wolfowitz runs test on residual signs; returns the p-value."""
    s = np.asarray(residuals) > 0
    n1, n2 = int(s.sum()), int((~s).sum())
    if n1 == 0 or n2 == 0:
        return 0.0
    runs = 1 + int(np.count_nonzero(s[1:] != s[:-1]))
    n = n1 + n2
    mean = 2.0 * n1 * n2 / n + 1
    var = 2.0 * n1 * n2 * (2.0 * n1 * n2 - n) / (n * n * (n - 1))
    if var <= 0:
        return 1.0
    z = (runs - mean) / math.sqrt(var)
    return float(2 * stats.norm.sf(abs(z)))


def _initial_guess(t, c, bw):
    bg = float(np.median(c[-max(c.size // 10, 1):]))
    sig = np.clip(c - bg, 0, None)
    tau = float(np.sum(sig * (t - t[0])) / max(sig.sum(), 1.0))
    tau = max(tau, bw)
    return tau, max(float(sig.sum()), 1.0), bg


def fit_monoexponential(trace, irf_sigma=0.0, fit_start=None, fit_end=None,
                        xtol=1e-10, max_iter=200):
    """Weighted least-squares mono-exponential fit.

    The fit window starts ``fit_start`` ns after ``trace.t0``, or at the bin
    after the peak when ``fit_start`` is None. Weights start at ``1/max(counts, 1)`` and are
    then replaced by the fitted model variance.
    """
    c = trace.counts.astype(float)
    edges = trace.edges
    if c.sum() == 0:
        raise NoSignalError("trace contains no counts")
    if fit_start is None:
        i0 = int(np.argmax(c)) + 1
    else:
        i0 = int(np.searchsorted(edges[:-1], trace.t0 + fit_start - 1e-12))
    i1 = c.size if fit_end is None else int(np.searchsorted(edges[1:], trace.t0 + fit_end + 1e-12))
    sel = slice(i0, i1)
    cs, es = c[sel], edges[i0:i1 + 1]
    tau0, n0, bg0 = _initial_guess(0.5 * (es[:-1] + es[1:]), cs, trace.bin_width)
    noise = 3.0 * math.sqrt(max(bg0, 1.0))
    if np.count_nonzero(cs - bg0 > noise) < 10:
        raise NoSignalError("fewer than 10 bins above background in the fit window")
    w = 1.0 / np.sqrt(np.maximum(cs, 1.0))
    # the window amplitude is refitted as the emitted total below
    frac = float(np.diff(emg_cdf(es[[0, -1]] - trace.t0, tau0, irf_sigma))[0])
    n0 = n0 / max(frac, 1e-3)

    def resid(p):
        return (expected_counts(es, trace.t0, p[0], p[1], p[2], irf_sigma) - cs) * w

    def jac(p):
        tau, amp, _ = p
        x = es - trace.t0
        g = emg_cdf(x, tau, irf_sigma)
        h = 1e-6 * tau
        dg = (emg_cdf(x, tau + h, irf_sigma) - emg_cdf(x, tau - h, irf_sigma)) / (2 * h)
        return np.column_stack([amp * np.diff(dg), np.diff(g), np.ones(cs.size)]) * w[:, None]

    p = [tau0, n0, bg0]
    # data weights bias low-count bins (the background) downwards, so the
    # first solution only seeds passes weighted by the model variance
    for n_pass in range(3):
        if n_pass:
            mu = expected_counts(es, trace.t0, p[0], p[1], p[2], irf_sigma)
            w = 1.0 / np.sqrt(np.maximum(mu, 1e-2))
        try:
            res = levenberg_marquardt(resid, p, jac=jac,
                                      lower=[1e-6 * trace.bin_width, 0.0, 0.0],
                                      xtol=xtol, max_iter=max_iter)
        except ConvergenceError as exc:
            raise ConvergenceError("decay fit did not converge", best=exc.best,
                                   diagnostics={**exc.diagnostics, "window": (i0, i1)}) from exc
        p = res.x
    tau, amp, bg = (float(v) for v in res.x)
    dof = max(cs.size - 3, 1)
    try:
        cov = np.linalg.inv(res.jac.T @ res.jac)
        tau_err = float(math.sqrt(max(cov[0, 0], 0.0)))
    except np.linalg.LinAlgError:
        tau_err = math.inf
    return DecayFitResult(tau, amp, bg, tau_err, float(res.residual @ res.residual) / dof,
                          (float(es[0]), float(es[-1])), res.residual, res.n_iter)


class MonoExponentialDecay(BaseEstimator):
    """Estimator form of :func:`fit_monoexponential`.

    ``fit(X, y)`` takes bin centres (ns, uniform spacing) and counts;
    ``predict(X)`` returns expected counts per bin of the same width.
    Fitted attributes: ``tau_``, ``tau_uncertainty_``, ``amplitude_``,
    ``background_``, ``result_``.
    """

    def __init__(self, irf_fwhm=0.3, t0=None, fit_start=None):
        self.irf_fwhm = irf_fwhm
        self.t0 = t0
        self.fit_start = fit_start

    def _sigma(self):
        return fwhm_to_sigma(self.irf_fwhm) if self.irf_fwhm else 0.0

    def fit(self, X, y):
        t = np.asarray(X, dtype=float).reshape(-1)
        y = np.asarray(y).reshape(-1)
        if t.size != y.size or t.size < 2:
            raise DomainError("X and y must have the same length >= 2")
        bw = float(t[1] - t[0])
        if not np.allclose(np.diff(t), bw, rtol=1e-6, atol=0):
            raise DomainError("bin centres must be uniformly spaced")
        origin = t[0] - bw / 2
        t0 = (5 * self._sigma() if self.t0 is None else self.t0) - origin
        self.origin_ = origin
        self.bin_width_ = bw
        self.result_ = fit_monoexponential(DecayTrace(bw, y, t0), self._sigma(), self.fit_start)
        self.tau_ = self.result_.tau
        self.tau_uncertainty_ = self.result_.tau_uncertainty
        self.amplitude_ = self.result_.amplitude
        self.background_ = self.result_.background
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        t = np.asarray(X, dtype=float).reshape(-1) - self.origin_
        t0 = (5 * self._sigma() if self.t0 is None else self.t0) - self.origin_
        half = self.bin_width_ / 2
        g = emg_cdf(np.stack([t - half, t + half]) - t0, self.tau_, self._sigma())
        return self.amplitude_ * (g[1] - g[0]) + self.background_


# -------------------------------------------------------------------- I/O

def write_trace_csv(path, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_ns", "counts"])
        for t, c in zip(trace.times, trace.counts):
            w.writerow([f"{t:.9g}", int(c)])


def read_trace_csv(path, t0=0.0):
    """Read ``time_ns,counts`` (bin centres); raises ParseError on bad content."""
    times, counts = [], []
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if header is None or [h.strip() for h in header] != ["time_ns", "counts"]:
            raise ParseError(f"{path}: expected header time_ns,counts")
        for lineno, row in enumerate(rows, start=2):
            if not row:
                continue
            try:
                t, c = float(row[0]), float(row[1])
            except (ValueError, IndexError) as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            if c < 0 or c != int(c):
                raise ParseError(f"{path}:{lineno}: counts must be non-negative integers")
            times.append(t)
            counts.append(int(c))
    if len(times) < 2:
        raise ParseError(f"{path}: need at least two bins")
    t = np.array(times)
    bw = float(t[1] - t[0])
    if bw <= 0 or not np.allclose(np.diff(t), bw, rtol=1e-6):
        raise ParseError(f"{path}: bin centres must be uniformly spaced")
    # shift so the first bin starts at zero
    origin = t[0] - bw / 2
    return DecayTrace(bw, np.array(counts), t0 - origin)


def write_fit_json(path, result):
    with open(path, "w") as fh:
        json.dump(result.to_dict(), fh, indent=2)
