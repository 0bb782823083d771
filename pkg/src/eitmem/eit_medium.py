"""Frequency-domain response of a Λ-type EIT medium.

The medium is described by its optical depth rather than by atom number,
length and coupling constant. The kernel stored in :class:`MediumResponse`
is the pure medium response ``exp(-Λ(ω)L)`` with the vacuum propagation
phase removed, so delays are relative to free-space propagation.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq, least_squares

from .waveforms import ComplexSpectrum, GridError, _check_uniform

# cesium D2 excited-state decay rate
GAMMA_D2 = 2 * np.pi * 5.23e6
REF_OPTICAL_DEPTH = 55.0
REF_GAMMA_0 = 0.065 * GAMMA_D2


class DomainError(ValueError):
    """Parameters fall outside the range where a quantity is defined."""


class DegenerateFitError(ValueError):
    """The data carry no information about the fitted parameters."""


class FitConvergenceError(RuntimeError):
    """Least squares stopped before converging; ``best`` holds the last estimate."""

    def __init__(self, msg, best=None, residual=None):
        super().__init__(msg)
        self.best = best
        self.residual = residual


@dataclass(frozen=True)
class EitParams:
    """Λ-system parameters. Rates and detunings are in rad/s."""

    optical_depth: float
    Gamma: float = GAMMA_D2
    Omega_c: float = 0.0
    gamma_gs: float = 0.0
    delta_ge: float = 0.0
    delta_gs: float | None = None  # None ties it to delta_ge (zero coupling detuning)

    def __post_init__(self):
        if self.delta_gs is None:
            object.__setattr__(self, "delta_gs", self.delta_ge)
        vals = (self.optical_depth, self.Gamma, self.Omega_c, self.gamma_gs,
                self.delta_ge, self.delta_gs)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("EIT parameters must be finite")
        if self.optical_depth < 0:
            raise ValueError("optical_depth must be >= 0")
        if self.Gamma <= 0:
            raise ValueError("Gamma must be > 0")
        if self.Omega_c < 0:
            raise ValueError("Omega_c must be >= 0")
        if self.gamma_gs < 0:
            raise ValueError("gamma_gs must be >= 0")

    def with_(self, **kw) -> "EitParams":
        return replace(self, **kw)


def _exponent(p: EitParams, omega):
    """``Λ(ω)L`` without the vacuum term: ``(αΓ/4) d_gs / D``."""
    omega = np.asarray(omega, dtype=float)
    d_ge = p.Gamma / 2 - 1j * (omega + p.delta_ge)
    if p.Omega_c**2 == 0:
        # two-level limit (also when Ω² underflows); d_gs cancels and may vanish
        return (p.optical_depth * p.Gamma / 4) / d_ge
    d_gs = p.gamma_gs / 2 - 1j * (omega + p.delta_gs)
    D = d_ge * d_gs + p.Omega_c**2 / 4
    return (p.optical_depth * p.Gamma / 4) * d_gs / D


@dataclass(frozen=True)
class MediumResponse:
    freq_grid: np.ndarray
    kernel: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.freq_grid, dtype=float)
        ker = np.asarray(self.kernel, dtype=complex)
        _check_uniform(grid, "freq_grid")
        if ker.shape != grid.shape:
            raise GridError("kernel and freq_grid must have the same shape")
        object.__setattr__(self, "freq_grid", grid)
        object.__setattr__(self, "kernel", ker)

    def filter_biphoton(self, spec: ComplexSpectrum) -> ComplexSpectrum:
        """Biphoton amplitude after the signal photon crosses the medium.

        The biphoton amplitude is synthesised with ``e^{+iωτ}`` (it carries
        the adjoint of the signal operator), so it picks up ``conj(kernel)``.
        """
        if spec.freq_grid.shape != self.freq_grid.shape or not np.allclose(
            spec.freq_grid, self.freq_grid, rtol=0, atol=1e-9 * abs(spec.step)
        ):
            raise GridError("spectrum and kernel are sampled on different grids")
        return ComplexSpectrum(spec.freq_grid, spec.amplitude * np.conj(self.kernel))

    def to_csv(self, path) -> None:
        from .io import write_csv

        write_csv(path, ["freq_Hz", "re", "im"],
                  [self.freq_grid / (2 * np.pi), self.kernel.real, self.kernel.imag])


def propagation_kernel(p: EitParams, grid) -> MediumResponse:
    """Medium transfer function ``exp(-Λ(ω)L)`` on ``grid`` (field convention ``e^{-iωt}``)."""
    grid = np.asarray(grid, dtype=float)
    return MediumResponse(grid, np.exp(-_exponent(p, grid)))


def transmission_spectrum(p: EitParams, detuning_grid) -> np.ndarray:
    """Intensity transmission of a weak probe scanned across resonance.

    The probe detuning ``δ`` sets both the one- and two-photon detuning
    (the coupling sits on resonance). Any ``delta_ge``/``delta_gs`` stored in
    ``p`` is added as a fixed offset to the respective detuning.
    """
    d = np.asarray(detuning_grid, dtype=float)
    dge = d + p.delta_ge
    dgs = d + p.delta_gs
    G, g, W2, a = p.Gamma, p.gamma_gs, p.Omega_c**2, p.optical_depth
    num = g * W2 + (4 * dgs**2 + g**2) * G
    den = (W2 + G * g - 4 * dge * dgs) ** 2 + (2 * dge * g + 2 * dgs * G) ** 2
    if a == 0:
        return np.ones_like(d)
    if W2 == 0:
        # the (g^2 + 4 dgs^2) factor cancels between numerator and denominator
        return np.exp(-a * G**2 / (G**2 + 4 * dge**2))
    with np.errstate(divide="ignore", invalid="ignore"):
        expo = np.where(den > 0, a * G * num / den, np.inf)
    return np.exp(-expo)


def _closed_form_bandwidth(p: EitParams) -> float:
    x = p.optical_depth / (2 * np.log(2)) - 0.5
    y = (p.Omega_c / p.Gamma) ** 2
    s = x + y
    r = y / s
    # 1 - sqrt(1 - r^2) written to avoid cancellation when r is small
    u = s * r**2 / (1 + np.sqrt(1 - r**2))
    return float(np.sqrt(u) * p.Gamma)


def window_fwhm(p: EitParams) -> float:
    """Numerical full width of the transparency window at ``T = 1/2``.

    Works for any ``gamma_gs`` and detuning offsets; the half-transmission
    crossings on either side of the window centre are bracketed on a dense
    scan and refined with Brent's method.
    """
    if p.optical_depth <= np.log(2):
        raise DomainError("optical depth must exceed ln 2 for a half-maximum window")
    if p.Omega_c == 0:
        raise DomainError("no transparency window without coupling")

    def f(d):
        return transmission_spectrum(p, np.atleast_1d(d))[0] - 0.5

    centre = -p.delta_gs  # two-photon resonance
    if f(centre) <= 0:
        raise DomainError("transmission at two-photon resonance does not reach 1/2")
    # absorption peaks of the Autler-Townes doublet sit near ±Ω/2 around resonance
    reach = 0.5 * np.hypot(p.Omega_c, p.Gamma) + abs(p.delta_ge - p.delta_gs)
    edges = []
    for sign in (+1, -1):
        xs = centre + sign * reach * np.linspace(0, 1, 2001) ** 2
        vals = transmission_spectrum(p, xs) - 0.5
        idx = np.nonzero(vals <= 0)[0]
        if idx.size == 0:
            raise DomainError("transmission never drops below 1/2 beside the window")
        j = idx[0]
        edges.append(brentq(f, xs[j - 1], xs[j], xtol=1e-14 * reach, rtol=1e-14))
    return float(abs(edges[0] - edges[1]))


def eit_bandwidth(p: EitParams) -> float:
    """FWHM of the transparency window [rad/s].

    Uses the closed form (exact for ``gamma_gs = 0`` and zero detunings) and
    falls back to :func:`window_fwhm` otherwise.
    """
    if p.optical_depth <= np.log(2):
        raise DomainError("optical depth must exceed ln 2 (absorption depth must surpass 1/2)")
    if p.Omega_c == 0:
        raise DomainError("no transparency window without coupling")
    if p.gamma_gs == 0 and p.delta_ge == 0 and p.delta_gs == 0:
        return _closed_form_bandwidth(p)
    return window_fwhm(p)


def group_delay(p: EitParams) -> float:
    """Phase slope ``dφ/dω`` of the kernel at ω = 0 [s], by central difference."""
    if p.Omega_c == 0:
        raise DomainError("group delay undefined without coupling (absorbing medium)")
    if p.optical_depth == 0:
        return 0.0
    td0 = p.optical_depth * p.Gamma / p.Omega_c**2
    h = 1e-4 / max(td0, 1 / p.Gamma)
    expo = _exponent(p, np.array([-h, h]))
    # phase of exp(-x) is -Im(x)
    return float(-(expo[1].imag - expo[0].imag) / (2 * h))


def rabi_for_delay(p: EitParams, target_delay: float) -> float:
    """Coupling Rabi frequency giving ``group_delay == target_delay``."""
    if target_delay <= 0:
        raise ValueError("target delay must be positive")

    def f(log_om):
        return group_delay(p.with_(Omega_c=np.exp(log_om))) - target_delay

    guess = np.sqrt(p.optical_depth * p.Gamma / target_delay)
    lo, hi = np.log(guess) - 3, np.log(guess) + 3
    return float(np.exp(brentq(f, lo, hi, xtol=1e-13)))


@dataclass(frozen=True)
class OdFit:
    params: EitParams
    rms_residual: float
    nfev: int


def fit_optical_depth(detuning, transmission, Gamma: float = GAMMA_D2,
                      max_nfev: int = 2000) -> OdFit:
    """Fit the transmission model over ``(optical_depth, Omega_c, gamma_gs)``.

    ``Gamma`` is held fixed. The start point comes from the raw absorption
    depth and the spacing of the two absorption minima.
    """
    d = np.asarray(detuning, dtype=float)
    T = np.asarray(transmission, dtype=float)
    if d.shape != T.shape or d.ndim != 1:
        raise ValueError("detuning and transmission must be 1-D arrays of equal length")
    if d.size < 20:
        raise ValueError("need at least 20 samples")
    if np.ptp(d) < Gamma:
        raise ValueError("samples must span at least one absorption linewidth")
    if np.ptp(T) < 1e-6 or np.all(T >= 1 - 1e-9):
        raise DegenerateFitError("flat transmission: optical depth is unidentifiable")

    depth = -np.log(np.clip(T.min(), 1e-12, 1.0))
    imin = int(np.argmin(T))
    om0 = max(2 * abs(d[imin]), 0.05 * Gamma)
    x0 = np.array([max(depth, 0.5), om0 / Gamma, 0.01])

    def resid(x):
        q = EitParams(x[0], Gamma, x[1] * Gamma, x[2] * Gamma)
        return transmission_spectrum(q, d) - T

    sol = least_squares(resid, x0, bounds=([1e-6, 1e-6, 0.0], [np.inf, np.inf, np.inf]),
                        method="trf", x_scale="jac", max_nfev=max_nfev,
                        xtol=1e-12, ftol=1e-12, gtol=1e-12)
    est = EitParams(sol.x[0], Gamma, sol.x[1] * Gamma, sol.x[2] * Gamma)
    rms = float(np.sqrt(np.mean(sol.fun**2)))
    if sol.status <= 0:
        raise FitConvergenceError("optical-depth fit did not converge", best=est, residual=rms)
    return OdFit(est, rms, int(sol.nfev))


def write_transmission_csv(path, detuning, transmission) -> None:
    from .io import write_csv

    write_csv(path, ["detuning_Hz", "T"], [np.asarray(detuning) / (2 * np.pi), transmission])


def read_transmission_csv(path):
    """Return ``(detuning [rad/s], T)`` from a ``detuning_Hz, T`` CSV."""
    from .io import read_csv

    cols = read_csv(path, ["detuning_Hz", "T"])
    return 2 * np.pi * cols["detuning_Hz"], cols["T"]
