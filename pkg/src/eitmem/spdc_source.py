"""Single-mode cavity-enhanced SPDC: output-field coefficients and biphoton spectrum."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .waveforms import ComplexSpectrum, G2Waveform, FieldWaveform, frequency_grid

# input photons: 1/FWHM of G2 equals 2π x 6.2 MHz
SOURCE_BANDWIDTH_HZ = 6.2e6


@dataclass(frozen=True)
class CavitySpdcParams:
    """Cavity and pump parameters, all in rad/s.

    ``gamma_*`` are the out-coupling rates, ``Gamma_*`` the total cavity decay
    rates, ``Omega_q``/``Omega_r`` the signal/idler mode frequencies and
    ``omega_pump`` the pump frequency (all relative to their carriers).
    """

    gamma_s: float
    gamma_i: float
    Gamma_s: float
    Gamma_i: float
    kappa: float
    Omega_q: float = 0.0
    Omega_r: float = 0.0
    omega_pump: float = 0.0

    def __post_init__(self):
        for name in ("gamma_s", "gamma_i", "Gamma_s", "Gamma_i", "kappa",
                     "Omega_q", "Omega_r", "omega_pump"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not (self.gamma_s > 0 and self.gamma_i > 0):
            raise ValueError("out-coupling rates must be positive")
        if self.Gamma_s < self.gamma_s or self.Gamma_i < self.gamma_i:
            raise ValueError("total decay rate must be >= out-coupling rate")
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")
        scale = max(abs(self.Omega_q), abs(self.Omega_r), abs(self.omega_pump), self.Gamma_s)
        if abs(self.Omega_q + self.Omega_r - self.omega_pump) > 1e-9 * scale:
            raise ValueError("double resonance requires Omega_q + Omega_r == omega_pump")

    @classmethod
    def symmetric(cls, linewidth: float, kappa: float, escape: float = 1.0) -> "CavitySpdcParams":
        """Identical signal/idler cavities with total decay ``linewidth``.

        ``escape`` is the fraction of the cavity loss that leaves through the
        output coupler (1 means a lossless cavity).
        """
        g = escape * linewidth
        return cls(gamma_s=g, gamma_i=g, Gamma_s=linewidth, Gamma_i=linewidth, kappa=kappa)

    @classmethod
    def reference_source(cls, bandwidth_hz: float = SOURCE_BANDWIDTH_HZ) -> "CavitySpdcParams":
        """Lossless symmetric cavity whose G2 has ``1/FWHM = 2π bandwidth_hz``.

        For this cavity ``G2(τ) ∝ exp(-Γ|τ|)``, so the FWHM is ``2 ln2 / Γ``.
        ``kappa`` is set to 1% of the linewidth, deep below threshold.
        """
        linewidth = 2 * np.log(2) * 2 * np.pi * bandwidth_hz
        return cls.symmetric(linewidth, kappa=0.01 * linewidth)


def field_coefficients(p: CavitySpdcParams, omega):
    """Return ``(A_s, B_s, A_i, B_i)`` at signal angular frequency ``omega``."""
    omega = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(omega)):
        raise ValueError("omega must be finite")
    det_s = omega - p.Omega_q
    det_i = (p.omega_pump - omega) - p.Omega_r  # equals Omega_q - omega at double resonance
    den_s = p.Gamma_s / 2 - 1j * det_s
    den_i = p.Gamma_i / 2 - 1j * det_i
    A_s = (p.gamma_s - p.Gamma_s / 2 + 1j * det_s) / den_s
    A_i = (p.gamma_i - p.Gamma_i / 2 + 1j * det_i) / den_i
    pair = p.kappa * np.sqrt(p.gamma_s * p.gamma_i) / (den_s * (p.Gamma_i / 2 + 1j * det_i))
    return A_s, -1j * pair, A_i, 1j * pair


def biphoton_spectrum(p: CavitySpdcParams, grid=None, normalize: bool = False) -> ComplexSpectrum:
    """Source biphoton amplitude ``Ψ0(ω) = A_s*(ω) B_i(ω)`` on ``grid``.

    With ``normalize`` the amplitude is rescaled so that ``∫ G2 dτ = 1``.
    Raises :class:`~eitmem.waveforms.GridTruncationError` if the grid spans
    fewer than 20 FWHMs of ``|Ψ0|^2``.
    """
    if grid is None:
        grid = frequency_grid()
    A_s, _, _, B_i = field_coefficients(p, grid)
    spec = ComplexSpectrum(grid, np.conj(A_s) * B_i)
    spec.check_span()
    if normalize and np.any(spec.amplitude):
        spec = spec.scaled(1 / np.sqrt(spec.energy()))
    return spec


def g2_waveform_from_spectrum(spec: ComplexSpectrum) -> G2Waveform:
    """``G2(τ) = |(1/2π) ∫ dω Ψ(ω) e^{iωτ}|^2`` on the conjugate time grid."""
    tau, amp = spec.time_amplitude()
    return G2Waveform(tau, np.abs(amp) ** 2)


def signal_field(spec: ComplexSpectrum) -> FieldWaveform:
    """Time-domain signal field that drives the Maxwell-Bloch solver.

    The G2 amplitude is written with ``e^{+iωτ}`` while the field evolves as
    ``e^{-iωt}``; the two are complex conjugates, so ``|E|^2`` is exactly the
    source G2 and the solver output squares to the medium-filtered G2.
    """
    tau, amp = spec.time_amplitude()
    return FieldWaveform(tau, np.conj(amp))
