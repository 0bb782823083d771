"""Sampled spectra and waveforms shared by every stage of the simulation.

Frequencies are angular [rad/s] and times are in seconds throughout.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class GridError(ValueError):
    """A sample grid is not strictly increasing and uniform."""


class GridTruncationError(GridError):
    """The grid is too narrow for the feature it is supposed to hold."""


def _check_uniform(grid: np.ndarray, name: str) -> None:
    if grid.ndim != 1 or grid.size < 2:
        raise GridError(f"{name} must be a 1-D array with at least 2 samples")
    if not np.all(np.isfinite(grid)):
        raise GridError(f"{name} contains non-finite values")
    step = np.diff(grid)
    if np.any(step <= 0):
        raise GridError(f"{name} must be strictly increasing")
    if np.max(np.abs(step - step[0])) > 1e-6 * step[0]:
        raise GridError(f"{name} must be uniformly spaced")


def fwhm(x, y) -> float:
    """Full width at half maximum of the lobe holding the global maximum.

    Edges are found by linear interpolation between the bracketing samples.
    If the lobe runs into the end of the array, that end is used as the edge.
    Ties for the maximum go to the earliest sample.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    i = int(np.argmax(y))
    half = 0.5 * y[i]
    if half <= 0:
        raise ValueError("FWHM undefined for a non-positive profile")
    lo = i
    while lo > 0 and y[lo - 1] >= half:
        lo -= 1
    hi = i
    while hi < y.size - 1 and y[hi + 1] >= half:
        hi += 1
    if lo == 0:
        left = x[0]
    else:
        left = x[lo - 1] + (half - y[lo - 1]) * (x[lo] - x[lo - 1]) / (y[lo] - y[lo - 1])
    if hi == y.size - 1:
        right = x[-1]
    else:
        right = x[hi] + (y[hi] - half) * (x[hi + 1] - x[hi]) / (y[hi] - y[hi + 1])
    return float(right - left)


def frequency_grid(n: int = 2**14, half_span: float = 2 * np.pi * 200e6) -> np.ndarray:
    """Uniform angular-frequency grid with ``n`` points covering ``[-half_span, half_span)``."""
    step = 2 * half_span / n
    return (np.arange(n) - n // 2) * step


@dataclass(frozen=True)
class ComplexSpectrum:
    freq_grid: np.ndarray
    amplitude: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.freq_grid, dtype=float)
        amp = np.asarray(self.amplitude, dtype=complex)
        _check_uniform(grid, "freq_grid")
        if amp.shape != grid.shape:
            raise GridError("amplitude and freq_grid must have the same shape")
        object.__setattr__(self, "freq_grid", grid)
        object.__setattr__(self, "amplitude", amp)

    @property
    def step(self) -> float:
        return float(self.freq_grid[1] - self.freq_grid[0])

    @property
    def span(self) -> float:
        return float(self.freq_grid[-1] - self.freq_grid[0] + self.step)

    def power(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2

    def fwhm(self) -> float:
        """FWHM of ``|amplitude|**2`` in rad/s."""
        return fwhm(self.freq_grid, self.power())

    def energy(self) -> float:
        """Integral of ``|amplitude|**2 dω / 2π``."""
        return float(np.sum(self.power()) * self.step / (2 * np.pi))

    def check_span(self, factor: float = 20.0) -> None:
        """Raise :class:`GridTruncationError` if the grid is narrower than ``factor`` FWHMs."""
        if not np.any(self.amplitude):
            return
        width = self.fwhm()
        if self.span < factor * width:
            raise GridTruncationError(
                f"grid span {self.span:.4g} rad/s is below {factor:g} x FWHM ({width:.4g} rad/s)"
            )

    def scaled(self, c: complex) -> "ComplexSpectrum":
        return ComplexSpectrum(self.freq_grid, c * self.amplitude)

    def time_grid(self) -> np.ndarray:
        """Conjugate time grid of the FFT, centred on zero delay."""
        n = self.freq_grid.size
        dt = 2 * np.pi / (n * self.step)
        return (np.arange(n) - n // 2) * dt

    def time_amplitude(self) -> tuple[np.ndarray, np.ndarray]:
        """``(1/2π) ∫ dω amplitude(ω) e^{iωτ}`` sampled on :meth:`time_grid`.

        The discrete sum is evaluated exactly with one inverse FFT, so
        Parseval holds to rounding error.
        """
        n = self.freq_grid.size
        tau = self.time_grid()
        k = np.arange(n)
        # e^{iω_k τ_m} = e^{iω_0 τ_m} e^{2πikm/n} e^{-2πik(n//2)/n}
        shift = np.exp(-2j * np.pi * k * (n // 2) / n)
        core = np.fft.ifft(self.amplitude * shift) * n
        phase = np.exp(1j * self.freq_grid[0] * tau)
        return tau, (self.step / (2 * np.pi)) * phase * core

    def to_csv(self, path) -> None:
        from .io import write_csv

        write_csv(
            path,
            ["freq_Hz", "re", "im"],
            [self.freq_grid / (2 * np.pi), self.amplitude.real, self.amplitude.imag],
        )

    @classmethod
    def from_csv(cls, path) -> "ComplexSpectrum":
        from .io import read_csv

        cols = read_csv(path, ["freq_Hz", "re", "im"])
        return cls(2 * np.pi * cols["freq_Hz"], cols["re"] + 1j * cols["im"])


@dataclass(frozen=True)
class _Waveform:
    time_grid: np.ndarray
    value: np.ndarray

    _dtype = float

    def __post_init__(self):
        grid = np.asarray(self.time_grid, dtype=float)
        val = np.asarray(self.value, dtype=self._dtype)
        _check_uniform(grid, "time_grid")
        if val.shape != grid.shape:
            raise GridError("value and time_grid must have the same shape")
        object.__setattr__(self, "time_grid", grid)
        object.__setattr__(self, "value", val)

    @property
    def dt(self) -> float:
        return float(self.time_grid[1] - self.time_grid[0])

    def shifted(self, delay: float):
        return type(self)(self.time_grid + delay, self.value)

    def window(self, t0: float, t1: float):
        keep = (self.time_grid >= t0) & (self.time_grid <= t1)
        return type(self)(self.time_grid[keep], self.value[keep])


@dataclass(frozen=True)
class FieldWaveform(_Waveform):
    """Complex slowly varying field amplitude ``E(t)`` (time dependence ``e^{-iωt}``)."""

    _dtype = complex

    def intensity(self) -> np.ndarray:
        return np.abs(self.value) ** 2

    def energy(self, t0: float = -np.inf, t1: float = np.inf) -> float:
        """Trapezoid integral of ``|E|^2`` over ``[t0, t1]``."""
        keep = (self.time_grid >= t0) & (self.time_grid <= t1)
        if keep.sum() < 2:
            return 0.0
        return float(np.trapezoid(self.intensity()[keep], self.time_grid[keep]))

    def to_g2(self) -> "G2Waveform":
        return G2Waveform(self.time_grid, self.intensity())

    def to_csv(self, path) -> None:
        from .io import write_csv

        write_csv(path, ["t_s", "re", "im"], [self.time_grid, self.value.real, self.value.imag])


@dataclass(frozen=True)
class G2Waveform(_Waveform):
    """Real, non-negative two-photon correlation ``G2(τ)`` without background."""

    def __post_init__(self):
        super().__post_init__()
        if np.any(self.value < 0):
            raise ValueError("G2 waveform values must be non-negative")

    def fwhm(self) -> float:
        return fwhm(self.time_grid, self.value)

    def bandwidth(self) -> float:
        """Reciprocal FWHM, as an angular frequency [rad/s]."""
        return 1.0 / self.fwhm()

    def bandwidth_hz(self) -> float:
        return self.bandwidth() / (2 * np.pi)

    def integral(self) -> float:
        return float(np.trapezoid(self.value, self.time_grid))

    def peak_time(self) -> float:
        return float(self.time_grid[int(np.argmax(self.value))])

    def normalized(self) -> "G2Waveform":
        return G2Waveform(self.time_grid, self.value / self.integral())

    def __call__(self, t) -> np.ndarray:
        """Linear interpolation, zero outside the sampled range."""
        return np.interp(t, self.time_grid, self.value, left=0.0, right=0.0)

    def to_csv(self, path) -> None:
        from .io import write_csv

        write_csv(path, ["t_s", "value"], [self.time_grid, self.value])

    @classmethod
    def from_csv(cls, path) -> "G2Waveform":
        from .io import read_csv

        cols = read_csv(path, ["t_s", "value"])
        return cls(cols["t_s"], cols["value"])
