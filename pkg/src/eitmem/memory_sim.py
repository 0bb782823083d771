"""Slow light and write/store/read simulation of a biphoton in the EIT memory.

Two propagation paths are provided. :func:`slow_light` filters the source
spectrum with the static medium kernel. :func:`simulate_storage` integrates
the Maxwell-Bloch equations in time with a switched coupling field and a
coupling-power-dependent ground-state decoherence.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from . import _mb_kernel
from .eit_medium import (GAMMA_D2, REF_GAMMA_0, REF_OPTICAL_DEPTH, EitParams,
                         MediumResponse, propagation_kernel, rabi_for_delay)
from .spdc_source import (CavitySpdcParams, biphoton_spectrum, g2_waveform_from_spectrum,
                          signal_field)
from .waveforms import ComplexSpectrum, FieldWaveform, G2Waveform, frequency_grid, fwhm

# 10-90% rise of a raised-cosine edge as a fraction of its full length
_EDGE_10_90 = 0.5903
REF_XI = (0.72, 1.0, 2.0, 3.5, 5.0, 8.7)
REF_GAMMA_S = 0.055


class StorageWindowError(ValueError):
    """Dark storage interval shorter than the coupling switch time."""


class InstabilityError(RuntimeError):
    """Time stepping produced energy the input could not have supplied."""


class SweepError(RuntimeError):
    """A sweep point failed; ``partial`` holds the completed rows."""

    def __init__(self, msg, partial):
        super().__init__(msg)
        self.partial = partial


@dataclass(frozen=True)
class CouplingSchedule:
    """Coupling Rabi frequency versus time.

    The write edge ends at ``t_off`` and the read edge starts at ``t_on``, so
    ``t_on - t_off`` is the time the coupling is fully dark. Edges are raised
    cosines in Rabi frequency whose 10-90% time is ``switch_duration``.
    ``xi`` is the read/write power ratio. With ``continuous`` the coupling
    stays at ``write_rabi`` throughout (slow light).
    """

    write_rabi: float
    t_off: float = 0.0
    t_on: float = 100e-9
    xi: float = 1.0
    switch_duration: float = 20e-9
    continuous: bool = False

    def __post_init__(self):
        if not np.isfinite(self.write_rabi) or self.write_rabi <= 0:
            raise ValueError("write_rabi must be positive")
        if not self.xi > 0:
            raise ValueError("xi must be > 0")
        if self.switch_duration < 0:
            raise ValueError("switch_duration must be >= 0")
        if not self.continuous and self.t_on < self.t_off:
            raise ValueError("t_on must not precede t_off")

    @classmethod
    def constant(cls, rabi: float) -> "CouplingSchedule":
        return cls(write_rabi=rabi, continuous=True)

    @property
    def read_rabi(self) -> float:
        return self.write_rabi * np.sqrt(self.xi)

    @property
    def storage_time(self) -> float:
        return self.t_on - self.t_off

    @property
    def edge_length(self) -> float:
        """Full length of one raised-cosine edge."""
        return self.switch_duration / _EDGE_10_90

    @property
    def max_rabi(self) -> float:
        return self.write_rabi if self.continuous else self.write_rabi * max(1.0, np.sqrt(self.xi))

    def rabi(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.continuous:
            return np.full(t.shape, self.write_rabi)
        full = self.edge_length
        if full > 0:
            fall = 1 - _raised_cosine((t - (self.t_off - full)) / full)
            rise = _raised_cosine((t - self.t_on) / full)
        else:
            fall = (t < self.t_off).astype(float)
            rise = (t >= self.t_on).astype(float)
        mid = 0.5 * (self.t_off + self.t_on)
        return self.write_rabi * np.where(t < mid, fall, np.sqrt(self.xi) * rise)

    def power(self, t) -> np.ndarray:
        """Coupling power relative to the write power."""
        return (self.rabi(t) / self.write_rabi) ** 2


def _raised_cosine(x):
    x = np.clip(x, 0.0, 1.0)
    return 0.5 - 0.5 * np.cos(np.pi * x)


@dataclass(frozen=True)
class DecoherenceModel:
    """Ground-state decoherence ``γ(t) = gamma_0 + k (P(t)/P_w)**power_exponent``.

    ``gamma_s_coeff`` is the target slope of ``-ln(efficiency)`` versus ξ;
    ``k`` is the rate that realises it and is found by
    :func:`calibrate_decoherence`.
    """

    gamma_0: float = 0.0
    gamma_s_coeff: float = 0.0
    k: float = 0.0
    power_exponent: float = 2.0

    def __post_init__(self):
        if self.gamma_0 < 0 or self.gamma_s_coeff < 0 or self.k < 0:
            raise ValueError("decoherence rates must be >= 0")
        if self.power_exponent <= 0:
            raise ValueError("power_exponent must be positive")

    def rate(self, rel_power) -> np.ndarray:
        return self.gamma_0 + self.k * np.asarray(rel_power, dtype=float) ** self.power_exponent

    @property
    def write_rate(self) -> float:
        """Decoherence rate while the coupling is at write power."""
        return self.gamma_0 + self.k


# ---------------------------------------------------------------- slow light

@dataclass(frozen=True)
class SlowLightResult:
    out_spec: ComplexSpectrum
    g2: G2Waveform
    efficiency: float
    bandwidth: float  # 1/FWHM of G2 [rad/s]
    delay: float      # shift of the G2 peak [s]

    @property
    def bandwidth_hz(self) -> float:
        return self.bandwidth / (2 * np.pi)


def slow_light(spec: ComplexSpectrum, p: EitParams | MediumResponse) -> SlowLightResult:
    """Pass the biphoton through the static medium and read off G2."""
    resp = p if isinstance(p, MediumResponse) else propagation_kernel(p, spec.freq_grid)
    out = resp.filter_biphoton(spec)
    g2_in = g2_waveform_from_spectrum(spec)
    g2 = g2_waveform_from_spectrum(out)
    return SlowLightResult(out, g2, out.energy() / spec.energy(), g2.bandwidth(),
                           g2.peak_time() - g2_in.peak_time())


# ----------------------------------------------------------- time-domain MB

@dataclass(frozen=True)
class StorageResult:
    out_field: FieldWaveform
    efficiency: float            # retrieved / input
    retrieved_bandwidth: float   # 1/FWHM of |out|^2 in the retrieval window [rad/s]
    efficiency_excl_switch: float
    leaked: float                # fraction transmitted before t_off
    input_energy: float
    retrieved_energy: float
    dissipated: float            # fraction lost to Γ and γ decay
    stored_residual: float       # fraction still in the medium at the end
    closure_error: float         # relative imbalance of the energy budget
    window: tuple = field(default=(0.0, 0.0))

    @property
    def retrieved_bandwidth_hz(self) -> float:
        return self.retrieved_bandwidth / (2 * np.pi)

    def retrieved_g2(self) -> G2Waveform:
        return self.out_field.window(*self.window).to_g2()


def _support(w: FieldWaveform, rel=1e-12):
    idx = np.nonzero(w.intensity() > rel * w.intensity().max())[0]
    return w.time_grid[idx[0]], w.time_grid[idx[-1]]


def simulate_storage(in_field: FieldWaveform, p: EitParams, sched: CouplingSchedule,
                     dec: DecoherenceModel | None = None, *, nz: int = 201,
                     dt_factor: float = 40.0, readout: float = 700e-9) -> StorageResult:
    """Integrate the Maxwell-Bloch equations for one write/store/read cycle.

    ``sched`` supplies the coupling and ``dec`` the ground-state decoherence;
    they override ``p.Omega_c`` and ``p.gamma_gs`` (with ``dec=None`` the
    static ``p.gamma_gs`` is used). The time step is
    ``1/(dt_factor * max(Ω_max, Γ))``; ``readout`` is how long the output is
    followed after ``t_on``.
    """
    if nz < 3:
        raise ValueError("need at least 3 z nodes")
    if dec is None:
        dec = DecoherenceModel(gamma_0=p.gamma_gs)
    if not sched.continuous and sched.storage_time < sched.switch_duration:
        raise StorageWindowError("storage time is shorter than the switch duration")

    t_first, t_last = _support(in_field)
    if sched.continuous:
        t_end = t_last + readout
        window = (t_first, t_end)
    else:
        late = in_field.energy(sched.t_on, np.inf) / in_field.energy()
        if late > 0.01:
            raise ValueError(f"{late:.1%} of the input arrives after the read-out starts")
        t_end = sched.t_on + readout
        window = (sched.t_on, t_end)
    t_start = min(t_first, sched.t_off - sched.edge_length) if not sched.continuous else t_first

    dt_max = 1.0 / (dt_factor * max(sched.max_rabi, p.Gamma))
    nt = int(np.ceil((t_end - t_start) / dt_max))
    dt = (t_end - t_start) / nt
    th = t_start + 0.5 * dt * np.arange(2 * nt + 1)
    e_in = (np.interp(th, in_field.time_grid, in_field.value.real, left=0.0, right=0.0)
            + 1j * np.interp(th, in_field.time_grid, in_field.value.imag, left=0.0, right=0.0))
    om = sched.rabi(th).astype(complex)
    gam = dec.rate(sched.power(th))
    beta = p.optical_depth * p.Gamma / 2

    out, stored, lost, bad = _mb_kernel.integrate(
        e_in, om, gam, dt, nz, beta, p.Gamma, p.delta_ge, p.delta_gs)
    if bad >= 0:
        raise InstabilityError(f"atomic energy grew without input at step {bad}; reduce dt")

    t = th[::2]
    src = FieldWaveform(t, e_in[::2])
    res = FieldWaveform(t, out)
    e0 = src.energy()
    total_out = res.energy()
    retrieved = res.energy(*window)
    if sched.continuous:
        leaked, excl = 0.0, retrieved
    else:
        leaked = res.energy(-np.inf, sched.t_off)
        excl = res.energy(sched.t_on + sched.edge_length, t_end)
    closure = (e0 - total_out - stored - lost) / e0

    I = res.intensity()
    m = (t >= window[0]) & (t <= window[1])
    width = fwhm(t[m], I[m]) if I[m].max() > 0 else np.inf
    return StorageResult(
        out_field=res, efficiency=retrieved / e0, retrieved_bandwidth=1.0 / width,
        efficiency_excl_switch=excl / e0, leaked=leaked / e0, input_energy=e0,
        retrieved_energy=retrieved, dissipated=lost / e0, stored_residual=stored / e0,
        closure_error=float(closure), window=window)


def retrieved_g2(spec: ComplexSpectrum, p: EitParams, sched: CouplingSchedule,
                 dec: DecoherenceModel | None = None, **kw) -> G2Waveform:
    """G2 of the stored-and-retrieved biphoton over the whole output record."""
    return simulate_storage(signal_field(spec), p, sched, dec, **kw).out_field.to_g2()


# ------------------------------------------------------------------ sweeps

@dataclass
class XiSweep:
    xi: np.ndarray
    efficiency: np.ndarray
    bandwidth: np.ndarray  # rad/s
    runs: list

    @property
    def bandwidth_hz(self) -> np.ndarray:
        return self.bandwidth / (2 * np.pi)

    def exponential_fit(self):
        """Least-squares line through ``ln(efficiency)`` vs ξ: returns ``(gamma_s, amplitude, R^2)``."""
        y = np.log(self.efficiency)
        slope, icpt = np.polyfit(self.xi, y, 1)
        ss_res = np.sum((y - (slope * self.xi + icpt)) ** 2)
        ss_tot = np.sum((y - y.mean()) ** 2)
        return float(-slope), float(np.exp(icpt)), float(1 - ss_res / ss_tot)

    def power_law_fit(self):
        """``bandwidth_hz = c * xi**p`` fitted in log-log: returns ``(c_hz, p)``."""
        p, logc = np.polyfit(np.log(self.xi), np.log(self.bandwidth_hz), 1)
        return float(np.exp(logc)), float(p)

    def to_csv(self, path) -> None:
        from .io import write_csv

        write_csv(path, ["xi", "efficiency", "bandwidth_Hz"],
                  [self.xi, self.efficiency, self.bandwidth_hz])


def bandwidth_vs_xi(xis, in_field: FieldWaveform, p: EitParams, sched: CouplingSchedule,
                    dec: DecoherenceModel | None = None, **kw) -> XiSweep:
    """Run :func:`simulate_storage` for each read/write ratio in ``xis``."""
    xis = np.asarray(xis, dtype=float)
    if np.any(xis <= 0) or np.any(xis > 16):
        raise ValueError("xi values must lie in (0, 16]")
    runs = []
    for x in xis:
        try:
            runs.append(simulate_storage(in_field, p, replace(sched, xi=float(x)), dec, **kw))
        except Exception as exc:
            n = len(runs)
            partial = XiSweep(xis[:n], np.array([r.efficiency for r in runs]),
                              np.array([r.retrieved_bandwidth for r in runs]), runs)
            raise SweepError(f"sweep failed at xi={x:g}: {exc}", partial) from exc
    return XiSweep(xis, np.array([r.efficiency for r in runs]),
                   np.array([r.retrieved_bandwidth for r in runs]), runs)


# ------------------------------------------------------------ calibration

# simulation grid: 0.625 ns time step resolves the cusp of the source G2
SIM_GRID_N = 2**16
SIM_GRID_HALF_SPAN = 2 * np.pi * 800e6


def calibrate_decoherence(in_field: FieldWaveform, p: EitParams, sched: CouplingSchedule,
                          dec: DecoherenceModel, xis=REF_XI, k_max_over_gamma: float = 1.0,
                          **kw) -> DecoherenceModel:
    """Find ``k`` such that the ξ-sweep efficiencies decay as ``exp(-gamma_s_coeff ξ)``.

    The fitted slope of ``-ln(efficiency)`` versus ξ increases monotonically
    with ``k``; it is matched to ``dec.gamma_s_coeff`` by Brent's method.
    """
    target = dec.gamma_s_coeff
    if target == 0:
        return replace(dec, k=0.0)

    def slope(k):
        sw = bandwidth_vs_xi(xis, in_field, p, sched, replace(dec, k=k), **kw)
        return sw.exponential_fit()[0] - target

    hi = k_max_over_gamma * p.Gamma
    if slope(0.0) >= 0:
        raise ValueError("static decoherence alone already exceeds the target slope")
    if slope(hi) <= 0:
        raise ValueError("target slope not reachable within k_max_over_gamma")
    k = brentq(slope, 0.0, hi, xtol=1e-5 * p.Gamma, rtol=1e-8)
    return replace(dec, k=float(k))


@dataclass(frozen=True)
class OperatingPoint:
    """Parameters of the modelled experiment, ready to feed the simulators."""

    source: CavitySpdcParams
    medium: EitParams          # Omega_c = write Rabi frequency, gamma_gs = gamma_0
    schedule: CouplingSchedule
    decoherence: DecoherenceModel
    group_delay: float

    @property
    def gamma_0(self) -> float:
        return self.decoherence.gamma_0

    @property
    def slow_light_medium(self) -> EitParams:
        """Static medium for slow light: coupling held at write power."""
        return self.medium.with_(gamma_gs=self.decoherence.write_rate)

    def spectrum(self, grid=None) -> ComplexSpectrum:
        if grid is None:
            grid = frequency_grid(SIM_GRID_N, SIM_GRID_HALF_SPAN)
        return biphoton_spectrum(self.source, grid, normalize=True)

    def input_field(self, grid=None) -> FieldWaveform:
        return signal_field(self.spectrum(grid))


# coherence time of the source G2 (``T_c``) and the write-phase delay T_d = 3 T_c
REF_COHERENCE_TIME = 25e-9
REF_DELAY = 3 * REF_COHERENCE_TIME
REF_STORAGE_TIME = 100e-9
REF_SWITCH_DURATION = 20e-9
REF_T_OFF = 2 * REF_COHERENCE_TIME
REF_POWER_EXPONENT = 2.0
# k / Gamma found by calibrate_decoherence for the settings above
REF_K_OVER_GAMMA = 0.066708


@lru_cache(maxsize=None)
def reference_operating_point() -> OperatingPoint:
    G = GAMMA_D2
    base = EitParams(REF_OPTICAL_DEPTH, G, 0.0, REF_GAMMA_0)
    rabi = rabi_for_delay(base, REF_DELAY)
    sched = CouplingSchedule(rabi, REF_T_OFF, REF_T_OFF + REF_STORAGE_TIME, 1.0,
                             REF_SWITCH_DURATION)
    dec = DecoherenceModel(REF_GAMMA_0, REF_GAMMA_S, REF_K_OVER_GAMMA * G,
                           REF_POWER_EXPONENT)
    return OperatingPoint(CavitySpdcParams.reference_source(), base.with_(Omega_c=rabi), sched,
                          dec, REF_DELAY)
