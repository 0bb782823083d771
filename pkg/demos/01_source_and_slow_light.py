"""Heralded photons from a cavity SPDC source, slowed down in an EIT medium.

Run with ``python demos/01_source_and_slow_light.py``.
"""
import numpy as np

from eitmem.eit_medium import eit_bandwidth, group_delay, transmission_spectrum
from eitmem.memory_sim import reference_operating_point, slow_light
from eitmem.spdc_source import g2_waveform_from_spectrum

MHZ = 2 * np.pi * 1e6

op = reference_operating_point()
spec = op.spectrum()
g2 = g2_waveform_from_spectrum(spec)

# The source is a lossless symmetric cavity. Its biphoton G2 decays as
# exp(-Γ|τ|), so the linewidth is fixed by asking for 1/FWHM = 6.2 MHz.
print("source")
print(f"  cavity linewidth      {op.source.Gamma_s / MHZ:6.2f} MHz")
print(f"  G2 FWHM (T_c)         {g2.fwhm() * 1e9:6.2f} ns")
print(f"  1/FWHM                {g2.bandwidth_hz() / 1e6:6.2f} MHz")
print(f"  |Ψ|^2 FWHM            {spec.fwhm() / MHZ:6.2f} MHz")

# The write coupling is chosen so that the group delay is three coherence
# times. The medium sees the static decoherence plus the rate the write
# coupling itself induces.
p = op.slow_light_medium
print("\nmedium")
print(f"  optical depth         {p.optical_depth:6.1f}")
print(f"  write Rabi frequency  {p.Omega_c / p.Gamma:6.3f} Γ")
print(f"  decoherence           {p.gamma_gs / p.Gamma:6.4f} Γ")
print(f"  group delay           {group_delay(p) * 1e9:6.1f} ns")
print(f"  window FWHM           {eit_bandwidth(p) / MHZ:6.2f} MHz")

det = np.linspace(-3, 3, 13) * p.Gamma
print("\n  detuning [Γ]   T")
for d, T in zip(det / p.Gamma, transmission_spectrum(p, det)):
    print(f"  {d:+6.2f}     {T:.4f}  " + "#" * int(40 * T))

# The window is much narrower than the photon, so slow light both delays and
# narrows it. The efficiency is the window-averaged transmission.
res = slow_light(spec, p)
print("\nslow light")
print(f"  efficiency            {res.efficiency:6.3f}")
print(f"  G2 peak delay         {res.delay * 1e9:6.1f} ns")
print(f"  bandwidth             {res.bandwidth_hz / 1e6:6.2f} MHz")
