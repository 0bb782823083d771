"""Store the photon, then change its bandwidth with the read coupling power.

Run with ``python demos/02_storage_and_readout_control.py`` (about 10 s).
"""
from dataclasses import replace

import numpy as np

from eitmem.memory_sim import (REF_XI, bandwidth_vs_xi, reference_operating_point,
                               simulate_storage)

op = reference_operating_point()
field = op.input_field()
sched = op.schedule

print("coupling schedule")
print(f"  write edge ends at    {sched.t_off * 1e9:6.1f} ns after the herald")
print(f"  dark storage          {sched.storage_time * 1e9:6.1f} ns")
print(f"  10-90% switch time    {sched.switch_duration * 1e9:6.1f} ns")
dec = op.decoherence
print(f"  decoherence           γ0 = {dec.gamma_0 / op.medium.Gamma:.3f} Γ, "
      f"k = {dec.k / op.medium.Gamma:.4f} Γ x (P/P_w)^{dec.power_exponent:g}")

# One full cycle. The energy budget has to close: what comes out, what the
# atoms dissipated and what is left in the medium add up to the input.
res = simulate_storage(field, op.medium, sched, op.decoherence)
print("\nwrite / store / read at ξ = 1")
print(f"  leaked before t_off   {res.leaked:6.3f}")
print(f"  retrieved             {res.efficiency:6.3f}")
print(f"  retrieved, no switch  {res.efficiency_excl_switch:6.3f}")
print(f"  dissipated            {res.dissipated:6.3f}")
print(f"  closure error         {res.closure_error:+.1e}")
print(f"  retrieved bandwidth   {res.retrieved_bandwidth_hz / 1e6:6.2f} MHz")

# A short ASCII trace of the retrieved intensity.
out = res.out_field.window(*res.window)
t, I = out.time_grid, out.intensity()
print("\n  t [ns]   retrieved |E|^2")
for tk in np.arange(t[0], t[0] + 300e-9, 15e-9):
    v = np.interp(tk, t, I) / I.max()
    print(f"  {tk * 1e9:6.0f}   " + "#" * int(50 * v))

# Reading harder releases the spin wave faster: the photon comes out shorter
# and broader in frequency, while the coupling-induced decoherence costs
# efficiency.
sw = bandwidth_vs_xi(REF_XI, field, op.medium, sched, op.decoherence)
print("\n   ξ     efficiency   bandwidth [MHz]")
for x, e, b in zip(sw.xi, sw.efficiency, sw.bandwidth_hz):
    print(f"  {x:4.2f}   {e:8.3f}     {b / 1e6:8.2f}")
gs, amp, r2 = sw.exponential_fit()
c, p = sw.power_law_fit()
print(f"\n  efficiency ~ {amp:.3f} exp(-{gs:.4f} ξ), R² = {r2:.4f}")
print(f"  bandwidth  ~ {c / 1e6:.2f} MHz ξ^{p:.2f}")

# With the decoherence switched off the efficiency no longer depends on the
# read power: everything lost was lost while writing.
ideal = bandwidth_vs_xi([1.0, 4.0, 8.7], field, op.medium, sched, replace(dec, gamma_0=0.0, k=0.0))
print("\n  no decoherence: efficiency", " ".join(f"{e:.3f}" for e in ideal.efficiency))
