"""Coincidence histograms, the g2 estimator and the peak-g2 model.

Run with ``python demos/03_correlations.py``.
"""
import numpy as np

from eitmem.coincidence import (DetectionParams, G2Model, analytic_g2, calibrate_accidental_rate,
                                calibrate_leak_coeff, estimate_g2, fit_g2_model, g2_peak_model,
                                model_maximum, monte_carlo_histogram)
from eitmem.memory_sim import REF_XI, reference_operating_point, simulate_storage
from eitmem.spdc_source import g2_waveform_from_spectrum

op = reference_operating_point()
src = g2_waveform_from_spectrum(op.spectrum())
stored = simulate_storage(op.input_field(), op.medium, op.schedule, op.decoherence).out_field.to_g2()

# Accidentals are a free input. Fix them so the bare source reads g2 = 47,
# then add coupling leakage until the retrieved photon reads 5.8.
d = DetectionParams()
d = DetectionParams(accidental_rate=calibrate_accidental_rate(src, d, 47.0))
d_mem = DetectionParams(accidental_rate=d.accidental_rate,
                        leak_coeff=calibrate_leak_coeff(stored, d, 1.0, 5.8))
print(f"accidental rate {d.accidental_rate:.0f} /s, leakage {d_mem.leak_coeff:.4f} per window per ξ")

for name, g2, det, xi in (("source", src, d, 0.0), ("stored, ξ = 1", stored, d_mem, 1.0)):
    h = monte_carlo_histogram(g2, det, xi, seed=2024)
    est = estimate_g2(h)
    print(f"\n{name}: {h.counts.sum()} counts from {det.n_triggers} heralds")
    print(f"  g2 = {est.g2:.2f} ± {est.uncertainty:.2f} at {est.tau_d * 1e9:.1f} ns "
          f"(infinite statistics {analytic_g2(g2, det, xi):.2f}); "
          f"{'above' if est.above_classical_limit else 'not above'} the classical limit 2")
    top = h.counts.max()
    for k in range(0, 100, 4):
        print(f"  {h.bin_edges[k] * 1e9:6.0f} ns " + "#" * int(50 * h.counts[k:k + 4].max() / top))

# Peak g2 versus read power: the signal grows as sqrt(ξ) and decays through
# decoherence, while leakage raises the floor linearly.
m = G2Model(1.0, 0.055, 0.43, 2.8).scaled_to(1.0, 5.8)
xs, gmax = model_maximum(m)
print(f"\npeak-g2 model: maximum {gmax:.2f} at ξ = {xs:.2f}")
for x in REF_XI:
    print(f"  ξ = {x:4.2f}   g2 = {g2_peak_model(m, x):.2f}")

# g2 alone only fixes the shape of the model. The floor counts fix its scale.
rng = np.random.default_rng(5)
xi = np.array(REF_XI + (12.0,))
g = g2_peak_model(m, xi) * (1 + 0.05 * rng.standard_normal(xi.size))
fl = m.floor(xi) * (1 + 0.05 * rng.standard_normal(xi.size))
fit = fit_g2_model(xi, g, 0.05 * g, floor=fl, floor_sigma=0.05 * fl)
err = np.sqrt(np.diag(fit.covariance))
print("\nfit to noisy synthetic points")
for name, v, e in zip(("N_si", "gamma_s", "leak_coeff", "N_b"), fit.model.as_array(), err):
    print(f"  {name:10s} {v:8.4f} ± {e:.4f}")
