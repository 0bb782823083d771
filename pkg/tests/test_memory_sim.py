from dataclasses import replace

import numpy as np
import pytest

from eitmem import memory_sim
from eitmem.eit_medium import EitParams, GAMMA_D2, propagation_kernel, rabi_for_delay
from eitmem.memory_sim import (REF_K_OVER_GAMMA, REF_XI, CouplingSchedule, DecoherenceModel,
                               InstabilityError, StorageWindowError, SweepError, bandwidth_vs_xi,
                               calibrate_decoherence, retrieved_g2, simulate_storage, slow_light)
from eitmem.spdc_source import g2_waveform_from_spectrum, signal_field
from eitmem.waveforms import FieldWaveform, fwhm

G = GAMMA_D2


# ------------------------------------------------------------- schedule

def test_schedule_read_rabi_and_edges():
    s = CouplingSchedule(10.0, t_off=50e-9, t_on=150e-9, xi=4.0, switch_duration=20e-9)
    assert s.read_rabi == pytest.approx(20.0)
    assert s.storage_time == pytest.approx(100e-9)
    assert s.rabi(np.array([0.0, 50e-9, 100e-9, 150e-9]))[[0, 1, 2, 3]] == pytest.approx([10, 0, 0, 0])
    assert s.rabi(np.array([300e-9]))[0] == pytest.approx(20.0)
    assert s.power(np.array([0.0, 400e-9])) == pytest.approx([1.0, 4.0])


def test_schedule_switch_is_ten_to_ninety():
    s = CouplingSchedule(1.0, t_off=0.0, t_on=200e-9, switch_duration=20e-9)
    t = np.linspace(-100e-9, 0, 200001)
    om = s.rabi(t)
    t90 = t[np.argmin(np.abs(om - 0.9))]
    t10 = t[np.argmin(np.abs(om - 0.1))]
    assert t10 - t90 == pytest.approx(20e-9, rel=1e-3)


def test_schedule_hard_switch_and_constant():
    s = CouplingSchedule(2.0, t_off=0.0, t_on=1.0, switch_duration=0.0)
    assert s.rabi(np.array([-1e-9, 0.5, 1.0])) == pytest.approx([2.0, 0.0, 2.0])
    c = CouplingSchedule.constant(3.0)
    assert np.all(c.rabi(np.linspace(-1, 1, 5)) == 3.0)
    assert c.max_rabi == 3.0


@pytest.mark.parametrize("kw", [dict(write_rabi=0.0), dict(write_rabi=1.0, xi=0.0),
                                dict(write_rabi=1.0, switch_duration=-1.0),
                                dict(write_rabi=1.0, t_off=2.0, t_on=1.0)])
def test_schedule_validation(kw):
    with pytest.raises(ValueError):
        CouplingSchedule(**kw)


def test_decoherence_model():
    d = DecoherenceModel(1.0, 0.05, 2.0, power_exponent=2.0)
    assert d.rate(np.array([0.0, 1.0, 2.0])) == pytest.approx([1.0, 3.0, 9.0])
    assert d.write_rate == 3.0
    assert np.all(d.rate(np.linspace(0, 5, 11)) >= d.gamma_0)
    with pytest.raises(ValueError):
        DecoherenceModel(-1.0)
    with pytest.raises(ValueError):
        DecoherenceModel(0.0, power_exponent=0.0)


# ------------------------------------------------------------ slow light

def test_slow_light_identity_medium(sim_spectrum):
    res = slow_light(sim_spectrum, EitParams(0.0, G, G))
    g2_in = g2_waveform_from_spectrum(sim_spectrum)
    assert res.efficiency == pytest.approx(1.0, abs=1e-12)
    assert res.bandwidth == pytest.approx(g2_in.bandwidth(), rel=1e-12)
    assert res.delay == 0.0


def test_slow_light_transparent_limit(sim_spectrum):
    effs = [slow_light(sim_spectrum, EitParams(55.0, G, om * G)).efficiency for om in (5, 20, 80, 320)]
    assert np.all(np.diff(effs) > 0)
    assert effs[-1] > 0.995


def test_slow_light_delay_positive(op, sim_spectrum):
    res = slow_light(sim_spectrum, op.slow_light_medium)
    assert res.delay > 50e-9
    assert res.bandwidth_hz < 6e6


# ------------------------------------------------------- Maxwell-Bloch

def test_constant_coupling_matches_frequency_domain(op, sim_spectrum):
    p = op.slow_light_medium
    res = simulate_storage(signal_field(sim_spectrum), p, CouplingSchedule.constant(p.Omega_c))
    oracle = signal_field(propagation_kernel(p, sim_spectrum.freq_grid).filter_biphoton(sim_spectrum))
    ref = np.interp(res.out_field.time_grid, oracle.time_grid, oracle.value.real) \
        + 1j * np.interp(res.out_field.time_grid, oracle.time_grid, oracle.value.imag)
    err = np.linalg.norm(res.out_field.value - ref) / np.linalg.norm(ref)
    assert err < 1e-3


def test_zero_depth_is_transparent(op, sim_field):
    p = op.medium.with_(optical_depth=0.0)
    res = simulate_storage(sim_field, p, CouplingSchedule.constant(p.Omega_c))
    ref = np.interp(res.out_field.time_grid, sim_field.time_grid, sim_field.value.real)
    assert np.max(np.abs(res.out_field.value.real - ref)) < 1e-12 * np.abs(ref).max()
    assert res.efficiency == pytest.approx(1.0, abs=1e-3)


def test_storage_energy_budget(op, sim_field):
    res = simulate_storage(sim_field, op.medium, op.schedule, op.decoherence)
    assert abs(res.closure_error) < 5e-3
    assert res.dissipated >= 0 and res.leaked >= 0
    emitted = res.out_field.energy() / res.input_energy
    assert emitted >= res.efficiency + res.leaked
    assert emitted + res.dissipated + res.stored_residual == pytest.approx(1.0, abs=5e-3)
    assert res.efficiency_excl_switch <= res.efficiency <= 1


def test_storage_below_slow_light(op, sim_field, sim_spectrum):
    res = simulate_storage(sim_field, op.medium, op.schedule, op.decoherence)
    assert res.efficiency <= slow_light(sim_spectrum, op.slow_light_medium).efficiency


def test_converged_in_space_and_time(op, sim_field):
    base = simulate_storage(sim_field, op.medium, op.schedule, op.decoherence)
    fine_z = simulate_storage(sim_field, op.medium, op.schedule, op.decoherence, nz=401)
    fine_t = simulate_storage(sim_field, op.medium, op.schedule, op.decoherence, dt_factor=80)
    assert fine_z.efficiency == pytest.approx(base.efficiency, abs=2e-3)
    assert fine_t.efficiency == pytest.approx(base.efficiency, abs=2e-3)


def test_ideal_memory_limit(op, sim_field, sim_spectrum):
    # no decoherence, very deep medium, slow switching: nothing is lost beyond writing
    p = op.medium.with_(optical_depth=800.0, gamma_gs=0.0)
    p = p.with_(Omega_c=rabi_for_delay(p, 250e-9))
    s = CouplingSchedule(p.Omega_c, 150e-9, 250e-9, 1.0, 60e-9)
    res = simulate_storage(sim_field, p, s, DecoherenceModel(), readout=2000e-9)
    ref = slow_light(sim_spectrum, p).efficiency
    assert res.efficiency == pytest.approx(ref, abs=0.02)


def test_efficiency_independent_of_xi_without_decoherence(op, sim_field):
    sw = bandwidth_vs_xi([1.0, 2.0, 4.0, 6.0, 9.0], sim_field, op.medium, op.schedule,
                         DecoherenceModel())
    assert np.ptp(sw.efficiency) < 0.01


def test_storage_window_error(op, sim_field):
    s = replace(op.schedule, t_on=op.schedule.t_off + 10e-9)
    with pytest.raises(StorageWindowError):
        simulate_storage(sim_field, op.medium, s, op.decoherence)


def test_late_input_rejected(op, sim_field):
    late = sim_field.shifted(400e-9)
    with pytest.raises(ValueError):
        simulate_storage(late, op.medium, op.schedule, op.decoherence)


def test_instability_detected(op, sim_field):
    with pytest.raises(InstabilityError):
        simulate_storage(sim_field, op.medium, op.schedule, op.decoherence, dt_factor=0.2)


def test_retrieved_g2_delay_and_shape(op, sim_spectrum):
    g2_in = g2_waveform_from_spectrum(sim_spectrum)
    g2 = retrieved_g2(sim_spectrum, op.medium, op.schedule, op.decoherence)
    assert g2.peak_time() - g2_in.peak_time() >= op.schedule.storage_time
    assert np.all(g2.value >= 0)


def test_sweep_bandwidth_ordering(reference_sweep):
    bw = reference_sweep.bandwidth
    assert bw[0] < bw[1]                 # ξ = 0.72 broadens the retrieved G2
    assert np.all(np.diff(bw[1:]) > 0)   # stronger read compresses it


def test_sweep_entry_matches_single_run(op, sim_field, reference_sweep):
    single = simulate_storage(sim_field, op.medium, op.schedule, op.decoherence)
    i = REF_XI.index(1.0)
    assert reference_sweep.efficiency[i] == single.efficiency
    assert reference_sweep.bandwidth[i] == single.retrieved_bandwidth


def test_bandwidth_doubles_from_one_to_four(op, sim_field):
    sw = bandwidth_vs_xi([1.0, 4.0], sim_field, op.medium, op.schedule, op.decoherence)
    assert sw.bandwidth[1] / sw.bandwidth[0] == pytest.approx(2.0, rel=0.1)


def test_sweep_range_and_partial_results(op, sim_field, monkeypatch):
    with pytest.raises(ValueError):
        bandwidth_vs_xi([0.0, 1.0], sim_field, op.medium, op.schedule)
    with pytest.raises(ValueError):
        bandwidth_vs_xi([1.0, 17.0], sim_field, op.medium, op.schedule)
    real = memory_sim.simulate_storage

    def flaky(f, p, s, d=None, **kw):
        if s.xi == 2.0:
            raise InstabilityError("boom")
        return real(f, p, s, d, **kw)

    monkeypatch.setattr(memory_sim, "simulate_storage", flaky)
    with pytest.raises(SweepError) as exc:
        bandwidth_vs_xi([0.72, 1.0, 2.0, 3.5], sim_field, op.medium, op.schedule, op.decoherence)
    assert list(exc.value.partial.xi) == [0.72, 1.0]
    assert len(exc.value.partial.runs) == 2


def test_sweep_fits_and_csv(reference_sweep, tmp_path):
    gs, amp, r2 = reference_sweep.exponential_fit()
    assert 0 < amp <= 1 and 0 < r2 <= 1
    c, p = reference_sweep.power_law_fit()
    assert c > 0
    reference_sweep.to_csv(tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "xi,efficiency,bandwidth_Hz"


def test_exponential_fit_recovers_exact_law():
    xi = np.array(REF_XI)
    sw = memory_sim.XiSweep(xi, 0.4 * np.exp(-0.055 * xi), np.sqrt(xi), [])
    gs, amp, r2 = sw.exponential_fit()
    assert gs == pytest.approx(0.055) and amp == pytest.approx(0.4) and r2 == pytest.approx(1.0)
    c, p = sw.power_law_fit()
    assert p == pytest.approx(0.5) and c == pytest.approx(1 / (2 * np.pi))


def test_operating_point(op):
    assert op.group_delay == pytest.approx(75e-9)
    assert op.schedule.write_rabi == op.medium.Omega_c
    assert op.gamma_0 == pytest.approx(0.065 * G)
    assert op.slow_light_medium.gamma_gs == pytest.approx(op.decoherence.write_rate)


def test_calibration_reproduces_constant(op, sim_field):
    dec = calibrate_decoherence(sim_field, op.medium, op.schedule, op.decoherence)
    assert dec.k / G == pytest.approx(REF_K_OVER_GAMMA, rel=1e-3)


def test_calibration_trivial_and_unreachable(op, sim_field):
    assert calibrate_decoherence(sim_field, op.medium, op.schedule,
                                 replace(op.decoherence, gamma_s_coeff=0.0)).k == 0.0
    with pytest.raises(ValueError):
        calibrate_decoherence(sim_field, op.medium, op.schedule,
                              replace(op.decoherence, gamma_s_coeff=0.055),
                              k_max_over_gamma=1e-3)
