"""Compiled inner loop of the Maxwell-Bloch solver.

Retarded-frame equations for a weak probe in a Λ system, with z scaled to
the medium length (0 <= z <= 1):

    dP/dt = -(Γ/2 - iδ_ge) P + (i/2) Ω S + (i/2) E
    dS/dt = -(γ/2 - iδ_gs) S + (i/2) Ω* P
    dE/dz = i β P,          β = αΓ/2

E is slaved to the atomic polarization along z, so each RK4 stage rebuilds
it by cumulative trapezoid quadrature from the entrance value.
"""
import numpy as np
import numba


@numba.njit(cache=True)
def _rhs(P, S, E0, om, gam, dge, dgs, beta, dz, G, dP, dS):
    nz = P.shape[0]
    acc = 0j
    E = E0
    for j in range(nz):
        if j > 0:
            acc += 0.5 * (P[j] + P[j - 1]) * dz
            E = E0 + 1j * beta * acc
        dP[j] = -(0.5 * G - 1j * dge) * P[j] + 0.5j * om * S[j] + 0.5j * E
        dS[j] = -(0.5 * gam - 1j * dgs) * S[j] + 0.5j * np.conj(om) * P[j]
    return E


@numba.njit(cache=True)
def _exit_field(P, E0, beta, dz):
    acc = 0j
    for j in range(1, P.shape[0]):
        acc += 0.5 * (P[j] + P[j - 1]) * dz
    return E0 + 1j * beta * acc


@numba.njit(cache=True)
def _zint(a, b, wa, wb, dz):
    # trapezoid over z of wa|a|^2 + wb|b|^2
    nz = a.shape[0]
    s = 0.0
    for j in range(nz):
        v = wa * (a[j].real ** 2 + a[j].imag ** 2) + wb * (b[j].real ** 2 + b[j].imag ** 2)
        s += v if 0 < j < nz - 1 else 0.5 * v
    return s * dz


@numba.njit(cache=True)
def integrate(Ein, Om, gam, dt, nz, beta, G, dge, dgs):
    """RK4 in time. Drive arrays are sampled on half steps (length 2*nt + 1).

    Returns ``(E_out[nt+1], stored_end, dissipated, bad_step)`` where the energy
    terms share the units of ``∫|E|^2 dt`` and ``bad_step`` is the first step
    whose atomic energy grew beyond what the input could supply (-1 if none).
    """
    nt = (Ein.shape[0] - 1) // 2
    dz = 1.0 / (nz - 1)
    P = np.zeros(nz, np.complex128)
    S = np.zeros(nz, np.complex128)
    k1P = np.empty(nz, np.complex128)
    k1S = np.empty(nz, np.complex128)
    k2P = np.empty(nz, np.complex128)
    k2S = np.empty(nz, np.complex128)
    k3P = np.empty(nz, np.complex128)
    k3S = np.empty(nz, np.complex128)
    k4P = np.empty(nz, np.complex128)
    k4S = np.empty(nz, np.complex128)
    tP = np.empty(nz, np.complex128)
    tS = np.empty(nz, np.complex128)
    out = np.empty(nt + 1, np.complex128)
    out[0] = Ein[0]
    w_old = 0.0
    loss_old = 0.0
    dissipated = 0.0
    bad = -1
    for n in range(nt):
        i0 = 2 * n
        _rhs(P, S, Ein[i0], Om[i0], gam[i0], dge, dgs, beta, dz, G, k1P, k1S)
        for j in range(nz):
            tP[j] = P[j] + 0.5 * dt * k1P[j]
            tS[j] = S[j] + 0.5 * dt * k1S[j]
        _rhs(tP, tS, Ein[i0 + 1], Om[i0 + 1], gam[i0 + 1], dge, dgs, beta, dz, G, k2P, k2S)
        for j in range(nz):
            tP[j] = P[j] + 0.5 * dt * k2P[j]
            tS[j] = S[j] + 0.5 * dt * k2S[j]
        _rhs(tP, tS, Ein[i0 + 1], Om[i0 + 1], gam[i0 + 1], dge, dgs, beta, dz, G, k3P, k3S)
        for j in range(nz):
            tP[j] = P[j] + dt * k3P[j]
            tS[j] = S[j] + dt * k3S[j]
        _rhs(tP, tS, Ein[i0 + 2], Om[i0 + 2], gam[i0 + 2], dge, dgs, beta, dz, G, k4P, k4S)
        for j in range(nz):
            P[j] += dt / 6 * (k1P[j] + 2 * k2P[j] + 2 * k3P[j] + k4P[j])
            S[j] += dt / 6 * (k1S[j] + 2 * k2S[j] + 2 * k3S[j] + k4S[j])
        out[n + 1] = _exit_field(P, Ein[i0 + 2], beta, dz)

        w_new = 2 * beta * _zint(P, S, 1.0, 1.0, dz)
        loss_new = 2 * beta * _zint(P, S, G, gam[i0 + 2], dz)
        dissipated += 0.5 * dt * (loss_old + loss_new)
        loss_old = loss_new
        if bad < 0:
            a0 = Ein[i0].real ** 2 + Ein[i0].imag ** 2
            a1 = Ein[i0 + 2].real ** 2 + Ein[i0 + 2].imag ** 2
            supply = dt * max(a0, a1)
            if not np.isfinite(w_new) or w_new > 1.01 * (w_old + supply) + 1e-300:
                bad = n
                break
        w_old = w_new
    return out, w_old, dissipated, bad
