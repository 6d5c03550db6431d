"""Micromotion diagnostics from driven fluorescence modulation.

A four-level optical Bloch equation (two ground and two excited Zeeman
sublevels of a J=1/2 to J=1/2 cycling transition) is driven by a laser
whose phase is modulated by the ion's micromotion.  Phase modulation of
index beta at the drive frequency is exactly a time-dependent detuning
delta(t) = delta + beta Omega_rf cos(Omega_rf t), which is how it
enters the rotating-frame Hamiltonian here.  The periodic steady state
yields the modulation contrast of the excited-state population,
amplitude over mean; inverting the monotone beta-contrast relation
calibrated over a grid turns a measured contrast into the modulation
index and the residual RF field
E_rf = beta m Omega_rf^2 / (k q).
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, replace

import numpy as np
from scipy.interpolate import PchipInterpolator

from ..constants import HBAR, IonSpecies

BOHR_MAGNETON = 9.2740100783e-24  # J/T


class PeriodicityError(RuntimeError):
    """The driven system did not settle into a periodic steady state."""


class CalibrationRangeError(ValueError):
    """A contrast falls outside the calibrated monotone range."""


@dataclass(frozen=True)
class ObeConfig:
    """Four-level drive configuration.

    linewidth is the excited-state decay rate Gamma (rad/s), detuning
    the laser offset from the unshifted transition (rad/s, negative is
    red), saturation the usual s = 2 Omega^2 / Gamma^2 of the summed
    dipole coupling, polarization the (sigma-, pi, sigma+) intensity
    weights.  Zeeman splittings use the Lande factors of the S1/2 and
    P1/2 manifolds by default.
    """

    linewidth: float
    detuning: float
    saturation: float = 1.0
    b_field: float = 4.5e-4
    omega_rf: float = 2 * np.pi * 23.2e6
    modulation_index: float = 0.0
    wavevector: float = 2 * np.pi / 370e-9
    polarization: tuple = (1 / 3, 1 / 3, 1 / 3)
    g_ground: float = 2.0
    g_excited: float = 2 / 3

    def __post_init__(self):
        if self.linewidth <= 0:
            raise ValueError("linewidth must be positive")
        if self.saturation < 0:
            raise ValueError("saturation must be nonnegative")
        if self.modulation_index < 0:
            raise ValueError("modulation index must be nonnegative")
        if len(self.polarization) != 3 or min(self.polarization) < 0:
            raise ValueError("polarization weights must be three nonnegative numbers")


# basis: 0 = g(-1/2), 1 = g(+1/2), 2 = e(-1/2), 3 = e(+1/2)
# branching of each excited state: pi channel 1/3, sigma channel 2/3
_DECAY_CHANNELS = ((0, 2, 1 / 3), (1, 2, 2 / 3), (1, 3, 1 / 3), (0, 3, 2 / 3))


def _liouvillians(cfg: ObeConfig):
    """Constant and cos(Omega_rf t) parts of the 16x16 Liouvillian."""
    zeeman = BOHR_MAGNETON * cfg.b_field / HBAR
    shift_g = 0.5 * cfg.g_ground * zeeman
    shift_e = 0.5 * cfg.g_excited * zeeman
    level_shift = np.array([-shift_g, shift_g, -shift_e, shift_e])
    rabi = cfg.linewidth * np.sqrt(cfg.saturation / 2.0)
    w_sm, w_pi, w_sp = cfg.polarization
    coupling = np.zeros((4, 4))
    coupling[2, 0] = np.sqrt(w_pi / 3.0)        # pi: g- to e-
    coupling[3, 1] = -np.sqrt(w_pi / 3.0)       # pi: g+ to e+
    coupling[3, 0] = np.sqrt(w_sp * 2.0 / 3.0)  # sigma+: g- to e+
    coupling[2, 1] = np.sqrt(w_sm * 2.0 / 3.0)  # sigma-: g+ to e-
    excited = np.diag([0.0, 0.0, 1.0, 1.0])
    h0 = np.diag(level_shift) - cfg.detuning * excited \
        + 0.5 * rabi * (coupling + coupling.T)
    eye = np.eye(4)

    def commutator_part(h):
        return -1j * (np.kron(h, eye) - np.kron(eye, h.T))

    l0 = commutator_part(h0).astype(complex)
    for g_idx, e_idx, weight in _DECAY_CHANNELS:
        jump = np.zeros((4, 4))
        jump[g_idx, e_idx] = 1.0
        jdj = jump.T @ jump
        l0 += cfg.linewidth * weight * (
            np.kron(jump, jump.conj())
            - 0.5 * (np.kron(jdj, eye) + np.kron(eye, jdj.T)))
    l1 = commutator_part(-cfg.modulation_index * cfg.omega_rf * excited)
    return l0, l1


def _period_propagator(l0, l1, omega_rf, steps):
    period = 2.0 * np.pi / omega_rf
    dt = period / steps
    prop = np.eye(16, dtype=complex)
    t = 0.0
    for _ in range(steps):
        def rhs(x, tt):
            return (l0 + np.cos(omega_rf * tt) * l1) @ x
        k1 = rhs(prop, t)
        k2 = rhs(prop + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = rhs(prop + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = rhs(prop + dt * k3, t + dt)
        prop = prop + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt
    return prop


def obe_modulation_contrast(cfg: ObeConfig, steps_per_period: int = 300,
                            max_cycles: int = 5000, tol: float = 1e-12,
                            rho0=None) -> float:
    """Steady-state fluorescence modulation contrast at the drive
    frequency: the fitted amplitude of the excited-state population
    oscillation divided by its mean.

    The one-period propagator is iterated from rho0 (an even ground
    mixture by default) until the state is periodic to `tol`; the
    excited population over one final period is then demodulated at
    Omega_rf.
    """
    l0, l1 = _liouvillians(cfg)
    prop = _period_propagator(l0, l1, cfg.omega_rf, steps_per_period)
    if rho0 is None:
        rho = np.diag([0.5, 0.5, 0.0, 0.0]).astype(complex)
    else:
        rho = np.asarray(rho0, dtype=complex)
    state = rho.reshape(-1)
    for _ in range(max_cycles):
        nxt = prop @ state
        if np.max(np.abs(nxt - state)) < tol:
            state = nxt
            break
        state = nxt
    else:
        raise PeriodicityError(
            f"no periodic steady state within {max_cycles} drive cycles")
    period = 2.0 * np.pi / cfg.omega_rf
    dt = period / steps_per_period
    p_exc = np.empty(steps_per_period)
    cos_w = np.empty(steps_per_period)
    sin_w = np.empty(steps_per_period)
    t = 0.0
    x = state.copy()
    for k in range(steps_per_period):
        rho_t = x.reshape(4, 4)
        p_exc[k] = rho_t[2, 2].real + rho_t[3, 3].real
        cos_w[k] = np.cos(cfg.omega_rf * t)
        sin_w[k] = np.sin(cfg.omega_rf * t)

        def rhs(v, tt):
            return (l0 + np.cos(cfg.omega_rf * tt) * l1) @ v
        k1 = rhs(x, t)
        k2 = rhs(x + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = rhs(x + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = rhs(x + dt * k3, t + dt)
        x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt
    mean = p_exc.mean()
    amplitude = 2.0 * np.hypot(np.mean(p_exc * cos_w), np.mean(p_exc * sin_w))
    return float(amplitude / mean)


@dataclass(frozen=True)
class BetaCalibration:
    """Monotone modulation-index to contrast map for one drive setting."""

    betas: np.ndarray
    contrasts: np.ndarray
    config: ObeConfig
    ion: IonSpecies

    def __post_init__(self):
        if np.any(np.diff(self.contrasts) <= 0):
            raise ValueError("calibration contrasts must increase with beta")


def calibrate_beta_contrast(cfg: ObeConfig, ion: IonSpecies, betas=None,
                            workers: int = 1, **contrast_kwargs) -> BetaCalibration:
    """Sweep the modulation index (21 points on [0, 0.5] by default)
    and record the steady-state contrast for later inversion."""
    betas = np.linspace(0.0, 0.5, 21) if betas is None \
        else np.asarray(betas, dtype=float)

    def one(beta):
        return obe_modulation_contrast(replace(cfg, modulation_index=float(beta)),
                                       **contrast_kwargs)

    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            contrasts = np.array(list(pool.map(one, betas)))
    else:
        contrasts = np.array([one(b) for b in betas])
    return BetaCalibration(betas=betas, contrasts=contrasts, config=cfg, ion=ion)


def e_rf_from_beta(beta: float, ion: IonSpecies, omega_rf: float,
                   wavevector: float) -> float:
    """Residual RF field amplitude E_rf = beta m Omega_rf^2 / (k q), V/m."""
    return beta * ion.mass * omega_rf**2 / (wavevector * abs(ion.charge))


def beta_from_contrast(contrast: float, calibration: BetaCalibration):
    """Invert the calibrated contrast map; returns (beta, e_rf).

    Monotone cubic interpolation on the calibration grid; contrasts
    outside the calibrated range raise CalibrationRangeError rather
    than extrapolating.
    """
    lo, hi = calibration.contrasts[0], calibration.contrasts[-1]
    if not lo <= contrast <= hi:
        raise CalibrationRangeError(
            f"contrast {contrast:.4g} outside the calibrated range "
            f"[{lo:.4g}, {hi:.4g}]")
    inverse = PchipInterpolator(calibration.contrasts, calibration.betas)
    beta = float(inverse(contrast))
    e_rf = e_rf_from_beta(beta, calibration.ion, calibration.config.omega_rf,
                          calibration.config.wavevector)
    return beta, e_rf
