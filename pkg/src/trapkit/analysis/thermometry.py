"""Sideband-ratio thermometry, heating-rate fits, and the conversion
from heating rate to electric-field noise spectral density."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..constants import HBAR, IonSpecies


class ThermometryRangeWarning(UserWarning):
    """Sideband-ratio thermometry degrades far from the ground state."""


def nbar_from_sideband_ratio(r: float, r_sigma: float = 0.0):
    """Mean phonon number from the red/blue sideband ratio, nbar = r/(1-r).

    Returns (nbar, sigma) with the uncertainty propagated through the
    derivative 1/(1-r)^2.  Warns when the inferred nbar exceeds 2,
    where the thermal-ratio method loses sensitivity.
    """
    if not 0.0 <= r < 1.0:
        raise ValueError(f"sideband ratio must be in [0, 1), got {r}")
    nbar = r / (1.0 - r)
    sigma = r_sigma / (1.0 - r) ** 2
    if nbar > 2.0:
        warnings.warn(f"nbar = {nbar:.2f} inferred from the sideband ratio; the "
                      "method is unreliable this far from the ground state",
                      ThermometryRangeWarning, stacklevel=2)
    return nbar, sigma


def sideband_ratio(p_rsb, p_bsb):
    """Least-squares ratio r between paired sideband excitation curves.

    For a thermal state P_rsb(t) = r * P_bsb(t) at every probe time,
    so the scalar fit uses all points at once.  Returns (r, sigma).
    """
    p_rsb = np.asarray(p_rsb, dtype=float)
    p_bsb = np.asarray(p_bsb, dtype=float)
    if p_rsb.shape != p_bsb.shape or p_rsb.size == 0:
        raise ValueError("sideband curves must be non-empty and aligned")
    denom = float(np.sum(p_bsb**2))
    if denom == 0.0:
        raise ValueError("blue sideband curve is identically zero")
    r = float(np.sum(p_rsb * p_bsb)) / denom
    resid = p_rsb - r * p_bsb
    dof = max(p_rsb.size - 1, 1)
    sigma = float(np.sqrt(np.sum(resid**2) / dof / denom))
    return r, sigma


@dataclass(frozen=True)
class LineFit:
    slope: float
    slope_sigma: float
    intercept: float
    intercept_sigma: float


def heating_rate_fit(times, nbars, sigmas=None) -> LineFit:
    """Weighted least-squares line nbar(t) = nbar0 + rate * t.

    With per-point sigmas the parameter errors come from the weighted
    normal equations; without them, from the residual scatter.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(nbars, dtype=float)
    if t.size < 2:
        raise ValueError("need at least two points")
    if np.ptp(t) == 0.0:
        raise ValueError("degenerate abscissa: all wait times equal")
    if sigmas is None:
        w = np.ones_like(t)
    else:
        s = np.asarray(sigmas, dtype=float)
        if np.any(s <= 0):
            raise ValueError("sigmas must be positive")
        w = 1.0 / s**2
    sw, swt, swt2 = np.sum(w), np.sum(w * t), np.sum(w * t * t)
    swy, swty = np.sum(w * y), np.sum(w * t * y)
    det = sw * swt2 - swt**2
    slope = (sw * swty - swt * swy) / det
    intercept = (swt2 * swy - swt * swty) / det
    var_slope = sw / det
    var_intercept = swt2 / det
    if sigmas is None and t.size > 2:
        chi2 = np.sum(w * (y - intercept - slope * t) ** 2) / (t.size - 2)
        var_slope *= chi2
        var_intercept *= chi2
    return LineFit(slope=float(slope), slope_sigma=float(np.sqrt(var_slope)),
                   intercept=float(intercept),
                   intercept_sigma=float(np.sqrt(var_intercept)))


@dataclass(frozen=True)
class FieldNoise:
    """Electric-field noise spectral density and its frequency-rescaled
    value for cross-trap comparison (assumes S_E falls off as 1/omega)."""

    s_e: float
    s_e_rescaled: float
    omega: float
    reference_omega: float


def field_noise_from_heating(nbar_dot: float, omega: float, ion: IonSpecies,
                             reference_omega: float = 2 * np.pi * 1e6) -> FieldNoise:
    """Convert a heating rate (quanta/s) at mode frequency omega into
    S_E = 4 m hbar omega nbar_dot / e^2 (V^2 m^-2 Hz^-1), plus the
    value rescaled to the reference frequency."""
    if nbar_dot < 0 or omega <= 0:
        raise ValueError("need nbar_dot >= 0 and omega > 0")
    s_e = 4.0 * ion.mass * HBAR * omega * nbar_dot / ion.charge**2
    return FieldNoise(s_e=s_e, s_e_rescaled=s_e * omega / reference_omega,
                      omega=omega, reference_omega=reference_omega)
