"""Frequency-stability statistics: overlapping Allan deviation,
side-of-fringe frequency tracking, and contrast-decay fits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, curve_fit


class ConvergenceError(RuntimeError):
    """A nonlinear fit failed to converge."""


@dataclass(frozen=True)
class AllanResult:
    taus: np.ndarray
    adev: np.ndarray
    error: np.ndarray


def allan_deviation(samples, period: float, taus) -> AllanResult:
    """Overlapping Allan deviation of a frequency record.

    ``samples`` are frequency readings (Hz) taken every ``period``
    seconds; each tau must be an integer multiple of the period and at
    most half the record length.  The error band is the usual white-FM
    chi-squared approximation sigma / sqrt(2 (N/m - 1)).
    """
    y = np.asarray(samples, dtype=float)
    if y.size < 3:
        raise ValueError("need at least three samples")
    if period <= 0:
        raise ValueError("sample period must be positive")
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    adev = np.empty(len(taus))
    err = np.empty(len(taus))
    n = y.size
    csum = np.concatenate([[0.0], np.cumsum(y)])
    for i, tau in enumerate(taus):
        m_f = tau / period
        m = int(round(m_f))
        if abs(m_f - m) > 1e-9 or m < 1:
            raise ValueError(f"tau = {tau} s is not a multiple of the period")
        if 2 * m > n - 1:
            raise ValueError(f"tau = {tau} s exceeds half the record")
        block = (csum[m:] - csum[:-m]) / m  # overlapping m-sample means
        d = block[m:] - block[:-m]
        adev[i] = np.sqrt(0.5 * np.mean(d * d))
        err[i] = adev[i] / np.sqrt(2.0 * (n / m - 1.0))
    return AllanResult(taus=taus, adev=adev, error=err)


def sideband_lineshape(detuning, rabi: float, pulse_time: float):
    """Excitation of a detuned Rabi pulse,
    P = (Omega^2 / W^2) sin^2(W t / 2) with W = sqrt(Omega^2 + detuning^2)."""
    detuning = np.asarray(detuning, dtype=float)
    w = np.sqrt(rabi**2 + detuning**2)
    return rabi**2 / w**2 * np.sin(0.5 * w * pulse_time) ** 2


def _flank_edge(rabi, pulse_time):
    """First zero of the lineshape above resonance (W t = 2 pi)."""
    w_zero = 2.0 * np.pi / pulse_time
    if w_zero <= rabi:
        raise ValueError("pulse too long: no monotone flank above resonance")
    return np.sqrt(w_zero**2 - rabi**2)


def half_max_detuning(rabi: float, pulse_time: float) -> float:
    """Detuning on the upper flank where the lineshape crosses half its
    resonant value; the usual side-of-fringe parking point."""
    peak = sideband_lineshape(0.0, rabi, pulse_time)
    edge = _flank_edge(rabi, pulse_time)
    return brentq(lambda d: sideband_lineshape(d, rabi, pulse_time) - 0.5 * peak,
                  0.0, edge, xtol=1e-6 * edge)


def side_of_fringe_frequency(p_excited: float, omega_center: float, rabi: float,
                             pulse_time: float, p_sigma: float = 0.0,
                             park_detuning: float | None = None):
    """Frequency estimate from one side-of-fringe excitation sample.

    The probe is parked ``park_detuning`` above the nominal resonance
    (the half-maximum point by default); inverting the lineshape on its
    monotone flank turns the measured excitation into the actual
    detuning and hence the mode frequency.  Returns (frequency, sigma)
    with the count uncertainty propagated through the local slope.
    """
    edge = _flank_edge(rabi, pulse_time)
    park = half_max_detuning(rabi, pulse_time) if park_detuning is None \
        else park_detuning
    if not 0.0 <= park <= edge:
        raise ValueError("park detuning must lie on the monotone flank")
    p_edge = sideband_lineshape(edge, rabi, pulse_time)
    p_peak = sideband_lineshape(0.0, rabi, pulse_time)
    if not p_edge < p_excited < p_peak:
        raise ValueError(f"excitation {p_excited:.3f} is outside the invertible "
                         f"flank ({p_edge:.3f}, {p_peak:.3f})")
    detuning = brentq(
        lambda d: sideband_lineshape(d, rabi, pulse_time) - p_excited,
        0.0, edge, xtol=1e-9 * edge)
    h = 1e-6 * edge
    slope = (sideband_lineshape(detuning + h, rabi, pulse_time)
             - sideband_lineshape(detuning - h, rabi, pulse_time)) / (2 * h)
    sigma = abs(p_sigma / slope) if p_sigma else 0.0
    return omega_center + (park - detuning), sigma


@dataclass(frozen=True)
class DecayFit:
    t2: float
    t2_sigma: float
    c0: float
    c0_sigma: float
    model: str


def fit_contrast_decay(times, contrasts, sigmas=None,
                       model: str = "gaussian") -> DecayFit:
    """Least-squares 1/e time of a contrast decay.

    model="exponential" fits C0 exp(-t/T2), model="gaussian" fits
    C0 exp(-(t/T2)^2).
    """
    t = np.asarray(times, dtype=float)
    c = np.asarray(contrasts, dtype=float)
    if t.size < 3:
        raise ValueError("need at least three points")
    if model == "exponential":
        def f(tt, c0, t2):
            return c0 * np.exp(-tt / t2)
    elif model == "gaussian":
        def f(tt, c0, t2):
            return c0 * np.exp(-(tt / t2) ** 2)
    else:
        raise ValueError("model must be 'exponential' or 'gaussian'")
    t2_guess = t[np.argmin(np.abs(c - c[0] / np.e))] or np.median(t)
    try:
        popt, pcov = curve_fit(f, t, c, p0=[max(c.max(), 1e-6), t2_guess],
                               sigma=sigmas, absolute_sigma=sigmas is not None,
                               maxfev=10000)
    except RuntimeError as exc:
        raise ConvergenceError(f"contrast-decay fit failed: {exc}") from exc
    perr = np.sqrt(np.diag(pcov))
    return DecayFit(t2=float(popt[1]), t2_sigma=float(perr[1]),
                    c0=float(popt[0]), c0_sigma=float(perr[0]), model=model)
