"""Paul trap model: stability, secular frequencies, dissipated power,
trajectory integration, and the Monte-Carlo trap depth bound.

Conventions.  The RF drive produces a radial quadrupole whose field
amplitude grows linearly from the null, ``|E| = kappa V_rf r / d^2``.
The Mathieu drive parameter is then

    q = 2 e kappa V_rf / (m Omega_rf^2 d^2)

and the static parameters ``a`` collect the twist quadrupole and the
radial anti-curvature of the endcap confinement.  Secular frequencies
use the lowest-order pseudopotential expression
``omega = (Omega_rf / 2) sqrt(q^2/2 + a)``.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass

import numpy as np

from .constants import ELEMENTARY_CHARGE, IonSpecies
from .fields import IdealQuadrupoleField, OutOfDomainError
from .rng import derived_stream as shot_stream

#: approximate edge of the first stability region at small a
Q_STABILITY_LIMIT = 0.908

#: default integration step, fraction of the drive period
STEPS_PER_PERIOD = 200


class UnstableDriveError(ValueError):
    """Drive parameters fall outside the first stability region."""


class StepSizeError(ValueError):
    """Integration step too coarse for the requested dynamics."""


@dataclass(frozen=True)
class TrapConfig:
    """Electrode geometry and drive parameters.

    d is the ion-electrode distance (m), kappa the dimensionless radial
    geometric factor, omega_rf the drive angular frequency (rad/s), and
    v_rf the peak RF voltage (V).  v_twist biases the radial static
    quadrupole; v_endcap sets the axial confinement through the
    calibration constant axial_curvature_per_volt ((rad/s)^2 per volt),
    so that omega_axial^2 = axial_curvature_per_volt * v_endcap.
    """

    d: float
    kappa: float
    omega_rf: float
    v_rf: float
    v_twist: float = 0.0
    v_endcap: float = 0.0
    axial_curvature_per_volt: float = 0.0

    def __post_init__(self):
        vals = [self.d, self.kappa, self.omega_rf, self.v_rf, self.v_twist,
                self.v_endcap, self.axial_curvature_per_volt]
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("trap parameters must be finite")
        if self.d <= 0:
            raise ValueError("ion-electrode distance d must be positive")
        if not 0.0 < self.kappa <= 1.0:
            raise ValueError("geometric factor kappa must be in (0, 1]")
        if self.omega_rf <= 0:
            raise ValueError("omega_rf must be positive")
        if self.v_rf < 0:
            raise ValueError("v_rf must be nonnegative")

    @property
    def rf_period(self) -> float:
        return 2.0 * np.pi / self.omega_rf


@dataclass(frozen=True)
class DissipationParams:
    """Effective series resistance (ohm) and total trap capacitance (F)."""

    r_series: float
    c_trap: float

    def __post_init__(self):
        if self.r_series < 0 or self.c_trap < 0:
            raise ValueError("resistance and capacitance must be nonnegative")


@dataclass(frozen=True)
class MathieuParameters:
    q: float
    a_y: float
    a_z: float
    stable: bool


@dataclass(frozen=True)
class SecularFrequencies:
    omega_hf: float
    omega_lf: float
    omega_axial: float


def mathieu_parameters(trap: TrapConfig, ion: IonSpecies) -> MathieuParameters:
    """Dimensionless Mathieu q and per-axis a for the radial plane.

    Stability is flagged with the small-a approximation q < 0.908
    together with positivity of the lowest-order beta^2 = a + q^2/2 on
    both radial axes and nonnegative axial curvature.
    """
    e, m = ion.charge, ion.mass
    denom = m * trap.omega_rf**2 * trap.d**2
    q = 2.0 * e * trap.kappa * trap.v_rf / denom
    a_twist = 4.0 * e * trap.kappa * trap.v_twist / denom
    w_ax_sq = trap.axial_curvature_per_volt * trap.v_endcap
    a_y = a_twist - 2.0 * w_ax_sq / trap.omega_rf**2
    a_z = -a_twist - 2.0 * w_ax_sq / trap.omega_rf**2
    stable = (abs(q) < Q_STABILITY_LIMIT
              and a_y + q * q / 2.0 > 0.0
              and a_z + q * q / 2.0 > 0.0
              and w_ax_sq >= 0.0)
    return MathieuParameters(q=q, a_y=a_y, a_z=a_z, stable=bool(stable))


def secular_frequencies(trap: TrapConfig, ion: IonSpecies) -> SecularFrequencies:
    """Lowest-order secular frequencies (rad/s); HF >= LF.

    Raises UnstableDriveError outside the first stability region.
    """
    p = mathieu_parameters(trap, ion)
    if not p.stable:
        raise UnstableDriveError(
            f"drive is outside the stability region (q={p.q:.3f}, "
            f"a_y={p.a_y:.3e}, a_z={p.a_z:.3e})")
    half = trap.omega_rf / 2.0
    w_y = half * np.sqrt(p.q**2 / 2.0 + p.a_y)
    w_z = half * np.sqrt(p.q**2 / 2.0 + p.a_z)
    w_ax = np.sqrt(trap.axial_curvature_per_volt * trap.v_endcap)
    return SecularFrequencies(omega_hf=max(w_y, w_z), omega_lf=min(w_y, w_z),
                              omega_axial=w_ax)


def rf_power_dissipation(params: DissipationParams, omega_rf: float, v_rf: float) -> float:
    """Ohmic power dissipated on the trap, 1/2 R_s C_t^2 Omega^2 V^2 (W)."""
    return 0.5 * params.r_series * params.c_trap**2 * omega_rf**2 * v_rf**2


def pseudopotential_energy(field, position, ion: IonSpecies) -> float:
    """Time-averaged RF confinement energy e^2 |E|^2 / (4 m Omega^2), J."""
    position = np.asarray(position, dtype=float)
    if not np.all(field.contains(position)):
        raise OutOfDomainError("position outside the field domain")
    e_sq = field.rf_field_squared(position)
    return ion.charge**2 * e_sq / (4.0 * ion.mass * field.omega_rf**2)


def pseudopotential_force(field, position, ion: IonSpecies):
    """Force -grad U of the pseudopotential, N."""
    g = field.rf_squared_gradient(np.asarray(position, dtype=float))
    return -ion.charge**2 / (4.0 * ion.mass * field.omega_rf**2) * g


def secular_frequency_estimate(field, ion: IonSpecies) -> float:
    """Mean radial secular frequency from the pseudopotential curvature
    at the trap center (static potential excluded)."""
    h = getattr(field, "wall_radius", None)
    if h is None:
        h = min(ax[-1] - ax[0] for ax in field.axes) / 2.0
    h *= 1e-3
    w_sq = []
    for k in range(field.ndim):
        rp = np.zeros(field.ndim)
        rm = np.zeros(field.ndim)
        rp[k], rm[k] = h, -h
        u_p = pseudopotential_energy(field, rp, ion)
        u_m = pseudopotential_energy(field, rm, ion)
        u_0 = pseudopotential_energy(field, np.zeros(field.ndim), ion)
        w_sq.append((u_p + u_m - 2.0 * u_0) / (h * h * ion.mass))
    w_sq = np.asarray(w_sq)
    if np.any(w_sq <= 0):
        raise UnstableDriveError("pseudopotential is not confining at the center")
    return float(np.mean(np.sqrt(w_sq)))


@dataclass
class Trajectory:
    """Sampled ion trajectory on a uniform time grid."""

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    escaped: bool = False
    escape_time: float | None = None

    def __post_init__(self):
        if not (len(self.times) == len(self.positions) == len(self.velocities)):
            raise ValueError("times, positions, velocities must have equal length")


def _acceleration(field, ion, drive):
    qm = ion.charge / ion.mass
    if drive == "rf":
        omega = field.omega_rf

        def acc(r, t):
            return qm * (field.rf_field(r) * np.cos(omega * t) + field.static_field(r))
    elif drive == "pseudopotential":
        coef = ion.charge**2 / (4.0 * ion.mass**2 * field.omega_rf**2)

        def acc(r, t):
            return -coef * field.rf_squared_gradient(r) + qm * field.static_field(r)
    else:
        raise ValueError(f"unknown drive {drive!r}")
    return acc


def _default_dt(field, ion, drive):
    if drive == "rf":
        return (2.0 * np.pi / field.omega_rf) / STEPS_PER_PERIOD
    return (2.0 * np.pi / secular_frequency_estimate(field, ion)) / STEPS_PER_PERIOD


def _check_dt(field, ion, drive, dt):
    if drive == "rf":
        limit = (2.0 * np.pi / field.omega_rf) / (STEPS_PER_PERIOD / 2)
    else:
        limit = (2.0 * np.pi / secular_frequency_estimate(field, ion)) / (STEPS_PER_PERIOD / 2)
    if dt > limit * (1.0 + 1e-12):
        raise StepSizeError(f"dt={dt:.3e} s exceeds the fastest-scale limit {limit:.3e} s")


def integrate_trajectory(field, ion: IonSpecies, x0, v0, duration: float,
                         dt: float | None = None, drive: str = "rf",
                         sample_stride: int = 1) -> Trajectory:
    """Integrate m r'' = e E_rf(r) cos(Omega t) + e E_static(r).

    Classic fixed-step RK4; the default step is 1/200 of the drive
    period (of the secular period for drive="pseudopotential", where
    the RF term is replaced by the pseudopotential force).  Integration
    stops early with the escape flag set as soon as the ion leaves the
    field domain.
    """
    x0 = np.asarray(x0, dtype=float).reshape(field.ndim)
    v0 = np.asarray(v0, dtype=float).reshape(field.ndim)
    if not np.all(field.contains(x0)):
        raise OutOfDomainError("initial position outside the field domain")
    if dt is None:
        dt = _default_dt(field, ion, drive)
    _check_dt(field, ion, drive, dt)
    acc = _acceleration(field, ion, drive)
    n_steps = int(np.ceil(duration / dt))
    times, xs, vs = [0.0], [x0.copy()], [v0.copy()]
    x, v = x0.copy(), v0.copy()
    escaped, escape_time = False, None
    for k in range(n_steps):
        t = k * dt
        k1x, k1v = v, acc(x, t)
        k2x, k2v = v + 0.5 * dt * k1v, acc(x + 0.5 * dt * k1x, t + 0.5 * dt)
        k3x, k3v = v + 0.5 * dt * k2v, acc(x + 0.5 * dt * k2x, t + 0.5 * dt)
        k4x, k4v = v + dt * k3v, acc(x + dt * k3x, t + dt)
        x = x + (dt / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        v = v + (dt / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
        if not np.all(field.contains(x)):
            escaped, escape_time = True, (k + 1) * dt
            break
        if (k + 1) % sample_stride == 0:
            times.append((k + 1) * dt)
            xs.append(x.copy())
            vs.append(v.copy())
    return Trajectory(times=np.asarray(times), positions=np.asarray(xs),
                      velocities=np.asarray(vs), escaped=escaped,
                      escape_time=escape_time)


# --- Monte-Carlo trap depth --------------------------------------------------


@dataclass
class EscapeCurve:
    """Escape probability versus launch energy, with depth bounds.

    depth_lower is the largest grid energy with escape probability 0,
    depth_upper the smallest with probability 1 (None if the grid does
    not reach the corresponding plateau).
    """

    energies: np.ndarray
    probabilities: np.ndarray
    depth_lower: float | None
    depth_upper: float | None


def _escape_fraction(field, ion, energy, shots, duration, dt, drive, seed, base_index):
    speed = np.sqrt(2.0 * energy / ion.mass)
    angles = np.array([shot_stream(seed, base_index + j).uniform(0.0, 2.0 * np.pi)
                       for j in range(shots)])
    x = np.zeros((shots, field.ndim))
    v = np.zeros((shots, field.ndim))
    v[:, 0] = speed * np.cos(angles)
    v[:, 1] = speed * np.sin(angles)
    acc = _acceleration(field, ion, drive)
    n_steps = int(np.ceil(duration / dt))
    alive = np.ones(shots, dtype=bool)
    for k in range(n_steps):
        if not alive.any():
            break
        t = k * dt
        idx = np.nonzero(alive)[0]
        xa, va = x[idx], v[idx]
        k1x, k1v = va, acc(xa, t)
        k2x, k2v = va + 0.5 * dt * k1v, acc(xa + 0.5 * dt * k1x, t + 0.5 * dt)
        k3x, k3v = va + 0.5 * dt * k2v, acc(xa + 0.5 * dt * k2x, t + 0.5 * dt)
        k4x, k4v = va + dt * k3v, acc(xa + dt * k3x, t + dt)
        xa = xa + (dt / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        va = va + (dt / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
        x[idx], v[idx] = xa, va
        inside = field.contains(xa)
        alive[idx] = inside
    return 1.0 - alive.sum() / shots


def trap_depth_monte_carlo(field, ion: IonSpecies, energies, shots: int = 100,
                           cycles: int = 50, seed: int = 0,
                           drive: str = "pseudopotential",
                           workers: int = 1) -> EscapeCurve:
    """Bound the radial trap depth by launching ions from the center.

    For each energy on the ascending grid, `shots` trajectories start
    at the trap center with the matching speed and a direction drawn
    uniformly on the radial-plane circle; a trajectory escapes when it
    crosses the domain boundary within `cycles` secular periods.  The
    returned bounds bracket the 0 -> 1 transition of the escape
    probability.

    The default integrates secular motion in the pseudopotential, for
    which the escape threshold equals the pseudopotential barrier.
    drive="rf" integrates the full driven motion instead; micromotion
    then enlarges the turning radius, so escape sets in below the
    pseudopotential barrier by a factor of roughly (1 + q/2)^-2.

    Results are a pure function of (seed, energy grid): per-shot
    directions come from independent counter-derived streams (see
    shot_stream), so the curve is identical for any `workers` count.
    """
    energies = np.asarray(energies, dtype=float)
    if energies.size == 0:
        raise ValueError("energy grid is empty")
    if np.any(np.diff(energies) <= 0):
        raise ValueError("energy grid must be strictly ascending")
    if shots < 1 or cycles < 1:
        raise ValueError("shots and cycles must be at least 1")
    w_sec = secular_frequency_estimate(field, ion)
    duration = cycles * 2.0 * np.pi / w_sec
    dt = _default_dt(field, ion, drive)

    def run(i):
        return _escape_fraction(field, ion, energies[i], shots, duration, dt,
                                drive, seed, base_index=i * shots)

    probs = np.empty(len(energies))
    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            for i, p in zip(range(len(energies)), pool.map(run, range(len(energies)))):
                probs[i] = p
    else:
        for i in range(len(energies)):
            probs[i] = run(i)

    zeros = np.nonzero(probs == 0.0)[0]
    ones = np.nonzero(probs == 1.0)[0]
    lower = float(energies[zeros[-1]]) if len(zeros) else None
    upper = float(energies[ones[0]]) if len(ones) else None
    return EscapeCurve(energies=energies, probabilities=probs,
                       depth_lower=lower, depth_upper=upper)


def axial_depth_from_endcaps(potential_gain_center: float, potential_max: float,
                             v_endcap: float, ion: IonSpecies) -> float:
    """Axial escape barrier in eV per the on-axis potential profile.

    potential_gain_center and potential_max are the dimensionless
    potential gains (V per endcap volt) at the trap center and at the
    on-axis maximum; the depth is charge * (max - center) * v_endcap.
    """
    if potential_max < potential_gain_center:
        raise ValueError("potential_max must be >= potential_gain_center")
    return (ion.charge / ELEMENTARY_CHARGE) * (potential_max - potential_gain_center) \
        * v_endcap


def make_ideal_field(trap: TrapConfig, ion: IonSpecies,
                     wall_radius: float | None = None,
                     stray_field=(0.0, 0.0)) -> IdealQuadrupoleField:
    """Convenience constructor for the analytic quadrupole field."""
    return IdealQuadrupoleField(trap, ion, wall_radius=wall_radius,
                                stray_field=stray_field)
