"""Truncated-Fock-space simulator for a single motional mode.

Covers Lindblad relaxation under an amplitude reservoir (rates
gamma_a nbar and gamma_a (nbar + 1)) plus pure dephasing in the number
operator, motional Ramsey and echo sequences on the {|0>, |1>} pair,
thermal Rabi flopping, and the bichromatic Molmer-Sorensen interaction
for two ions sharing one mode.

All integrators are fixed-step 4th order, so runs repeat bit for bit.
Hamiltonians are given in angular-frequency units (hbar = 1).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np


class StepSizeError(ValueError):
    """Integration step too coarse for the requested evolution."""


class CutoffSaturationError(RuntimeError):
    """Population reached the top Fock level during coherent evolution."""


class CutoffSaturationWarning(UserWarning):
    """Population is accumulating at the top Fock level."""


@dataclass(frozen=True)
class FockSpace:
    """Dense ladder operators on levels 0 .. cutoff-1."""

    cutoff: int
    a: np.ndarray = field(repr=False, default=None)
    adag: np.ndarray = field(repr=False, default=None)
    number: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.cutoff < 2:
            raise ValueError("cutoff must be at least 2")
        a = np.diag(np.sqrt(np.arange(1, self.cutoff)), 1).astype(complex)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "adag", a.conj().T)
        object.__setattr__(self, "number", np.diag(np.arange(self.cutoff)).astype(complex))


def build_fock_space(cutoff: int) -> FockSpace:
    return FockSpace(cutoff=int(cutoff))


@dataclass(frozen=True)
class NoiseModel:
    """Amplitude reservoir (gamma_a, nbar_bath) and pure dephasing gamma_p.

    The near-ground-state heating rate is nbar_dot = gamma_a * nbar_bath.
    Heating experiments constrain only nbar_dot, so use
    from_heating_rate, which models the room-temperature reservoir with
    a large bath occupation.
    """

    gamma_a: float
    nbar_bath: float
    gamma_p: float = 0.0

    def __post_init__(self):
        if self.gamma_a < 0 or self.nbar_bath < 0 or self.gamma_p < 0:
            raise ValueError("noise rates must be nonnegative")

    @property
    def nbar_dot(self) -> float:
        return self.gamma_a * self.nbar_bath

    @classmethod
    def from_heating_rate(cls, nbar_dot: float, gamma_p: float = 0.0,
                          nbar_bath: float = 2.0e6) -> "NoiseModel":
        if nbar_dot < 0:
            raise ValueError("heating rate must be nonnegative")
        gamma_a = nbar_dot / nbar_bath if nbar_dot > 0 else 0.0
        return cls(gamma_a=gamma_a, nbar_bath=nbar_bath, gamma_p=gamma_p)


def validate_density_matrix(rho, herm_tol=1e-10, trace_tol=1e-8, eig_tol=1e-8):
    """Check Hermiticity, unit trace, and positivity; raises ValueError."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > trace_tol:
        raise ValueError(f"trace deviates from one by {abs(np.trace(rho).real - 1.0):.2e}")
    if np.min(np.linalg.eigvalsh(rho)) < -eig_tol:
        raise ValueError("density matrix has a negative eigenvalue")


def thermal_state(nbar: float, cutoff: int) -> np.ndarray:
    """Thermal density matrix truncated to the Fock cutoff."""
    if nbar < 0:
        raise ValueError("nbar must be nonnegative")
    if nbar == 0:
        p = np.zeros(cutoff)
        p[0] = 1.0
    else:
        n = np.arange(cutoff)
        p = (nbar / (nbar + 1.0)) ** n / (nbar + 1.0)
        p /= p.sum()
    return np.diag(p).astype(complex)


def fock_superposition(levels, amplitudes, cutoff: int) -> np.ndarray:
    """Pure-state density matrix from Fock amplitudes."""
    psi = np.zeros(cutoff, dtype=complex)
    for lv, amp in zip(levels, amplitudes):
        psi[lv] = amp
    psi /= np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


# --- Lindblad evolution ------------------------------------------------------

def _make_rhs(noise: NoiseModel, cutoff: int, hamiltonian):
    """Right-hand side of the master equation; exploits the band
    structure of the ladder operators and diagonal dissipator pieces."""
    r_up = noise.gamma_a * noise.nbar_bath
    r_dn = noise.gamma_a * (noise.nbar_bath + 1.0)
    g_p = noise.gamma_p
    n = np.arange(cutoff, dtype=float)
    sq = np.sqrt(n[1:])  # sqrt(1) .. sqrt(cutoff-1)
    up_w = np.outer(sq, sq)
    # diagonal of the anticommutator operator K = (r_up a a+ + r_dn a+ a + g_p n^2)/2
    # with the truncated ladder operators, so that diag(a a+) ends in 0 and
    # the generator is exactly trace preserving; truncation then shows up
    # as population collecting at the top level, which is monitored
    aad_diag = np.append(n[1:], 0.0)
    k_diag = 0.5 * (r_up * aad_diag + r_dn * n + g_p * n * n)
    k_sum = k_diag[:, None] + k_diag[None, :]
    n_outer = np.outer(n, n)
    h_diag = None
    h_full = None
    if hamiltonian is not None:
        hamiltonian = np.asarray(hamiltonian, dtype=complex)
        if hamiltonian.shape != (cutoff, cutoff):
            raise ValueError("hamiltonian shape must match the Fock cutoff")
        if np.count_nonzero(hamiltonian - np.diag(np.diagonal(hamiltonian))) == 0:
            h_diag = np.diagonal(hamiltonian).real
        else:
            h_full = hamiltonian

    def rhs(rho):
        out = -k_sum * rho + g_p * n_outer * rho
        out[1:, 1:] += r_up * up_w * rho[:-1, :-1]
        out[:-1, :-1] += r_dn * up_w * rho[1:, 1:]
        if h_diag is not None:
            out += -1j * (h_diag[:, None] - h_diag[None, :]) * rho
        elif h_full is not None:
            out += -1j * (h_full @ rho - rho @ h_full)
        return out

    rate = (r_up + r_dn) * cutoff + g_p * cutoff**2
    if h_diag is not None:
        rate += 2.0 * np.max(np.abs(h_diag))
    elif h_full is not None:
        rate += 2.0 * np.linalg.norm(h_full, 2)
    return rhs, rate


def _plain_rates(noise: NoiseModel, hamiltonian) -> float:
    h_norm = 0.0
    if hamiltonian is not None:
        h_norm = float(np.linalg.norm(np.asarray(hamiltonian), 2))
    return max(noise.gamma_a, noise.gamma_p, h_norm)


def lindblad_samples(rho0, noise: NoiseModel, times, hamiltonian=None,
                     dt: float | None = None):
    """Evolve rho0 under the master equation and return the density
    matrix at each requested time (ascending, starting at >= 0).

    The default step resolves the fastest dissipative scale (rates
    times the occupied-level count) and the Hamiltonian norm; an
    explicit dt must resolve max(gamma rates, |H|) by at least 100x.
    Trace drift beyond 1e-6 raises StepSizeError; population at the
    top Fock level beyond 1e-6 emits CutoffSaturationWarning.
    """
    rho = np.asarray(rho0, dtype=complex).copy()
    validate_density_matrix(rho)
    cutoff = rho.shape[0]
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("sample times must be ascending and nonnegative")
    rhs, eff_rate = _make_rhs(noise, cutoff, hamiltonian)
    if eff_rate == 0.0:
        return np.broadcast_to(rho, (len(times),) + rho.shape).copy()
    if dt is None:
        dt = 1.0 / (120.0 * eff_rate)
    else:
        if dt > 1.0 / (100.0 * _plain_rates(noise, hamiltonian)):
            raise StepSizeError("dt must resolve the noise rates and the "
                                "Hamiltonian norm by at least 100x")
        if dt * eff_rate > 1.0:
            raise StepSizeError("dt is unstable for this cutoff and rate set")
    out = np.empty((len(times),) + rho.shape, dtype=complex)
    t_now = 0.0
    for k, t in enumerate(times):
        seg = t - t_now
        if seg > 0:
            n_steps = int(np.ceil(seg / dt))
            h = seg / n_steps
            for _ in range(n_steps):
                k1 = rhs(rho)
                k2 = rhs(rho + 0.5 * h * k1)
                k3 = rhs(rho + 0.5 * h * k2)
                k4 = rhs(rho + h * k3)
                rho = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                rho = 0.5 * (rho + rho.conj().T)
            t_now = t
        drift = abs(np.trace(rho).real - 1.0)
        if drift > 1e-6:
            raise StepSizeError(f"trace drifted by {drift:.2e}; reduce dt")
        if rho[-1, -1].real > 1e-6:
            warnings.warn("population reached the top Fock level; increase the cutoff",
                          CutoffSaturationWarning, stacklevel=2)
        out[k] = rho
    return out


def lindblad_evolve(rho0, noise: NoiseModel, duration: float, hamiltonian=None,
                    dt: float | None = None):
    """Final density matrix after evolving for `duration` seconds."""
    return lindblad_samples(rho0, noise, [duration], hamiltonian=hamiltonian,
                            dt=dt)[0]


def t2_from_rates(nbar_dot: float, gamma_ph: float) -> float:
    """Motional coherence time 1 / (2 nbar_dot + gamma_ph / 2) for the
    {|0>, |1>} superposition."""
    if nbar_dot < 0 or gamma_ph < 0:
        raise ValueError("rates must be nonnegative")
    if nbar_dot == 0 and gamma_ph == 0:
        raise ValueError("coherence time diverges when both rates vanish")
    return 1.0 / (2.0 * nbar_dot + gamma_ph / 2.0)


# --- motional Ramsey ---------------------------------------------------------

@dataclass
class RamseyResult:
    phases: np.ndarray
    fringe: np.ndarray
    contrast: float
    fringe_phase: float
    offset: float
    t_wait: float
    echo: bool


def _fit_fringe(phases, values):
    """Exact least squares on the sin/cos/constant basis; the fringe
    period is fixed at 2 pi in the scanned phase."""
    basis = np.column_stack([np.sin(phases), np.cos(phases), np.ones_like(phases)])
    coef, *_ = np.linalg.lstsq(basis, values, rcond=None)
    amp = float(np.hypot(coef[0], coef[1]))
    return amp, float(np.arctan2(coef[1], coef[0])), float(coef[2])


def _swap01(rho):
    out = rho.copy()
    out[[0, 1], :] = out[[1, 0], :]
    out[:, [0, 1]] = out[:, [1, 0]]
    return out


def _closing_pulse(phi, cutoff):
    u = np.eye(cutoff, dtype=complex)
    c = 1.0 / np.sqrt(2.0)
    u[0, 0] = c
    u[1, 1] = c
    u[0, 1] = -1j * np.exp(1j * phi) * c
    u[1, 0] = -1j * np.exp(-1j * phi) * c
    return u


def simulate_motional_ramsey(noise: NoiseModel, t_wait: float, echo: bool = False,
                             phases=None, cutoff: int = 30, detuning: float = 0.0,
                             dt: float | None = None) -> RamseyResult:
    """Motional Ramsey fringe for the (|0> + |1>)/sqrt(2) superposition.

    The opening and closing motional pi/2 pulses are ideal and
    instantaneous; noise acts during the wait only.  With echo set, the
    populations and phases of levels 0/1 are inverted halfway through
    the wait (the net effect of the sideband-carrier-sideband block),
    which refocuses any static detuning term.  Returns the fringe over
    the scanned closing-pulse phase and its fitted contrast; the fringe
    period is 2 pi by construction.
    """
    phases = np.linspace(0.0, 2.0 * np.pi, 25) if phases is None \
        else np.asarray(phases, dtype=float)
    if phases.size == 0:
        raise ValueError("need at least one analysis phase")
    rho = fock_superposition([0, 1], [1.0, 1.0], cutoff)
    ham = np.diag(detuning * np.arange(cutoff)).astype(complex) if detuning else None
    if echo:
        rho = lindblad_evolve(rho, noise, t_wait / 2.0, hamiltonian=ham, dt=dt)
        rho = _swap01(rho)
        rho = lindblad_evolve(rho, noise, t_wait / 2.0, hamiltonian=ham, dt=dt)
    else:
        rho = lindblad_evolve(rho, noise, t_wait, hamiltonian=ham, dt=dt)
    fringe = np.empty_like(phases)
    for i, phi in enumerate(phases):
        u = _closing_pulse(phi, cutoff)
        fringe[i] = (u @ rho @ u.conj().T)[0, 0].real
    amp, phase, offset = _fit_fringe(phases, fringe)
    return RamseyResult(phases=phases, fringe=fringe, contrast=2.0 * amp,
                        fringe_phase=phase, offset=offset, t_wait=t_wait, echo=echo)


# --- thermal Rabi flopping ---------------------------------------------------

def thermal_rabi(omega: float, eta: float, nbar: float, transition: str,
                 times) -> np.ndarray:
    """Excitation probability of carrier or sideband flops on a thermal
    state: P(t) = sum_n p_n sin^2(Omega_n t / 2).

    Fock-dependent rates at Lamb-Dicke order: carrier Omega (1 - eta^2 n),
    red sideband Omega eta sqrt(n), blue sideband Omega eta sqrt(n + 1).
    The thermal sum is truncated once the remaining tail weight drops
    below 1e-8.
    """
    if nbar < 0:
        raise ValueError("nbar must be nonnegative")
    if not 0 <= eta < 1:
        raise ValueError("eta must be in [0, 1)")
    times = np.asarray(times, dtype=float)
    if nbar == 0:
        n_max = 1
    else:
        r = nbar / (nbar + 1.0)
        # tail weight of the thermal distribution beyond N is r^(N+1)
        n_max = max(2, int(np.ceil(np.log(1e-8) / np.log(r))) + 1)
    n = np.arange(n_max)
    if nbar == 0:
        p = np.zeros(n_max)
        p[0] = 1.0
    else:
        p = (nbar / (nbar + 1.0)) ** n / (nbar + 1.0)
    if transition == "carrier":
        rates = omega * (1.0 - eta**2 * n)
    elif transition == "rsb":
        rates = omega * eta * np.sqrt(n)
    elif transition == "bsb":
        rates = omega * eta * np.sqrt(n + 1.0)
    else:
        raise ValueError("transition must be 'carrier', 'rsb', or 'bsb'")
    return np.sum(p[:, None] * np.sin(0.5 * rates[:, None] * times[None, :]) ** 2,
                  axis=0)


# --- Molmer-Sorensen ---------------------------------------------------------

@dataclass(frozen=True)
class MsParams:
    """Bichromatic interaction parameters for two ions on one mode.

    eta_omega is the sideband Rabi rate eta_im Omega_i per ion (rad/s)
    and delta the symmetric detuning from the sidebands (rad/s).  The
    interaction is dispersive when eta_omega << delta; `regime` uses a
    factor-of-five threshold.
    """

    eta_omega: float
    delta: float
    nbar: float = 0.0
    n_ions: int = 2
    omega_carrier: float | None = None

    def __post_init__(self):
        if self.eta_omega < 0:
            raise ValueError("eta_omega must be nonnegative")
        if self.n_ions != 2:
            raise ValueError("only two-ion interactions are modeled")
        if self.nbar < 0:
            raise ValueError("nbar must be nonnegative")

    @property
    def regime(self) -> str:
        return "dispersive" if abs(self.delta) >= 5.0 * self.eta_omega else "resonant"


@dataclass
class MsResult:
    times: np.ndarray
    p_uu: np.ndarray
    p_odd: np.ndarray
    p_dd: np.ndarray
    rho_final: np.ndarray


def _ms_operators(cutoff):
    """Sx a and Sx a+ on the (spin1, spin2, fock) product space."""
    sx = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    eye2 = np.eye(2, dtype=complex)
    a = np.diag(np.sqrt(np.arange(1, cutoff)), 1).astype(complex)
    big_sx = np.kron(np.kron(sx, eye2), np.eye(cutoff)) \
        + np.kron(np.kron(eye2, sx), np.eye(cutoff))
    big_a = np.kron(np.eye(4), a)
    return big_sx @ big_a, big_sx @ big_a.conj().T


def _spin_populations(weights, cutoff):
    """(P_uu, P_odd, P_dd) from per-basis-state weights of length 4*cutoff."""
    blocks = weights.reshape(4, cutoff).sum(axis=1)
    return blocks[0], blocks[1] + blocks[2], blocks[3]


def molmer_sorensen_evolve(params: MsParams, times, cutoff: int = 30,
                           dt: float | None = None) -> MsResult:
    """Evolve H(t) = (eta_omega/2) Sx (a e^{-i delta t} + a+ e^{+i delta t})
    from |dd> with the mode in a thermal state.

    The stepper is a fixed-step RK4 on the time-ordered interaction;
    n = 0 initial states evolve as pure states, thermal ones as density
    matrices.  Unitarity drift beyond 1e-8 raises StepSizeError and
    population at the top Fock level beyond 1e-6 raises
    CutoffSaturationError.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("times must be ascending and nonnegative")
    sxa, sxad = _ms_operators(cutoff)
    half = 0.5 * params.eta_omega
    delta = params.delta

    def ham(t):
        return half * (sxa * np.exp(-1j * delta * t) + sxad * np.exp(1j * delta * t))

    scale = params.eta_omega * np.sqrt(cutoff) * 2.0 + abs(delta)
    if dt is None:
        dt = 1.0 / (100.0 * scale) if scale > 0 else (times[-1] or 1.0)
    elif scale > 0 and dt > 1.0 / (50.0 * scale):
        raise StepSizeError("dt too coarse for the bichromatic time dependence")

    pure = params.nbar == 0.0
    dim = 4 * cutoff
    if pure:
        state = np.zeros(dim, dtype=complex)
        state[3 * cutoff] = 1.0  # |dd, n=0>
    else:
        state = np.kron(np.diag([0, 0, 0, 1.0]), thermal_state(params.nbar, cutoff))
        purity0 = np.trace(state @ state).real

    p_uu = np.empty(len(times))
    p_odd = np.empty(len(times))
    p_dd = np.empty(len(times))

    def record(k):
        if pure:
            w = np.abs(state) ** 2
        else:
            w = np.diagonal(state).real
        top = w.reshape(4, cutoff)[:, -1].sum()
        if top > 1e-6:
            raise CutoffSaturationError(
                f"top Fock level population {top:.2e}; increase the cutoff")
        p_uu[k], p_odd[k], p_dd[k] = _spin_populations(w, cutoff)

    t_now = 0.0
    for k, t in enumerate(times):
        seg = t - t_now
        if seg > 0:
            n_steps = int(np.ceil(seg / dt))
            h = seg / n_steps
            for i in range(n_steps):
                tt = t_now + i * h
                if pure:
                    k1 = -1j * (ham(tt) @ state)
                    k2 = -1j * (ham(tt + 0.5 * h) @ (state + 0.5 * h * k1))
                    k3 = -1j * (ham(tt + 0.5 * h) @ (state + 0.5 * h * k2))
                    k4 = -1j * (ham(tt + h) @ (state + h * k3))
                else:
                    def vn(rho, hh):
                        return -1j * (hh @ rho - rho @ hh)
                    h1, h2, h3 = ham(tt), ham(tt + 0.5 * h), ham(tt + h)
                    k1 = vn(state, h1)
                    k2 = vn(state + 0.5 * h * k1, h2)
                    k3 = vn(state + 0.5 * h * k2, h2)
                    k4 = vn(state + h * k3, h3)
                state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t_now = t
        if pure:
            drift = abs(np.linalg.norm(state) - 1.0)
        else:
            drift = abs(np.trace(state @ state).real - purity0)
        if drift > 1e-8:
            raise StepSizeError(f"unitarity drifted by {drift:.2e}; reduce dt")
        record(k)

    rho_final = np.outer(state, state.conj()) if pure else state
    return MsResult(times=times, p_uu=p_uu, p_odd=p_odd, p_dd=p_dd,
                    rho_final=rho_final)


def dispersive_ising_j(eta_omega: float, delta: float) -> float:
    """Effective Ising rate in the dispersive limit, J = (eta Omega)^2 / (2 delta).

    Convention: from |dd>, the doubly flipped population oscillates as
    sin^2(J t), i.e. at angular frequency 2 J; this is validated against
    the full bichromatic dynamics in the test suite.  Parameters with
    delta <= eta_omega are rejected as non-dispersive.
    """
    if eta_omega < 0:
        raise ValueError("eta_omega must be nonnegative")
    if abs(delta) <= eta_omega:
        raise ValueError("dispersive estimate needs |delta| > eta_omega")
    return eta_omega**2 / (2.0 * delta)


def parity_scan(rho, phases) -> np.ndarray:
    """Two-ion parity P_uu + P_dd - P_odd after a global carrier pi/2
    analysis pulse of scanned phase.

    Accepts a bare two-spin density matrix (4 x 4) or spin (x) Fock
    (4F x 4F).
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] % 4 != 0:
        raise ValueError("expected a two-spin register, optionally with a mode")
    cutoff = rho.shape[0] // 4
    phases = np.atleast_1d(np.asarray(phases, dtype=float))
    out = np.empty(len(phases))
    c = 1.0 / np.sqrt(2.0)
    for k, phi in enumerate(phases):
        u1 = np.array([[c, -1j * np.exp(1j * phi) * c],
                       [-1j * np.exp(-1j * phi) * c, c]])
        u = np.kron(np.kron(u1, u1), np.eye(cutoff))
        w = np.diagonal(u @ rho @ u.conj().T).real
        puu, podd, pdd = _spin_populations(w, cutoff)
        out[k] = puu + pdd - podd
    return out


# --- exports -----------------------------------------------------------------

def save_population_curves(path, times, curves: dict):
    """Delimited text: time plus one column per population curve."""
    names = list(curves)
    data = np.column_stack([np.asarray(times)] + [np.asarray(curves[n]) for n in names])
    np.savetxt(path, data, fmt="%.12g", delimiter="\t",
               header="\t".join(["time_s"] + names), comments="")


def save_density_matrix(path, rho):
    """Real/imaginary element table for debugging."""
    rho = np.asarray(rho, dtype=complex)
    with open(path, "w") as fh:
        fh.write("row\tcol\treal\timag\n")
        for i in range(rho.shape[0]):
            for j in range(rho.shape[1]):
                fh.write(f"{i}\t{j}\t{rho[i, j].real:.12g}\t{rho[i, j].imag:.12g}\n")
