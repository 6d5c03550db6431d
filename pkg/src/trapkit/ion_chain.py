"""Linear ion chains in harmonic-plus-quartic axial potentials:
equilibrium positions, axial and transverse normal modes, Lamb-Dicke
parameters, and the equispacing optimization of the axial potential.

The solver works in units of a characteristic length l with
l^3 = e^2 / (4 pi eps0 m omega_z^2); a purely quartic scale
(e^2 / (4 pi eps0 alpha4))^(1/5) takes over when the quadratic
coefficient is not confining.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .constants import EPSILON_0, HBAR, IonSpecies


def _coulomb_prefactor(charge: float) -> float:
    """q^2 / (4 pi eps0), J*m."""
    return charge**2 / (4.0 * np.pi * EPSILON_0)


class ConvergenceError(RuntimeError):
    """The equilibrium solver did not converge within its restart budget."""


class NotConfiningError(ValueError):
    """The axial potential does not confine a chain."""


class ZigzagUnstableError(ValueError):
    """The linear chain is transversely unstable (a mode frequency^2 < 0)."""


class NotAtMinimumError(ValueError):
    """Positions are not a minimum of the total potential."""


@dataclass(frozen=True)
class AxialPotential:
    """Axial trap energy alpha2 x^2 + alpha4 x^4 per ion, J."""

    alpha2: float
    alpha4: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.alpha2) and np.isfinite(self.alpha4)):
            raise ValueError("potential coefficients must be finite")

    @property
    def confining(self) -> bool:
        return self.alpha4 > 0.0 or (self.alpha4 == 0.0 and self.alpha2 > 0.0)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return self.alpha2 * x**2 + self.alpha4 * x**4

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return 2.0 * self.alpha2 * x + 4.0 * self.alpha4 * x**3

    def curvature(self, x):
        x = np.asarray(x, dtype=float)
        return 2.0 * self.alpha2 + 12.0 * self.alpha4 * x**2

    @classmethod
    def harmonic(cls, omega_axial: float, ion: IonSpecies) -> "AxialPotential":
        """Pure harmonic potential with the given axial frequency."""
        return cls(alpha2=0.5 * ion.mass * omega_axial**2, alpha4=0.0)

    def axial_frequency(self, ion: IonSpecies) -> float:
        """Small-oscillation frequency of a single ion at the center."""
        if self.alpha2 <= 0:
            raise NotConfiningError("no harmonic curvature at the center")
        return np.sqrt(2.0 * self.alpha2 / ion.mass)


@dataclass(frozen=True)
class Modes:
    """Normal modes: frequencies (rad/s, ascending) and the orthonormal
    eigenvector matrix, one column per mode."""

    frequencies: np.ndarray
    vectors: np.ndarray


@dataclass(frozen=True)
class ChainSolution:
    positions: np.ndarray
    axial: Modes
    transverse: Modes


@dataclass(frozen=True)
class LambDickeSet:
    """eta[ion, mode] for a given effective wavevector delta_k."""

    eta: np.ndarray
    delta_k: float


def characteristic_length(pot: AxialPotential, charge: float) -> float:
    """Length scale used to nondimensionalize the chain problem."""
    ke2 = _coulomb_prefactor(charge)
    if pot.alpha2 > 0:
        return (ke2 / (2.0 * pot.alpha2)) ** (1.0 / 3.0)
    if pot.alpha4 > 0:
        return (ke2 / pot.alpha4) ** 0.2
    raise NotConfiningError("potential is not confining")


def _chain_gradient_hessian(u, a2, a4):
    """Gradient and Hessian of a2 u^2 + a4 u^4 + sum_{i<j} 1/|ui-uj|."""
    du = u[:, None] - u[None, :]
    np.fill_diagonal(du, np.inf)
    inv2 = 1.0 / du**2
    inv3 = 1.0 / np.abs(du) ** 3
    grad = 2.0 * a2 * u + 4.0 * a4 * u**3 - np.sum(np.sign(du) * inv2, axis=1)
    hess = -2.0 * inv3
    np.fill_diagonal(hess, 2.0 * a2 + 12.0 * a4 * u**2 + 2.0 * np.sum(inv3, axis=1))
    return grad, hess


def _solve_scaled(n, a2, a4, u0, max_iter=200):
    """Newton iteration on the scaled chain; returns sorted positions or
    None when the iteration fails to converge to a minimum."""
    u = np.sort(np.asarray(u0, dtype=float))
    for _ in range(max_iter):
        grad, hess = _chain_gradient_hessian(u, a2, a4)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            return None
        u = u - step
        if np.any(np.diff(np.sort(u)) <= 0):
            return None
        if np.max(np.abs(step)) <= 1e-14 * max(1.0, np.max(np.abs(u))):
            break
    else:
        return None
    u = np.sort(u)
    grad, hess = _chain_gradient_hessian(u, a2, a4)
    scale = np.max(np.abs(2.0 * a2 * u) + 1.0)
    if np.max(np.abs(grad)) > 1e-10 * scale:
        return None
    if np.any(np.linalg.eigvalsh(hess) <= 0):
        return None
    return u


def equilibrium_positions(n: int, pot: AxialPotential, radial: float,
                          ion: IonSpecies) -> np.ndarray:
    """Equilibrium positions (m, ascending) of n ions on the trap axis.

    Newton iterations on the scaled problem, started from a uniformly
    spaced chain spanning 1.5 l n^0.56, with a few deterministic
    perturbed restarts.  Raises ZigzagUnstableError when the linear
    configuration is transversely unstable at the given radial
    frequency (rad/s), and ConvergenceError when all restarts fail.
    """
    if n < 1:
        raise ValueError("need at least one ion")
    if not pot.confining:
        raise NotConfiningError("axial potential must confine the chain")
    if n == 1:
        return np.zeros(1)
    scale = characteristic_length(pot, ion.charge)
    ke2 = _coulomb_prefactor(ion.charge)
    a2 = pot.alpha2 * scale**3 / ke2
    a4 = pot.alpha4 * scale**5 / ke2
    span = 1.5 * n**0.56
    base = np.linspace(-span / 2.0, span / 2.0, n)
    u = _solve_scaled(n, a2, a4, base)
    restart = 0
    while u is None and restart < 8:
        rng = np.random.default_rng(restart)
        u = _solve_scaled(n, a2, a4,
                          base * rng.uniform(0.6, 1.6) + rng.normal(0, 0.05, n))
        restart += 1
    if u is None:
        raise ConvergenceError(f"chain solver failed for n={n} after restarts")
    positions = u * scale
    if radial is not None:
        t_modes = _transverse_modes(positions, radial, ion)
        if np.any(t_modes < 0):
            raise ZigzagUnstableError(
                "linear chain is transversely unstable at this radial frequency")
    return positions


def _coulomb_coupling(positions, charge):
    ke2 = _coulomb_prefactor(charge)
    dx = positions[:, None] - positions[None, :]
    np.fill_diagonal(dx, np.inf)
    return ke2 / np.abs(dx) ** 3


def _transverse_modes(positions, radial, ion):
    """Eigenvalues of the transverse dynamical matrix, (rad/s)^2."""
    k3 = _coulomb_coupling(positions, ion.charge)
    mat = k3.copy()
    np.fill_diagonal(mat, ion.mass * radial**2 - np.sum(k3, axis=1))
    return np.linalg.eigvalsh(mat / ion.mass)


def normal_modes(positions, pot: AxialPotential, radial: float,
                 ion: IonSpecies) -> ChainSolution:
    """Axial and transverse normal modes about an equilibrium.

    Axial modes diagonalize the axial Hessian; transverse modes couple
    the flat radial confinement through the Coulomb terms.  Raises
    NotAtMinimumError when the axial Hessian is not positive definite
    and ZigzagUnstableError for transverse instability.
    """
    positions = np.asarray(positions, dtype=float)
    k3 = _coulomb_coupling(positions, ion.charge)
    axial_h = -2.0 * k3
    np.fill_diagonal(axial_h, pot.curvature(positions) + 2.0 * np.sum(k3, axis=1))
    w2_ax, vec_ax = np.linalg.eigh(axial_h / ion.mass)
    if np.any(w2_ax <= 0):
        raise NotAtMinimumError("axial Hessian is not positive definite")
    trans = k3.copy()
    np.fill_diagonal(trans, ion.mass * radial**2 - np.sum(k3, axis=1))
    w2_tr, vec_tr = np.linalg.eigh(trans / ion.mass)
    if np.any(w2_tr < 0):
        raise ZigzagUnstableError("transverse mode frequency^2 < 0")
    order_tr = np.argsort(w2_tr)
    return ChainSolution(
        positions=positions,
        axial=Modes(np.sqrt(w2_ax), vec_ax),
        transverse=Modes(np.sqrt(w2_tr[order_tr]), vec_tr[:, order_tr]),
    )


def lamb_dicke(modes: Modes, delta_k: float, ion: IonSpecies) -> LambDickeSet:
    """Lamb-Dicke parameters eta[i, m] = dk |b_im| sqrt(hbar / 2 m w_m).

    The eigenvectors are orthonormal, so the usual 1/sqrt(N) of a
    center-of-mass mode is carried by the components b_im.  A single
    ion reduces to dk sqrt(hbar / (2 m omega)).
    """
    w = np.asarray(modes.frequencies, dtype=float)
    if np.any(w <= 0):
        raise ValueError("mode frequencies must be positive")
    x0 = np.sqrt(HBAR / (2.0 * ion.mass * w))
    eta = np.abs(modes.vectors) * delta_k * x0[None, :]
    return LambDickeSet(eta=eta, delta_k=delta_k)


def chain_spacing_stats(positions, central_k: int):
    """Mean and relative standard deviation of the central_k - 1
    spacings of the central_k ions."""
    n = len(positions)
    if not 2 <= central_k <= n:
        raise ValueError("central_k must be between 2 and the ion count")
    i0 = (n - central_k) // 2
    spac = np.diff(positions[i0:i0 + central_k])
    mean = spac.mean()
    return mean, float(spac.std() / mean)


def _solve_mixed(n, strength, theta, guess=None):
    """Scaled chain with a2 = strength cos(theta), a4 = strength sin(theta),
    positions in units of the target spacing."""
    a2, a4 = strength * np.cos(theta), strength * np.sin(theta)
    if a4 < 0 or (a4 == 0 and a2 <= 0):
        return None
    span = 1.5 * n**0.56 * max(1.0, strength ** (-1.0 / 3.0))
    if guess is None:
        guess = np.linspace(-span / 2, span / 2, n)
    return _solve_scaled(n, a2, a4, guess)


def optimize_equispaced(n: int, central_k: int, target_spacing: float,
                        ion: IonSpecies, radial: float | None = None):
    """Search (alpha2, alpha4) for the most uniform central chain.

    Minimizes the relative standard deviation of the central_k - 1
    spacings subject to their mean equaling target_spacing.  The search
    runs over a quadratic/quartic mixing angle; for each angle the
    overall strength is bisected so the mean central spacing is exact,
    then a bounded derivative-free minimization refines the angle from
    the best of a grid of starts.  Ties prefer the smaller |alpha4|.

    Returns (AxialPotential, achieved relative variability).  When a
    radial frequency (rad/s) is supplied, candidates whose chain is
    transversely unstable are rejected.
    """
    if not 2 <= central_k <= n:
        raise ValueError("central_k must be between 2 and n")
    if target_spacing <= 0:
        raise ValueError("target spacing must be positive")
    ke2 = _coulomb_prefactor(ion.charge)
    s = target_spacing

    def solved_at(theta):
        """Chain with unit mean central spacing at this mixing angle."""
        lo, hi = 1e-8, 1e8

        def mean_of(strength):
            u = _solve_mixed(n, strength, theta)
            if u is None:
                return None
            return chain_spacing_stats(u, central_k)[0]

        m_lo, m_hi = mean_of(lo), mean_of(hi)
        if m_lo is None or m_hi is None or not (m_hi < 1.0 < m_lo):
            return None
        for _ in range(64):
            mid = np.sqrt(lo * hi)
            m = mean_of(mid)
            if m is None:
                return None
            if m > 1.0:
                lo = mid
            else:
                hi = mid
        strength = np.sqrt(lo * hi)
        return strength, _solve_mixed(n, strength, theta)

    def objective(theta):
        sol = solved_at(theta)
        if sol is None:
            return np.inf
        strength, u = sol
        if u is None:
            return np.inf
        if radial is not None and np.any(
                _transverse_modes(u * s, radial, ion) < 0):
            return np.inf
        return chain_spacing_stats(u, central_k)[1]

    if n == 2 or central_k == 2:
        # a single spacing is always uniform; prefer the pure harmonic
        sol = solved_at(1e-9)
        strength, _ = sol
        a2 = strength * np.cos(1e-9) * ke2 / s**3
        return AxialPotential(alpha2=a2, alpha4=0.0), 0.0

    starts = np.linspace(0.02, np.pi / 2 - 0.02, 9)
    candidates = []
    for theta in starts:
        candidates.append((objective(theta), theta))
    candidates.sort(key=lambda c: c[0])
    if not np.isfinite(candidates[0][0]):
        raise NotConfiningError("no confining equispaced optimum found")
    best_var, best_theta = candidates[0]
    lo = max(1e-4, best_theta - 0.22)
    hi = min(np.pi / 2 - 1e-4, best_theta + 0.22)
    res = minimize_scalar(objective, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-6})
    finalists = [(best_var, best_theta)]
    if np.isfinite(res.fun):
        finalists.append((float(res.fun), float(res.x)))
    # tie-break on |alpha4|: smaller angle means gentler quartic
    finalists.sort(key=lambda c: (round(c[0], 9), np.sin(c[1])))
    var, theta = finalists[0]
    strength, _ = solved_at(theta)
    pot = AxialPotential(alpha2=strength * np.cos(theta) * ke2 / s**3,
                         alpha4=strength * np.sin(theta) * ke2 / s**5)
    return pot, var


def save_chain_solution(path, solution: ChainSolution):
    """Write positions (um) and the mode table as delimited text."""
    n = len(solution.positions)
    with open(path, "w") as fh:
        fh.write("ion\tposition_um\n")
        for i, x in enumerate(solution.positions):
            fh.write(f"{i}\t{x * 1e6:.9g}\n")
        for label, modes in (("axial", solution.axial),
                             ("transverse", solution.transverse)):
            fh.write(f"\n{label}_mode\tfrequency_Hz\t"
                     + "\t".join(f"b_ion{i}" for i in range(n)) + "\n")
            for m in range(n):
                comps = "\t".join(f"{b:.9g}" for b in modes.vectors[:, m])
                fh.write(f"{m}\t{modes.frequencies[m] / (2 * np.pi):.9g}\t{comps}\n")
