"""Ion chain tests: equilibria against brute-force minimization, modes
against a finite-difference Hessian oracle, Lamb-Dicke parameters, and
the equispacing optimizer."""

import numpy as np
import pytest

from trapkit import YB171
from trapkit.constants import EPSILON_0, HBAR
from trapkit.ion_chain import (
    AxialPotential,
    NotConfiningError,
    ZigzagUnstableError,
    NotAtMinimumError,
    chain_spacing_stats,
    characteristic_length,
    equilibrium_positions,
    lamb_dicke,
    normal_modes,
    optimize_equispaced,
    save_chain_solution,
)

KE2 = YB171.charge**2 / (4 * np.pi * EPSILON_0)
OMEGA_Z = 2 * np.pi * 0.5e6
OMEGA_R = 2 * np.pi * 3.0e6
HARMONIC = AxialPotential.harmonic(OMEGA_Z, YB171)


def total_energy(x, pot):
    """Independent evaluation of trap plus Coulomb energy."""
    x = np.asarray(x, dtype=float)
    e = np.sum(pot.value(x))
    for i in range(len(x)):
        for j in range(i + 1, len(x)):
            e += KE2 / abs(x[i] - x[j])
    return e


def scaled_energy(u):
    """Dimensionless chain energy sum(u^2)/2 + sum_pairs 1/|ui - uj|."""
    e = 0.5 * np.sum(u**2)
    for i in range(len(u)):
        for j in range(i + 1, len(u)):
            e += 1.0 / abs(u[i] - u[j])
    return e


def numeric_scaled_hessian(u, h=3e-4):
    """Second differences of the dimensionless energy; eigenvalues are
    the squared mode frequencies in units of omega_z^2."""
    n = len(u)
    hess = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            upp = u.copy(); upp[i] += h; upp[j] += h
            upm = u.copy(); upm[i] += h; upm[j] -= h
            ump = u.copy(); ump[i] -= h; ump[j] += h
            umm = u.copy(); umm[i] -= h; umm[j] -= h
            hess[i, j] = (scaled_energy(upp) - scaled_energy(upm)
                          - scaled_energy(ump) + scaled_energy(umm)) / (4 * h * h)
    return hess


class TestEquilibrium:
    def test_single_ion_sits_at_center(self):
        assert np.array_equal(
            equilibrium_positions(1, HARMONIC, OMEGA_R, YB171), [0.0])

    def test_two_ions_match_closed_form_and_grid_search(self):
        pos = equilibrium_positions(2, HARMONIC, OMEGA_R, YB171)
        length = characteristic_length(HARMONIC, YB171.charge)
        expected = 0.25 ** (1.0 / 3.0) * length
        assert pos[1] == pytest.approx(expected, rel=1e-9)
        assert pos[0] == pytest.approx(-expected, rel=1e-9)
        # brute-force oracle: scan the symmetric half-spacing
        us = np.linspace(0.3, 1.2, 20001) * length
        energies = [total_energy([-u, u], HARMONIC) for u in us]
        u_best = us[int(np.argmin(energies))]
        assert pos[1] == pytest.approx(u_best, rel=1e-4)

    def test_gradient_vanishes_at_equilibrium(self):
        for n in (3, 5, 8):
            pos = equilibrium_positions(n, HARMONIC, OMEGA_R, YB171)
            h = 1e-12
            scale = 2 * HARMONIC.alpha2 * np.max(np.abs(pos))
            for i in range(n):
                xp = pos.copy(); xp[i] += h
                xm = pos.copy(); xm[i] -= h
                grad = (total_energy(xp, HARMONIC) - total_energy(xm, HARMONIC)) / (2 * h)
                assert abs(grad) < 1e-6 * scale

    def test_positions_antisymmetric_for_symmetric_potential(self):
        pot = AxialPotential(alpha2=HARMONIC.alpha2, alpha4=1e-4)
        for n in (2, 5, 6, 9):
            pos = equilibrium_positions(n, pot, OMEGA_R, YB171)
            assert np.allclose(pos, -pos[::-1], atol=1e-12 * np.max(np.abs(pos)))

    def test_zigzag_instability_reported(self):
        with pytest.raises(ZigzagUnstableError):
            equilibrium_positions(5, HARMONIC, 1.5 * OMEGA_Z, YB171)

    def test_non_confining_potential_rejected(self):
        with pytest.raises(NotConfiningError):
            equilibrium_positions(3, AxialPotential(alpha2=-1e-12, alpha4=0.0),
                                  OMEGA_R, YB171)


class TestNormalModes:
    def test_single_ion_modes(self):
        sol = normal_modes(np.zeros(1), HARMONIC, OMEGA_R, YB171)
        assert sol.axial.frequencies[0] == pytest.approx(OMEGA_Z, rel=1e-12)
        assert sol.transverse.frequencies[0] == pytest.approx(OMEGA_R, rel=1e-12)

    def test_two_ion_closed_form_spectrum(self):
        pos = equilibrium_positions(2, HARMONIC, OMEGA_R, YB171)
        sol = normal_modes(pos, HARMONIC, OMEGA_R, YB171)
        assert sol.axial.frequencies[0] == pytest.approx(OMEGA_Z, rel=1e-10)
        assert sol.axial.frequencies[1] == pytest.approx(np.sqrt(3) * OMEGA_Z, rel=1e-10)
        assert sol.transverse.frequencies[-1] == pytest.approx(OMEGA_R, rel=1e-10)

    def test_axial_spectrum_matches_numeric_hessian_oracle(self):
        length = characteristic_length(HARMONIC, YB171.charge)
        for n in (2, 3, 4, 5):
            pos = equilibrium_positions(n, HARMONIC, OMEGA_R, YB171)
            sol = normal_modes(pos, HARMONIC, OMEGA_R, YB171)
            lam = np.sort(np.linalg.eigvalsh(numeric_scaled_hessian(pos / length)))
            oracle = np.sqrt(lam) * OMEGA_Z
            assert np.allclose(sol.axial.frequencies, oracle, rtol=1e-5)

    def test_dimensionless_spectrum_classic_values(self):
        # exact eigenvalues of the scaled Hessian: {1, 3} and {1, 3, 29/5}
        for n, classic in ((2, [1.0, 3.0]), (3, [1.0, 3.0, 5.8])):
            pos = equilibrium_positions(n, HARMONIC, OMEGA_R, YB171)
            sol = normal_modes(pos, HARMONIC, OMEGA_R, YB171)
            lam = (sol.axial.frequencies / OMEGA_Z) ** 2
            assert np.allclose(lam, classic, rtol=1e-9)

    def test_axial_com_mode_at_trap_frequency_for_all_n(self):
        for n in range(1, 11):
            pos = equilibrium_positions(n, HARMONIC, OMEGA_R, YB171)
            sol = normal_modes(pos, HARMONIC, OMEGA_R, YB171)
            assert sol.axial.frequencies[0] == pytest.approx(OMEGA_Z, rel=1e-9)

    def test_eigenvectors_orthonormal(self):
        pos = equilibrium_positions(6, HARMONIC, OMEGA_R, YB171)
        sol = normal_modes(pos, HARMONIC, OMEGA_R, YB171)
        for modes in (sol.axial, sol.transverse):
            gram = modes.vectors.T @ modes.vectors
            assert np.allclose(gram, np.eye(6), atol=1e-10)

    def test_not_at_minimum_rejected(self):
        bad = np.array([-2e-6, 0.1e-6, 2e-6])
        with pytest.raises(NotAtMinimumError):
            normal_modes(bad, AxialPotential(alpha2=-1e-9, alpha4=0.0),
                         OMEGA_R, YB171)


class TestLambDicke:
    def test_zero_wavevector_zero_eta(self):
        sol = normal_modes(np.zeros(1), HARMONIC, OMEGA_R, YB171)
        assert np.all(lamb_dicke(sol.transverse, 0.0, YB171).eta == 0.0)

    def test_single_ion_counterpropagating_raman_value(self):
        # counter-propagating 355 nm beams on a 2.91 MHz mode
        delta_k = 2 * (2 * np.pi / 355e-9)
        omega = 2 * np.pi * 2.91e6
        sol = normal_modes(np.zeros(1), HARMONIC, omega, YB171)
        sol = ChainLike(sol.transverse.frequencies * 0 + omega, sol.transverse.vectors)
        eta = lamb_dicke(sol, delta_k, YB171).eta[0, 0]
        expected = delta_k * np.sqrt(HBAR / (2 * YB171.mass * omega))
        assert eta == pytest.approx(expected, rel=1e-12)
        assert eta == pytest.approx(0.113, abs=0.002)

    def test_eta_scales_inverse_sqrt_frequency(self):
        delta_k = 2 * (2 * np.pi / 355e-9)
        etas = []
        for omega in (2 * np.pi * 1e6, 2 * np.pi * 4e6):
            modes = ChainLike(np.array([omega]), np.eye(1))
            etas.append(lamb_dicke(modes, delta_k, YB171).eta[0, 0])
        assert etas[0] / etas[1] == pytest.approx(2.0, rel=1e-12)


class ChainLike:
    """Minimal stand-in for Modes in targeted tests."""

    def __init__(self, frequencies, vectors):
        self.frequencies = frequencies
        self.vectors = vectors


class TestEquispacing:
    def test_two_ions_trivially_uniform(self):
        pot, var = optimize_equispaced(2, 2, 5e-6, YB171)
        assert var == 0.0
        assert pot.alpha4 == 0.0 and pot.alpha2 > 0

    def test_nineteen_ion_chain_meets_uniformity_target(self):
        pot, var = optimize_equispaced(19, 13, 4.2e-6, YB171, radial=OMEGA_R)
        assert var <= 0.07
        pos = equilibrium_positions(19, pot, OMEGA_R, YB171)
        mean, var_check = chain_spacing_stats(pos, 13)
        assert mean == pytest.approx(4.2e-6, rel=1e-6)
        assert var_check == pytest.approx(var, abs=1e-9)

    def test_quartic_beats_pure_harmonic_for_five_ions(self):
        pot, var = optimize_equispaced(5, 5, 5e-6, YB171)
        # pure harmonic baseline at the same mean central spacing
        def harmonic_var(omega):
            pos = equilibrium_positions(5, AxialPotential.harmonic(omega, YB171),
                                        OMEGA_R, YB171)
            return chain_spacing_stats(pos, 5)
        lo, hi = 2 * np.pi * 1e4, 2 * np.pi * 5e6
        for _ in range(60):
            mid = np.sqrt(lo * hi)
            mean, _ = harmonic_var(mid)
            if mean > 5e-6:
                lo = mid
            else:
                hi = mid
        _, base_var = harmonic_var(np.sqrt(lo * hi))
        assert var < base_var

    def test_returned_chain_not_transversely_unstable(self):
        pot, _ = optimize_equispaced(7, 5, 4.2e-6, YB171, radial=OMEGA_R)
        positions = equilibrium_positions(7, pot, OMEGA_R, YB171)
        sol = normal_modes(positions, pot, OMEGA_R, YB171)
        assert np.all(sol.transverse.frequencies > 0)


class TestExport:
    def test_chain_solution_round_trips_header_and_units(self, tmp_path):
        pos = equilibrium_positions(3, HARMONIC, OMEGA_R, YB171)
        sol = normal_modes(pos, HARMONIC, OMEGA_R, YB171)
        path = tmp_path / "chain.tsv"
        save_chain_solution(path, sol)
        text = path.read_text()
        assert "position_um" in text and "frequency_Hz" in text
        first_pos = float(text.splitlines()[1].split("\t")[1])
        assert first_pos == pytest.approx(pos[0] * 1e6, rel=1e-8)
