"""Trap model tests: stability parameters, secular frequencies, power,
pseudopotential, trajectories, and the Monte-Carlo depth bound."""

import numpy as np
import pytest

from trapkit import YB171, IonSpecies
from trapkit.fields import IdealQuadrupoleField, OutOfDomainError
from trapkit.trap_model import (
    DissipationParams,
    StepSizeError,
    TrapConfig,
    UnstableDriveError,
    axial_depth_from_endcaps,
    integrate_trajectory,
    mathieu_parameters,
    pseudopotential_energy,
    rf_power_dissipation,
    secular_frequencies,
    secular_frequency_estimate,
    trap_depth_monte_carlo,
)

GEN3 = TrapConfig(d=250e-6, kappa=0.83, omega_rf=2 * np.pi * 23.24e6, v_rf=483.0)


def peak_frequency(times, signal):
    """Dominant positive frequency of a real signal, via an FFT with a
    Hann window and parabolic interpolation around the peak bin."""
    n = len(signal)
    win = np.hanning(n)
    spec = np.abs(np.fft.rfft((signal - np.mean(signal)) * win))
    freqs = np.fft.rfftfreq(n, d=times[1] - times[0])
    k = np.argmax(spec)
    if 0 < k < len(spec) - 1:
        a, b, c = np.log(spec[k - 1]), np.log(spec[k]), np.log(spec[k + 1])
        shift = 0.5 * (a - c) / (a - 2 * b + c)
    else:
        shift = 0.0
    return (freqs[1] - freqs[0]) * (k + shift)


class TestMathieuParameters:
    def test_gen3_drive_matches_reported_stability_parameter(self):
        p = mathieu_parameters(GEN3, YB171)
        assert p.q == pytest.approx(0.34, abs=0.02)
        assert p.stable

    def test_zero_drive_gives_zero_q(self):
        trap = TrapConfig(d=250e-6, kappa=0.83, omega_rf=2 * np.pi * 23.24e6, v_rf=0.0)
        assert mathieu_parameters(trap, YB171).q == 0.0

    def test_doubling_distance_quarters_q(self):
        trap2 = TrapConfig(d=2 * GEN3.d, kappa=GEN3.kappa, omega_rf=GEN3.omega_rf,
                           v_rf=GEN3.v_rf)
        q1 = mathieu_parameters(GEN3, YB171).q
        q2 = mathieu_parameters(trap2, YB171).q
        assert q2 == pytest.approx(q1 / 4.0, rel=1e-12)

    def test_q_linear_in_voltage(self):
        q1 = mathieu_parameters(GEN3, YB171).q
        trap = TrapConfig(d=GEN3.d, kappa=GEN3.kappa, omega_rf=GEN3.omega_rf,
                          v_rf=3.0 * GEN3.v_rf)
        assert mathieu_parameters(trap, YB171).q == pytest.approx(3.0 * q1, rel=1e-12)

    def test_nonfinite_inputs_rejected(self):
        with pytest.raises(ValueError):
            TrapConfig(d=250e-6, kappa=0.83, omega_rf=np.nan, v_rf=483.0)

    def test_instability_flagged_above_q_limit(self):
        trap = TrapConfig(d=250e-6, kappa=0.83, omega_rf=2 * np.pi * 23.24e6,
                          v_rf=1400.0)
        p = mathieu_parameters(trap, YB171)
        assert p.q > 0.908 and not p.stable


class TestSecularFrequencies:
    def test_gen3_mean_radial_near_reported_offsets(self):
        f = secular_frequencies(GEN3, YB171)
        mean_radial = 0.5 * (f.omega_hf + f.omega_lf) / (2 * np.pi)
        reported_mean = 0.5 * (2.899e6 + 2.628e6)
        assert abs(mean_radial - reported_mean) / reported_mean < 0.10

    def test_no_twist_no_endcap_degenerate_radials(self):
        f = secular_frequencies(GEN3, YB171)
        assert f.omega_hf == f.omega_lf
        assert f.omega_axial == 0.0

    def test_twist_splits_and_preserves_quadrature_sum(self):
        kwargs = dict(d=GEN3.d, kappa=GEN3.kappa, omega_rf=GEN3.omega_rf, v_rf=GEN3.v_rf)
        f0 = secular_frequencies(TrapConfig(**kwargs), YB171)
        ft = secular_frequencies(TrapConfig(v_twist=2.0, **kwargs), YB171)
        assert ft.omega_hf > ft.omega_lf
        s0 = f0.omega_hf**2 + f0.omega_lf**2
        st = ft.omega_hf**2 + ft.omega_lf**2
        assert st == pytest.approx(s0, rel=1e-12)

    def test_unstable_drive_raises(self):
        trap = TrapConfig(d=250e-6, kappa=0.83, omega_rf=2 * np.pi * 23.24e6,
                          v_rf=1400.0)
        with pytest.raises(UnstableDriveError):
            secular_frequencies(trap, YB171)

    def test_quadrature_sum_rule_against_driven_numerics(self):
        # independent check of the analytic model: extract both radial
        # frequencies from full driven trajectories with and without twist;
        # the axes decouple, so one diagonal launch probes both
        kwargs = dict(d=GEN3.d, kappa=GEN3.kappa, omega_rf=GEN3.omega_rf, v_rf=GEN3.v_rf)
        sums = []
        for v_twist in (0.0, 2.0):
            trap = TrapConfig(v_twist=v_twist, **kwargs)
            field = IdealQuadrupoleField(trap, YB171)
            w_est = secular_frequency_estimate(field, YB171)
            duration = 35 * 2 * np.pi / w_est
            traj = integrate_trajectory(field, YB171, (2e-6, 1.2e-6), (0.0, 0.0),
                                        duration, sample_stride=8)
            w_axes = [2 * np.pi * peak_frequency(traj.times, traj.positions[:, ax])
                      for ax in (0, 1)]
            sums.append(w_axes[0]**2 + w_axes[1]**2)
        assert sums[1] == pytest.approx(sums[0], rel=2e-2)


class TestRfPowerDissipation:
    def test_zero_voltage_zero_power(self):
        p = DissipationParams(r_series=1.0, c_trap=3e-12)
        assert rf_power_dissipation(p, 2 * np.pi * 23.24e6, 0.0) == 0.0

    def test_closed_form_value(self):
        # hand evaluation: 0.5 * 1 * (3e-12)^2 * (2 pi 23.24e6)^2 * 483^2
        p = DissipationParams(r_series=1.0, c_trap=3e-12)
        expected = 0.5 * (3e-12) ** 2 * (2 * np.pi * 23.24e6) ** 2 * 483.0**2
        got = rf_power_dissipation(p, 2 * np.pi * 23.24e6, 483.0)
        assert got == pytest.approx(expected, rel=1e-12)
        assert got == pytest.approx(0.022384, rel=1e-4)

    def test_doubling_drive_frequency_quadruples_power(self):
        p = DissipationParams(r_series=2.0, c_trap=1e-12)
        w = 2 * np.pi * 20e6
        assert rf_power_dissipation(p, 2 * w, 100.0) == pytest.approx(
            4.0 * rf_power_dissipation(p, w, 100.0), rel=1e-12)


class TestPseudopotential:
    def test_zero_at_rf_null(self):
        field = IdealQuadrupoleField(GEN3, YB171)
        assert pseudopotential_energy(field, (0.0, 0.0), YB171) == 0.0

    def test_closed_form_at_wall(self):
        field = IdealQuadrupoleField(GEN3, YB171, wall_radius=GEN3.d * 1.0000001)
        u = pseudopotential_energy(field, (GEN3.d, 0.0), YB171)
        expected = (YB171.charge**2 * GEN3.kappa**2 * GEN3.v_rf**2
                    / (4 * YB171.mass * GEN3.omega_rf**2 * GEN3.d**2))
        assert u == pytest.approx(expected, rel=1e-12)

    def test_out_of_domain_rejected(self):
        field = IdealQuadrupoleField(GEN3, YB171)
        with pytest.raises(OutOfDomainError):
            pseudopotential_energy(field, (GEN3.d * 1.5, 0.0), YB171)


class TestTrajectory:
    def test_ion_at_null_stays_at_null(self):
        field = IdealQuadrupoleField(GEN3, YB171)
        traj = integrate_trajectory(field, YB171, (0.0, 0.0), (0.0, 0.0),
                                    duration=50 * GEN3.rf_period)
        assert not traj.escaped
        assert np.max(np.abs(traj.positions)) < 1e-18

    def test_secular_peak_matches_lowest_order_formula(self):
        # the lowest-order expression holds to 2% only for q <= 0.3
        trap = TrapConfig(d=GEN3.d, kappa=GEN3.kappa, omega_rf=GEN3.omega_rf,
                          v_rf=355.0)
        q = mathieu_parameters(trap, YB171).q
        assert q <= 0.3
        field = IdealQuadrupoleField(trap, YB171)
        w_expected = trap.omega_rf * q / (2 * np.sqrt(2))
        duration = 40 * 2 * np.pi / w_expected
        traj = integrate_trajectory(field, YB171, (3e-6, 0.0), (0.0, 0.0), duration,
                                    sample_stride=8)
        w_meas = 2 * np.pi * peak_frequency(traj.times, traj.positions[:, 0])
        assert abs(w_meas - w_expected) / w_expected < 0.02

    def test_micromotion_amplitude_half_q_times_displacement(self):
        # a uniform stray field displaces the equilibrium; the driven motion
        # there has amplitude (q/2) * displacement at the drive frequency
        q = mathieu_parameters(GEN3, YB171).q
        w_sec = GEN3.omega_rf * q / (2 * np.sqrt(2))
        r_eq = 5e-6
        e_stray = YB171.mass * w_sec**2 * r_eq / YB171.charge
        field = IdealQuadrupoleField(GEN3, YB171, stray_field=(e_stray, 0.0))
        x0 = (r_eq * (1 + q / 2), 0.0)
        n_periods = 400
        traj = integrate_trajectory(field, YB171, x0, (0.0, 0.0),
                                    duration=n_periods * GEN3.rf_period)
        # lock-in at the drive frequency over an integer number of periods
        n = (len(traj.times) // 200) * 200
        t, y = traj.times[:n], traj.positions[:n, 0]
        amp = 2 * np.hypot(np.mean(y * np.cos(GEN3.omega_rf * t)),
                           np.mean(y * np.sin(GEN3.omega_rf * t)))
        mean_pos = np.mean(y)
        assert abs(amp / mean_pos - q / 2) / (q / 2) < 0.05

    def test_pseudopotential_drive_conserves_energy(self):
        trap = TrapConfig(d=GEN3.d, kappa=GEN3.kappa, omega_rf=GEN3.omega_rf,
                          v_rf=GEN3.v_rf, v_twist=1.0)
        field = IdealQuadrupoleField(trap, YB171)
        w_sec = secular_frequency_estimate(field, YB171)
        traj = integrate_trajectory(field, YB171, (20e-6, 10e-6), (5.0, -3.0),
                                    duration=2 * np.pi / w_sec,
                                    drive="pseudopotential")
        kin = 0.5 * YB171.mass * np.sum(traj.velocities**2, axis=1)
        pot = np.array([pseudopotential_energy(field, r, YB171)
                        for r in traj.positions])
        pot += YB171.charge * field.static_potential(traj.positions)
        total = kin + pot
        assert np.max(np.abs(total - total[0])) / total[0] < 1e-6

    def test_coarse_step_rejected(self):
        field = IdealQuadrupoleField(GEN3, YB171)
        with pytest.raises(StepSizeError):
            integrate_trajectory(field, YB171, (0.0, 0.0), (0.0, 0.0), 1e-6,
                                 dt=GEN3.rf_period / 50)

    def test_start_outside_domain_rejected(self):
        field = IdealQuadrupoleField(GEN3, YB171)
        with pytest.raises(OutOfDomainError):
            integrate_trajectory(field, YB171, (GEN3.d * 2, 0.0), (0.0, 0.0), 1e-6)


class TestTrapDepthMonteCarlo:
    def setup_method(self):
        self.field = IdealQuadrupoleField(GEN3, YB171)
        self.depth = pseudopotential_energy(
            IdealQuadrupoleField(GEN3, YB171, wall_radius=2 * GEN3.d),
            (GEN3.d, 0.0), YB171)

    def test_low_energy_never_escapes(self):
        energies = np.array([0.05, 0.10]) * self.depth
        curve = trap_depth_monte_carlo(self.field, YB171, energies, shots=20,
                                       cycles=10, seed=7)
        assert np.all(curve.probabilities == 0.0)

    def test_bounds_bracket_analytic_barrier_within_one_step(self):
        energies = self.depth * np.arange(0.91, 1.10, 0.02)
        curve = trap_depth_monte_carlo(self.field, YB171, energies, shots=100,
                                       cycles=50, seed=3)
        assert curve.depth_lower is not None and curve.depth_upper is not None
        assert curve.depth_lower <= self.depth <= curve.depth_upper
        assert curve.depth_upper - curve.depth_lower <= 0.02 * self.depth * 1.0001

    def test_probability_nondecreasing_in_energy(self):
        energies = self.depth * np.linspace(0.8, 1.2, 9)
        curve = trap_depth_monte_carlo(self.field, YB171, energies, shots=50,
                                       cycles=20, seed=11)
        sigma = np.sqrt(np.maximum(curve.probabilities *
                                   (1 - curve.probabilities), 1e-4) / 50)
        diffs = np.diff(curve.probabilities)
        assert np.all(diffs >= -3 * (sigma[1:] + sigma[:-1]))

    def test_identical_seed_identical_curve_any_worker_count(self):
        energies = self.depth * np.linspace(0.9, 1.1, 5)
        curves = [trap_depth_monte_carlo(self.field, YB171, energies, shots=30,
                                         cycles=10, seed=42, workers=w)
                  for w in (1, 3)]
        assert np.array_equal(curves[0].probabilities, curves[1].probabilities)
        rerun = trap_depth_monte_carlo(self.field, YB171, energies, shots=30,
                                       cycles=10, seed=42)
        assert np.array_equal(curves[0].probabilities, rerun.probabilities)

    def test_rf_drive_escapes_below_pseudopotential_barrier(self):
        # micromotion enlarges excursions, so with the full drive escape
        # sets in well below the pseudopotential barrier and the
        # transition is broadened by the launch direction
        energies = self.depth * np.array([0.45, 0.65, 0.85, 1.0])
        curve = trap_depth_monte_carlo(self.field, YB171, energies, shots=8,
                                       cycles=20, seed=5, drive="rf")
        assert np.any(curve.probabilities[:3] > 0)
        assert curve.probabilities[-1] >= 0.4

    def test_empty_and_unsorted_grid_rejected(self):
        with pytest.raises(ValueError):
            trap_depth_monte_carlo(self.field, YB171, [], shots=5, cycles=5)
        with pytest.raises(ValueError):
            trap_depth_monte_carlo(self.field, YB171, [2.0, 1.0], shots=5, cycles=5)


class TestAxialDepth:
    def test_reported_profile_values(self):
        assert axial_depth_from_endcaps(0.07, 0.5, 1.0, YB171) == pytest.approx(0.43)
        assert axial_depth_from_endcaps(0.04, 0.5, 1.0, YB171) == pytest.approx(0.46)

    def test_flat_profile_zero_depth(self):
        assert axial_depth_from_endcaps(0.5, 0.5, 10.0, YB171) == 0.0

    def test_scales_with_endcap_voltage_and_charge(self):
        d1 = axial_depth_from_endcaps(0.07, 0.5, 2.0, YB171)
        assert d1 == pytest.approx(0.86)
        two_e = IonSpecies(mass=YB171.mass, charge=2 * YB171.charge)
        assert axial_depth_from_endcaps(0.07, 0.5, 1.0, two_e) == pytest.approx(0.86)

    def test_inverted_profile_rejected(self):
        with pytest.raises(ValueError):
            axial_depth_from_endcaps(0.5, 0.07, 1.0, YB171)
