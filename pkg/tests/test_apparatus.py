import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybrid_bell import optics
from hybrid_bell.analysis import fit_fixed_wavelength
from hybrid_bell.apparatus import (
    DEFAULT_WAVELENGTH_NM,
    NoiseModel,
    ScenarioStep,
    Settings,
    correlation_from_probabilities,
    correlation_grid,
    det2_peak_phase,
    ideal_probabilities,
    noisy_probabilities,
    prepare_hybrid_state,
    probability_grid,
    settings_for_bell_point,
    source_state,
)
from hybrid_bell.qcore import B_POL, DensityOperator, apply, schmidt_coefficients

LAM = DEFAULT_WAVELENGTH_NM
II = ScenarioStep.II_POL1_OUT
I = ScenarioStep.I_POL1_IN
s_deg = np.deg2rad


def at(alpha, phi, pol1=None):
    return Settings(optics.position_from_phase(alpha, LAM), phi, pol1)


class TestHybridState:
    @given(st.floats(-180, 180), st.floats(-180, 180))
    @settings(max_examples=30)
    def test_maximally_entangled(self, theta, gamma):
        s = prepare_hybrid_state(theta, gamma)
        np.testing.assert_allclose(schmidt_coefficients(s, ["A_path"]), [1 / np.sqrt(2)] * 2, atol=1e-9)

    def test_b_reduced_state_maximally_mixed(self):
        rho = DensityOperator.from_state(prepare_hybrid_state(30, 70)).partial_trace(["B_pol"])
        np.testing.assert_allclose(np.linalg.eigvalsh(rho.matrix), [0.5, 0.5], atol=1e-12)

    def test_a_polarization_factors_out(self):
        rho = DensityOperator.from_state(prepare_hybrid_state(30, 70)).partial_trace(["A_pol"])
        assert rho.purity() == pytest.approx(1.0, abs=1e-9)
        k = optics.polarization_ket(30, 70)
        np.testing.assert_allclose(rho.matrix, np.outer(k, k.conj()), atol=1e-9)

    def test_amplitudes(self):
        s = prepare_hybrid_state()
        assert s.amplitude("a", "H", "H") == pytest.approx(1 / np.sqrt(2))
        assert s.amplitude("b", "H", "V") == pytest.approx(1 / np.sqrt(2))

    def test_pol1_transmission(self):
        assert prepare_hybrid_state(pol1_deg=-45).norm ** 2 == pytest.approx(0.5)


class TestIdeal:
    def test_zero_zero(self):
        assert ideal_probabilities(at(0, 0), II).p_det1_det3 == pytest.approx(0.25, abs=1e-12)

    def test_sum_ninety(self):
        p = ideal_probabilities(at(45, -22.5), II)
        assert p.p_det1_det3 == pytest.approx(0.5, abs=1e-12)
        assert p.p_det2_det3 == pytest.approx(0.0, abs=1e-12)

    def test_step_mismatch(self):
        with pytest.raises(ValueError, match="Pol1"):
            ideal_probabilities(at(0, 0), I)
        with pytest.raises(ValueError, match="Pol1"):
            ideal_probabilities(at(0, 0, -45), II)

    def test_closed_form_on_5_degree_grid(self):
        grid = np.arange(0.0, 360.0, 5.0)
        phis = -grid / 2
        g = probability_grid(grid, np.concatenate([phis, phis + 90]))
        n = grid.size
        a, b = np.meshgrid(grid, grid, indexing="ij")
        oracle = np.sin(s_deg(a + b))
        np.testing.assert_allclose(g["det1_det3"][:, :n], (1 + oracle) / 4, atol=1e-12)
        np.testing.assert_allclose(g["det2_det3"][:, :n], (1 - oracle) / 4, atol=1e-12)
        assert np.abs(correlation_grid(grid, grid) - oracle).max() < 1e-9
        # four outcomes c/d x beta/beta-perp are complete
        total = g["det1_det3"][:, :n] + g["det2_det3"][:, :n] + g["det1_det3"][:, n:] + g["det2_det3"][:, n:]
        np.testing.assert_allclose(total, 1.0, atol=1e-9)

    def test_step_two_singles_flat(self):
        g = probability_grid(np.linspace(0, 360, 73), np.linspace(-90, 90, 37))
        assert np.abs(g["det1"] - 0.5).max() < 1e-12
        assert np.abs(g["det2"] - 0.5).max() < 1e-12

    @given(st.floats(-360, 360), st.floats(-360, 360), st.floats(-180, 180))
    @settings(max_examples=40)
    def test_depends_only_on_sum(self, alpha, beta, shift):
        a = correlation_grid([alpha + shift], [beta])[0, 0]
        b = correlation_grid([alpha], [beta + shift])[0, 0]
        assert a == pytest.approx(b, abs=1e-9)

    @given(st.floats(0, 360), st.floats(-90, 90), st.floats(-90, 90))
    @settings(max_examples=40)
    def test_pol1_closed_form(self, alpha, phi, chi):
        p = ideal_probabilities(at(alpha, phi, chi), I)
        beta = -2 * phi
        single = 0.5 * (1 + np.sin(s_deg(2 * chi)) * np.sin(s_deg(alpha))) / 2
        overlap = (1 + np.sin(s_deg(2 * chi)) * np.cos(s_deg(beta))) / 2
        assert p.p_det1 == pytest.approx(single, abs=1e-12)
        assert p.p_det1_det3 == pytest.approx(single * overlap, abs=1e-12)

    @given(st.floats(0, 360), st.floats(-90, 90), st.floats(-90, 90))
    @settings(max_examples=30)
    def test_pol1_on_photon_b_is_equivalent(self, alpha, phi, chi):
        s = apply(optics.linear_polarizer(chi, B_POL), source_state())
        for op in (optics.pbs(), optics.inline_pc(0, 0, "a"), optics.inline_pc(0, 0, "b"),
                   optics.phase_scanner(optics.position_from_phase(alpha, LAM), LAM), optics.fiber_beam_splitter()):
            s = apply(op, s)
        analyzer, _ = optics.analyzer_chain(phi)
        m = np.kron(np.kron(np.diag([1.0, 0]), np.eye(2)), analyzer.matrix)
        p13 = np.real(np.vdot(s.amplitudes, m @ s.amplitudes))
        assert ideal_probabilities(at(alpha, phi, chi), I).p_det1_det3 == pytest.approx(p13, abs=1e-12)

    def test_pol1_ratio(self):
        alphas = np.linspace(0, 360, 3601)
        step1 = probability_grid(alphas, -22.5, pol1_deg=-45)["det1_det3"].max()
        step2 = probability_grid(alphas, -22.5)["det1_det3"].max()
        assert step1 / step2 == pytest.approx((1 - np.cos(s_deg(45))) / 2, abs=1e-6)
        assert step1 / step2 == pytest.approx(0.146, abs=0.005)

    def test_det2_peak(self):
        alphas = np.arange(-180, 180, 0.5)
        for chi in (-45.0, 30.0):
            det2 = probability_grid(alphas, 0.0, pol1_deg=chi)["det2"][:, 0]
            assert alphas[np.argmax(det2)] == pytest.approx(det2_peak_phase(chi))
        with pytest.raises(ValueError):
            det2_peak_phase(0.0)


class TestNoisy:
    def test_identity_noise(self):
        st_ = at(33, 12)
        assert noisy_probabilities(st_, II, NoiseModel()) == ideal_probabilities(st_, II)

    @pytest.mark.parametrize("alpha,phi", [(0, 22.5), (90, -22.5), (17, 40)])
    def test_reduced_visibility(self, alpha, phi):
        p = noisy_probabilities(at(alpha, phi), II, NoiseModel(visibility=0.9381))
        beta = -2 * phi
        assert p.p_det1_det3 == pytest.approx((1 + 0.9381 * np.sin(s_deg(alpha + beta))) / 4, abs=1e-12)

    def test_drift_shifts_phase(self):
        noise = NoiseModel(drift_rate=0.5)
        p = noisy_probabilities(at(10, 0), II, noise, elapsed_time=4.0)
        assert p == ideal_probabilities(at(12, 0), II)

    def test_efficiency_and_accidentals(self):
        noise = NoiseModel(accidental_fraction=0.01, detector_efficiency=(0.5, 0.8, 0.9))
        ideal = ideal_probabilities(at(20, 10), II)
        p = noisy_probabilities(at(20, 10), II, noise)
        assert p.p_det1_det3 == pytest.approx(ideal.p_det1_det3 * 0.45 + 0.01)
        assert p.p_det2 == pytest.approx(ideal.p_det2 * 0.8 + 0.01)
        assert p.p_det3 == pytest.approx(ideal.p_det3 * 0.9 + 0.02)
        assert p.p_accidental == 0.01

    def test_efficiency_cancels_in_correlation(self):
        noise = NoiseModel(detector_efficiency=(0.6, 0.6, 0.3))
        a, b = settings_for_bell_point(1, 2)
        e = correlation_from_probabilities(noisy_probabilities(a, II, noise), noisy_probabilities(b, II, noise))
        assert e == pytest.approx(np.sin(s_deg(0 + 45)), abs=1e-12)

    def test_inconsistent_noise(self):
        with pytest.raises(ValueError, match="exceeds 1"):
            noisy_probabilities(at(0, 0), II, NoiseModel(accidental_fraction=0.7))

    def test_invalid_noise(self):
        with pytest.raises(ValueError, match="visibility"):
            NoiseModel(visibility=1.2)
        with pytest.raises(ValueError, match="detector_efficiency"):
            NoiseModel(detector_efficiency=(1.0, 0.0, 1.0))

    @given(st.floats(0.05, 1.0), st.floats(-90, 90))
    @settings(max_examples=25, deadline=None)
    def test_fitted_visibility_equals_v(self, v, phi):
        x = np.linspace(0, LAM * 1e-3, 40, endpoint=False)
        p = probability_grid(optics.phase_from_position(x, LAM), phi, visibility=v)["det1_det3"][:, 0]
        fit = fit_fixed_wavelength(x, p, LAM)
        assert fit.visibility == pytest.approx(v, abs=1e-9)


class TestBellSettings:
    def test_11(self):
        a, b = settings_for_bell_point(1, 1, LAM, 3.0)
        assert (a.x_um, a.phi_deg, b.phi_deg) == (3.0, 22.5, 112.5)

    def test_2j(self):
        a, _ = settings_for_bell_point(2, 1, LAM, 0.0)
        assert a.x_um == pytest.approx(0.17715)

    def test_i2(self):
        a, b = settings_for_bell_point(1, 2)
        assert (a.phi_deg, b.phi_deg) == (-22.5, 67.5)

    def test_bad_index(self):
        with pytest.raises(ValueError):
            settings_for_bell_point(3, 1)

    def test_ideal_chsh(self):
        e = {}
        for i in (1, 2):
            for j in (1, 2):
                a, b = settings_for_bell_point(i, j)
                e[i, j] = correlation_from_probabilities(ideal_probabilities(a, II), ideal_probabilities(b, II))
        s = -e[1, 1] + e[1, 2] + e[2, 1] + e[2, 2]
        assert s == pytest.approx(2 * np.sqrt(2), abs=1e-12)
