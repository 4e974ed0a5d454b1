import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybrid_bell import optics
from hybrid_bell.apparatus import source_state
from hybrid_bell.qcore import (
    A_PATH,
    A_PATH_OUT,
    A_POL,
    B_POL,
    StateVector,
    apply,
    is_isometry,
    is_projector,
    is_unitary,
    ket,
    lift_to_composite,
    tensor,
)

LAM = 708.6


def equal_up_to_phase(u, v, tol=1e-9):
    u, v = np.asarray(u), np.asarray(v)
    k = np.argmax(np.abs(v))
    if abs(v.flat[k]) < tol:
        return np.abs(u).max() < tol
    g = u.flat[k] / v.flat[k]
    return abs(abs(g) - 1) < tol and np.abs(u - g * v).max() < tol


class TestAngles:
    @pytest.mark.parametrize("raw,norm", [(0, 0), (90, 90), (-90, 90), (112.5, -67.5), (180, 0), (-135, 45)])
    def test_normalize(self, raw, norm):
        assert optics.normalize_angle(raw) == pytest.approx(norm)

    @given(st.floats(-1e4, 1e4))
    def test_normalize_range(self, a):
        n = optics.normalize_angle(a)
        assert -90 < n <= 90
        assert abs(optics.wrap_phase(2 * (n - a))) < 1e-6

    @given(st.floats(-1e4, 1e4))
    def test_wrap_range(self, a):
        assert -180 < optics.wrap_phase(a) <= 180

    def test_polarizer_beta_round_trip(self):
        for phi in (-22.5, 22.5, 67.5, 112.5):
            assert optics.beta_from_polarizer(phi) == -2 * phi
            assert optics.polarizer_from_beta(-2 * phi) == pytest.approx(optics.normalize_angle(phi))

    def test_bad_wavelength(self):
        with pytest.raises(ValueError, match="wavelength"):
            optics.phase_from_position(1.0, 0.0)


class TestPbs:
    def test_h_goes_to_a(self):
        out = apply(optics.pbs(), ket(A_POL, "H"))
        assert out.basis == (A_PATH, A_POL)
        assert out.amplitude("a", "H") == 1 and out.norm == pytest.approx(1)

    def test_v_goes_to_b(self):
        out = apply(optics.pbs(), ket(A_POL, "V"))
        assert out.amplitude("b", "V") == 1 and out.norm == pytest.approx(1)

    def test_linearity(self):
        d = (ket(A_POL, "H") + ket(A_POL, "V")) * (1 / np.sqrt(2))
        out = apply(optics.pbs(), d)
        expected = (tensor(ket(A_PATH, "a"), ket(A_POL, "H")) + tensor(ket(A_PATH, "b"), ket(A_POL, "V"))) * (1 / np.sqrt(2))
        np.testing.assert_allclose(out.amplitudes, expected.amplitudes, atol=1e-15)

    def test_isometry(self):
        assert is_isometry(optics.pbs().matrix)


class TestInlinePc:
    def test_identity_at_origin(self):
        m = optics.inline_pc(0, 0, "a").matrix
        np.testing.assert_allclose(m, np.eye(4), atol=1e-15)

    def test_theta_90_path_b(self):
        m = optics.inline_pc(90, 0, "b").matrix
        v_b = np.array([0, 0, 0, 1.0])
        assert equal_up_to_phase(m @ v_b, v_b)

    def test_bad_path(self):
        with pytest.raises(ValueError):
            optics.inline_pc(0, 0, "c")

    @given(st.floats(-180, 180), st.floats(-180, 180))
    @settings(max_examples=60)
    def test_distinguishability_erased(self, theta, gamma):
        s = apply(optics.pbs(), source_state())
        s = apply(optics.inline_pc(theta, gamma, "a"), s)
        s = apply(optics.inline_pc(theta, gamma, "b"), s)
        amp = s.amplitudes.reshape(2, 2, 2)
        # photon A's polarization in arm a (with B=H) and in arm b (with B=V)
        pa = amp[0, :, 0] / np.linalg.norm(amp[0, :, 0])
        pb = amp[1, :, 1] / np.linalg.norm(amp[1, :, 1])
        assert abs(np.vdot(pa, pb)) == pytest.approx(1.0, abs=1e-9)
        np.testing.assert_allclose(pa, optics.polarization_ket(theta, gamma), atol=1e-9)

    @given(st.floats(-180, 180), st.floats(-180, 180), st.sampled_from("ab"))
    @settings(max_examples=40)
    def test_unitary(self, theta, gamma, path):
        assert is_unitary(optics.inline_pc(theta, gamma, path).matrix)


class TestPhaseScanner:
    def test_zero_is_identity(self):
        np.testing.assert_allclose(optics.phase_scanner(0.0, LAM).matrix, np.eye(2))

    def test_quarter_wave(self):
        x = LAM * 1e-3 / 4
        assert x == pytest.approx(0.17715)
        assert optics.phase_from_position(x, LAM) == pytest.approx(90.0)
        np.testing.assert_allclose(optics.phase_scanner(x, LAM).matrix, np.diag([1j, 1]), atol=1e-12)

    def test_full_wave(self):
        np.testing.assert_allclose(optics.phase_scanner(LAM * 1e-3, LAM).matrix, np.eye(2), atol=1e-12)

    @given(st.floats(-5, 5), st.floats(-5, 5))
    def test_composition(self, x1, x2):
        m = optics.phase_scanner(x1, LAM).matrix @ optics.phase_scanner(x2, LAM).matrix
        assert equal_up_to_phase(m, optics.phase_scanner(x1 + x2, LAM).matrix)


class TestBeamSplitter:
    def test_a(self):
        out = optics.fiber_beam_splitter().matrix @ [1, 0]
        np.testing.assert_allclose(out, np.array([1, 1j]) / np.sqrt(2))

    def test_b(self):
        out = optics.fiber_beam_splitter().matrix @ [0, 1]
        np.testing.assert_allclose(out, np.array([1j, 1]) / np.sqrt(2))

    @pytest.mark.parametrize("alpha", [0.0, 37.0, 90.0, 233.0])
    def test_full_chain_reproduces_primed_state(self, alpha):
        s = apply(optics.pbs(), source_state())
        s = apply(optics.inline_pc(0, 0, "a"), s)
        s = apply(optics.inline_pc(0, 0, "b"), s)
        s = apply(optics.phase_scanner(optics.position_from_phase(alpha, LAM), LAM), s)
        s = apply(optics.fiber_beam_splitter(), s)
        assert s.basis == (A_PATH_OUT, A_POL, B_POL)
        # oracle: 1/2[(|d> + i|c>)|V>_B + e^{ia}(|c> + i|d>)|H>_B] with photon A's
        # polarization in the common state |0,0> = |H>
        e = np.exp(1j * np.deg2rad(alpha))
        c, d = np.array([1, 0]), np.array([0, 1])
        h, v = np.array([1, 0]), np.array([0, 1])
        oracle = 0.5 * (np.kron(np.kron(d + 1j * c, h), v) + e * np.kron(np.kron(c + 1j * d, h), h))
        np.testing.assert_allclose(s.amplitudes, oracle, atol=1e-12)


class TestWaveplates:
    def test_qwp_fast_axis_horizontal(self):
        m = optics.quarter_waveplate(0).matrix
        np.testing.assert_allclose(m, np.diag([1, optics.QWP_SLOW_AXIS_PHASE]), atol=1e-15)

    @given(st.floats(-180, 180))
    def test_two_qwps_make_a_hwp(self, angle):
        q = optics.quarter_waveplate(angle).matrix
        assert equal_up_to_phase(q @ q, optics.half_waveplate(angle).matrix)

    def test_hwp_at_45_swaps(self):
        assert equal_up_to_phase(optics.half_waveplate(45).matrix, np.array([[0, 1], [1, 0]]))

    def test_custom_subsystem(self):
        assert optics.quarter_waveplate(0, A_POL).inputs == (A_POL,)


class TestPolarizer:
    def test_horizontal(self):
        np.testing.assert_allclose(optics.linear_polarizer(0).matrix, np.diag([1, 0]), atol=1e-15)

    def test_malus(self):
        h = ket(B_POL, "H")
        out = apply(optics.linear_polarizer(45), h)
        assert out.norm ** 2 == pytest.approx(0.5)

    @given(st.floats(-180, 180))
    def test_orthogonal(self, phi):
        p = optics.linear_polarizer(phi).matrix @ optics.linear_polarizer(phi + 90).matrix
        assert np.abs(p).max() < 1e-12

    @given(st.floats(-180, 180))
    def test_projector(self, phi):
        assert is_projector(optics.linear_polarizer(phi).matrix)


class TestAnalyzer:
    def test_phi_minus_22_5(self):
        p, beta = optics.analyzer_chain(-22.5)
        assert beta == 45.0
        b = optics.beta_ket(45)
        np.testing.assert_allclose(p.matrix, np.outer(b, b.conj()), atol=1e-12)

    def test_phi_22_5(self):
        p, beta = optics.analyzer_chain(22.5)
        assert beta == -45.0
        b = optics.beta_ket(-45)
        np.testing.assert_allclose(p.matrix, np.outer(b, b.conj()), atol=1e-12)

    def test_overlap_with_minus_45_linear(self):
        b2 = optics.beta_ket(45.0)
        lin = np.array([np.cos(np.deg2rad(-45)), np.sin(np.deg2rad(-45))])
        assert abs(np.vdot(b2, lin)) ** 2 == pytest.approx((1 - np.cos(np.deg2rad(45))) / 2, abs=1e-12)
        assert abs(np.vdot(b2, lin)) ** 2 == pytest.approx(0.1464, abs=1e-4)

    def test_projector_identity_on_1_degree_grid(self):
        for phi in np.arange(-89.0, 91.0, 1.0):
            p, beta = optics.analyzer_chain(phi)
            assert beta == -2 * phi
            b = optics.beta_ket(beta)
            assert np.abs(p.matrix - np.outer(b, b.conj())).max() < 1e-9

    @given(st.floats(-90, 90))
    def test_orthogonal_pair_resolves_identity(self, phi):
        p1, _ = optics.analyzer_chain(phi)
        p2, _ = optics.analyzer_chain(phi + 90)
        np.testing.assert_allclose(p1.matrix + p2.matrix, np.eye(2), atol=1e-9)
        assert np.abs(p1.matrix @ p2.matrix).max() < 1e-9

    def test_chain_matches_qwp_then_polarizer(self):
        s = StateVector(optics.beta_ket(45.0), (B_POL,))
        for op in (optics.b_arm_retarder(), optics.quarter_waveplate(optics.QWP2_ANGLE_DEG), optics.linear_polarizer(-22.5)):
            s = apply(op, s)
        assert s.norm == pytest.approx(1.0, abs=1e-12)

    def test_eq2_outcomes_on_5_degree_grid(self):
        grid = np.arange(0.0, 360.0, 5.0)
        s0 = apply(optics.pbs(), source_state())
        s0 = apply(optics.inline_pc(20.0, 50.0, "a"), s0)
        s0 = apply(optics.inline_pc(20.0, 50.0, "b"), s0)
        bs = lift_to_composite(optics.fiber_beam_splitter(), s0.basis).matrix
        worst = 0.0
        for alpha in grid:
            ps = lift_to_composite(optics.phase_scanner(optics.position_from_phase(alpha, LAM), LAM), s0.basis).matrix
            psi = bs @ ps @ s0.amplitudes
            for beta in grid:
                p_b, _ = optics.analyzer_chain(-beta / 2)
                m = np.kron(np.kron(np.diag([1.0, 0]), np.eye(2)), p_b.matrix)
                p_c = np.real(np.vdot(psi, m @ psi))
                worst = max(worst, abs(p_c - (1 + np.sin(np.deg2rad(alpha + beta))) / 4))
        assert worst < 1e-9
