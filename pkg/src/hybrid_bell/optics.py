"""Jones-calculus models of the optical elements and the lab unit conversions.

Angles are degrees at every public boundary and radians internally.
Positions are micrometres, wavelengths nanometres.
"""
from __future__ import annotations

import numpy as np

from .qcore import A_PATH, A_PATH_OUT, A_POL, B_POL, ElementOperator, Subsystem

# Quarter-wave Jones matrix in its own frame: fast axis untouched, slow
# axis multiplied by exp(-i*pi/2).  The opposite sign reverses the slope of
# beta(phi) and cannot be repaired by any fixed retardance.
QWP_SLOW_AXIS_PHASE = -1j

# QWP2 orientation used by the polarization analyzer of photon B.
QWP2_ANGLE_DEG = -45.0

# Fixed H/V retardance of photon B's fiber arm, in degrees.  With the
# slow-axis phase above, QWP2 at -45 deg followed by Pol2 at phi projects onto
# (|H> + exp(i*(90 - 2*phi))|V>)/sqrt(2).  The arm retardance sets the
# polarization reference so that beta = -2*phi, the relation the lab used to
# label its analyzer settings.
B_ARM_RETARDANCE_DEG = 90.0


def normalize_angle(deg: float) -> float:
    """Map an orientation angle onto (-90, 90]."""
    out = (deg + 90.0) % 180.0 - 90.0
    return 90.0 if out == -90.0 else out


def wrap_phase(deg: float) -> float:
    """Map a phase onto (-180, 180]."""
    out = (deg + 180.0) % 360.0 - 180.0
    return 180.0 if out == -180.0 else out


def phase_from_position(x_um: float, wavelength_nm: float) -> float:
    """Interferometer phase in degrees for PBS displacement ``x_um``."""
    if wavelength_nm <= 0:
        raise ValueError(f"wavelength must be positive, got {wavelength_nm}")
    return 360.0 * x_um / (wavelength_nm * 1e-3)


def position_from_phase(alpha_deg: float, wavelength_nm: float) -> float:
    if wavelength_nm <= 0:
        raise ValueError(f"wavelength must be positive, got {wavelength_nm}")
    return alpha_deg / 360.0 * wavelength_nm * 1e-3


def beta_from_polarizer(phi_deg: float) -> float:
    return -2.0 * phi_deg


def polarizer_from_beta(beta_deg: float) -> float:
    return normalize_angle(-beta_deg / 2.0)


def _rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s], [-s, c]])


def pbs() -> ElementOperator:
    """Polarizing beam splitter: |H> -> |a,H>, |V> -> |b,V> on photon A."""
    m = np.zeros((4, 2), dtype=complex)
    m[0, 0] = 1.0  # H -> (a, H)
    m[3, 1] = 1.0  # V -> (b, V)
    return ElementOperator(m, "isometry", (A_POL,), (A_PATH, A_POL), name="PBS")


def polarization_ket(theta_deg: float, gamma_deg: float) -> np.ndarray:
    """cos(theta)|H> + exp(i*gamma) sin(theta)|V>."""
    t, g = np.deg2rad(theta_deg), np.deg2rad(gamma_deg)
    return np.array([np.cos(t), np.exp(1j * g) * np.sin(t)])


def inline_pc(theta_deg: float, gamma_deg: float, path: str) -> ElementOperator:
    """Fiber polarization controller in one interferometer arm.

    In arm ``a`` the controller sends |H> to |theta,gamma>; in arm ``b`` it
    sends |V> there.  The orthogonal input goes to the orthogonal
    complement with no extra phase.  The other arm sees the identity.
    """
    target = polarization_ket(theta_deg, gamma_deg)
    t, g = np.deg2rad(theta_deg), np.deg2rad(gamma_deg)
    complement = np.array([-np.exp(-1j * g) * np.sin(t), np.cos(t)])
    if path == "a":
        block = np.column_stack([target, complement])
    elif path == "b":
        block = np.column_stack([complement, target])
    else:
        raise ValueError(f"path must be 'a' or 'b', got {path!r}")
    m = np.eye(4, dtype=complex)
    k = A_PATH.index(path)
    m[2 * k:2 * k + 2, 2 * k:2 * k + 2] = block
    return ElementOperator(m, "unitary", (A_PATH, A_POL), name=f"in-PC({path})")


def phase_scanner(x_um: float, wavelength_nm: float) -> ElementOperator:
    """Phase exp(i*alpha) on the |a> arm, alpha = 2*pi*x/lambda."""
    alpha = np.deg2rad(phase_from_position(x_um, wavelength_nm))
    return ElementOperator(np.diag([np.exp(1j * alpha), 1.0]), "unitary", (A_PATH,), name="PS")


def fiber_beam_splitter() -> ElementOperator:
    """|a> -> (|c> + i|d>)/sqrt2, |b> -> (|d> + i|c>)/sqrt2."""
    m = np.array([[1, 1j], [1j, 1]]) / np.sqrt(2)
    return ElementOperator(m, "unitary", (A_PATH,), (A_PATH_OUT,), name="BS")


def _retarder(angle_deg: float, phase: complex) -> np.ndarray:
    r = _rotation(np.deg2rad(angle_deg))
    return r.T @ np.diag([1.0, phase]) @ r


def quarter_waveplate(angle_deg: float, subsystem: Subsystem = B_POL) -> ElementOperator:
    """Quarter-wave plate with its fast axis at ``angle_deg`` from horizontal."""
    m = _retarder(normalize_angle(angle_deg), QWP_SLOW_AXIS_PHASE)
    return ElementOperator(m, "unitary", (subsystem,), name="QWP")


def half_waveplate(angle_deg: float, subsystem: Subsystem = B_POL) -> ElementOperator:
    m = _retarder(normalize_angle(angle_deg), QWP_SLOW_AXIS_PHASE ** 2)
    return ElementOperator(m, "unitary", (subsystem,), name="HWP")


def linear_polarizer(angle_deg: float, subsystem: Subsystem = B_POL) -> ElementOperator:
    """Rank-1 projector onto cos(phi)|H> + sin(phi)|V>."""
    phi = np.deg2rad(normalize_angle(angle_deg))
    v = np.array([np.cos(phi), np.sin(phi)])
    return ElementOperator(np.outer(v, v), "projector", (subsystem,), name=f"Pol({angle_deg:g})")


def b_arm_retarder() -> ElementOperator:
    phase = np.exp(1j * np.deg2rad(B_ARM_RETARDANCE_DEG))
    return ElementOperator(np.diag([1.0, phase]), "unitary", (B_POL,), name="B-arm")


def analyzer_chain(phi_deg: float) -> tuple[ElementOperator, float]:
    """Photon B analyzer: fiber arm, QWP2 at -45 deg, then Pol2 at ``phi_deg``.

    Returns the equivalent projector on B's polarization as it leaves the
    source, together with the analysis phase beta = -2*phi.  The projector
    is |beta><beta| with |beta> = (|H> + exp(i*beta)|V>)/sqrt2.
    """
    u = quarter_waveplate(QWP2_ANGLE_DEG).matrix @ b_arm_retarder().matrix
    p = linear_polarizer(phi_deg).matrix
    return ElementOperator(u.conj().T @ p @ u, "projector", (B_POL,), name=f"analyzer({phi_deg:g})"), beta_from_polarizer(phi_deg)


def beta_ket(beta_deg: float) -> np.ndarray:
    return np.array([1.0, np.exp(1j * np.deg2rad(beta_deg))]) / np.sqrt(2)
