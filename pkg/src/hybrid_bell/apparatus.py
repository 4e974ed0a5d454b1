"""The full hybrid-entanglement setup: source, interferometer, analyzers, detectors.

Photon A carries the path qubit into the Mach-Zehnder interferometer
(PS then fiber BS, outputs c -> Det1, d -> Det2).  Photon B goes through
its fiber arm, QWP2 and Pol2 to Det3.  Pol1 sits in the source on photon A
ahead of the PBS; inserting it projects the pair onto a product state, so
photon A alone shows path interference in the singles.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import optics
from .qcore import (
    A_PATH,
    A_PATH_OUT,
    A_POL,
    B_POL,
    DensityOperator,
    ElementOperator,
    StateVector,
    apply,
    dephase_mix,
    ket,
    lift_to_composite,
    tensor,
)

DEFAULT_WAVELENGTH_NM = 708.6
OUTPUT_BASIS = (A_PATH_OUT, A_POL, B_POL)


class ScenarioStep(str, enum.Enum):
    I_POL1_IN = "I_pol1_in"
    II_POL1_OUT = "II_pol1_out"
    III_POL1_REINSERTED = "III_pol1_reinserted"

    @property
    def pol1_inserted(self) -> bool:
        return self is not ScenarioStep.II_POL1_OUT


@dataclass(frozen=True)
class Settings:
    x_um: float
    phi_deg: float
    pol1_deg: float | None = None
    wavelength_nm: float = DEFAULT_WAVELENGTH_NM
    pc_theta_deg: float = 0.0
    pc_gamma_deg: float = 0.0

    def __post_init__(self):
        if not self.wavelength_nm > 0:
            raise ValueError(f"wavelength_nm must be positive, got {self.wavelength_nm}")

    @property
    def alpha_deg(self) -> float:
        return optics.phase_from_position(self.x_um, self.wavelength_nm)

    @property
    def beta_deg(self) -> float:
        return optics.beta_from_polarizer(self.phi_deg)


@dataclass(frozen=True)
class NoiseModel:
    """Aggregate imperfections of the setup.

    ``drift_rate`` is in degrees of interferometer phase per second of
    elapsed scan time.  ``phase_offset_deg`` is the static, uncalibrated
    interferometer phase at x = 0; the analysis removes it by calibration.
    """

    visibility: float = 1.0
    accidental_fraction: float = 0.0
    drift_rate: float = 0.0
    detector_efficiency: tuple[float, float, float] = (1.0, 1.0, 1.0)
    phase_offset_deg: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError(f"visibility must be in [0, 1], got {self.visibility}")
        if not self.accidental_fraction >= 0.0:
            raise ValueError(f"accidental_fraction must be >= 0, got {self.accidental_fraction}")
        if not np.isfinite(self.drift_rate):
            raise ValueError("drift_rate must be finite")
        eff = tuple(float(e) for e in self.detector_efficiency)
        if len(eff) != 3 or not all(0.0 < e <= 1.0 for e in eff):
            raise ValueError(f"detector_efficiency needs three values in (0, 1], got {eff}")
        object.__setattr__(self, "detector_efficiency", eff)


@dataclass(frozen=True)
class OutcomeProbabilities:
    """Expected detections per emitted pair.

    ``p_accidental`` is the part of each coincidence channel that comes from
    uncorrelated background; it is included in both the coincidence and the
    corresponding singles entries.
    """

    p_det1_det3: float
    p_det2_det3: float
    p_det1: float
    p_det2: float
    p_det3: float
    p_pair_detected: float = field(default=None)
    p_accidental: float = 0.0

    def __post_init__(self):
        if self.p_pair_detected is None:
            object.__setattr__(self, "p_pair_detected", self.p_det1_det3 + self.p_det2_det3)
        for name in ("p_det1_det3", "p_det2_det3", "p_det1", "p_det2", "p_det3", "p_pair_detected"):
            v = getattr(self, name)
            if not -1e-12 <= v <= 1 + 1e-12:
                raise ValueError(f"{name}={v} outside [0, 1]")


def source_state() -> StateVector:
    """Polarization Bell state (|H>_A|H>_B + |V>_A|V>_B)/sqrt2 from the SPDC source."""
    h_a, v_a = ket(A_POL, "H"), ket(A_POL, "V")
    h_b, v_b = ket(B_POL, "H"), ket(B_POL, "V")
    return (tensor(h_a, h_b) + tensor(v_a, v_b)) * (1 / np.sqrt(2))


def prepare_hybrid_state(theta_deg: float = 0.0, gamma_deg: float = 0.0, pol1_deg: float | None = None) -> StateVector:
    """Source state after Pol1 (optional), PBS and both in-line controllers.

    Without Pol1 this is (|b>|V>_B + |a>|H>_B)/sqrt2 with photon A's
    polarization in the common state |theta,gamma>.  With Pol1 the result
    is sub-normalized; its squared norm is the Pol1 transmission.
    """
    s = source_state()
    if pol1_deg is not None:
        s = apply(optics.linear_polarizer(pol1_deg, A_POL), s)
    s = apply(optics.pbs(), s)
    s = apply(optics.inline_pc(theta_deg, gamma_deg, "a"), s)
    s = apply(optics.inline_pc(theta_deg, gamma_deg, "b"), s)
    return s


@lru_cache(maxsize=256)
def _source_density(theta: float, gamma: float, pol1: float | None, visibility: float):
    s = prepare_hybrid_state(theta, gamma, pol1)
    transmission = s.norm ** 2
    return transmission, dephase_mix(s.normalized(), visibility, "A_path")


@lru_cache(maxsize=1024)
def _detector_projectors(phi_deg: float) -> dict[str, np.ndarray]:
    analyzer, _ = optics.analyzer_chain(phi_deg)
    pass_b = lift_to_composite(analyzer, OUTPUT_BASIS).matrix
    out = {"det3": pass_b}
    for det, label in (("det1", "c"), ("det2", "d")):
        v = np.zeros(2)
        v[A_PATH_OUT.index(label)] = 1.0
        path_proj = ElementOperator(np.outer(v, v), "projector", (A_PATH_OUT,))
        m = lift_to_composite(path_proj, OUTPUT_BASIS).matrix
        out[det] = m
        out[det + "_det3"] = m @ pass_b
    return out


def _interferometer(alpha_deg: float, wavelength_nm: float) -> np.ndarray:
    x = optics.position_from_phase(alpha_deg, wavelength_nm)
    ps = lift_to_composite(optics.phase_scanner(x, wavelength_nm), (A_PATH, A_POL, B_POL))
    bs = lift_to_composite(optics.fiber_beam_splitter(), (A_PATH, A_POL, B_POL))
    return bs.matrix @ ps.matrix


def probability_grid(
    alpha_deg,
    phi_deg,
    *,
    pol1_deg: float | None = None,
    visibility: float = 1.0,
    theta_deg: float = 0.0,
    gamma_deg: float = 0.0,
    wavelength_nm: float = DEFAULT_WAVELENGTH_NM,
) -> dict[str, np.ndarray]:
    """Detection probabilities per emitted pair on an (alpha, phi) grid.

    Returns arrays of shape (len(alpha), len(phi)) keyed by
    det1, det2, det3, det1_det3, det2_det3.  Every entry is
    transmission * Tr(P U rho U+) with the element matrices of the chain.
    """
    alphas = np.atleast_1d(np.asarray(alpha_deg, dtype=float))
    phis = np.atleast_1d(np.asarray(phi_deg, dtype=float))
    transmission, rho0 = _source_density(float(theta_deg), float(gamma_deg),
                                         None if pol1_deg is None else float(pol1_deg), float(visibility))
    us = np.stack([_interferometer(a, wavelength_nm) for a in alphas])
    rhos = np.einsum("aij,jk,alk->ail", us, rho0.matrix, us.conj())
    out = {}
    for key in ("det1", "det2", "det3", "det1_det3", "det2_det3"):
        projs = np.stack([_detector_projectors(float(p))[key] for p in phis])
        out[key] = np.clip(transmission * np.real(np.einsum("fij,aji->af", projs, rhos)), 0.0, None)
    return out


def _check_step(settings: Settings, step: ScenarioStep):
    step = ScenarioStep(step)
    if step.pol1_inserted and settings.pol1_deg is None:
        raise ValueError(f"step {step.value} needs Pol1 inserted (pol1_deg is None)")
    if not step.pol1_inserted and settings.pol1_deg is not None:
        raise ValueError(f"step {step.value} has Pol1 removed but pol1_deg={settings.pol1_deg}")
    return step


def _outcomes(settings: Settings, alpha_deg: float, visibility: float) -> OutcomeProbabilities:
    g = probability_grid(
        alpha_deg, settings.phi_deg,
        pol1_deg=settings.pol1_deg, visibility=visibility,
        theta_deg=settings.pc_theta_deg, gamma_deg=settings.pc_gamma_deg,
        wavelength_nm=settings.wavelength_nm,
    )
    v = {k: float(np.clip(a[0, 0], 0.0, 1.0)) for k, a in g.items()}
    return OutcomeProbabilities(v["det1_det3"], v["det2_det3"], v["det1"], v["det2"], v["det3"])


def ideal_probabilities(settings: Settings, step: ScenarioStep) -> OutcomeProbabilities:
    """Noise-free detection probabilities with alpha = 2*pi*x/lambda."""
    _check_step(settings, step)
    return _outcomes(settings, settings.alpha_deg, 1.0)


def noisy_probabilities(
    settings: Settings,
    step: ScenarioStep,
    noise: NoiseModel,
    elapsed_time: float = 0.0,
) -> OutcomeProbabilities:
    """Detection probabilities under ``noise`` after ``elapsed_time`` seconds."""
    _check_step(settings, step)
    alpha = settings.alpha_deg + noise.phase_offset_deg + noise.drift_rate * elapsed_time
    p = _outcomes(settings, alpha, noise.visibility)
    e1, e2, e3 = noise.detector_efficiency
    acc = noise.accidental_fraction
    values = dict(
        p_det1_det3=p.p_det1_det3 * e1 * e3 + acc,
        p_det2_det3=p.p_det2_det3 * e2 * e3 + acc,
        p_det1=p.p_det1 * e1 + acc,
        p_det2=p.p_det2 * e2 + acc,
        p_det3=p.p_det3 * e3 + 2 * acc,
    )
    for name, v in values.items():
        if v > 1 + 1e-12:
            raise ValueError(f"{name}={v:.6g} exceeds 1; noise parameters are inconsistent")
    values = {k: min(v, 1.0) for k, v in values.items()}
    pair = p.p_det1_det3 * e1 * e3 + p.p_det2_det3 * e2 * e3
    return OutcomeProbabilities(**values, p_pair_detected=pair, p_accidental=acc)


def correlation_from_probabilities(p_beta: OutcomeProbabilities, p_beta_perp: OutcomeProbabilities) -> float:
    """Correlation coefficient from the four coincidence channels of a setting pair."""
    plus = p_beta.p_det1_det3 + p_beta_perp.p_det2_det3
    minus = p_beta.p_det2_det3 + p_beta_perp.p_det1_det3
    return (plus - minus) / (plus + minus)


def correlation_grid(alpha_deg, beta_deg, *, visibility: float = 1.0) -> np.ndarray:
    """E(alpha, beta) from step-II chain probabilities, shape (len(alpha), len(beta))."""
    betas = np.atleast_1d(np.asarray(beta_deg, dtype=float))
    phis = -betas / 2.0
    g = probability_grid(alpha_deg, np.concatenate([phis, phis + 90.0]), visibility=visibility)
    n = betas.size
    c13, c23 = g["det1_det3"], g["det2_det3"]
    plus = c13[:, :n] + c23[:, n:]
    minus = c23[:, :n] + c13[:, n:]
    return (plus - minus) / (plus + minus)


def det2_peak_phase(pol1_deg: float) -> float:
    """Interferometer phase (deg) at which Det2 singles peak with Pol1 inserted.

    With Pol1 at chi the Det2 singles follow 1 - V*sin(2*chi)*sin(alpha), so
    the maximum sits at alpha = -90 deg * sign(sin 2*chi).
    """
    s = np.sin(np.deg2rad(2 * pol1_deg))
    if abs(s) < 1e-9:
        raise ValueError(f"Pol1 at {pol1_deg} deg leaves no path interference in the singles")
    return -90.0 * np.sign(s)


BELL_ALPHA_DEG = {1: 0.0, 2: 90.0}
BELL_BETA_DEG = {1: -45.0, 2: 45.0}


def settings_for_bell_point(
    i: int,
    j: int,
    wavelength_nm: float = DEFAULT_WAVELENGTH_NM,
    x_origin_um: float = 0.0,
) -> tuple[Settings, Settings]:
    """Settings for (alpha_i, beta_j) and for the orthogonal analyzer beta_j⊥.

    alpha_1 = 0 and alpha_2 = 90 deg sit at x_origin and x_origin + lambda/4;
    beta_1 = -45 and beta_2 = 45 deg are Pol2 at 22.5 and -22.5 deg, and the
    orthogonal outcomes are taken with Pol2 turned by a further 90 deg.
    """
    if i not in BELL_ALPHA_DEG or j not in BELL_BETA_DEG:
        raise ValueError(f"Bell indices must be 1 or 2, got ({i}, {j})")
    x = x_origin_um + optics.position_from_phase(BELL_ALPHA_DEG[i], wavelength_nm)
    phi = -BELL_BETA_DEG[j] / 2.0
    return (
        Settings(x, phi, None, wavelength_nm),
        Settings(x, phi + 90.0, None, wavelength_nm),
    )
