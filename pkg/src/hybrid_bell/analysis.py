"""Data reduction for the hybrid Bell scan.

Fringe fits at a fixed wavelength, interferometer calibration from the
Det2 singles, correlation coefficients with Poisson error propagation,
the CHSH combination, and the phase-jump / drift diagnostics.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from itertools import groupby
from typing import Sequence

import numpy as np

from . import optics
from .apparatus import BELL_ALPHA_DEG, BELL_BETA_DEG, DEFAULT_WAVELENGTH_NM, ScenarioStep, det2_peak_phase
from .trials import CountsRecord

CHANNELS = ("singles1", "singles2", "coinc13", "coinc23")
BELL_PAIRS = ((1, 1), (1, 2), (2, 1), (2, 2))
CHSH_SIGNS = {(1, 1): -1.0, (1, 2): 1.0, (2, 1): 1.0, (2, 2): 1.0}


class FitError(ValueError):
    pass


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class SinusoidFit:
    """count(x) = offset + amp_sin*sin(2*pi*x/lambda) + amp_cos*cos(2*pi*x/lambda).

    ``phase`` is atan2(amp_cos, amp_sin) in degrees, so the curve is
    offset + A*sin(2*pi*x/lambda + phase).  ``covariance`` is the 3x3
    covariance of (offset, amp_sin, amp_cos) under Poisson noise.
    """

    offset: float
    amp_sin: float
    amp_cos: float
    phase: float
    visibility: float
    rms_residual: float
    wavelength_nm: float
    covariance: np.ndarray = field(repr=False, compare=False)
    n_points: int = 0

    @property
    def amplitude(self) -> float:
        return math.hypot(self.amp_sin, self.amp_cos)

    def design(self, x_um) -> np.ndarray:
        k = 2 * np.pi / (self.wavelength_nm * 1e-3)
        x = np.asarray(x_um, dtype=float)
        return np.stack([np.ones_like(x), np.sin(k * x), np.cos(k * x)], axis=-1)

    def __call__(self, x_um):
        return self.design(x_um) @ np.array([self.offset, self.amp_sin, self.amp_cos])

    def value_variance(self, x_um: float) -> float:
        g = self.design(x_um)
        return float(g @ self.covariance @ g)

    @property
    def phase_sigma(self) -> float:
        """First-order standard error of ``phase`` in degrees."""
        a2 = self.amp_sin ** 2 + self.amp_cos ** 2
        if a2 == 0:
            return math.inf
        g = np.array([0.0, -self.amp_cos / a2, self.amp_sin / a2])
        return math.degrees(math.sqrt(max(g @ self.covariance @ g, 0.0)))

    def peak_position(self) -> float:
        """x in [0, lambda) where the fitted curve is maximal."""
        lam = self.wavelength_nm * 1e-3
        return ((90.0 - self.phase) / 360.0 * lam) % lam

    def to_dict(self) -> dict:
        return {
            "offset": self.offset,
            "amp_sin": self.amp_sin,
            "amp_cos": self.amp_cos,
            "phase": self.phase,
            "phase_sigma": self.phase_sigma,
            "visibility": self.visibility,
            "rms_residual": self.rms_residual,
            "wavelength_nm": self.wavelength_nm,
            "n_points": self.n_points,
            "covariance": self.covariance.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SinusoidFit":
        return cls(
            d["offset"], d["amp_sin"], d["amp_cos"], d["phase"], d["visibility"],
            d["rms_residual"], d["wavelength_nm"], np.array(d["covariance"], dtype=float), d["n_points"],
        )


def fit_fixed_wavelength(x_um, counts, wavelength_nm: float = DEFAULT_WAVELENGTH_NM, variances=None) -> SinusoidFit:
    """Linear least-squares fringe fit with the wavelength held fixed.

    ``variances`` defaults to Poisson (the fitted mean, floored at 1) and
    only enters the parameter covariance, not the estimate.
    """
    x = np.asarray(x_um, dtype=float)
    y = np.asarray(counts, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise FitError("x and counts must be 1-d arrays of equal length")
    if x.size < 3:
        raise FitError(f"need at least 3 points, got {x.size}")
    lam = wavelength_nm * 1e-3
    if np.ptp(x) < lam / 2:
        raise FitError(f"points span {np.ptp(x):.4g} um, less than half a fringe ({lam / 2:.4g} um)")
    k = 2 * np.pi / lam
    X = np.column_stack([np.ones_like(x), np.sin(k * x), np.cos(k * x)])
    XtX = X.T @ X
    if np.linalg.cond(XtX) > 1e10:
        raise FitError("design matrix is rank deficient; points are too clustered")
    XtX_inv = np.linalg.inv(XtX)
    theta = np.linalg.solve(XtX, X.T @ y)
    offset, a, b = (float(t) for t in theta)
    scale = max(1.0, float(np.max(np.abs(y))) if y.size else 1.0)
    if offset < -1e-9 * scale:
        raise FitError(f"negative fitted offset {offset:.6g}")
    model = X @ theta
    var = np.maximum(model, 1.0) if variances is None else np.asarray(variances, dtype=float)
    cov = XtX_inv @ (X.T * var) @ X @ XtX_inv
    amp = math.hypot(a, b)
    visibility = amp / offset if offset > 0 else 0.0
    return SinusoidFit(
        offset=offset,
        amp_sin=a,
        amp_cos=b,
        phase=optics.wrap_phase(math.degrees(math.atan2(b, a))),
        visibility=visibility,
        rms_residual=float(np.sqrt(np.mean((y - model) ** 2))),
        wavelength_nm=float(wavelength_nm),
        covariance=cov,
        n_points=int(x.size),
    )


def calibrate_zero_phase(singles2_fit: SinusoidFit, reference_phase_deg: float = 0.0,
                         min_visibility: float = 0.2) -> float:
    """Position (um, reduced to [0, lambda)) where the interferometer phase is zero.

    The Det2 maximum is located on the fit.  ``reference_phase_deg`` is the
    interferometer phase the model assigns to that maximum (see
    ``apparatus.det2_peak_phase``); the default 0 puts alpha = 0 on the peak.
    """
    if singles2_fit.visibility < min_visibility:
        raise CalibrationError(
            f"Det2 fringe visibility {singles2_fit.visibility:.3g} is below {min_visibility}; "
            "calibration needs Pol1-inserted data"
        )
    lam = singles2_fit.wavelength_nm * 1e-3
    return (singles2_fit.peak_position() - reference_phase_deg / 360.0 * lam) % lam


@dataclass(frozen=True)
class CorrelationResult:
    E: float
    sigma: float
    c_ij: float
    c_perp_perp: float
    c_perp_j: float
    c_i_perp: float


def _correlation_gradient(c) -> tuple[float, np.ndarray]:
    c_ij, c_pp, c_pj, c_ip = c
    plus, minus = c_ij + c_pp, c_pj + c_ip
    n = plus + minus
    if n <= 0:
        raise ValueError("correlation needs a positive total count")
    e = (plus - minus) / n
    dp, dm = 2 * minus / n ** 2, -2 * plus / n ** 2
    return e, np.array([dp, dp, dm, dm])


def correlation_coefficient(c_ij, c_perp_perp, c_perp_j, c_i_perp, variances=None) -> CorrelationResult:
    """E = (C(a,b) + C(a⊥,b⊥) - C(a⊥,b) - C(a,b⊥)) / sum, with delta-method error.

    Each count has Poisson variance equal to itself unless ``variances``
    (same order as the arguments) is given.
    """
    c = np.array([c_ij, c_perp_perp, c_perp_j, c_i_perp], dtype=float)
    if np.any(c < 0):
        raise ValueError("counts must be non-negative")
    e, grad = _correlation_gradient(c)
    var = c if variances is None else np.asarray(variances, dtype=float)
    sigma = math.sqrt(float(np.sum(grad ** 2 * var)))
    return CorrelationResult(float(e), sigma, *map(float, c))


@dataclass(frozen=True)
class ChshResult:
    E11: CorrelationResult
    E12: CorrelationResult
    E21: CorrelationResult
    E22: CorrelationResult
    S: float
    sigma_S: float
    violation_sigmas: float


def chsh_s(E11, E12, E21, E22, sigma_s: float | None = None) -> ChshResult:
    """S = -E11 + E12 + E21 + E22.

    ``sigma_s`` overrides the default quadrature sum of the four errors,
    for callers whose correlation estimates share data.
    """
    s = -E11.E + E12.E + E21.E + E22.E
    if sigma_s is None:
        sigma_s = math.sqrt(E11.sigma ** 2 + E12.sigma ** 2 + E21.sigma ** 2 + E22.sigma ** 2)
    if abs(s) > 2 and sigma_s > 0:
        nsig = (abs(s) - 2) / sigma_s
    elif abs(s) > 2:
        nsig = math.inf
    else:
        nsig = 0.0
    return ChshResult(E11, E12, E21, E22, s, sigma_s, nsig)


def phase_jump(fit_a: SinusoidFit, fit_b: SinusoidFit) -> float:
    """Signed fringe phase change from ``fit_a`` to ``fit_b`` in (-180, 180]."""
    return optics.wrap_phase(fit_b.phase - fit_a.phase)


def phase_jump_sigma(fit_a: SinusoidFit, fit_b: SinusoidFit) -> float:
    return math.hypot(fit_a.phase_sigma, fit_b.phase_sigma)


def drift_estimate(step_I_fit: SinusoidFit, step_III_fit: SinusoidFit) -> float:
    """Interferometer drift between the two calibration scans, degrees."""
    return phase_jump(step_I_fit, step_III_fit)


# --- scan reduction -----------------------------------------------------


@dataclass
class RegionData:
    index: int
    step: ScenarioStep
    phi_deg: float
    pol1_deg: float | None
    records: list[CountsRecord]

    @property
    def x(self) -> np.ndarray:
        return np.array([r.x_um for r in self.records])

    def counts(self, channel: str) -> np.ndarray:
        return np.array([getattr(r, channel) for r in self.records], dtype=float)


def split_regions(records: Sequence[CountsRecord]) -> list[RegionData]:
    """Group consecutive records that share step, Pol2 and Pol1."""
    key = lambda r: (r.step, r.phi_deg, r.pol1_deg)  # noqa: E731
    out = []
    for i, ((step, phi, pol1), group) in enumerate(groupby(records, key=key)):
        out.append(RegionData(i, step, phi, pol1, list(group)))
    return out


def _same_polarizer(phi_a: float, phi_b: float) -> bool:
    d = (phi_a - phi_b) % 180.0
    return min(d, 180.0 - d) < 1e-6


def _find_bell_region(regions: list[RegionData], phi: float) -> RegionData:
    for r in regions:
        if r.step is ScenarioStep.II_POL1_OUT and _same_polarizer(r.phi_deg, phi):
            return r
    raise CalibrationError(f"no step-II region with Pol2 at {phi:g} deg (mod 180)")


@dataclass
class AnalysisReport:
    wavelength_nm: float
    mode: str
    x_origin_um: float
    fits: list[dict]
    e_values: list[dict]
    s: float
    sigma_s: float
    violation_sigmas: float
    visibilities: list[dict]
    phase_jumps: list[dict]
    drift_deg: float | None
    drift_sigma_deg: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "AnalysisReport":
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "AnalysisReport":
        return cls.from_dict(json.loads(text))


def _bell_fit_mode(fits, regions, x_origin, lam_um):
    """Correlations from fitted curves, errors from the fit covariances.

    The S error is propagated jointly because E(a1,b) and E(a2,b) evaluate
    the same two fits.
    """
    grads: dict[tuple[int, str], np.ndarray] = {}
    results = {}
    for i, j in BELL_PAIRS:
        x = x_origin + BELL_ALPHA_DEG[i] / 360.0 * lam_um
        phi = -BELL_BETA_DEG[j] / 2.0
        r, rp = _find_bell_region(regions, phi), _find_bell_region(regions, phi + 90.0)
        keys = [(r.index, "coinc13"), (rp.index, "coinc23"), (r.index, "coinc23"), (rp.index, "coinc13")]
        raw = np.array([fits[k](x) for k in keys])
        values = np.clip(raw, 0.0, None)
        e, grad = _correlation_gradient(values)
        grad = np.where(raw > 0, grad, 0.0)
        var_e = 0.0
        for k, g in zip(keys, grad):
            row = g * fits[k].design(x)
            var_e += float(row @ fits[k].covariance @ row)
            grads[k] = grads.get(k, np.zeros(3)) + CHSH_SIGNS[(i, j)] * row
        results[(i, j)] = CorrelationResult(float(e), math.sqrt(var_e), *map(float, values))
    var_s = sum(float(g @ fits[k].covariance @ g) for k, g in grads.items())
    return results, math.sqrt(var_s)


def _bell_raw_mode(regions, x_origin, lam_um):
    """Correlations from the single recorded points nearest each setting.

    Every step-II record with the right Pol2 angle is a candidate, whichever
    region it sits in; distance in x is taken modulo one fringe.
    """
    results = {}
    for i, j in BELL_PAIRS:
        x = x_origin + BELL_ALPHA_DEG[i] / 360.0 * lam_um
        phi = -BELL_BETA_DEG[j] / 2.0

        def nearest(pol2):
            cands = [rec for r in regions if r.step is ScenarioStep.II_POL1_OUT and _same_polarizer(r.phi_deg, pol2)
                     for rec in r.records]
            if not cands:
                raise CalibrationError(f"no step-II region with Pol2 at {pol2:g} deg (mod 180)")
            d = np.array([(rec.x_um - x) % lam_um for rec in cands])
            return cands[int(np.argmin(np.minimum(d, lam_um - d)))]

        a, b = nearest(phi), nearest(phi + 90.0)
        results[(i, j)] = correlation_coefficient(a.coinc13, b.coinc23, a.coinc23, b.coinc13)
    return results, None


def analyze_records(
    records: Sequence[CountsRecord],
    wavelength_nm: float = DEFAULT_WAVELENGTH_NM,
    mode: str = "fit",
    x_origin_um: float | None = None,
) -> tuple[AnalysisReport, ChshResult]:
    """Full reduction of a scan: fits, calibration, Bell correlations, diagnostics.

    Calibration uses the Det2 singles of the first Pol1-inserted region
    unless ``x_origin_um`` is supplied.
    """
    if mode not in ("fit", "raw"):
        raise ValueError(f"mode must be 'fit' or 'raw', got {mode!r}")
    if not records:
        raise ValueError("no records to analyze")
    lam_um = wavelength_nm * 1e-3
    regions = split_regions(records)

    fits: dict[tuple[int, str], SinusoidFit] = {}
    fit_rows = []
    for r in regions:
        for ch in CHANNELS:
            try:
                f = fit_fixed_wavelength(r.x, r.counts(ch), wavelength_nm)
            except FitError:
                continue
            fits[(r.index, ch)] = f
            fit_rows.append({"region": r.index, "step": r.step.value, "pol2_deg": r.phi_deg,
                             "pol1_deg": r.pol1_deg, "channel": ch, **f.to_dict()})

    calib = [r for r in regions if r.step.pol1_inserted]
    if x_origin_um is None:
        first_i = [r for r in calib if r.step is ScenarioStep.I_POL1_IN]
        source = (first_i or calib)
        if not source:
            raise CalibrationError("no Pol1-inserted (step I/III) region to calibrate the interferometer")
        r0 = source[0]
        if (r0.index, "singles2") not in fits:
            raise CalibrationError(f"region {r0.index} has too few points for a calibration fit")
        x_origin_um = calibrate_zero_phase(fits[(r0.index, "singles2")], det2_peak_phase(r0.pol1_deg))

    if mode == "fit":
        e_map, sigma_s = _bell_fit_mode(fits, regions, x_origin_um, lam_um)
    else:
        e_map, sigma_s = _bell_raw_mode(regions, x_origin_um, lam_um)
    chsh = chsh_s(e_map[(1, 1)], e_map[(1, 2)], e_map[(2, 1)], e_map[(2, 2)], sigma_s=sigma_s)

    e_values = [
        {"i": i, "j": j, "alpha_deg": BELL_ALPHA_DEG[i], "beta_deg": BELL_BETA_DEG[j],
         "x_um": x_origin_um + BELL_ALPHA_DEG[i] / 360.0 * lam_um, "pol2_deg": -BELL_BETA_DEG[j] / 2.0,
         **asdict(e_map[(i, j)])}
        for i, j in BELL_PAIRS
    ]

    step2 = [r for r in regions if r.step is ScenarioStep.II_POL1_OUT]
    visibilities = [
        {"region": r.index, "pol2_deg": r.phi_deg, "channel": ch, "visibility": fits[(r.index, ch)].visibility}
        for r in step2 for ch in ("coinc13", "coinc23") if (r.index, ch) in fits
    ]
    jumps = []
    for a, b in zip(step2, step2[1:]):
        fa, fb = fits.get((a.index, "coinc13")), fits.get((b.index, "coinc13"))
        if fa is not None and fb is not None:
            jumps.append({"from_pol2_deg": a.phi_deg, "to_pol2_deg": b.phi_deg,
                          "jump_deg": phase_jump(fa, fb), "sigma_deg": phase_jump_sigma(fa, fb)})

    drift = drift_sigma = None
    first = [r for r in calib if r.step is ScenarioStep.I_POL1_IN]
    last = [r for r in calib if r.step is ScenarioStep.III_POL1_REINSERTED]
    if first and last:
        fa, fb = fits.get((first[0].index, "singles2")), fits.get((last[-1].index, "singles2"))
        if fa is not None and fb is not None:
            drift, drift_sigma = drift_estimate(fa, fb), phase_jump_sigma(fa, fb)

    report = AnalysisReport(
        wavelength_nm=float(wavelength_nm),
        mode=mode,
        x_origin_um=float(x_origin_um),
        fits=fit_rows,
        e_values=e_values,
        s=chsh.S,
        sigma_s=chsh.sigma_S,
        violation_sigmas=chsh.violation_sigmas,
        visibilities=visibilities,
        phase_jumps=jumps,
        drift_deg=drift,
        drift_sigma_deg=drift_sigma,
    )
    return report, chsh
