"""Simulated photon counting: Poisson sampling, the three-step scan, CSV files."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .apparatus import (
    DEFAULT_WAVELENGTH_NM,
    NoiseModel,
    OutcomeProbabilities,
    ScenarioStep,
    Settings,
    noisy_probabilities,
)

CSV_HEADER = (
    "step", "point_index", "x_um", "pol2_deg", "pol1_deg", "duration_s",
    "singles1", "singles2", "singles3", "coinc13", "coinc23",
)


class CountsFormatError(ValueError):
    """Malformed counts file.  ``line`` is 1-based and counts the header."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class CountsRecord:
    step: ScenarioStep
    point_index: int
    x_um: float
    phi_deg: float
    pol1_deg: float | None
    duration_s: float
    singles1: int
    singles2: int
    singles3: int
    coinc13: int
    coinc23: int

    def __post_init__(self):
        object.__setattr__(self, "step", ScenarioStep(self.step))
        for name in ("singles1", "singles2", "singles3", "coinc13", "coinc23"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} is negative")
        if self.coinc13 > min(self.singles1, self.singles3):
            raise ValueError(f"coinc13={self.coinc13} exceeds singles1={self.singles1} or singles3={self.singles3}")
        if self.coinc23 > min(self.singles2, self.singles3):
            raise ValueError(f"coinc23={self.coinc23} exceeds singles2={self.singles2} or singles3={self.singles3}")
        if self.coinc13 + self.coinc23 > self.singles3:
            raise ValueError(f"coinc13+coinc23 exceeds singles3={self.singles3}")

    @property
    def settings(self) -> Settings:
        return Settings(self.x_um, self.phi_deg, self.pol1_deg)


@dataclass(frozen=True)
class Region:
    """A run of consecutive scan points sharing one Pol1/Pol2 configuration."""

    step: ScenarioStep
    phi_deg: float
    points: int
    pol1_deg: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "step", ScenarioStep(self.step))
        if self.points <= 0:
            raise ValueError(f"region point count must be positive, got {self.points}")
        if self.step.pol1_inserted != (self.pol1_deg is not None):
            raise ValueError(f"step {self.step.value} inconsistent with pol1_deg={self.pol1_deg}")


@dataclass(frozen=True)
class ScanPlan:
    pair_rate: float
    duration_per_point: float
    x_start: float
    x_step: float
    regions: tuple[Region, ...]
    seed: int = 0
    wavelength_nm: float = DEFAULT_WAVELENGTH_NM

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        if not self.regions:
            raise ValueError("scan plan has an empty region schedule")
        if not self.pair_rate > 0:
            raise ValueError(f"pair_rate must be positive, got {self.pair_rate}")
        if not self.duration_per_point > 0:
            raise ValueError(f"duration_per_point must be positive, got {self.duration_per_point}")
        if not self.x_step > 0:
            raise ValueError(f"x_step must be positive, got {self.x_step}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed}")

    @property
    def n_points(self) -> int:
        return sum(r.points for r in self.regions)

    def points(self):
        """Yield (point_index, region_index, Settings, elapsed_s) in scan order."""
        k = 0
        for ri, region in enumerate(self.regions):
            for _ in range(region.points):
                x = self.x_start + k * self.x_step
                yield k, ri, Settings(x, region.phi_deg, region.pol1_deg, self.wavelength_nm), k * self.duration_per_point
                k += 1

    def region_midtime(self, region_index: int) -> float:
        start = sum(r.points for r in self.regions[:region_index])
        mid = start + (self.regions[region_index].points - 1) / 2
        return mid * self.duration_per_point


BELL_PHI_SCHEDULE = (-22.5, 22.5, 67.5, 112.5)


def default_plan(
    seed: int = 0,
    pair_rate: float = 1000.0,
    duration_per_point: float = 1.0,
    points_per_region: int = 24,
    pol1_deg: float = -45.0,
    wavelength_nm: float = DEFAULT_WAVELENGTH_NM,
    x_start: float = 26.0,
) -> ScanPlan:
    """Three-step scan: Pol1 in, four Pol2 settings without Pol1, Pol1 back in.

    Each region covers one fringe period in ``points_per_region`` steps.
    """
    lam_um = wavelength_nm * 1e-3
    regions = [Region(ScenarioStep.I_POL1_IN, -22.5, points_per_region, pol1_deg)]
    regions += [Region(ScenarioStep.II_POL1_OUT, phi, points_per_region) for phi in BELL_PHI_SCHEDULE]
    regions.append(Region(ScenarioStep.III_POL1_REINSERTED, -22.5, points_per_region, pol1_deg))
    return ScanPlan(pair_rate, duration_per_point, x_start, lam_um / points_per_region, tuple(regions), seed, wavelength_nm)


def drift_rate_for_total(plan: ScanPlan, total_deg: float) -> float:
    """Drift rate (deg/s) that moves the phase by ``total_deg`` between the
    centres of the first step-I region and the last step-III region.

    Falls back to the full scan duration when either calibration step is
    missing from the schedule.
    """
    firsts = [i for i, r in enumerate(plan.regions) if r.step is ScenarioStep.I_POL1_IN]
    lasts = [i for i, r in enumerate(plan.regions) if r.step is ScenarioStep.III_POL1_REINSERTED]
    if firsts and lasts:
        span = plan.region_midtime(lasts[-1]) - plan.region_midtime(firsts[0])
    else:
        span = plan.n_points * plan.duration_per_point
    return total_deg / span if span > 0 else 0.0


def point_rng(seed: int, point_index: int) -> np.random.Generator:
    """Independent stream for one scan point, fixed by (seed, point_index)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(point_index)]))


def _joint_cells(p: OutcomeProbabilities) -> np.ndarray:
    """Mutually exclusive per-pair outcomes for correlated detections.

    Order: (1&3, 2&3, 1 only, 2 only, 3 only, nothing).  Accidentals are
    split off and sampled separately.
    """
    acc = p.p_accidental
    c13 = p.p_det1_det3 - acc
    c23 = p.p_det2_det3 - acc
    only1 = p.p_det1 - acc - c13
    only2 = p.p_det2 - acc - c23
    only3 = p.p_det3 - 2 * acc - c13 - c23
    cells = np.array([c13, c23, only1, only2, only3])
    if np.any(cells < -1e-9) or cells.sum() > 1 + 1e-9:
        raise ValueError("outcome probabilities are not consistent with one joint distribution per pair")
    cells = np.clip(cells, 0.0, None)
    total = min(cells.sum(), 1.0)
    return np.append(cells, 1.0 - total)


def sample_counts(
    p: OutcomeProbabilities,
    pair_rate: float,
    duration: float,
    rng: np.random.Generator,
    *,
    settings: Settings | None = None,
    step: ScenarioStep = ScenarioStep.II_POL1_OUT,
    point_index: int = 0,
) -> CountsRecord:
    """Draw one scan point's counts.

    The number of emitted pairs is Poisson(pair_rate * duration); each pair
    falls into one joint detection outcome (multinomial), so coincidences
    are a subset of the singles by construction and every counter is
    Poisson with mean probability * pair_rate * duration.  Detector
    efficiencies are already folded into ``p``, which is equivalent to
    thinning each detection independently.
    """
    if settings is None:
        settings = Settings(0.0, 0.0)
    n_pairs = rng.poisson(pair_rate * duration)
    c13, c23, only1, only2, only3, _ = rng.multinomial(n_pairs, _joint_cells(p))
    acc13, acc23 = rng.poisson(p.p_accidental * pair_rate * duration, size=2)
    c13 += acc13
    c23 += acc23
    return CountsRecord(
        step=step,
        point_index=point_index,
        x_um=settings.x_um,
        phi_deg=settings.phi_deg,
        pol1_deg=settings.pol1_deg,
        duration_s=duration,
        singles1=int(c13 + only1),
        singles2=int(c23 + only2),
        singles3=int(c13 + c23 + only3),
        coinc13=int(c13),
        coinc23=int(c23),
    )


def scan_probabilities(plan: ScanPlan, noise: NoiseModel) -> list[OutcomeProbabilities]:
    """Per-point probabilities of a plan; independent of the seed."""
    return [
        noisy_probabilities(settings, plan.regions[ri].step, noise, t)
        for _, ri, settings, t in plan.points()
    ]


def run_scan(
    plan: ScanPlan,
    noise: NoiseModel,
    probabilities: list[OutcomeProbabilities] | None = None,
) -> list[CountsRecord]:
    """Simulate every point of ``plan``.

    Pass ``probabilities`` from :func:`scan_probabilities` to reuse them
    across seeds.
    """
    if probabilities is None:
        probabilities = scan_probabilities(plan, noise)
    if len(probabilities) != plan.n_points:
        raise ValueError("probabilities do not match the plan length")
    records = []
    for (k, ri, settings, _), p in zip(plan.points(), probabilities):
        records.append(sample_counts(
            p, plan.pair_rate, plan.duration_per_point, point_rng(plan.seed, k),
            settings=settings, step=plan.regions[ri].step, point_index=k,
        ))
    return records


def _fmt_float(v: float) -> str:
    return repr(float(v))


def write_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow([
            r.step.value, r.point_index, _fmt_float(r.x_um), _fmt_float(r.phi_deg),
            "" if r.pol1_deg is None else _fmt_float(r.pol1_deg), _fmt_float(r.duration_s),
            r.singles1, r.singles2, r.singles3, r.coinc13, r.coinc23,
        ])
    return buf.getvalue()


def _parse_float(text: str, name: str, line: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise CountsFormatError(f"{name} is not a number: {text!r}", line) from None
    if not math.isfinite(v):
        raise CountsFormatError(f"{name} is not finite: {text!r}", line)
    return v


def _parse_int(text: str, name: str, line: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise CountsFormatError(f"{name} is not an integer: {text!r}", line) from None


def read_csv(text: str) -> list[CountsRecord]:
    if not text.strip():
        raise CountsFormatError("empty input")
    rows = csv.reader(io.StringIO(text))
    header = next(rows)
    if tuple(header) != CSV_HEADER:
        raise CountsFormatError(f"malformed header {header!r}", 1)
    records = []
    for line, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise CountsFormatError(f"expected {len(CSV_HEADER)} fields, got {len(row)}", line)
        f = dict(zip(CSV_HEADER, row))
        try:
            step = ScenarioStep(f["step"])
        except ValueError:
            raise CountsFormatError(f"unknown step {f['step']!r}", line) from None
        counts = {k: _parse_int(f[k], k, line) for k in CSV_HEADER[6:]}
        try:
            records.append(CountsRecord(
                step=step,
                point_index=_parse_int(f["point_index"], "point_index", line),
                x_um=_parse_float(f["x_um"], "x_um", line),
                phi_deg=_parse_float(f["pol2_deg"], "pol2_deg", line),
                pol1_deg=None if f["pol1_deg"] == "" else _parse_float(f["pol1_deg"], "pol1_deg", line),
                duration_s=_parse_float(f["duration_s"], "duration_s", line),
                **counts,
            ))
        except CountsFormatError:
            raise
        except ValueError as exc:
            raise CountsFormatError(f"count invariant violated: {exc}", line) from None
    return records
