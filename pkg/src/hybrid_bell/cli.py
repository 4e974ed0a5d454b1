"""Command-line runs: simulate, analyze, bell, lhv.

Configuration comes from an optional JSON file; the HYBRID_BELL_SEED
environment variable replaces its seed, and command-line flags win over
both.  Angles are degrees, positions micrometres, wavelengths nanometres.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import lhv
from .analysis import AnalysisReport, ChshResult, analyze_records
from .apparatus import DEFAULT_WAVELENGTH_NM, NoiseModel, ScenarioStep
from .trials import BELL_PHI_SCHEDULE, Region, ScanPlan, drift_rate_for_total, read_csv, run_scan, write_csv

SEED_ENV = "HYBRID_BELL_SEED"


class ConfigError(ValueError):
    pass


def _default_schedule(points: int = 24, pol1: float = -45.0) -> list[dict]:
    sched = [{"step": ScenarioStep.I_POL1_IN.value, "pol1_deg": pol1, "pol2_deg": -22.5, "points": points}]
    sched += [{"step": ScenarioStep.II_POL1_OUT.value, "pol1_deg": None, "pol2_deg": phi, "points": points}
              for phi in BELL_PHI_SCHEDULE]
    sched.append({"step": ScenarioStep.III_POL1_REINSERTED.value, "pol1_deg": pol1, "pol2_deg": -22.5, "points": points})
    return sched


@dataclass
class RunConfig:
    wavelength_nm: float = DEFAULT_WAVELENGTH_NM
    pair_rate_hz: float = 1000.0
    duration_per_point_s: float = 1.0
    x_start_um: float = 26.0
    x_step_um: float | None = None
    region_schedule: list[dict] = field(default_factory=_default_schedule)
    visibility: float = 1.0
    accidental_fraction: float = 0.0
    drift_deg_total: float = 0.0
    phase_offset_deg: float = 0.0
    detector_efficiency: list[float] = field(default_factory=lambda: [1.0, 1.0, 1.0])
    seed: int = 0
    mode: str = "fit"
    lhv_model: str = "optimal"
    lhv_pairs: int = 100_000
    out_dir: str = "."

    def __post_init__(self):
        if self.x_step_um is None:
            points = self.region_schedule[0]["points"] if self.region_schedule else 24
            self.x_step_um = self.wavelength_nm * 1e-3 / points

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self):
        def need(ok, name, msg):
            if not ok:
                raise ConfigError(f"{name}: {msg}, got {getattr(self, name)!r}")

        need(self.wavelength_nm > 0, "wavelength_nm", "must be positive")
        need(self.pair_rate_hz > 0, "pair_rate_hz", "must be positive")
        need(self.duration_per_point_s > 0, "duration_per_point_s", "must be positive")
        need(self.x_step_um > 0, "x_step_um", "must be positive")
        need(0.0 <= self.visibility <= 1.0, "visibility", "must be in [0, 1]")
        need(self.accidental_fraction >= 0.0, "accidental_fraction", "must be >= 0")
        need(len(self.detector_efficiency) == 3 and all(0 < e <= 1 for e in self.detector_efficiency),
             "detector_efficiency", "needs three values in (0, 1]")
        need(isinstance(self.seed, int) and 0 <= self.seed < 2 ** 64, "seed", "must be a 64-bit unsigned integer")
        need(self.mode in ("fit", "raw"), "mode", "must be 'fit' or 'raw'")
        need(self.lhv_model in ("optimal", "uniform"), "lhv_model", "must be 'optimal' or 'uniform'")
        need(self.lhv_pairs > 0, "lhv_pairs", "must be positive")
        need(bool(self.region_schedule), "region_schedule", "must not be empty")
        for k, r in enumerate(self.region_schedule):
            try:
                Region(ScenarioStep(r["step"]), float(r["pol2_deg"]), int(r["points"]),
                       None if r.get("pol1_deg") is None else float(r["pol1_deg"]))
            except (KeyError, ValueError, TypeError) as exc:
                raise ConfigError(f"region_schedule[{k}]: {exc}") from None

    def plan(self) -> ScanPlan:
        regions = tuple(
            Region(ScenarioStep(r["step"]), float(r["pol2_deg"]), int(r["points"]),
                   None if r.get("pol1_deg") is None else float(r["pol1_deg"]))
            for r in self.region_schedule
        )
        return ScanPlan(self.pair_rate_hz, self.duration_per_point_s, self.x_start_um, self.x_step_um,
                        regions, self.seed, self.wavelength_nm)

    def noise(self) -> NoiseModel:
        return NoiseModel(
            visibility=self.visibility,
            accidental_fraction=self.accidental_fraction,
            drift_rate=drift_rate_for_total(self.plan(), self.drift_deg_total),
            detector_efficiency=tuple(self.detector_efficiency),
            phase_offset_deg=self.phase_offset_deg,
        )


def load_config(args: argparse.Namespace, environ=os.environ) -> RunConfig:
    data: dict = {}
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    if environ.get(SEED_ENV):
        try:
            data["seed"] = int(environ[SEED_ENV])
        except ValueError:
            raise ConfigError(f"seed: {SEED_ENV} is not an integer, got {environ[SEED_ENV]!r}") from None
    overrides = {
        "seed": getattr(args, "seed", None),
        "visibility": getattr(args, "visibility", None),
        "out_dir": getattr(args, "out", None),
        "mode": getattr(args, "mode", None),
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    pairs = getattr(args, "pairs", None)
    if pairs is not None:
        if args.command == "lhv" or getattr(args, "lhv", False):
            data["lhv_pairs"] = pairs
        else:
            data["pair_rate_hz"] = pairs / data.get("duration_per_point_s", 1.0)
    if getattr(args, "model", None):
        data["lhv_model"] = args.model
    try:
        return RunConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _out(cfg: RunConfig) -> Path:
    p = Path(cfg.out_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def summary_table(report: AnalysisReport) -> str:
    lines = [f"{'setting':<12}{'x (um)':>12}{'Pol2 (deg)':>12}{'E':>10}{'sigma':>9}"]
    for e in report.e_values:
        lines.append(f"E(a{e['i']},b{e['j']})".ljust(12)
                     + f"{e['x_um']:>12.4f}{e['pol2_deg']:>12.1f}{e['E']:>10.4f}{e['sigma']:>9.4f}")
    lines.append(f"S = {report.s:.4f} +/- {report.sigma_s:.4f}  "
                 f"({report.violation_sigmas:.1f} sigma above the local bound)")
    if report.drift_deg is not None:
        lines.append(f"drift = {report.drift_deg:.2f} +/- {report.drift_sigma_deg:.2f} deg")
    return "\n".join(lines)


def cmd_simulate(cfg: RunConfig) -> Path:
    records = run_scan(cfg.plan(), cfg.noise())
    out = _out(cfg)
    (out / "counts.csv").write_text(write_csv(records), encoding="utf-8")
    (out / "config.json").write_text(json.dumps(dataclasses.asdict(cfg), indent=2) + "\n", encoding="utf-8")
    return out / "counts.csv"


def cmd_analyze(csv_path: str | Path, cfg: RunConfig) -> AnalysisReport:
    records = read_csv(Path(csv_path).read_text(encoding="utf-8"))
    report, _ = analyze_records(records, cfg.wavelength_nm, cfg.mode)
    (_out(cfg) / "report.json").write_text(report.to_json(), encoding="utf-8")
    return report


def _lhv_report(chsh: ChshResult, cfg: RunConfig) -> AnalysisReport:
    lam = cfg.wavelength_nm * 1e-3
    e_values = []
    for (i, j), e in zip(((1, 1), (1, 2), (2, 1), (2, 2)), (chsh.E11, chsh.E12, chsh.E21, chsh.E22)):
        e_values.append({"i": i, "j": j, "alpha_deg": (0.0, 90.0)[i - 1], "beta_deg": (-45.0, 45.0)[j - 1],
                         "x_um": (0.0, lam / 4)[i - 1], "pol2_deg": (22.5, -22.5)[j - 1],
                         **dataclasses.asdict(e)})
    return AnalysisReport(cfg.wavelength_nm, "lhv", 0.0, [], e_values, chsh.S, chsh.sigma_S,
                          chsh.violation_sigmas, [], [], None)


def cmd_lhv(cfg: RunConfig) -> AnalysisReport:
    model = lhv.LhvModel.optimal() if cfg.lhv_model == "optimal" else lhv.LhvModel.uniform()
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x1A5]))
    cells = lhv.sample_lhv_counts(model, cfg.lhv_pairs, rng)
    records = lhv.cells_to_records(cells, cfg.wavelength_nm)
    out = _out(cfg)
    (out / "counts.csv").write_text(write_csv(records), encoding="utf-8")
    chsh = lhv.chsh_from_cells(lhv.records_to_cells(records, cfg.wavelength_nm))
    report = _lhv_report(chsh, cfg)
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    return report


def cmd_bell(cfg: RunConfig, use_lhv: bool = False) -> tuple[AnalysisReport, int]:
    if use_lhv:
        report = cmd_lhv(cfg)
    else:
        report = cmd_analyze(cmd_simulate(cfg), cfg)
    violated = abs(report.s) > 2 and report.violation_sigmas > 3
    return report, 0 if violated else 1


def enumerate_table() -> str:
    lines = [f"{'a1':>4}{'a2':>4}{'b1':>4}{'b2':>4}{'S':>5}"]
    for s in lhv.enumerate_strategies():
        lines.append(f"{s.a1:>4}{s.a2:>4}{s.b1:>4}{s.b2:>4}{lhv.strategy_chsh(s):>5}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--seed", type=int, help=f"RNG seed (overrides {SEED_ENV} and the config)")
    common.add_argument("--out", metavar="DIR", help="output directory for counts.csv / report.json")
    common.add_argument("--mode", choices=("fit", "raw"),
                        help="Bell-point extraction: fitted fringe values or nearest raw points")

    p = argparse.ArgumentParser(prog="hybrid-bell", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[common], help="simulate the three-step scan")
    sim.add_argument("--visibility", type=float, help="fringe visibility V in [0, 1]")
    sim.add_argument("--pairs", type=int, help="emitted pairs per scan point")

    ana = sub.add_parser("analyze", parents=[common], help="reduce a counts CSV to a report")
    ana.add_argument("csv", help="counts CSV written by simulate")

    bell = sub.add_parser("bell", parents=[common], help="simulate, analyze and test the CHSH bound")
    bell.add_argument("--visibility", type=float, help="fringe visibility V in [0, 1]")
    bell.add_argument("--pairs", type=int, help="pairs per scan point (per cell with --lhv)")
    bell.add_argument("--lhv", action="store_true", help="replace the quantum source by a local model")
    bell.add_argument("--model", choices=("optimal", "uniform"), help="local model used with --lhv")

    lh = sub.add_parser("lhv", parents=[common], help="local hidden-variable baseline")
    lh.add_argument("--pairs", type=int, help="pairs per setting cell")
    lh.add_argument("--model", choices=("optimal", "uniform"), help="mixture of deterministic strategies")
    lh.add_argument("--enumerate", action="store_true", help="print the 16 deterministic strategies")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        if args.command == "simulate":
            print(cmd_simulate(cfg))
            return 0
        if args.command == "analyze":
            report = cmd_analyze(args.csv, cfg)
            print(summary_table(report))
            return 0
        if args.command == "bell":
            report, code = cmd_bell(cfg, use_lhv=args.lhv)
            print(summary_table(report))
            print(json.dumps({"s": report.s, "sigma_s": report.sigma_s,
                              "violation_sigmas": report.violation_sigmas}))
            return code
        if args.command == "lhv":
            if args.enumerate:
                print(enumerate_table())
            report = cmd_lhv(cfg)
            print(summary_table(report))
            print(json.dumps({"s": report.s, "sigma_s": report.sigma_s,
                              "violation_sigmas": report.violation_sigmas}))
            return 0
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
