"""Scenario files, the seeded Monte Carlo runner, and report emission."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import training as tr
from .channel import (
    SystemConfig,
    UserLocation,
    achievable_rate,
    dbm_to_watts,
    make_channel,
    tx_power_for_snr,
)
from .codebooks import ConstraintError, check_interval, check_subarray, interval_upper_bound

SWEEP_VARIABLES = ("snr", "range", "rician", "subarray_m", "n_antennas", "none")
SCHEMES = ("perfect_csi", "ls", "exhaustive", "two_phase", "three_phase", "far_field")
# schemes whose final beam is a polar codeword, comparable with the exhaustive oracle
POLAR_SCHEMES = ("exhaustive", "two_phase", "three_phase")
CSV_COLUMNS = (
    "scheme",
    "sweep_variable",
    "sweep_value",
    "mean_rate_bpshz",
    "mean_eff_rate_bpshz",
    "mean_pilots",
    "accuracy_vs_oracle",
    "ci95",
)


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Timing:
    t_total: float = 0.2e-3
    t_symbol: float = 0.1e-6

    def efficiency(self, pilots: int) -> float:
        return 1.0 - pilots * self.t_symbol / self.t_total


@dataclass(frozen=True)
class SchemeSpec:
    name: str
    k: int = 1

    @property
    def id(self) -> str:
        if self.name in ("two_phase", "three_phase"):
            return f"{self.name}_k{self.k}"
        return self.name


@dataclass(frozen=True)
class UserSpec:
    """User placement: ``range_m`` is a number or a [lo, hi] band; ``angle`` is
    ``"uniform"``, ``"grid"`` (random on-grid angle) or a fixed number."""

    range_m: tuple = (20.0, 20.0)
    angle: object = "uniform"
    angle_limit: float = 0.9


@dataclass
class Scenario:
    config: SystemConfig
    training: tr.ThreePhaseParams
    schemes: list
    user: UserSpec = field(default_factory=UserSpec)
    sweep_variable: str = "none"
    sweep_values: list = field(default_factory=lambda: [0.0])
    n_trials: int = 1000
    master_seed: int = 0
    timing: Timing = field(default_factory=Timing)
    name: str = ""
    auto_interval: bool = False
    auto_subarray: bool = False

    def echo(self) -> dict:
        return {
            "name": self.name,
            "config": dataclasses.asdict(self.config),
            "training": dataclasses.asdict(self.training),
            "schemes": [dataclasses.asdict(s) for s in self.schemes],
            "user": {"range_m": list(self.user.range_m), "angle": self.user.angle,
                     "angle_limit": self.user.angle_limit},
            "sweep_variable": self.sweep_variable,
            "sweep_values": list(self.sweep_values),
            "n_trials": self.n_trials,
            "master_seed": self.master_seed,
            "timing": dataclasses.asdict(self.timing),
            "auto_interval": self.auto_interval,
            "auto_subarray": self.auto_subarray,
        }


# --- scenario parsing ---------------------------------------------------------


def _require(d: dict, key: str, where: str):
    if not isinstance(d, dict) or key not in d:
        raise ScenarioError(f"missing required field '{where}{key}'")
    return d[key]


def shipped_scenarios() -> list:
    pkg = resources.files("sparsedft") / "scenarios"
    return sorted(p.name[: -len(".scenario")] for p in pkg.iterdir() if p.name.endswith(".scenario"))


def resolve_scenario_path(path) -> Path:
    p = Path(path)
    if p.exists():
        return p
    name = p.name[: -len(".scenario")] if p.name.endswith(".scenario") else p.name
    shipped = resources.files("sparsedft") / "scenarios" / f"{name}.scenario"
    if shipped.is_file():
        return Path(str(shipped))
    raise FileNotFoundError(f"scenario file not found: {path}")


def _parse_schemes(raw) -> list:
    if not isinstance(raw, list) or not raw:
        raise ScenarioError("field 'schemes' must be a non-empty list")
    out = []
    for item in raw:
        if isinstance(item, str):
            name, opts = item, {}
        elif isinstance(item, dict) and len(item) == 1:
            name, opts = next(iter(item.items()))
            opts = opts or {}
        else:
            raise ScenarioError(f"cannot parse scheme entry {item!r}")
        if name not in SCHEMES:
            raise ScenarioError(f"unknown scheme {name!r}; expected one of {', '.join(SCHEMES)}")
        out.append(SchemeSpec(name, int(opts.get("k", 1))))
    return out


def _parse_user(raw) -> UserSpec:
    raw = raw or {}
    r = raw.get("range_m", 20.0)
    rng_band = (float(r[0]), float(r[1])) if isinstance(r, (list, tuple)) else (float(r), float(r))
    angle = raw.get("angle", "uniform")
    if not (angle in ("uniform", "grid") or isinstance(angle, (int, float))):
        raise ScenarioError(f"field 'user.angle' must be uniform, grid or a number, got {angle!r}")
    return UserSpec(rng_band, angle if isinstance(angle, str) else float(angle),
                    float(raw.get("angle_limit", 0.9)))


def scenario_from_dict(d: dict, name: str = "") -> Scenario:
    sysd = _require(d, "system", "")
    config = SystemConfig(
        n_antennas=int(_require(sysd, "n_antennas", "system.")),
        carrier_freq=float(_require(sysd, "carrier_freq_ghz", "system.")) * 1e9,
        tx_power=dbm_to_watts(float(_require(sysd, "tx_power_dbm", "system."))),
        noise_power=dbm_to_watts(float(_require(sysd, "noise_power_dbm", "system."))),
        ref_gain_db=float(_require(sysd, "ref_gain_db", "system.")),
        rician_factor_db=float(_require(sysd, "rician_factor_db", "system.")),
        n_nlos_paths=int(_require(sysd, "n_nlos_paths", "system.")),
        nlos_normalization=sysd.get("nlos_normalization", "aggregate"),
    )
    trd = _require(d, "training", "")
    interval = _require(trd, "interval", "training.")
    m = _require(trd, "m_antennas", "training.")
    auto_u, auto_m = interval == "auto", m == "auto"
    if auto_u:
        interval = tr.optimal_interval(config.n_antennas, int(trd.get("n_ranges", 5)))
    if auto_m:
        m = int(math.floor(interval_upper_bound(config.n_antennas)))
    params = tr.ThreePhaseParams(
        interval=int(interval),
        m_antennas=int(m),
        n_ranges=int(_require(trd, "n_ranges", "training.")),
        beta_delta=float(trd.get("beta_delta", 1.2)),
        mu_db=float(trd.get("mu_db", 3.0)),
        enforce_subarray_bounds=bool(trd.get("enforce_subarray_bounds", True)),
    )
    sweep = d.get("sweep") or {"variable": "none"}
    var = sweep.get("variable", "none")
    if var not in SWEEP_VARIABLES:
        raise ScenarioError(f"unknown sweep variable {var!r}")
    values = [float(v) for v in sweep.get("values", [])] if var != "none" else [0.0]
    if not values:
        raise ScenarioError("field 'sweep.values' must be non-empty when sweeping")
    timing_d = d.get("timing") or {}
    sc = Scenario(
        config=config,
        training=params,
        schemes=_parse_schemes(_require(d, "schemes", "")),
        user=_parse_user(d.get("user")),
        sweep_variable=var,
        sweep_values=values,
        n_trials=int(_require(d, "trials", "")),
        master_seed=int(_require(d, "seed", "")),
        timing=Timing(float(timing_d.get("t_total_s", 0.2e-3)), float(timing_d.get("t_symbol_s", 0.1e-6))),
        name=str(d.get("name", name)),
        auto_interval=auto_u,
        auto_subarray=auto_m,
    )
    validate_scenario(sc)
    return sc


def validate_scenario(sc: Scenario) -> None:
    """Run every codebook constraint eagerly, for each sweep point."""
    if sc.n_trials < 1:
        raise ScenarioError("trials must be >= 1")
    for value in sc.sweep_values:
        cfg, params = point_setup(sc, value)
        check_interval(cfg.n_antennas, params.interval)
        if params.enforce_subarray_bounds:
            check_subarray(cfg.n_antennas, params.interval, params.m_antennas)
        if params.m_antennas > cfg.n_antennas:
            raise ConstraintError(f"M={params.m_antennas} exceeds N={cfg.n_antennas}")


def load_scenario(path) -> Scenario:
    p = resolve_scenario_path(path)
    text = p.read_text()
    try:
        d = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ScenarioError(f"cannot parse {p}{where}: {getattr(exc, 'problem', exc)}") from exc
    if not isinstance(d, dict):
        raise ScenarioError(f"{p}: top level must be a mapping")
    return scenario_from_dict(d, name=p.stem)


# --- running ------------------------------------------------------------------


def point_setup(sc: Scenario, value: float) -> tuple:
    """Config and training parameters at one sweep value (SNR handled per trial)."""
    cfg, params = sc.config, sc.training
    var = sc.sweep_variable
    if var == "rician":
        cfg = dataclasses.replace(cfg, rician_factor_db=value)
    elif var == "subarray_m":
        params = dataclasses.replace(params, m_antennas=int(value))
    elif var == "n_antennas":
        cfg = dataclasses.replace(cfg, n_antennas=int(value))
        if sc.auto_interval:
            params = dataclasses.replace(params, interval=tr.optimal_interval(cfg.n_antennas, params.n_ranges))
        if sc.auto_subarray:
            params = dataclasses.replace(params, m_antennas=int(math.floor(interval_upper_bound(cfg.n_antennas))))
    return cfg, params


def _stable_key(*parts) -> list:
    return [zlib.crc32(repr(p).encode()) for p in parts]


def channel_seed(master_seed: int, trial: int):
    """User and channel stream: shared by every scheme and every sweep point of a trial,
    so differences between schemes or sweep points are paired."""
    return np.random.SeedSequence([master_seed, trial])


def noise_seed(master_seed: int, value: float, trial: int, scheme_id: str):
    return np.random.SeedSequence([master_seed, *_stable_key(float(value)), trial, *_stable_key(scheme_id)])


def _draw_user(spec: UserSpec, grid_points: int, rng: np.random.Generator) -> UserLocation:
    lo, hi = spec.range_m
    r = lo if lo == hi else float(rng.uniform(lo, hi))
    if spec.angle == "uniform":
        th = float(rng.uniform(-spec.angle_limit, spec.angle_limit))
    elif spec.angle == "grid":
        s_lo = math.ceil((grid_points * (1 - spec.angle_limit) + 1) / 2)
        s_hi = grid_points + 1 - s_lo
        s = int(rng.integers(s_lo, s_hi + 1))
        th = (2.0 * s - grid_points - 1) / grid_points
    else:
        th = float(spec.angle)
    return UserLocation(r, th)


def expected_pilots(spec: SchemeSpec, cfg: SystemConfig, params: tr.ThreePhaseParams) -> int:
    N, U, V = cfg.n_antennas, params.interval, params.n_ranges
    return {
        "perfect_csi": lambda: 0,
        "ls": lambda: tr.overhead_ls(N),
        "exhaustive": lambda: tr.overhead_exhaustive(N, U, V),
        "two_phase": lambda: tr.overhead_two_phase(N, U, V, spec.k),
        "three_phase": lambda: tr.overhead_three_phase(N, U, V, spec.k),
        "far_field": lambda: tr.overhead_far_field(N, U),
    }[spec.name]()


def run_scheme(spec: SchemeSpec, cfg, params, books, ch, rng) -> tr.TrainingOutcome:
    if spec.name == "perfect_csi":
        return tr.perfect_csi(cfg, ch)
    if spec.name == "ls":
        return tr.ls_estimate(cfg, ch, rng)
    if spec.name == "exhaustive":
        return tr.exhaustive_train(cfg, ch, books.polar, rng)
    if spec.name == "two_phase":
        return tr.two_phase_train(cfg, ch, books.dft, books.polar, spec.k, rng, params.mu_db)
    if spec.name == "three_phase":
        return tr.three_phase_train(cfg, ch, dataclasses.replace(params, k_middle=spec.k), rng, books)
    if spec.name == "far_field":
        return tr.far_field_train(cfg, ch, books.dft, rng)
    raise ValueError(spec.name)


@dataclass(frozen=True)
class TrialRecord:
    scheme: str
    sweep_value: float
    trial: int
    rate: float
    eff_rate: float
    pilots: int
    match: bool | None


def run_trial(sc: Scenario, value: float, trial: int) -> list:
    cfg, params = point_setup(sc, value)
    books = tr.build_books(cfg, params)
    ch_rng = np.random.default_rng(channel_seed(sc.master_seed, trial))
    loc = _draw_user(sc.user, books.sparse.grid.n_points, ch_rng)
    if sc.sweep_variable == "snr":
        cfg = dataclasses.replace(cfg, tx_power=tx_power_for_snr(cfg, loc.range_m, value))
    elif sc.sweep_variable == "range":
        loc = UserLocation(value, loc.spatial_angle)
    ch = make_channel(cfg, loc, ch_rng)

    oracle = None
    records = []
    for spec in sc.schemes:
        rng = np.random.default_rng(noise_seed(sc.master_seed, value, trial, spec.id))
        try:
            out = run_scheme(spec, cfg, params, books, ch, rng)
        except Exception as exc:
            raise RuntimeError(f"scheme {spec.id} failed at {sc.sweep_variable}={value}, trial {trial}") from exc
        want = expected_pilots(spec, cfg, params)
        if out.pilots_used != want:
            raise RuntimeError(f"{spec.id}: measured {out.pilots_used} pilots, overhead formula gives {want}")
        match = None
        if spec.name in POLAR_SCHEMES:
            if oracle is None:
                oracle = tr.exhaustive_train(cfg, ch, books.polar, None).chosen.key
            match = out.chosen.key == oracle
        rate = achievable_rate(ch, out.chosen.weights, cfg)
        records.append(TrialRecord(spec.id, value, trial, rate,
                                   sc.timing.efficiency(out.pilots_used) * rate, out.pilots_used, match))
    return records


def _run_chunk(args) -> list:
    sc, items = args
    out = []
    for value, trial in items:
        out.extend(run_trial(sc, value, trial))
    return out


@dataclass
class ReportRow:
    scheme: str
    sweep_variable: str
    sweep_value: float
    mean_rate_bpshz: float
    mean_eff_rate_bpshz: float
    mean_pilots: float
    accuracy_vs_oracle: float | None
    ci95: float
    n_trials: int


@dataclass
class ExperimentReport:
    scenario: dict
    rows: list
    records: list = field(default_factory=list, compare=False, repr=False)

    def row(self, scheme: str, value: float) -> ReportRow:
        for r in self.rows:
            if r.scheme == scheme and r.sweep_value == value:
                return r
        raise KeyError((scheme, value))

    def series(self, scheme: str, attr: str = "mean_rate_bpshz") -> list:
        return [getattr(r, attr) for r in self.rows if r.scheme == scheme]


def aggregate(sc: Scenario, records: list) -> list:
    rows = []
    for spec in sc.schemes:
        for value in sc.sweep_values:
            rs = sorted((r for r in records if r.scheme == spec.id and r.sweep_value == value),
                        key=lambda r: r.trial)
            n = len(rs)
            rates = [r.rate for r in rs]
            mean = math.fsum(rates) / n
            ci = 0.0
            if n > 1:
                var = math.fsum((x - mean) ** 2 for x in rates) / (n - 1)
                ci = 1.96 * math.sqrt(var / n)
            matches = [r.match for r in rs if r.match is not None]
            rows.append(ReportRow(
                scheme=spec.id,
                sweep_variable=sc.sweep_variable,
                sweep_value=value,
                mean_rate_bpshz=mean,
                mean_eff_rate_bpshz=math.fsum(r.eff_rate for r in rs) / n,
                mean_pilots=math.fsum(r.pilots for r in rs) / n,
                accuracy_vs_oracle=(sum(matches) / len(matches)) if matches else None,
                ci95=ci,
                n_trials=n,
            ))
    return rows


def run(sc: Scenario, threads: int = 1) -> ExperimentReport:
    """Run every (sweep value, trial) work item and aggregate per scheme.

    Results do not depend on ``threads`` or on execution order: randomness comes
    only from per-trial seeds and aggregation sorts by trial index.
    """
    items = [(v, t) for v in sc.sweep_values for t in range(sc.n_trials)]
    if threads <= 1:
        records = _run_chunk((sc, items))
    else:
        chunks = [items[i::threads] for i in range(threads)]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = [r for part in pool.map(_run_chunk, [(sc, c) for c in chunks]) for r in part]
    return ExperimentReport(sc.echo(), aggregate(sc, records), records)


# --- emission -----------------------------------------------------------------


def _row_values(r: ReportRow) -> list:
    acc = "" if r.accuracy_vs_oracle is None else repr(r.accuracy_vs_oracle)
    return [r.scheme, r.sweep_variable, repr(r.sweep_value), repr(r.mean_rate_bpshz),
            repr(r.mean_eff_rate_bpshz), repr(r.mean_pilots), acc, repr(r.ci95)]


def report_to_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in report.rows:
        w.writerow(_row_values(r))
    return buf.getvalue()


def report_to_json(report: ExperimentReport) -> str:
    return json.dumps(
        {"scenario": report.scenario, "rows": [dataclasses.asdict(r) for r in report.rows]},
        indent=1, sort_keys=True,
    )


def emit(report: ExperimentReport, fmt: str, path) -> None:
    if fmt == "csv":
        text = report_to_csv(report)
    elif fmt == "json":
        text = report_to_json(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc.strerror}") from exc


def load_report(path) -> ExperimentReport:
    d = json.loads(Path(path).read_text())
    return ExperimentReport(d["scenario"], [ReportRow(**r) for r in d["rows"]])
