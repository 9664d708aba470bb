import dataclasses
import math
import random

import pytest
import yaml

from sparsedft import harness as hs
from sparsedft import training as tr
from sparsedft.channel import dbm_to_watts
from sparsedft.codebooks import ConstraintError

SMALL = """
name: small
system:
  n_antennas: 257
  carrier_freq_ghz: 30
  tx_power_dbm: 30
  noise_power_dbm: -80
  ref_gain_db: -62
  rician_factor_db: 30
  n_nlos_paths: 2
training:
  interval: 16
  m_antennas: 17
  n_ranges: 5
trials: 3
seed: 7
user:
  range_m: [5, 60]
  angle: grid
  angle_limit: 0.866
schemes:
  - perfect_csi
  - ls
  - exhaustive
  - two_phase: {k: 3}
  - three_phase: {k: 1}
  - three_phase: {k: 3}
  - far_field
sweep:
  variable: snr
  values: [15, 30]
"""


def write(tmp_path, text, name="s.scenario"):
    p = tmp_path / name
    p.write_text(text)
    return p


@pytest.fixture
def small(tmp_path):
    return hs.load_scenario(write(tmp_path, SMALL))


@pytest.fixture
def small_report(small):
    return hs.run(small)


def test_fig7_scenario_parameters():
    sc = hs.load_scenario("fig7")
    c = sc.config
    assert c.n_antennas == 257 and c.carrier_freq == 30e9
    assert sc.training.interval == 16 and sc.training.m_antennas == 17
    assert c.tx_power == pytest.approx(1.0) and c.noise_power == pytest.approx(1e-11)
    assert c.n_nlos_paths == 2 and c.rician_factor_db == 30
    assert sc.timing == hs.Timing(2e-4, 1e-7)


@pytest.mark.parametrize("name", hs.shipped_scenarios())
def test_shipped_scenarios_load(name):
    sc = hs.load_scenario(name)
    assert sc.n_trials >= 1 and sc.sweep_values
    assert sc.name == name


def test_shipped_scenario_list():
    assert {"fig5", "fig6", "fig7", "fig8", "fig9", "fig10", "rician"} <= set(hs.shipped_scenarios())


def test_auto_interval_and_subarray():
    sc = hs.load_scenario("fig10")
    got = {v: hs.point_setup(sc, v)[1] for v in sc.sweep_values}
    assert got[1025.0].interval == 32 and got[1025.0].m_antennas == 35
    assert got[257.0].interval == 16 and got[257.0].m_antennas == 17


def test_missing_field(tmp_path):
    d = yaml.safe_load(SMALL)
    del d["system"]["n_antennas"]
    with pytest.raises(hs.ScenarioError, match="system.n_antennas"):
        hs.load_scenario(write(tmp_path, yaml.safe_dump(d)))
    d = yaml.safe_load(SMALL)
    del d["seed"]
    with pytest.raises(hs.ScenarioError, match="'seed'"):
        hs.scenario_from_dict(d)


def test_divisibility_error(tmp_path):
    bad = SMALL.replace("interval: 16", "interval: 15")
    with pytest.raises(ConstraintError, match="integer"):
        hs.load_scenario(write(tmp_path, bad))


def test_subarray_bound_error(tmp_path):
    bad = SMALL.replace("m_antennas: 17", "m_antennas: 24")
    with pytest.raises(ConstraintError, match="sqrt"):
        hs.load_scenario(write(tmp_path, bad))


def test_parse_error_reports_line(tmp_path):
    text = "name: x\nsystem:\n  n_antennas: 257\n  carrier_freq_ghz: 30: 1\n"
    with pytest.raises(hs.ScenarioError, match="line 4, column"):
        hs.load_scenario(write(tmp_path, text))


@pytest.mark.parametrize("edit, msg", [
    (lambda d: d["schemes"].append("hierarchical"), "unknown scheme"),
    (lambda d: d["sweep"].update(variable="bandwidth"), "unknown sweep"),
    (lambda d: d["sweep"].update(values=[]), "non-empty"),
    (lambda d: d.update(trials=0), "trials"),
    (lambda d: d["user"].update(angle="random"), "user.angle"),
])
def test_scenario_validation(edit, msg):
    d = yaml.safe_load(SMALL)
    edit(d)
    with pytest.raises(hs.ScenarioError, match=msg):
        hs.scenario_from_dict(d)


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        hs.load_scenario("/nonexistent/thing.scenario")


def test_report_shape_and_invariants(small, small_report):
    rows = small_report.rows
    assert len(rows) == len(small.schemes) * len(small.sweep_values)
    for r in rows:
        assert r.n_trials == small.n_trials
        assert r.mean_eff_rate_bpshz <= r.mean_rate_bpshz + 1e-12
    for rec in small_report.records:
        eff = (1 - rec.pilots * small.timing.t_symbol / small.timing.t_total) * rec.rate
        assert rec.eff_rate == pytest.approx(eff, rel=1e-12, abs=1e-15)
    cfg, params = hs.point_setup(small, 30.0)
    for spec in small.schemes:
        assert small_report.row(spec.id, 30.0).mean_pilots == hs.expected_pilots(spec, cfg, params)
    assert small_report.row("three_phase_k3", 30.0).mean_pilots == 48
    assert small_report.row("exhaustive", 30.0).accuracy_vs_oracle is not None
    assert small_report.row("far_field", 30.0).accuracy_vs_oracle is None


def test_perfect_csi_is_upper_bound(small, small_report):
    for v in small.sweep_values:
        best = small_report.row("perfect_csi", v).mean_rate_bpshz
        for spec in small.schemes:
            assert small_report.row(spec.id, v).mean_rate_bpshz <= best + 1e-12


def test_effective_rate_overhead_arithmetic():
    t = hs.Timing()
    assert t.efficiency(48) > t.efficiency(1360)
    assert t.efficiency(1360) == pytest.approx(1 - 1360 * 1e-7 / 2e-4)


def test_determinism_byte_identical(small):
    sc = dataclasses.replace(small, n_trials=1)
    assert hs.report_to_csv(hs.run(sc)) == hs.report_to_csv(hs.run(sc))
    assert hs.report_to_json(hs.run(sc)) == hs.report_to_json(hs.run(sc))


def test_thread_count_invariance(small, small_report):
    assert hs.report_to_csv(hs.run(small, threads=2)) == hs.report_to_csv(small_report)


def test_order_independent_aggregation(small, small_report):
    recs = list(small_report.records)
    random.Random(3).shuffle(recs)
    assert hs.aggregate(small, recs) == small_report.rows


def test_seed_streams():
    a = hs.channel_seed(7, 2).generate_state(4).tolist()
    assert a == hs.channel_seed(7, 2).generate_state(4).tolist()
    assert a != hs.channel_seed(7, 3).generate_state(4).tolist()
    assert a != hs.channel_seed(8, 2).generate_state(4).tolist()
    n = lambda *k: hs.noise_seed(*k).generate_state(4).tolist()
    assert n(7, 30.0, 2, "ls") != n(7, 30.0, 2, "far_field")
    assert n(7, 30.0, 2, "ls") != n(7, 15.0, 2, "ls")
    assert n(7, 30.0, 2, "ls") == n(7, 30.0, 2, "ls")


def test_users_paired_across_sweep_points(small, small_report):
    # same user and channel at every SNR: perfect-CSI rates differ by the SNR step only
    lo = [r.rate for r in small_report.records if r.scheme == "perfect_csi" and r.sweep_value == 15.0]
    hi = [r.rate for r in small_report.records if r.scheme == "perfect_csi" and r.sweep_value == 30.0]
    assert all(b > a for a, b in zip(lo, hi))


def test_snr_sweep_sets_power(small):
    cfg, _ = hs.point_setup(small, 30.0)
    assert cfg.tx_power == pytest.approx(dbm_to_watts(30))  # set per trial, not per point


def test_trial_error_identifies_trial(small, monkeypatch):
    def boom(*a, **k):
        raise ArithmeticError("bad")
    monkeypatch.setattr(tr, "far_field_train", boom)
    with pytest.raises(RuntimeError, match="far_field.*trial 0"):
        hs.run_trial(small, 15.0, 0)


def test_emit_csv_json_roundtrip(tmp_path, small_report):
    hs.emit(small_report, "json", tmp_path / "r.json")
    back = hs.load_report(tmp_path / "r.json")
    assert back == small_report
    hs.emit(small_report, "csv", tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == ",".join(hs.CSV_COLUMNS)
    assert len(lines) == 1 + len(small_report.rows)
    with pytest.raises(ValueError):
        hs.emit(small_report, "xml", tmp_path / "r.xml")


def test_empty_report_header_only(tmp_path):
    hs.emit(hs.ExperimentReport({}, []), "csv", tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text() == ",".join(hs.CSV_COLUMNS) + "\n"


def test_emit_io_error_names_path(tmp_path, small_report):
    target = tmp_path / "missing_dir" / "r.csv"
    with pytest.raises(OSError, match="missing_dir"):
        hs.emit(small_report, "csv", target)


def test_ci_half_width(small, small_report):
    r = small_report.row("perfect_csi", 15.0)
    rates = sorted((x.rate for x in small_report.records
                    if x.scheme == "perfect_csi" and x.sweep_value == 15.0))
    m = sum(rates) / len(rates)
    s = math.sqrt(sum((x - m) ** 2 for x in rates) / (len(rates) - 1))
    assert r.ci95 == pytest.approx(1.96 * s / math.sqrt(len(rates)))
