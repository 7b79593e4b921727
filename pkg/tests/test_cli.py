import csv
import json
import math

import mpmath
import numpy as np
import pytest

from delaystab.cli import main


def run(tmp_path, command, config, *flags, name="cfg.json"):
    cfg_path = tmp_path / name
    cfg_path.write_text(json.dumps(config))
    out = tmp_path / f"out_{name}"
    code = main([command, "--config", str(cfg_path), "--out", str(out), *flags])
    return code, out


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(row for row in fh if not row.startswith("#")))


def test_scc_growth_feedback(tmp_path):
    code, out = run(
        tmp_path,
        "scc",
        {"preset": "growth-feedback", "beta": {"lo": -10, "hi": 10, "step": 0.05}, "window": [-4, 4, -4, 4]},
    )
    assert code == 0
    rows = read_csv(out / "branch_000.csv")
    row0 = min(rows, key=lambda r: abs(float(r["beta"])))
    assert float(row0["re_L"]) == pytest.approx(-1.0, abs=1e-9)
    assert float(row0["im_L"]) == pytest.approx(0.0, abs=1e-9)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "scc"
    assert "config_sha256" in manifest and "wall_time_s" in manifest


def test_scc_leaf_theta_prime_minimum(tmp_path):
    code, out = run(
        tmp_path,
        "scc",
        {
            "preset": "scalar-discrete",
            "params": {"a": 1.0, "d": 0.0, "tau": 0.5},
            "beta": {"lo": -8, "hi": 8, "step": 0.05},
            "window": [-3.5, 0.5, -2, 2],
        },
    )
    assert code == 0
    rows = read_csv(out / "branch_000.csv")
    tps = [(float(r["theta_prime"]), float(r["beta"])) for r in rows if r["theta_prime"] != "nan"]
    tp_min, beta_at = min(tps)
    assert tp_min == pytest.approx(0.5 - 1.0, abs=1e-9)  # tau - 1/a
    assert beta_at == pytest.approx(0.0, abs=1e-9)


def test_malformed_json_exit_2(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    out = tmp_path / "out"
    assert main(["scc", "--config", str(p), "--out", str(out)]) == 2


def test_unknown_field_exit_2(tmp_path):
    code, _ = run(tmp_path, "scc", {"beta": {"lo": 0, "hi": 1, "step": 0.1}, "bogus": 1})
    assert code == 2


def test_zero_horizon_exit_2(tmp_path):
    code, _ = run(
        tmp_path,
        "simulate",
        {
            "model": "scalar-discrete",
            "params": {"a": 1.0, "d": 0.0, "L": [-1.5, 0.0], "tau": 0.5},
            "sim": {"dt": 0.01, "horizon": 0},
        },
    )
    assert code == 2


def test_missing_preset_and_system_exit_2(tmp_path):
    code, _ = run(tmp_path, "scc", {"beta": {"lo": 0, "hi": 1, "step": 0.1}})
    assert code == 2


def test_numap_unstable_product_has_no_stable_cells(tmp_path):
    code, out = run(
        tmp_path,
        "numap",
        {
            "preset": "scalar-discrete",
            "params": {"a": 1.0, "d": 0.0, "tau": 1.5},
            "window": [-3, 3, -3, 3],
            "resolution": [21, 21],
        },
    )
    assert code == 0
    rows = read_csv(out / "numap.csv")
    assert all(int(r["nu"]) != 0 for r in rows)
    assert json.loads((out / "boundaries.json").read_text()) == []


def test_numap_full_oracle_flag_identical(tmp_path):
    cfg = {
        "preset": "growth-feedback",
        "window": [-4, 4, -4, 4],
        "resolution": [15, 15],
    }
    code, out_a = run(tmp_path, "numap", cfg, name="a.json")
    assert code == 0
    code, out_b = run(tmp_path, "numap", cfg, "--full-oracle", name="b.json")
    assert code == 0
    assert (out_a / "numap.csv").read_text() == (out_b / "numap.csv").read_text()


def test_critical_mas_values(tmp_path):
    code, out = run(tmp_path, "critical", {"which": "mas", "a": 1, "b": 1, "k1": 1, "k2": 1.1})
    assert code == 0
    doc = json.loads((out / "critical.json").read_text())
    assert doc["Tc1"] == pytest.approx(0.1, abs=1e-15)
    assert doc["Tc2"] == pytest.approx(1.1 / 2.1, abs=1e-12)


def test_critical_chain_infinite(tmp_path):
    code, out = run(tmp_path, "critical", {"which": "chain", "n": 1, "alpha": 0.7})
    assert code == 0
    assert json.loads((out / "critical.json").read_text())["Tc"] == "inf"


def test_critical_carfollowing_high_precision(tmp_path):
    code, out = run(tmp_path, "critical", {"which": "carfollowing", "n": 2, "N": 5, "alpha": 1.0})
    assert code == 0
    got = json.loads((out / "critical.json").read_text())["Tc"]
    mpmath.mp.dps = 40
    t = mpmath.tan(mpmath.pi / 10)
    oracle = 2 * t * (1 + t**2) / (2 * mpmath.sin(mpmath.pi / 5))
    assert got == pytest.approx(float(oracle), rel=1e-12)


def test_simulate_writes_rate_and_determinism(tmp_path):
    cfg = {
        "model": "scalar-discrete",
        "params": {"a": 1.0, "d": 0.0, "L": [-1.5, 0.0], "tau": 0.5},
        "sim": {"dt": 0.01, "horizon": 20.0, "history": {"kind": "constant", "value": [0.1, 0.0]}},
    }
    code, out_a = run(tmp_path, "simulate", cfg, name="s1.json")
    assert code == 0
    rate = json.loads((out_a / "rate.json").read_text())
    assert rate["verdict"] == "converging"
    code, out_b = run(tmp_path, "simulate", cfg, name="s2.json")
    assert (out_a / "trajectory.csv").read_text() == (out_b / "trajectory.csv").read_text()
    assert (out_a / "rate.json").read_text() == (out_b / "rate.json").read_text()


def test_simulate_kuramoto_deterministic(tmp_path):
    cfg = {
        "model": "kuramoto",
        "params": {"N": 40, "K": 4.0, "C": -4.0, "S": 1.0, "d": 0.0,
                   "delays": {"kind": "exponential", "value": 0.4}, "control_on": 2.0},
        "sim": {"dt": 0.01, "horizon": 5.0},
        "seed": 9,
    }
    code, out_a = run(tmp_path, "simulate", cfg, name="k1.json")
    assert code == 0
    code, out_b = run(tmp_path, "simulate", cfg, name="k2.json")
    assert (out_a / "order_parameter.csv").read_text() == (out_b / "order_parameter.csv").read_text()


def test_simulate_mas_network_config(tmp_path):
    cfg = {
        "model": "mas",
        "params": {"a": 1.0, "b": 1.0, "k1": 1.0, "k2": 1.1, "T": 0.05,
                   "network": {"kind": "random", "n": 20, "R": 2.0, "alpha": 0.05, "seed": 4}},
        "sim": {"dt": 0.01, "horizon": 100.0},
    }
    code, out = run(tmp_path, "simulate", cfg)
    assert code == 0
    assert json.loads((out / "stabilized.json").read_text())["stabilized"] is True
    spec_rows = read_csv(out / "spectrum.csv")
    assert len(spec_rows) == 20  # one eigenvalue per agent


def test_reproduce_fig12_small(tmp_path):
    code, out = run(
        tmp_path,
        "reproduce",
        {"figure": "fig12-heat", "grid": [6, 6], "horizon": 60.0, "n": 1, "N": 5},
    )
    assert code == 0
    rows = read_csv(out / "rates.csv")
    assert len(rows) == 36
    tc_rows = read_csv(out / "analytic_Tc.csv")
    assert len(tc_rows) == 6
    # sign structure: small T converges, large T diverges for mid alphas
    by_alpha = {}
    for r in rows:
        by_alpha.setdefault(float(r["alpha"]), []).append((float(r["T"]), float(r["value"])))
    alphas = sorted(by_alpha)
    hi_alpha = by_alpha[alphas[-1]]
    assert min(hi_alpha)[1] < 0  # smallest T converges
    assert max(hi_alpha)[1] > 0  # largest T diverges


def test_reproduce_fig16_small(tmp_path):
    code, out = run(tmp_path, "reproduce", {"figure": "fig16-series", "case": "a", "N": 60, "horizon": 14.0})
    assert code == 0
    snaps = read_csv(out / "phase_snapshots.csv")
    assert len(snaps) > 10 and len(snaps[0]) == 61  # t plus one column per oscillator
    rows = read_csv(out / "order_parameter.csv")
    pre = [float(r["abs_r"]) for r in rows if 8.0 <= float(r["t"]) <= 10.0]
    post = [float(r["abs_r"]) for r in rows if float(r["t"]) >= 12.0]
    assert np.mean(pre) > 0.5
    assert np.mean(post) < np.mean(pre)


def test_cli_rejects_unknown_figure(tmp_path):
    code, _ = run(tmp_path, "reproduce", {"figure": "fig99"})
    assert code == 2
