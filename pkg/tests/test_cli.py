import csv
import io
import json
import math

import pytest

from poissonloc.analytic import expected_neighbors_bounded, single_node_localization_probability
from poissonloc.channel import ChannelModel
from poissonloc.cli import (
    EXIT_DEGENERATE,
    EXIT_OK,
    EXIT_SOLVER,
    EXIT_USAGE,
    PRESETS,
    Sweep,
    SweepSpec,
    UsageError,
    cmd_simulate,
    main,
    parse_series,
)
from poissonloc.roots import BracketError


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def _csv_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_sweep_parsing():
    s = Sweep.parse("rho-l:0.01:1:3:log")
    assert s.variable == "rho_l"
    assert list(s.values()) == pytest.approx([0.01, 0.1, 1.0])
    assert list(Sweep.parse("radius:1:3:3").values()) == [1.0, 2.0, 3.0]
    for bad in ("rho_l:1:0:3", "rho_l:0:1:1", "foo:0:1:3", "rho_l:0:1", "rho_l:0:1:3:log",
                "rho_l:a:1:3", "rho_l:0:1:3:cubic"):
        with pytest.raises(UsageError):
            Sweep.parse(bad)


def test_series_parsing_and_crossing():
    assert parse_series("sigma-s:0,4,9") == ("sigma_s", [0.0, 4.0, 9.0])
    with pytest.raises(UsageError):
        parse_series("sigma_s:")
    spec = SweepSpec({"beta_th": 20.0, "d_max": None}, Sweep.parse("d_max:2:3:2"),
                     [("n_p", [2.0, 4.0])])
    points = list(spec.points())
    assert len(points) == 4
    assert all(p["beta_th"] is None for p in points)


def test_analytic_csv_values(capsys):
    code, out, _ = _run(capsys, "analytic", "--quantity", "lambda_bounded", "--sigma-s", "4",
                        "--n-p", "2", "--beta-th", "40", "--rho-l", "0.1", "--radius", "300")
    assert code == EXIT_OK
    assert out.startswith("sigma_s,n_p,beta_th,d_max,rho_l,rho_nl,radius,n_nl,lambda_bounded\r\n")
    (row,) = _csv_rows(out)
    assert float(row["lambda_bounded"]) == pytest.approx(4698.947202149602, rel=1e-12)


def test_csv_and_json_carry_identical_values(capsys):
    argv = ["analytic", "--quantity", "p_el", "--series", "sigma_s:0,9",
            "--sweep", "rho_l:1e-3:1:7:log"]
    _, csv_text, _ = _run(capsys, *argv)
    _, json_text, _ = _run(capsys, *argv, "--format", "json")
    doc = json.loads(json_text)
    rows = _csv_rows(csv_text)
    assert doc["columns"] == list(rows[0].keys())
    assert len(doc["records"]) == len(rows) == 14
    for rec, row in zip(doc["records"], rows):
        for key, value in rec.items():
            assert float(row[key]) == value  # '.17g' round-trips exactly
    assert doc["metadata"]["command"] == "analytic"


def test_sweeping_d_max_overrides_budget(capsys):
    code, out, _ = _run(capsys, "analytic", "--quantity", "lambda_unbounded", "--beta-th", "30",
                        "--sweep", "d_max:2:4:3")
    assert code == EXIT_OK
    assert [float(r["d_max"]) for r in _csv_rows(out)] == pytest.approx([2.0, 3.0, 4.0], rel=1e-14)


def test_output_file_and_sidecar(tmp_path, capsys):
    out = tmp_path / "p.csv"
    code, stdout, _ = _run(capsys, "analytic", "--out", str(out), "--radius", "50")
    assert code == EXIT_OK and stdout == ""
    assert out.read_bytes().count(b"\r\n") == 2
    meta = json.loads((tmp_path / "p.csv.meta.json").read_text())
    assert meta["options"]["radius"] == 50.0 and meta["tool"] == "poissonloc"


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# scenario\nsigma-s = 9\nn_p = 4\nd_max = 5\nrho_l = 0.2\n")
    _, out, _ = _run(capsys, "analytic", "--config", str(cfg))
    (row,) = _csv_rows(out)
    assert float(row["sigma_s"]) == 9 and float(row["d_max"]) == pytest.approx(5.0)
    _, out, _ = _run(capsys, "analytic", "--config", str(cfg), "--rho-l", "0.3", "--beta-th", "20")
    (row,) = _csv_rows(out)
    assert float(row["rho_l"]) == 0.3 and float(row["beta_th"]) == 20.0
    cfg.write_text("bogus = 1\n")
    assert _run(capsys, "analytic", "--config", str(cfg))[0] == EXIT_USAGE
    cfg.write_text("beta_th = 20\nd_max = 4\n")
    assert _run(capsys, "analytic", "--config", str(cfg))[0] == EXIT_USAGE


@pytest.mark.parametrize("argv", [
    ["analytic", "--beta-th", "20", "--d-max", "4"],
    ["analytic", "--sigma-s", "-1"],
    ["analytic", "--sweep", "p:1:2:3"],
    ["analytic", "--quantity", "nope"],
    ["threshold"],
    ["threshold", "--kind", "theorem2"],
    ["threshold", "--kind", "net_rho", "--n-nl", "0.5"],
    ["asymptotic"],
    ["nonsense"],
])
def test_usage_errors(capsys, argv):
    assert _run(capsys, *argv)[0] == EXIT_USAGE


def test_solver_failure_exit_code(monkeypatch, capsys):
    from poissonloc import thresholds

    def fail(*a, **k):
        raise BracketError("no sign change", {"lo": 1, "hi": 2})

    monkeypatch.setattr(thresholds, "network_density_threshold", fail)
    code, _, err = _run(capsys, "threshold", "--kind", "net_rho")
    assert code == EXIT_SOLVER and "diagnostics" in err


def test_degenerate_exit_code(capsys):
    code, out, err = _run(capsys, "simulate", "--trials", "2", "--rho-nl", "1e-12", "--radius", "5")
    assert code == EXIT_DEGENERATE
    assert _csv_rows(out)[0]["status"] == "degenerate"


def test_threshold_rows(capsys):
    code, out, _ = _run(capsys, "threshold", "--kind", "net_rho", "--beta-th", "40",
                        "--rho-nl", "0.1", "--radius", "100")
    (row,) = _csv_rows(out)
    assert code == EXIT_OK
    assert float(row["value"]) == pytest.approx(2.6242e-4, rel=1e-3)
    assert float(row["residual"]) < 1e-10
    _, out, _ = _run(capsys, "threshold", "--kind", "p0", "--sigma-s", "9", "--n-p", "4",
                     "--beta-th", "30", "--radius", "60", "--xi", "0.51")
    assert float(_csv_rows(out)[0]["value"]) == pytest.approx(32.61082907376, rel=1e-11)
    _, out, _ = _run(capsys, "threshold", "--kind", "node_dmax", "--rho-l", "0.1")
    assert float(_csv_rows(out)[0]["value"]) == pytest.approx(2.2818740226, rel=1e-9)


def test_asymptotic_transition_rows(capsys):
    code, out, _ = _run(capsys, "asymptotic", "--sigma-s", "9", "--n-p", "4", "--beta-th", "30",
                        "--radius", "60", "--xi", "0.51", "--transition")
    rows = _csv_rows(out)
    assert code == EXIT_OK and len(rows) == 4
    widths = [float(r["width"]) for r in rows]
    assert all(a > b for a, b in zip(widths, widths[1:]))


def test_asymptotic_extremes(capsys):
    code, out, _ = _run(capsys, "asymptotic", "--sigma-s", "9", "--n-p", "4", "--beta-th", "30",
                        "--radius", "60", "--xi", "0.51", "--n-grid", "1e9",
                        "--sweep", "p:5:200:2")
    low, high = _csv_rows(out)
    assert float(low["p_n_el"]) < 1e-6
    assert float(high["p_n_el"]) > 1 - 1e-6


def test_simulate_rows_and_determinism(capsys):
    argv = ["simulate", "--trials", "4", "--radius", "30", "--rho-l", "0.01", "--rho-nl", "0.01",
            "--seed", "5"]
    code, first, _ = _run(capsys, *argv)
    _, second, _ = _run(capsys, *argv, "--workers", "2")
    assert code == EXIT_OK and first == second
    (row,) = _csv_rows(first)
    assert row["status"] == "ok" and row["seed"] == "5"
    assert float(row["ci_low"]) <= float(row["estimate"]) <= float(row["ci_high"])


def test_cmd_simulate_target_nodes():
    m = ChannelModel(4, 2, 20)
    spec = SweepSpec({"sigma_s": 4.0, "n_p": 2.0, "beta_th": 20.0, "d_max": None,
                      "rho_l": 0.01, "rho_nl": 0.01, "radius": 20.0, "n_nl": None})
    table = cmd_simulate(spec, "node", target_nodes=1000, seed=1)
    (rec,) = table.records()
    assert rec["trials"] == math.ceil(1000 / (0.01 * math.pi * 400))
    lam = 0.01 * math.pi * 100 * m.shadow_gain
    assert rec["analytic"] == pytest.approx(single_node_localization_probability(lam))


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_run(name, capsys):
    code, out, _ = _run(capsys, "reproduce", "--preset", name)
    assert code == EXIT_OK
    assert len(_csv_rows(out)) >= 2


def test_lambda_gap_preset_matches_library(capsys):
    _, out, _ = _run(capsys, "reproduce", "--preset", "lambda_gap", "--format", "json")
    rec = json.loads(out)["records"][0]
    m = ChannelModel(rec["sigma_s"], rec["n_p"], rec["beta_th"])
    from poissonloc.analytic import expected_neighbors_unbounded

    gap = expected_neighbors_unbounded(m, 0.1) - expected_neighbors_bounded(m, 0.1, rec["radius"])
    assert rec["lambda_gap"] == pytest.approx(gap, rel=1e-14)
