import csv
import json
from pathlib import Path

import pytest

from smclmi.cli import SWEEP_HEADER, main

CONFIGS = Path(__file__).parent.parent / "configs"

UNSTABLE = """
[circuit]
preset = generic
A = -1, 0; 0, {a22}
B = 0, 0
C = 0, 0; 0, 0
D = 1, 0
[surface]
m = 1, 0
m5 = 1
delta = 10m
[sim]
x0 = 1, 1
"""


def _config(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def _surface_a(tmp_path, **sim):
    text = (CONFIGS / "cuk_surface_a.ini").read_text(encoding="utf-8")
    for key, value in sim.items():
        lines = [f"{key} = {value}" if ln.startswith(f"{key} =") else ln for ln in text.splitlines()]
        text = "\n".join(lines)
    return _config(tmp_path, text, "a.ini")


def _report(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))["values"]


def test_analyze_surface_a(tmp_path, capsys):
    out = tmp_path / "a"
    assert main(["analyze", "--config", str(CONFIGS / "cuk_surface_a.ini"), "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "x_star [SI] = [0.5, 1.0, 15.0, -5.0]" in text
    vals = _report(out / "report.json")
    assert vals["x_star"] == pytest.approx([0.5, 1.0, 15.0, -5.0], abs=1e-9)
    assert vals["branch2_tag"] == "infeasible"
    assert vals["certificate_verified"] is True
    assert vals["T_S_predicted"] == pytest.approx(6e-6)
    assert vals["delta_max"] == pytest.approx(0.017, abs=1e-3)
    # text and structured reports carry the same keys
    keys = {ln.split(" ")[0] for ln in (out / "report.txt").read_text().splitlines()}
    assert keys == set(vals)


def test_analyze_unstable_reduction_exits_1(tmp_path, capsys):
    cfg = _config(tmp_path, UNSTABLE.format(a22="2") + f"[output]\ndir = {tmp_path / 'u'}\n")
    assert main(["analyze", "--config", cfg]) == 1
    assert "not Hurwitz" in capsys.readouterr().out


def test_analyze_startup_surface_exits_1(tmp_path):
    cfg = str(CONFIGS / "cuk_surface_b_startup.ini")
    assert main(["analyze", "--config", cfg, "--out", str(tmp_path)]) == 1


def test_config_error_exits_2(tmp_path, capsys):
    cfg = _config(tmp_path, "[circuit]\nv_in = ten\n")
    assert main(["analyze", "--config", cfg]) == 2
    assert "[circuit] v_in" in capsys.readouterr().err
    assert main(["analyze", "--config", str(tmp_path / "missing.ini")]) == 2
    good = str(CONFIGS / "cuk_surface_a.ini")
    assert main(["simulate", "--config", good, "--delta=-1m", "--out", str(tmp_path)]) == 2
    assert main(["sweep", "--config", good, "--delta", "1m:2m", "--out", str(tmp_path)]) == 2


def test_divergence_exits_3(tmp_path, capsys):
    cfg = _config(tmp_path, UNSTABLE.format(a22="1e5") + f"[output]\ndir = {tmp_path / 'd'}\n")
    assert main(["simulate", "--config", cfg]) == 3
    assert "DivergenceError" in capsys.readouterr().err


def test_simulate_outputs_and_determinism(tmp_path):
    cfg = _surface_a(tmp_path, t_end="300u")
    blobs = []
    for run in ("one", "two"):
        out = tmp_path / run
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        blobs.append((out / "waveform.csv").read_bytes())
        with open(out / "waveform.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["t", "i_l1", "i_l2", "v_c1", "v_c2", "u", "mode"]
        assert (out / "phase.csv").read_text().splitlines()[0] == "i_l1,i_l2"
        # shortest round-trip decimal text
        for cell in rows[1][:5] + rows[-1][:5]:
            assert repr(float(cell)) == cell
        metrics = _report(out / "metrics.json")
        assert metrics["T_S"] == pytest.approx(6e-6, rel=0.05)
        assert set(metrics["modes_visited"]) == {"CCM_ON", "CCM_OFF"}
    assert blobs[0] == blobs[1]


def test_sector_check_inconclusive_when_horizon_short(tmp_path, capsys):
    cfg = _surface_a(tmp_path, t_end="2u")
    assert main(["sector-check", "--config", cfg, "--out", str(tmp_path)]) == 1
    assert "inconclusive" in capsys.readouterr().out
    header = (tmp_path / "sector.csv").read_text().splitlines()[0]
    assert header == "delta,t,y,h,r_tilde_bound,r_bound,verdict"


def test_sector_check_small_band_inside(tmp_path):
    cfg = _surface_a(tmp_path, t_end="1m")
    assert main(["sector-check", "--config", cfg, "--delta", "1m", "--out", str(tmp_path)]) == 0
    vals = _report(tmp_path / "sector.json")
    assert vals["delta_0.001_verdict"] == "inside"
    with open(tmp_path / "sector.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert rows and all(r["verdict"] == "inside" for r in rows)
    assert all(abs(float(r["h"])) <= float(r["r_bound"]) for r in rows)


def test_sweep_single_point_matches_simulate(tmp_path):
    cfg = _surface_a(tmp_path, t_end="1m")
    assert main(["sweep", "--config", cfg, "--delta", "10m", "--out", str(tmp_path / "s")]) == 0
    assert main(["simulate", "--config", cfg, "--delta", "10m", "--out", str(tmp_path / "m")]) == 0
    with open(tmp_path / "s" / "sweep.csv", newline="") as fh:
        reader = csv.DictReader(fh)
        assert reader.fieldnames == SWEEP_HEADER
        (row,) = list(reader)
    metrics = _report(tmp_path / "m" / "metrics.json")
    assert row["status"] == "ok"
    assert float(row["T_S_predicted"]) == pytest.approx(6e-6)
    assert float(row["T_S_measured"]) == metrics["T_S"]
    assert float(row["ripple_v_c1_measured"]) == metrics["ripple_v_c1"]


def test_sweep_all_rows_fail_exits_1(tmp_path):
    cfg = _surface_a(tmp_path, t_end="2u")
    assert main(["sweep", "--config", cfg, "--delta", "1m,10m", "--out", str(tmp_path)]) == 1
    with open(tmp_path / "sweep.csv", newline="") as fh:
        assert {r["status"] for r in csv.DictReader(fh)} == {"not_converged"}


def test_sweep_parallel_matches_sequential(tmp_path, monkeypatch):
    import smclmi.cli as cli_mod

    cfg = _surface_a(tmp_path, t_end="500u")
    monkeypatch.setattr(cli_mod.os, "cpu_count", lambda: 1)
    assert main(["sweep", "--config", cfg, "--delta", "2m,5m", "--out", str(tmp_path / "seq")]) == 0
    monkeypatch.setattr(cli_mod.os, "cpu_count", lambda: 2)
    assert main(["sweep", "--config", cfg, "--delta", "2m,5m", "--out", str(tmp_path / "par")]) == 0
    assert (tmp_path / "seq" / "sweep.csv").read_bytes() == (tmp_path / "par" / "sweep.csv").read_bytes()
