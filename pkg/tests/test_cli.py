import csv
import json
from pathlib import Path

import numpy as np
import pytest

import magchain.cli as cli
from conftest import TABLE_KB_DESIGN, TABLE_KB_MEASURED, TABLE_KC_MEASURED
from magchain.analysis import SweepRecord

REPO_ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="module")
def design_out(tmp_path_factory):
    out = tmp_path_factory.mktemp("design")
    assert cli.main(["design", "--out", str(out)]) == 0
    return out


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    return rows[0], rows[1:]


# ---------------------------------------------------------------------------
# design
# ---------------------------------------------------------------------------

def test_design_outputs(design_out):
    for name in ("design_table.csv", "design_trace.csv", "design_table.png",
                 "manifest.json"):
        assert (design_out / name).exists()
        assert (design_out / name).stat().st_size > 0
    header, rows = _read_csv(design_out / "design_table.csv")
    assert header == ["n", "kb_Nm_per_rad", "theta_star_deg",
                      "alignment_residual_rad"]
    kb = np.array([float(r[1]) for r in rows])
    assert len(kb) == 6
    assert np.all(np.diff(kb) > 0.0)
    assert kb == pytest.approx(TABLE_KB_DESIGN, rel=0.05)


def test_design_deterministic(design_out, tmp_path):
    out2 = tmp_path / "again"
    assert cli.main(["design", "--out", str(out2)]) == 0
    assert ((design_out / "design_table.csv").read_bytes()
            == (out2 / "design_table.csv").read_bytes())
    assert ((design_out / "design_trace.csv").read_bytes()
            == (out2 / "design_trace.csv").read_bytes())
    m1 = json.loads((design_out / "manifest.json").read_text())
    m2 = json.loads((out2 / "manifest.json").read_text())
    m1.pop("timing")
    m2.pop("timing")
    assert m1 == m2


def test_manifest_contents(design_out):
    manifest = json.loads((design_out / "manifest.json").read_text())
    assert manifest["command"] == "design"
    assert manifest["config_path"] is None
    assert manifest["tool_version"]
    assert "design_table.csv" in manifest["outputs"]
    assert manifest["parameters"]["segments"]["count"] == 6
    assert "started_utc" in manifest["timing"]


def test_missing_config(tmp_path, capsys):
    code = cli.main(["design", "--config", "/nope/missing.yaml",
                     "--out", str(tmp_path)])
    assert code == 2
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "ConfigError"
    assert "missing.yaml" in err["message"]


def test_config_dir_env_var(tmp_path, monkeypatch, design_out):
    cfgdir = tmp_path / "cfgs"
    cfgdir.mkdir()
    (cfgdir / "mine.yaml").write_text(
        (REPO_ROOT / "configs" / "default.yaml").read_text())
    monkeypatch.setenv("MAGCHAIN_CONFIG_DIR", str(cfgdir))
    out = tmp_path / "out"
    code = cli.main(["solve", "--config", "mine.yaml", "--theta", "0", "--t", "2",
                     "--design-table", str(design_out / "design_table.csv"),
                     "--out", str(out), "--no-figures"])
    assert code == 0


def test_config_not_mutated(tmp_path, design_out):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text((REPO_ROOT / "configs" / "default.yaml").read_text())
    before = cfg.read_bytes()
    out = tmp_path / "out"
    assert cli.main(["solve", "--config", str(cfg), "--theta", "30", "--t", "3",
                     "--design-table", str(design_out / "design_table.csv"),
                     "--out", str(out), "--no-figures"]) == 0
    assert cfg.read_bytes() == before


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def test_solve_straight(tmp_path, design_out):
    out = tmp_path / "out"
    assert cli.main(["solve", "--theta", "0", "--t", "4",
                     "--design-table", str(design_out / "design_table.csv"),
                     "--out", str(out), "--no-figures"]) == 0
    header, rows = _read_csv(out / "shape.csv")
    assert header == ["magnet", "alpha_deg", "x_mm", "y_mm", "z_mm"]
    assert len(rows) == 5
    for i, row in enumerate(rows):
        assert float(row[4]) == pytest.approx((4 - i) * 5.14, abs=1e-6)
        assert float(row[2]) == 0.0


def test_solve_design_point(tmp_path, design_out):
    out = tmp_path / "out"
    assert cli.main(["solve", "--theta", "200", "--t", "2",
                     "--design-table", str(design_out / "design_table.csv"),
                     "--out", str(out), "--trace"]) == 0
    _, rows = _read_csv(out / "shape.csv")
    bend = sum(float(r[1]) for r in rows if r[1])
    assert bend == pytest.approx(180.0, abs=0.1)
    assert (out / "solver_trace.csv").exists()
    assert (out / "shape.png").stat().st_size > 0


def test_solve_t_out_of_range(tmp_path, design_out, capsys):
    code = cli.main(["solve", "--theta", "10", "--t", "7",
                     "--design-table", str(design_out / "design_table.csv"),
                     "--out", str(tmp_path / "o")])
    assert code == 2
    assert "1..6" in json.loads(capsys.readouterr().err.strip())["message"]


def test_solve_requires_stiffness(tmp_path, capsys):
    code = cli.main(["solve", "--theta", "10", "--t", "2",
                     "--out", str(tmp_path / "o")])
    assert code == 2
    assert "stiffness" in json.loads(capsys.readouterr().err.strip())["message"]


def test_solver_failure_exit_code(tmp_path, design_out, monkeypatch, capsys):
    from magchain.errors import SolverError

    def boom(*args, **kwargs):
        raise SolverError("synthetic divergence", residual_norm=1.0)

    monkeypatch.setattr(cli, "solve_field_sweep", boom)
    code = cli.main(["solve", "--theta", "90", "--t", "3",
                     "--design-table", str(design_out / "design_table.csv"),
                     "--out", str(tmp_path / "o")])
    assert code == 4
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "SolverError"
    assert err["residual_norm"] == 1.0


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def test_sweep_gamma(tmp_path, design_out):
    out = tmp_path / "out"
    assert cli.main(["sweep", "--vary", "gamma",
                     "--design-table", str(design_out / "design_table.csv"),
                     "--out", str(out)]) == 0
    header, rows = _read_csv(out / "pivot_vs_gamma.csv")
    assert header == ["gamma_deg", "sigma_mm", "dmax_mm", "er_sigma_pct",
                      "er_dmax_pct"]
    assert len(rows) == 19
    assert max(float(r[1]) for r in rows) <= 0.2
    assert (out / "pivot_vs_gamma.png").stat().st_size > 0


def test_sweep_partial_failure_exit_code(tmp_path, monkeypatch):
    def fake_sweep(gamma_grid, field_grid, distance_grid, spec, env,
                   options=None):
        records = []
        for i in range(20):
            rec = SweepRecord(gamma=0.05 * (i % 10), field_magnitude=0.04 + 1e-3 * (i // 10),
                              lumen_distance=0.08)
            if i < 2:
                rec.ok = False
                rec.message = "synthetic failure"
            else:
                rec.sigma = 1e-4
                rec.d_max = 2e-4
                rec.er_sigma = 0.003
                rec.er_dmax = 0.006
                rec.shape_error = 1e-4
                rec.bend_eff_mean = 0.9
                rec.bend_eff_std = 0.02
                rec.prop_eff_mean = 0.95
            records.append(rec)
        return records

    monkeypatch.setattr(cli, "sweep", fake_sweep)
    out = tmp_path / "out"
    code = cli.main(["sweep", "--vary", "B", "--out", str(out)])
    assert code == 3  # 18/20 = 90% below the 95% bar
    header, rows = _read_csv(out / "sweep_B.csv")
    assert sum(1 for r in rows if r[-1] == "failed") == 2
    assert (out / "sweep_B.png").stat().st_size > 0  # failed cells left blank


# ---------------------------------------------------------------------------
# efficiency
# ---------------------------------------------------------------------------

def test_efficiency_single_gamma(tmp_path, design_out):
    out = tmp_path / "out"
    assert cli.main(["efficiency", "--profile", "optimized", "--gammas", "90",
                     "--design-table", str(design_out / "design_table.csv"),
                     "--out", str(out)]) == 0
    header, rows = _read_csv(out / "efficiency.csv")
    assert len(rows) == 1
    assert rows[0][0] == "90.0"
    assert rows[0][4] == "optimized"
    assert float(rows[0][1]) >= 0.8
    assert (out / "efficiency.png").stat().st_size > 0


def test_efficiency_nonoptimized_profile(tmp_path, design_out):
    out = tmp_path / "out"
    assert cli.main(["efficiency", "--profile", "nonoptimized",
                     "--gammas", "180",
                     "--design-table", str(design_out / "design_table.csv"),
                     "--out", str(out), "--no-figures"]) == 0
    _, rows = _read_csv(out / "efficiency.csv")
    assert rows[0][4] == "nonoptimized"
    assert float(rows[0][3]) < 0.5  # stiffened profile stalls at 180 deg


def test_efficiency_bad_gammas(tmp_path, capsys):
    code = cli.main(["efficiency", "--gammas", "abc", "--out", str(tmp_path)])
    assert code == 2


# ---------------------------------------------------------------------------
# match-springs
# ---------------------------------------------------------------------------

def _measured_catalog(path):
    with open(path, "w", newline="") as fh:
        fh.write("d_mm,D_mm,c,kb_Nm_per_rad,kc_N_per_m\n")
        for kb, kc in zip(TABLE_KB_MEASURED, TABLE_KC_MEASURED):
            fh.write(f",,,{kb:.9e},{kc}\n")


def test_match_springs_builtin_catalog(tmp_path, design_out):
    out = tmp_path / "out"
    assert cli.main(["match-springs",
                     "--design-table", str(design_out / "design_table.csv"),
                     "--out", str(out)]) == 0
    header, rows = _read_csv(out / "spring_match.csv")
    assert len(rows) == 6
    assert all(float(r[3]) < 10.0 for r in rows)  # within 10% of design
    assert all(r[4] for r in rows)                # geometry columns filled
    assert (out / "spring_match.png").stat().st_size > 0


def test_match_springs_measured_catalog(tmp_path, design_out):
    catalog = tmp_path / "catalog.csv"
    _measured_catalog(catalog)
    out = tmp_path / "out"
    assert cli.main(["match-springs",
                     "--design-table", str(design_out / "design_table.csv"),
                     "--catalog", str(catalog), "--out", str(out)]) == 0
    _, rows = _read_csv(out / "spring_match.csv")
    assert [float(r[2]) for r in rows[:2]] == pytest.approx(
        TABLE_KB_MEASURED[:2], rel=1e-9)


def test_match_springs_empty_catalog(tmp_path, capsys):
    catalog = tmp_path / "empty.csv"
    catalog.write_text("d_mm,D_mm,c,kb_Nm_per_rad,kc_N_per_m\n")
    code = cli.main(["match-springs", "--design-table", str(tmp_path / "x.csv"),
                     "--catalog", str(catalog), "--out", str(tmp_path)])
    assert code == 2


def test_match_springs_missing_table(tmp_path):
    assert cli.main(["match-springs", "--design-table",
                     str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == 2


# ---------------------------------------------------------------------------
# parser surface
# ---------------------------------------------------------------------------

def test_help_documents_units(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["solve", "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    assert "degrees" in text
    assert "--theta" in text and "--t" in text


def test_sweep_help_mentions_grids(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["sweep", "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    assert "mT" in text and "cm" in text


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--version"])
    assert exc.value.code == 0




def test_shipped_config_loads(tmp_path, design_out):
    cfg = REPO_ROOT / "configs" / "default.yaml"
    out = tmp_path / "out"
    assert cli.main(["solve", "--config", str(cfg), "--theta", "0", "--t", "2",
                     "--design-table", str(design_out / "design_table.csv"),
                     "--out", str(out), "--no-figures"]) == 0
