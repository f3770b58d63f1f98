import csv
import json

import numpy as np
import pytest

from greenlyap import cli

GOLDEN_SUM = 0.9624236501192069       # log((3 + sqrt 5)/2)
GOLDEN_BOUND = 0.2784792710055213     # (1/2) log(1 + sqrt(5)/3)
GOLDEN_GAP_LHS = 1.9248473002384137   # 2 log((3 + sqrt 5)/2)


def write_config(tmp_path, payload, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def read_report(out_dir, stem):
    with open(out_dir / f"{stem}.json") as fh:
        return json.load(fh)


def read_csv_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def twist_verify_config(**overrides):
    base = {
        "id": "fp",
        "task": "verify",
        "system": {"kind": "twist-family", "K": 1.0},
    }
    base.update(overrides)
    return base


class TestVerifyTwist:
    def test_fixed_point_golden_rows(self, tmp_path):
        cfg = write_config(tmp_path, twist_verify_config())
        rc = cli.main(["verify", "--config", cfg, "--out", str(tmp_path), "--quiet"])
        assert rc == 0
        report = read_report(tmp_path, "fp-verify")
        rows = {r["theorem_id"]: r for r in report["rows"]}
        assert set(rows) == {"theorem2", "theorem4", "general-1d"}
        assert all(r["status"] == "pass" for r in rows.values())
        t2 = rows["theorem2"]
        assert t2["lhs"] == pytest.approx(GOLDEN_SUM, abs=1e-9)
        assert t2["rhs"] == pytest.approx(GOLDEN_SUM, abs=1e-9)
        t4 = rows["theorem4"]
        assert t4["lhs"] == pytest.approx(GOLDEN_BOUND, abs=1e-9)
        assert t4["slack"] > 0
        g = rows["general-1d"]
        assert g["lhs"] == pytest.approx(GOLDEN_GAP_LHS, abs=1e-8)
        assert g["rhs"] == pytest.approx(
            np.log1p(((1 + np.sqrt(5)) / 2) ** 4 * np.sqrt(2)), abs=1e-6)

    def test_report_embeds_resolved_config_and_version(self, tmp_path):
        cfg = write_config(tmp_path, twist_verify_config())
        cli.main(["verify", "--config", cfg, "--out", str(tmp_path), "--quiet"])
        report = read_report(tmp_path, "fp-verify")
        assert report["version"]
        resolved = report["config"]
        # every default must be explicit in the emitted report
        assert resolved["numerics"] == cli.DEFAULT_NUMERICS
        assert resolved["orbit"] == {"kind": "fixed-point"}
        assert resolved["system"] == {"kind": "twist-family", "K": 1.0,
                                      "coupling": 0.0, "dim": 1}

    def test_csv_columns_and_values(self, tmp_path):
        cfg = write_config(tmp_path, twist_verify_config())
        cli.main(["verify", "--config", cfg, "--out", str(tmp_path), "--quiet"])
        table = read_csv_rows(tmp_path / "fp-verify.csv")
        assert table[0] == ["scenario_id", "theorem_id", "lhs", "rhs", "slack",
                            "pass", "n_steps", "k_used", "wall_ms"]
        assert len(table) == 4
        t2 = table[1]
        assert t2[0] == "fp" and t2[1] == "theorem2" and t2[5] == "pass"
        assert float(t2[2]) == pytest.approx(GOLDEN_SUM, abs=1e-9)
        assert t2[6] == "10000"
        assert t2[8] == "0"  # wall_ms stays 0 without --timings

    def test_seed_flag_overrides_config(self, tmp_path):
        cfg = write_config(tmp_path, twist_verify_config())
        cli.main(["verify", "--config", cfg, "--out", str(tmp_path), "--quiet",
                  "--seed", "7"])
        report = read_report(tmp_path, "fp-verify")
        assert report["config"]["numerics"]["seed"] == 7

    def test_repeated_runs_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path, twist_verify_config())
        a, b = tmp_path / "a", tmp_path / "b"
        assert cli.main(["verify", "--config", cfg, "--out", str(a), "--quiet"]) == 0
        assert cli.main(["verify", "--config", cfg, "--out", str(b), "--quiet"]) == 0
        assert (a / "fp-verify.json").read_bytes() == (b / "fp-verify.json").read_bytes()
        assert (a / "fp-verify.csv").read_bytes() == (b / "fp-verify.csv").read_bytes()

    def test_zero_strength_rows_are_skips(self, tmp_path):
        cfg = write_config(tmp_path, twist_verify_config(
            id="k0",
            system={"kind": "twist-family", "K": 0.0},
            orbit={"kind": "rotation", "rotation": [1], "period": 3}))
        rc = cli.main(["verify", "--config", cfg, "--out", str(tmp_path), "--quiet"])
        assert rc == 0  # skips are not failures
        rows = {r["theorem_id"]: r for r in read_report(tmp_path, "k0-verify")["rows"]}
        assert rows["theorem4"]["status"] == "skip"
        assert rows["theorem4"]["reason"] == "hypothesis fails: zero exponents"
        assert rows["theorem2"]["status"] == "skip"
        assert "not converged" in rows["theorem2"]["reason"]

    def test_non_minimizing_control_fails_run(self, tmp_path):
        cfg = write_config(tmp_path, twist_verify_config(
            id="control",
            system={"kind": "twist-family", "K": 0.5},
            orbit={"kind": "points", "points": [[0.0]]}))
        rc = cli.main(["verify", "--config", cfg, "--out", str(tmp_path), "--quiet"])
        assert rc == 1
        rows = {r["theorem_id"]: r for r in
                read_report(tmp_path, "control-verify")["rows"]}
        assert rows["theorem2"]["status"] == "fail"
        assert "Monotonicity" in rows["theorem2"]["reason"]

    def test_nonstationary_points_recorded_per_row(self, tmp_path):
        cfg = write_config(tmp_path, twist_verify_config(
            id="drifty", orbit={"kind": "points", "points": [[0.3]]}))
        rc = cli.main(["verify", "--config", cfg, "--out", str(tmp_path), "--quiet"])
        assert rc == 1
        rows = read_report(tmp_path, "drifty-verify")["rows"]
        assert all(r["status"] == "fail" for r in rows)
        assert all("not stationary" in r["reason"] for r in rows)


class TestVerifyHamiltonian:
    def test_hilltop_rows(self, tmp_path):
        cfg = write_config(tmp_path, {
            "id": "hill",
            "task": "verify",
            "system": {"kind": "hamiltonian-family", "stiffness": 1.0},
        })
        rc = cli.main(["verify", "--config", cfg, "--out", str(tmp_path), "--quiet"])
        assert rc == 0
        rows = {r["theorem_id"]: r for r in read_report(tmp_path, "hill-verify")["rows"]}
        assert rows["theorem1"]["status"] == "pass"
        assert rows["theorem1"]["lhs"] == pytest.approx(1.0, abs=1e-6)
        assert rows["theorem1"]["rhs"] == pytest.approx(1.0, abs=1e-6)
        assert rows["theorem3"]["status"] == "pass"
        assert rows["theorem3"]["lhs"] == pytest.approx(1.0, abs=1e-6)
        assert rows["lemma9"]["status"] == "pass"
        assert rows["lemma9"]["lhs"] < 1e-6

    def test_flat_torus_hypothesis_rejection(self, tmp_path):
        cfg = write_config(tmp_path, {
            "id": "flat",
            "task": "verify",
            "system": {"kind": "hamiltonian-family", "stiffness": 0.0},
            "orbit": {"kind": "flow-point", "q0": [0.0], "p0": [0.9]},
        })
        rc = cli.main(["verify", "--config", cfg, "--out", str(tmp_path), "--quiet"])
        assert rc == 0
        rows = {r["theorem_id"]: r for r in read_report(tmp_path, "flat-verify")["rows"]}
        assert rows["theorem3"]["status"] == "skip"
        assert rows["theorem3"]["reason"] == "hypothesis fails: zero exponents"
        # exact exponents are 0; the row passes inside the declared
        # finite-depth tolerance and says so
        assert rows["theorem1"]["status"] == "pass"
        assert "finite-depth" in rows["theorem1"]["reason"]

    def test_elliptic_center_fails(self, tmp_path):
        cfg = write_config(tmp_path, {
            "id": "center",
            "task": "verify",
            "system": {"kind": "hamiltonian-family", "stiffness": 1.0},
            "orbit": {"kind": "flow-point", "q0": [0.5], "p0": [0.0]},
        })
        rc = cli.main(["verify", "--config", cfg, "--out", str(tmp_path), "--quiet"])
        assert rc == 1
        rows = read_report(tmp_path, "center-verify")["rows"]
        assert all(r["status"] == "fail" for r in rows)


class TestScan:
    def scan_config(self, **scan):
        return {
            "id": "grid",
            "task": "scan",
            "system": {"kind": "twist-family", "K": 1.0},
            "scan": scan,
        }

    def test_grid_order_and_pass(self, tmp_path):
        cfg = write_config(tmp_path, self.scan_config(
            K=[0.5, 1.0], rotation=[[0, 1], [1, 2]]))
        rc = cli.main(["scan", "--config", cfg, "--out", str(tmp_path), "--quiet"])
        assert rc == 0
        table = read_csv_rows(tmp_path / "grid-scan.csv")
        ids = [row[0] for row in table[1:]]
        assert ids == (["grid-K0.5-r0.1"] * 3 + ["grid-K0.5-r1.2"] * 3
                       + ["grid-K1-r0.1"] * 3 + ["grid-K1-r1.2"] * 3)
        assert all(row[5] == "pass" for row in table[1:])

    def test_negative_control_scenario_fails_scan(self, tmp_path):
        cfg = write_config(tmp_path, self.scan_config(
            K=[1.0], rotation=[[0, 1]],
            scenarios=[{
                "id": "bad",
                "task": "verify",
                "system": {"kind": "twist-family", "K": 0.5},
                "orbit": {"kind": "points", "points": [[0.0]]},
            }]))
        rc = cli.main(["scan", "--config", cfg, "--out", str(tmp_path), "--quiet"])
        assert rc == 1
        table = read_csv_rows(tmp_path / "grid-scan.csv")
        bad = [row for row in table[1:] if row[0] == "bad"]
        assert bad and bad[0][5] == "fail"
        good = [row for row in table[1:] if row[0].startswith("grid-")]
        assert all(row[5] == "pass" for row in good)

    def test_empty_grid(self, tmp_path):
        cfg = write_config(tmp_path, self.scan_config(K=[], rotation=[]))
        rc = cli.main(["scan", "--config", cfg, "--out", str(tmp_path), "--quiet"])
        assert rc == 0
        table = read_csv_rows(tmp_path / "grid-scan.csv")
        assert len(table) == 1  # header only

    def test_parallel_matches_serial(self, tmp_path):
        cfg = write_config(tmp_path, self.scan_config(K=[1.0],
                                                      rotation=[[0, 1], [1, 2]]))
        a, b = tmp_path / "serial", tmp_path / "par"
        assert cli.main(["scan", "--config", cfg, "--out", str(a), "--quiet"]) == 0
        assert cli.main(["scan", "--config", cfg, "--out", str(b), "--quiet",
                         "--jobs", "2"]) == 0
        assert (a / "grid-scan.csv").read_bytes() == (b / "grid-scan.csv").read_bytes()
        assert (a / "grid-scan.json").read_bytes() == (b / "grid-scan.json").read_bytes()

    def test_duplicate_ids_rejected(self, tmp_path):
        cfg = write_config(tmp_path, self.scan_config(
            K=[1.0], rotation=[[0, 1]],
            scenarios=[twist_verify_config(id="grid-K1-r0.1")]))
        assert cli.main(["scan", "--config", cfg, "--out", str(tmp_path),
                         "--quiet"]) == 2


class TestArtifacts:
    def test_minimize_writes_certified_orbit(self, tmp_path):
        cfg = write_config(tmp_path, {
            "id": "halfstep",
            "task": "minimize",
            "system": {"kind": "twist-family", "K": 1.0},
            "orbit": {"kind": "rotation", "rotation": [1], "period": 2},
        })
        rc = cli.main(["minimize", "--config", cfg, "--out", str(tmp_path), "--quiet"])
        assert rc == 0
        orbit = read_report(tmp_path, "halfstep-orbit")["orbit"]
        assert orbit["residual"] < 1e-10
        assert orbit["min_eig_periodic"] > 0
        assert orbit["segment_pd"] is True
        pts = np.array(orbit["points"])
        # the two points straddle q = 1/2 symmetrically
        assert pts[0, 0] + pts[1, 0] == pytest.approx(1.0, abs=1e-9)

    def test_green_artifact_golden_slopes(self, tmp_path):
        cfg = write_config(tmp_path, {
            "id": "fp",
            "task": "green",
            "system": {"kind": "twist-family", "K": 1.0},
        })
        rc = cli.main(["green", "--config", cfg, "--out", str(tmp_path), "--quiet"])
        assert rc == 0
        green = read_report(tmp_path, "fp-green")["green"]
        assert green["converged"] is True
        assert green["S_plus"][0][0][0] == pytest.approx(
            (np.sqrt(5) - 1) / 2, abs=1e-10)
        assert green["S_minus"][0][0][0] == pytest.approx(
            -(np.sqrt(5) + 1) / 2, abs=1e-10)
        assert green["gap_eigenvalues"][0][0] == pytest.approx(np.sqrt(5), abs=1e-9)

    def test_green_flow_artifact(self, tmp_path):
        cfg = write_config(tmp_path, {
            "id": "hill",
            "task": "green",
            "system": {"kind": "hamiltonian-family", "stiffness": 1.0},
        })
        rc = cli.main(["green", "--config", cfg, "--out", str(tmp_path), "--quiet"])
        assert rc == 0
        green = read_report(tmp_path, "hill-green")["green"]
        assert green["U"][0][0] == pytest.approx(1.0, abs=1e-8)
        assert green["S"][0][0] == pytest.approx(-1.0, abs=1e-8)

    def test_green_failure_exit_code(self, tmp_path):
        cfg = write_config(tmp_path, {
            "id": "bad",
            "task": "green",
            "system": {"kind": "twist-family", "K": 0.5},
            "orbit": {"kind": "points", "points": [[0.0]]},
        })
        assert cli.main(["green", "--config", cfg, "--out", str(tmp_path),
                         "--quiet"]) == 1

    def test_lyapunov_artifact_map(self, tmp_path):
        cfg = write_config(tmp_path, {
            "id": "fp",
            "task": "lyapunov",
            "system": {"kind": "twist-family", "K": 1.0},
        })
        rc = cli.main(["lyapunov", "--config", cfg, "--out", str(tmp_path), "--quiet"])
        assert rc == 0
        spec = read_report(tmp_path, "fp-lyapunov")["spectrum"]
        assert spec["exponents"][0] == pytest.approx(GOLDEN_SUM, abs=1e-9)
        assert spec["exponents"][1] == pytest.approx(-GOLDEN_SUM, abs=1e-9)
        assert spec["pairing_defect"] < 1e-9
        assert spec["sum_positive"] == pytest.approx(GOLDEN_SUM, abs=1e-9)

    def test_lyapunov_artifact_flow(self, tmp_path):
        cfg = write_config(tmp_path, {
            "id": "hill",
            "task": "lyapunov",
            "system": {"kind": "hamiltonian-family", "stiffness": 1.0},
        })
        rc = cli.main(["lyapunov", "--config", cfg, "--out", str(tmp_path), "--quiet"])
        assert rc == 0
        spec = read_report(tmp_path, "hill-lyapunov")["spectrum"]
        np.testing.assert_allclose(spec["exponents"], [1.0, -1.0], atol=1e-6)


class TestConfigErrors:
    def test_schema_rejects_unknown_key(self, tmp_path):
        cfg = write_config(tmp_path, {**twist_verify_config(), "numerix": {}})
        assert cli.main(["verify", "--config", cfg, "--quiet"]) == 2

    def test_schema_rejects_bad_task(self, tmp_path):
        cfg = write_config(tmp_path, twist_verify_config(task="frobnicate"))
        assert cli.main(["verify", "--config", cfg, "--quiet"]) == 2

    def test_task_subcommand_mismatch(self, tmp_path):
        cfg = write_config(tmp_path, twist_verify_config(task="green"))
        assert cli.main(["verify", "--config", cfg, "--quiet"]) == 2

    def test_missing_file(self, tmp_path):
        assert cli.main(["verify", "--config", str(tmp_path / "nope.json"),
                         "--quiet"]) == 2

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        assert cli.main(["verify", "--config", str(path), "--quiet"]) == 2

    def test_rotation_dimension_mismatch(self, tmp_path):
        cfg = write_config(tmp_path, twist_verify_config(
            orbit={"kind": "rotation", "rotation": [1, 0], "period": 2}))
        assert cli.main(["verify", "--config", cfg, "--quiet"]) == 2

    def test_minimize_requires_rotation_orbit(self, tmp_path):
        cfg = write_config(tmp_path, twist_verify_config(task="minimize"))
        assert cli.main(["minimize", "--config", cfg, "--quiet"]) == 2

    def test_flow_orbit_on_twist_system(self, tmp_path):
        cfg = write_config(tmp_path, twist_verify_config(
            orbit={"kind": "flow-point", "q0": [0.0], "p0": [0.0]}))
        assert cli.main(["verify", "--config", cfg, "--quiet"]) == 2

    def test_wrong_family_parameter(self, tmp_path):
        cfg = write_config(tmp_path, {
            "id": "x", "task": "verify",
            "system": {"kind": "hamiltonian-family", "K": 1.0}})
        assert cli.main(["verify", "--config", cfg, "--quiet"]) == 2

    def test_no_files_written_on_config_error(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, {**twist_verify_config(), "numerix": {}})
        cli.main(["verify", "--config", cfg, "--out", str(out), "--quiet"])
        assert not out.exists()


class TestOutput:
    def test_quiet_suppresses_rows(self, tmp_path, capsys):
        cfg = write_config(tmp_path, twist_verify_config())
        cli.main(["verify", "--config", cfg, "--out", str(tmp_path), "--quiet"])
        assert capsys.readouterr().out == ""

    def test_row_lines_printed(self, tmp_path, capsys):
        cfg = write_config(tmp_path, twist_verify_config())
        cli.main(["verify", "--config", cfg, "--out", str(tmp_path)])
        out = capsys.readouterr().out
        assert "theorem2" in out and "pass" in out

    def test_timings_fill_wall_ms(self, tmp_path):
        cfg = write_config(tmp_path, twist_verify_config())
        cli.main(["verify", "--config", cfg, "--out", str(tmp_path), "--quiet",
                  "--timings"])
        rows = read_report(tmp_path, "fp-verify")["rows"]
        assert all(r["wall_ms"] > 0 for r in rows)
