import json

from multicake.cli import main


def write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


PRISM_RUN = {
    "config": [2, 3],
    "players": [
        {"kind": "log_utility", "seed": 7},
        {"kind": "log_utility", "seed": 107},
    ],
    "schedule": [4, 8, 16, 32],
    "tol": 1e-3,
}

SQUARE_RUN = {
    "config": [2, 2],
    "players": [
        {"kind": "linked_bonus", "beta": 0.5, "mode": "same"},
        {"kind": "linked_bonus", "beta": 0.5, "mode": "different"},
    ],
    "schedule": [2, 4],
    "tol": 1e-3,
}


class TestSolve:
    def test_prism_converges_exit_zero(self, tmp_path, capsys):
        cfg = write(tmp_path / "run.json", PRISM_RUN)
        out = tmp_path / "report.json"
        assert main(["solve", "--config", cfg, "--out", str(out)]) == 0
        report = json.loads(out.read_text())
        assert report["converged"] is True
        assert report["disjoint"] is True
        assert report["delta"] <= 1e-3

    def test_square_not_converged_exit_two(self, tmp_path):
        cfg = write(tmp_path / "run.json", SQUARE_RUN)
        out = tmp_path / "report.json"
        assert main(["solve", "--config", cfg, "--out", str(out)]) == 2
        report = json.loads(out.read_text())
        assert report["disjoint"] is False
        assert "no-existence-guarantee" in report["flags"]

    def test_invalid_config_exit_one(self, tmp_path):
        cfg = write(tmp_path / "run.json", {"config": [2], "players": []})
        assert main(["solve", "--config", cfg]) == 1

    def test_byte_identical_reruns(self, tmp_path):
        cfg = write(tmp_path / "run.json", PRISM_RUN)
        out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
        assert main(["solve", "--config", cfg, "--out", str(out1)]) == 0
        assert main(["solve", "--config", cfg, "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_flag_overrides(self, tmp_path):
        cfg = write(tmp_path / "run.json", PRISM_RUN)
        out = tmp_path / "report.json"
        code = main(
            ["solve", "--config", cfg, "--mesh", "4,8", "--tol", "0.05",
             "--out", str(out)]
        )
        assert code == 0
        assert json.loads(out.read_text())["mesh_used"] in (4, 8)


class TestVerify:
    def test_zero_gap_allocation(self, tmp_path):
        from multicake.geometry import CakeConfig, make_division
        from multicake.preferences import log_utility_model

        rows = [[0.5, 0.5], [0.25, 0.25, 0.5]]
        models = [log_utility_model(7), log_utility_model(107)]
        d = make_division(CakeConfig.of(2, 3), rows)
        alloc = {str(i): list(m.prefer(d).picks) for i, m in enumerate(models)}
        division = write(tmp_path / "division.json", rows)
        allocation = write(tmp_path / "alloc.json", alloc)
        players = write(
            tmp_path / "players.json",
            [
                {"kind": "log_utility", "seed": 7},
                {"kind": "log_utility", "seed": 107},
            ],
        )
        out = tmp_path / "report.json"
        code = main(
            ["verify", division, allocation, players, "--tol", "1e-9",
             "--out", str(out)]
        )
        report = json.loads(out.read_text())
        assert report["delta"] == 0.0
        assert code == 0

    def test_envious_allocation_exit_two(self, tmp_path):
        division = write(tmp_path / "division.json", [[0.5, 0.5], [0.5, 0.5]])
        allocation = write(tmp_path / "alloc.json", {"0": [0, 1], "1": [1, 0]})
        players = write(
            tmp_path / "players.json",
            [
                {"kind": "linked_bonus", "beta": 0.5, "mode": "same"},
                {"kind": "linked_bonus", "beta": 0.5, "mode": "different"},
            ],
        )
        assert main(["verify", division, allocation, players, "--tol", "0.01"]) == 2

    def test_parse_failure_exit_one(self, tmp_path):
        bad = tmp_path / "division.json"
        bad.write_text("not json")
        allocation = write(tmp_path / "alloc.json", {"0": [0, 0]})
        players = write(tmp_path / "players.json", [])
        assert main(["verify", str(bad), allocation, players]) == 1


class TestSweep:
    def test_certify_square(self, tmp_path):
        cfg = write(
            tmp_path / "run.json", {**SQUARE_RUN, "grid": 40}
        )
        out = tmp_path / "cert.json"
        assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
        cert = json.loads(out.read_text())
        assert cert["certified"] is True
        assert cert["divisions_examined"] == 41 * 41

    def test_collect_prism_with_csv(self, tmp_path):
        run = {
            "config": [2, 3],
            "players": [
                {"kind": "log_utility", "seed": 1},
                {"kind": "log_utility", "seed": 101},
            ],
            "grid": 12,
        }
        cfg = write(tmp_path / "run.json", run)
        out = tmp_path / "cert.json"
        csv_path = tmp_path / "hits.csv"
        code = main(
            ["sweep", "--config", cfg, "--collect", "--csv", str(csv_path),
             "--out", str(out)]
        )
        assert code == 0
        cert = json.loads(out.read_text())
        assert cert["solutions_found"] >= 1
        assert csv_path.exists()

    def test_failed_certification_exit_two(self, tmp_path):
        run = {
            "config": [2, 3],
            "players": [
                {"kind": "log_utility", "seed": 1},
                {"kind": "log_utility", "seed": 101},
            ],
            "grid": 12,
        }
        cfg = write(tmp_path / "run.json", run)
        assert main(["sweep", "--config", cfg]) == 2


class TestLemma:
    def test_small_run_passes(self, tmp_path):
        out = tmp_path / "lemma.json"
        code = main(["lemma", "--seed", "3", "--count", "40", "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["all_passed"] is True
        assert doc["random_sets_checked"] == 40
        assert doc["min_max_component"] >= 6
        assert doc["center_cell"]["max_component"] == 10

    def test_byte_identical_reruns(self, tmp_path):
        out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
        main(["lemma", "--seed", "3", "--count", "15", "--out", str(out1)])
        main(["lemma", "--seed", "3", "--count", "15", "--out", str(out2)])
        a = json.loads(out1.read_text())
        b = json.loads(out2.read_text())
        a.pop("runtime_seconds")
        b.pop("runtime_seconds")
        assert a == b


class TestExploreM4:
    def test_coarse_grid_completes(self, tmp_path):
        out = tmp_path / "m4.json"
        assert main(["explore-m4", "--grid", "2", "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["divisions_examined"] == 10**4
        assert doc["solutions_found"] >= 0

    def test_cap_exceeded_exit_one(self, tmp_path):
        assert main(["explore-m4", "--grid", "6", "--cap", "1000"]) == 1

    def test_deterministic(self, tmp_path):
        out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
        main(["explore-m4", "--grid", "2", "--out", str(out1)])
        main(["explore-m4", "--grid", "2", "--out", str(out2)])
        a = json.loads(out1.read_text())
        b = json.loads(out2.read_text())
        a.pop("runtime_seconds")
        b.pop("runtime_seconds")
        assert a == b
