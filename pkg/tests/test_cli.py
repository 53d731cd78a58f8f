import io
import json
import sys

import pytest

from radioplan.cli import main
from radioplan.geodata import GeoBBox
from radioplan.jsonio import read_json, write_json_atomic
from radioplan.planner import NetworkPlan, PlanningConfig, check_plan_invariants
from radioplan.propagation import AntennaPattern, BaseStation, generate_radio_map
from radioplan.rendering import radio_map_payload
from radioplan.scene import create_grid, load_environment
from radioplan.scenarios import SCENARIOS, scenario_document


@pytest.fixture
def scene_path(tmp_path):
    osm = tmp_path / "area.osm"
    osm.write_bytes(scenario_document("suburban"))
    scene = tmp_path / "scene.json"
    assert main(["build-env", "--osm", str(osm), "--out", str(scene)]) == 0
    return scene


@pytest.fixture
def stations_path(tmp_path):
    path = tmp_path / "stations.json"
    write_json_atomic(path, {"stations": [
        {"id": "bs-1", "x_m": -60.0, "y_m": 10.0, "azimuth_deg": 90.0},
        {"id": "bs-2", "x_m": 60.0, "y_m": -40.0, "azimuth_deg": 270.0}]})
    return path


class TestFetchOsm:
    def test_bundled_area(self, tmp_path):
        out = tmp_path / "a.osm"
        assert main(["fetch-osm", "--area", "suburban", "--out", str(out)]) == 0
        assert out.read_bytes() == scenario_document("suburban")

    def test_fixture_dir_transport_with_cache(self, tmp_path):
        bbox = GeoBBox(22.58, 113.96, 22.60, 113.98)
        fixtures = tmp_path / "fixtures"
        fixtures.mkdir()
        payload = b'<osm version="0.6"><node id="1" lat="22.59" lon="113.97"/></osm>'
        (fixtures / f"{bbox.key()}.osm").write_bytes(payload)
        out = tmp_path / "b.osm"
        code = main(["fetch-osm", "--bbox", "22.58,113.96,22.60,113.98",
                     "--out", str(out), "--fixture-dir", str(fixtures),
                     "--cache-dir", str(tmp_path / "cache")])
        assert code == 0
        assert out.read_bytes() == payload

    def test_invalid_bbox_is_data_error(self, tmp_path):
        code = main(["fetch-osm", "--bbox", "23.0,113.96,22.58,113.98",
                     "--out", str(tmp_path / "x.osm")])
        assert code == 2

    def test_missing_bbox_and_area(self, tmp_path):
        assert main(["fetch-osm", "--out", str(tmp_path / "x.osm")]) == 2


class TestBatchPipeline:
    def test_full_pipeline_reaches_compliant_plan(self, tmp_path, scene_path):
        plan_cfg = tmp_path / "plan-config.json"
        write_json_atomic(plan_cfg, {
            "resolution_m": 10.0,
            "planning": {"iteration_budget": 60, "max_stations": 4},
            "initial_stations": {"count": 3, "seed": 1}})
        plan_out = tmp_path / "plan.json"
        code = main(["plan", "--scene", str(scene_path), "--config",
                     str(plan_cfg), "--seed", "42", "--out", str(plan_out)])
        assert code == 0
        plan = NetworkPlan.from_dict(read_json(plan_out))
        assert plan.compliant
        assert plan.seed == 42
        check_plan_invariants(plan.stations,
                              PlanningConfig(max_stations=4))
        # Planned stations drive the map stages downstream.
        stations_path = tmp_path / "planned-stations.json"
        write_json_atomic(stations_path,
                          {"stations": [s.to_dict() for s in plan.stations]})
        map_out = tmp_path / "map.json"
        sinr_out = tmp_path / "sinr.json"
        assert main(["radiomap", "--scene", str(scene_path), "--stations",
                     str(stations_path), "--resolution", "10",
                     "--out", str(map_out)]) == 0
        assert main(["sinr", "--scene", str(scene_path), "--stations",
                     str(stations_path), "--resolution", "10",
                     "--out", str(sinr_out)]) == 0
        report = read_json(tmp_path / "sinr-report.json")
        assert report["pl_compliant_fraction"] >= 0.8

    def test_radiomap_matches_direct_library_call(self, tmp_path, scene_path,
                                                  stations_path):
        out = tmp_path / "map.json"
        assert main(["radiomap", "--scene", str(scene_path), "--stations",
                     str(stations_path), "--resolution", "10",
                     "--out", str(out)]) == 0
        cli_payload = read_json(out)

        env = load_environment(scene_path)
        grid = create_grid(env, 10.0)
        stations = [BaseStation.from_dict(d)
                    for d in read_json(stations_path)["stations"]]
        direct = radio_map_payload(
            generate_radio_map(grid, stations, env, AntennaPattern()))
        assert cli_payload == json.loads(json.dumps(direct))

    def test_png_written(self, tmp_path, scene_path, stations_path):
        out = tmp_path / "map.json"
        png = tmp_path / "map.png"
        assert main(["radiomap", "--scene", str(scene_path), "--stations",
                     str(stations_path), "--resolution", "10",
                     "--out", str(out), "--png", str(png)]) == 0
        assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


class TestExitCodes:
    def test_empty_stations_exit_2(self, tmp_path, scene_path):
        empty = tmp_path / "empty.json"
        write_json_atomic(empty, {"stations": []})
        code = main(["radiomap", "--scene", str(scene_path), "--stations",
                     str(empty), "--out", str(tmp_path / "x.json")])
        assert code == 2

    def test_empty_stations_message_names_list(self, tmp_path, scene_path,
                                               capsys):
        empty = tmp_path / "empty.json"
        write_json_atomic(empty, {"stations": []})
        main(["radiomap", "--scene", str(scene_path), "--stations", str(empty),
              "--out", str(tmp_path / "x.json")])
        err = capsys.readouterr().err
        assert "empty station list" in err

    def test_usage_error_exit_1(self):
        with pytest.raises(SystemExit) as exc:
            main(["radiomap"])  # missing required flags
        assert exc.value.code == 1
        with pytest.raises(SystemExit) as exc:
            main(["no-such-command"])
        assert exc.value.code == 1

    def test_missing_file_exit_2(self, tmp_path):
        code = main(["build-env", "--osm", str(tmp_path / "absent.osm"),
                     "--out", str(tmp_path / "scene.json")])
        assert code == 2


class TestPlanDeterminism:
    def test_seeded_plan_byte_identical(self, tmp_path, scene_path):
        cfg = tmp_path / "cfg.json"
        write_json_atomic(cfg, {"resolution_m": 10.0,
                                "planning": {"iteration_budget": 50,
                                             "max_stations": 3}})
        out1, out2 = tmp_path / "p1.json", tmp_path / "p2.json"
        assert main(["plan", "--scene", str(scene_path), "--config", str(cfg),
                     "--seed", "42", "--out", str(out1)]) == 0
        assert main(["plan", "--scene", str(scene_path), "--config", str(cfg),
                     "--seed", "42", "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()


class TestAgentRepl:
    def test_piped_prompts(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setattr(sys, "stdin", io.StringIO(
            "Import osm file of suburban\nCreate outdoor environment\nquit\n"))
        planning = tmp_path / "planning.json"
        write_json_atomic(planning, {"iteration_budget": 30, "max_stations": 3})
        code = main(["agent", "--backend", "mock",
                     "--project", str(tmp_path / "proj"),
                     "--session-id", "repl", "--planning", str(planning)])
        assert code == 0
        out = capsys.readouterr().out
        assert "[artifact]" in out
        assert "imported OSM" in out
        assert (tmp_path / "proj" / "sessions" / "repl" / "transcript.jsonl").exists()
