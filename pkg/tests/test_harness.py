"""Unit tests for scenario files, CSV emission, and the command layer."""

import numpy as np
import pytest

from obpclab import (
    InvalidParameterError,
    Scenario,
    SweepSpec,
    canonical_scenario,
    cmd_reproduce,
    cmd_simulate,
    cmd_stability,
    cmd_sweep,
    count_local_maxima,
    emit_scenario,
    lattice_in_ball,
    load_scenario,
    load_sweep,
    run_obpc,
    run_sweep,
    write_trajectory_csv,
)
from obpclab.cli import main as cli_main
from obpclab.harness import EXIT_CONFIG, EXIT_DIVERGENCE, EXIT_OK, csv_header


class TestScenarioFiles:
    def test_minimal_file_fills_benchmark_defaults(self, tmp_path):
        path = tmp_path / "sc.toml"
        path.write_text('plant = "example1"\nscheme = "obpc"\n')
        sc = load_scenario(path)
        assert sc.T == 0.1 and sc.N == 5
        assert sc.lam == 1.2
        assert sc.x0 == (11.0, 8.0) and sc.xi0 == (0.0, 0.0)

    def test_negative_period_names_offending_key(self, tmp_path):
        path = tmp_path / "sc.toml"
        path.write_text('plant = "example1"\n[grid]\nT = -1.0\n')
        with pytest.raises(InvalidParameterError, match="grid.T"):
            load_scenario(path)

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "sc.toml"
        path.write_text('plantt = "example1"\n')
        with pytest.raises(InvalidParameterError, match="plantt"):
            load_scenario(path)

    def test_parse_error_carries_location(self, tmp_path):
        path = tmp_path / "sc.toml"
        path.write_text('plant = "example1\n')
        with pytest.raises(InvalidParameterError):
            load_scenario(path)

    def test_round_trip(self, tmp_path):
        original = Scenario(plant="example2", scheme="standard_mpc",
                            span=2.0, seed=7, lam=1.5,
                            output_subsampling=0.02)
        path = tmp_path / "sc.toml"
        emit_scenario(original, path)
        assert load_scenario(path) == original

    def test_round_trip_custom_plant(self, tmp_path):
        original = Scenario(plant="custom", custom_A=((-1.0,),),
                            custom_B=((1.0,),), custom_C=((1.0,),),
                            x0=(2.0,), xi0=(0.0,), gains=(1.0,), span=1.0)
        path = tmp_path / "sc.toml"
        emit_scenario(original, path)
        assert load_scenario(path) == original


class TestSweepFiles:
    def test_lattice_stays_in_ball(self):
        points = lattice_in_ball(12.0, 5)
        assert len(points) == 25
        assert max(np.linalg.norm(p) for p in points) <= 12.0 + 1e-12

    def test_empty_grid_rejected(self):
        with pytest.raises(InvalidParameterError):
            SweepSpec(base=Scenario(span=1.0), initial_states=())

    def test_load_sweep_lattice(self, tmp_path):
        path = tmp_path / "sweep.toml"
        path.write_text(
            'nu = 15.0\n[base]\nplant = "example1"\nspan = 1.0\n'
            '[lattice]\nradius = 12.0\nside = 3\n'
        )
        spec = load_sweep(path)
        assert len(spec.initial_states) == 9
        assert spec.radius == pytest.approx(12.0)

    def test_run_sweep_order_is_deterministic(self):
        spec = SweepSpec(base=Scenario(span=0.5),
                         initial_states=((1.0, 0.0), (0.0, 2.0)))
        outcomes = run_sweep(spec)
        assert [s.x0 for s, _ in outcomes] == [(1.0, 0.0), (0.0, 2.0)]


class TestCsvEmission:
    def test_header_and_digits(self, tmp_path):
        result = run_obpc(Scenario(span=0.5))
        path = tmp_path / "traj.csv"
        write_trajectory_csv(result, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,x1,x2,xi1,xi2,u1,u2,y,norm_x,norm_err"
        assert len(lines) == 1 + result.times.size
        first = lines[1].split(",")
        assert first[0] == "0"
        assert float(first[1]) == 11.0
        # 17 significant digits survive a parse round trip
        for line in lines[1:]:
            for token in line.split(","):
                assert f"{float(token):.17g}" == token

    def test_zero_scenario_rows_all_zero(self, tmp_path):
        result = run_obpc(Scenario(span=0.5, x0=(0.0, 0.0), xi0=(0.0, 0.0)))
        path = tmp_path / "traj.csv"
        write_trajectory_csv(result, path)
        rows = np.array([
            [float(v) for v in line.split(",")]
            for line in path.read_text().splitlines()[1:]
        ])
        np.testing.assert_array_equal(rows[:, 1:], 0.0)

    def test_byte_identical_across_runs(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_trajectory_csv(run_obpc(Scenario(span=0.5, seed=3)), a)
        write_trajectory_csv(run_obpc(Scenario(span=0.5, seed=3)), b)
        assert a.read_bytes() == b.read_bytes()

    def test_header_stable_across_initial_states(self):
        a = run_obpc(Scenario(span=0.5))
        b = run_obpc(Scenario(span=0.5, x0=(1.0, -1.0)))
        assert csv_header(a) == csv_header(b)


class TestLocalMaxima:
    def test_counts_strict_peaks_only(self):
        t = np.linspace(0.0, 4 * np.pi, 400)
        assert count_local_maxima(np.abs(np.sin(t))) == 4
        assert count_local_maxima(np.exp(-t)) == 0
        plateau = np.array([0.0, 1.0, 1.0, 0.0])
        assert count_local_maxima(plateau) == 0

    def test_threshold_suppresses_noise_floor(self):
        t = np.linspace(0.0, 20.0, 1000)
        wiggle = np.exp(-t) + 1e-5 * np.cos(40.0 * t)
        assert count_local_maxima(wiggle, threshold=1e-3) < \
            count_local_maxima(wiggle)


class TestCommands:
    def test_simulate_writes_csv_and_summary(self, tmp_path):
        sc = tmp_path / "sc.toml"
        sc.write_text('plant = "example1"\nscheme = "obpc"\nspan = 0.5\n')
        out = tmp_path / "out"
        assert cmd_simulate(sc, out) == EXIT_OK
        assert (out / "trajectory.csv").exists()
        assert "final_norm_x" in (out / "summary.txt").read_text()

    def test_simulate_bad_file_exits_config(self, tmp_path):
        assert cmd_simulate(tmp_path / "missing.toml", tmp_path / "o") == EXIT_CONFIG

    def test_simulate_divergence_exits_3(self, tmp_path):
        sc = tmp_path / "sc.toml"
        sc.write_text(
            'plant = "custom"\nspan = 15.0\nx0 = [11.0]\nxi0 = [11.0]\n'
            '[custom]\nA = [[3.0]]\nB = [[1.0]]\nC = [[1.0]]\n'
            '[control]\nlower = 0.0\nupper = 0.0\n'
            '[observer]\ngains = [0.0]\n'
        )
        out = tmp_path / "out"
        assert cmd_simulate(sc, out) == EXIT_DIVERGENCE
        assert "failed" in (out / "summary.txt").read_text()

    def test_seed_override_changes_only_seed(self, tmp_path):
        sc = tmp_path / "sc.toml"
        sc.write_text('plant = "example1"\nseed = 1\nspan = 0.5\n')
        loaded = load_scenario(sc)
        assert loaded.seed == 1

    def test_stability_report_files(self, tmp_path):
        out = tmp_path / "report.txt"
        assert cmd_stability(1, out) == EXIT_OK
        text = out.read_text()
        assert "singular_inverse = true" in text
        assert "hurwitz = true" in text
        out2 = tmp_path / "report2.txt"
        assert cmd_stability(2, out2) == EXIT_OK
        assert "-0.6" in out2.read_text()

    def test_reproduce_rejects_bad_arguments(self, tmp_path):
        assert cmd_reproduce(3, "obpc", tmp_path) == EXIT_CONFIG
        assert cmd_reproduce(1, "dmc", tmp_path) == EXIT_CONFIG

    def test_canonical_scenarios(self):
        sc = canonical_scenario(1, "mpc")
        assert sc.plant == "example1" and sc.scheme == "standard_mpc"
        assert canonical_scenario(2, "obpc").span == 20.0

    def test_sweep_empty_grid_exits_config(self, tmp_path):
        sw = tmp_path / "sweep.toml"
        sw.write_text('[base]\nplant = "example1"\nspan = 0.5\n')
        assert cmd_sweep(sw, tmp_path / "out") == EXIT_CONFIG

    def test_sweep_zero_point_hits_floor(self, tmp_path):
        sw = tmp_path / "sweep.toml"
        sw.write_text(
            'points = [[0.0, 0.0]]\n'
            '[base]\nplant = "example1"\nspan = 0.5\n'
        )
        out = tmp_path / "out"
        assert cmd_sweep(sw, out) == EXIT_OK
        text = (out / "aggregate.txt").read_text()
        assert "delta2 = 9.9999999999999995e-07" in text
        assert "violations = 0" in text

    def test_cli_dispatch(self, tmp_path):
        sc = tmp_path / "sc.toml"
        sc.write_text('plant = "example1"\nspan = 0.5\n')
        out = tmp_path / "out"
        assert cli_main(["simulate", str(sc), "-o", str(out)]) == EXIT_OK
        assert cli_main(["--seed", "9", "stability", "--example", "1",
                        "-o", str(tmp_path / "r.txt")]) == EXIT_OK
