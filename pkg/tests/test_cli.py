import subprocess
import sys

from conftest import REPO_ROOT


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "prompt_controls.cli", *args],
        capture_output=True, text=True, cwd=REPO_ROOT,
    )


class TestReplayCommand:
    def test_matching_golden_exits_zero(self):
        result = run_cli("replay", "--scenario", "scenarios/fig1.scenario",
                         "--golden", "scenarios/fig1.golden")
        assert result.returncode == 0, result.stderr
        assert "matches golden" in result.stdout

    def test_mismatching_golden_exits_nonzero(self, tmp_path):
        bad = tmp_path / "bad.golden"
        bad.write_text("not the golden\n")
        result = run_cli("replay", "--scenario", str(REPO_ROOT / "scenarios/fig1.scenario"),
                         "--golden", str(bad))
        assert result.returncode == 1
        assert "mismatch" in result.stderr

    def test_missing_scenario_reports_error(self):
        result = run_cli("replay", "--scenario", "nope.scenario", "--golden", "x.golden")
        assert result.returncode == 1
        assert "replay failed" in result.stderr

    def test_update_golden_writes_file(self, tmp_path):
        out = tmp_path / "new.golden"
        result = run_cli("replay", "--scenario", str(REPO_ROOT / "scenarios/static3.scenario"),
                         "--golden", str(out), "--update-golden")
        assert result.returncode == 0
        assert out.read_text() == (REPO_ROOT / "scenarios/static3.golden").read_text()


class TestServeCommand:
    def test_replay_mode_without_fixtures_fails_at_startup(self):
        result = run_cli("serve", "--backend", "replay", "--port", "0")
        assert result.returncode == 2
        assert "fixtures" in result.stderr
