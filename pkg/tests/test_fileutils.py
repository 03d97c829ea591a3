"""
Tests for atomic writes and run manifests.
"""

import json

import pytest

from diabolo import __version__
from diabolo.fileutils import RunTimer, atomic_write_text, manifest_path


def test_atomic_write_creates_parents(tmp_path):
    path = atomic_write_text(tmp_path / "a" / "b" / "out.txt", "hello\n")

    assert path.read_text() == "hello\n"
    assert list(path.parent.iterdir()) == [path]


def test_atomic_write_replaces(tmp_path):
    path = tmp_path / "out.txt"
    path.write_text("old")

    atomic_write_text(path, "new")

    assert path.read_text() == "new"


def test_atomic_write_into_file_parent(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("")

    with pytest.raises(OSError):
        atomic_write_text(blocker / "out.txt", "x")


def test_manifest_path(tmp_path):
    assert manifest_path(tmp_path) == tmp_path / "manifest.json"
    assert manifest_path(tmp_path / "trace.csv") == tmp_path / "trace.csv.manifest.json"


def test_run_timer_manifest(tmp_path):
    """Test the manifest records sorted inputs and outputs plus extra values."""
    timer = RunTimer("diabolo_evaluate", config="diabolo.toml", seed=3)
    timer.inputs.extend(["b.csv", "a.csv"])
    timer.outputs.append("report.csv")

    path = timer.write(tmp_path, horizon=2.0)

    manifest = json.loads(path.read_text())
    assert path == tmp_path / "manifest.json"
    assert manifest["command"] == "diabolo_evaluate"
    assert manifest["inputs"] == ["a.csv", "b.csv"]
    assert manifest["seed"] == 3
    assert manifest["version"] == __version__
    assert manifest["extra"] == {"horizon": 2.0}
    assert manifest["duration_s"] >= 0


def test_run_timer_without_extra():
    manifest = RunTimer("diabolo_simulate").manifest()

    assert manifest["config"] is None
    assert "extra" not in manifest
