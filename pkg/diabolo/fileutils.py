import json
import logging
import os
import tempfile
import time
from datetime import UTC, datetime
from pathlib import Path

from diabolo import __version__
from diabolo.models import RunManifest

logger = logging.getLogger(__name__)


def atomic_write_text(path, text: str) -> Path:
    """Write text to path through a temporary file in the same directory and a rename.

    Readers never see a partially written file. The parent directory is created
    if needed.

    Raises:
        OSError: If the directory cannot be created or written to
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    logger.debug(f"Wrote {len(text)} characters to {path}")
    return path


def manifest_path(output) -> Path:
    """Manifest file that sits next to an output file or inside an output directory."""
    output = Path(output)
    if output.is_dir():
        return output / "manifest.json"
    return output.with_name(f"{output.name}.manifest.json")


class RunTimer:
    """Collects the reproducibility record of one command run."""

    def __init__(self, command: str, config=None, seed: int | None = None):
        self.command = command
        self.config = str(config) if config is not None else None
        self.seed = seed
        self.inputs: list[str] = []
        self.outputs: list[str] = []
        self.started_at = datetime.now(UTC).isoformat(timespec="seconds")
        self._start = time.monotonic()

    def manifest(self, **extra) -> RunManifest:
        manifest: RunManifest = {
            "command": self.command,
            "config": self.config,
            "inputs": sorted(self.inputs),
            "outputs": sorted(self.outputs),
            "seed": self.seed,
            "version": __version__,
            "started_at": self.started_at,
            "duration_s": round(time.monotonic() - self._start, 3),
        }
        if extra:
            manifest["extra"] = extra
        return manifest

    def write(self, output, **extra) -> Path:
        """Write the manifest next to output (or into it, for directories)."""
        path = manifest_path(output)
        return atomic_write_text(path, json.dumps(self.manifest(**extra), indent=2, sort_keys=True) + "\n")
