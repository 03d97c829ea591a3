import logging
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError
from tqdm import tqdm

from diabolo.conf import DiaboloConfig, load_config
from diabolo.exceptions import ConfigError, DataError, DiaboloError, ExitCode
from diabolo.models import Trace
from diabolo.services.traces import load_trace

logger = logging.getLogger(__name__)


class DiaboloCommand(BaseCommand):
    """Shared options, logging and error translation for the diabolo commands.

    Subclasses implement run(**options). Configuration errors exit with code 1,
    data and file errors with code 2.
    """

    def add_arguments(self, parser):
        parser.add_argument("--config", default=None, help="TOML configuration file")
        parser.add_argument("--seed", type=int, default=None, help="Seed for all randomness in this run")
        parser.add_argument("--out", required=True, help="Output file or directory")

    def setup_logger(self, options):
        verbosity = int(options["verbosity"])
        root_logger = logging.getLogger("")
        if verbosity > 1:
            root_logger.setLevel(logging.DEBUG)

    def load_config(self, options) -> DiaboloConfig:
        return load_config(options["config"]).with_seed(options["seed"])

    def handle(self, *args, **options):
        self.setup_logger(options)
        try:
            self.run(**options)
        except ConfigError as e:
            logger.error(f"{self.command_name()}: {e}")
            raise CommandError(str(e), returncode=ExitCode.CONFIG_ERROR.value) from e
        except (DiaboloError, OSError) as e:
            logger.error(f"{self.command_name()}: {e}")
            raise CommandError(str(e), returncode=ExitCode.DATA_ERROR.value) from e

    def run(self, **options):
        raise NotImplementedError

    def command_name(self) -> str:
        return self.__module__.rsplit(".", 1)[-1]

    def progress_bar(self, total: int, desc: str, verbosity: int):
        """tqdm bar and a progress_callback(iteration, best) that drives it."""
        pbar = tqdm(total=total, desc=desc, leave=False, disable=verbosity < 1)

        def progress_callback(iteration, best):
            pbar.n = iteration
            pbar.set_postfix(best=f"{best:.4g}", refresh=False)
            pbar.refresh()

        return pbar, progress_callback


def trace_paths(paths) -> list[Path]:
    """Trace files named directly or found (*.csv) in the given directories.

    Raises:
        DataError: If nothing usable is found
    """
    found = []
    for path in map(Path, paths):
        if path.is_dir():
            found.extend(sorted(p for p in path.glob("*.csv") if not p.name.endswith((".errors.csv", "_report.csv"))))
        elif path.is_file():
            found.append(path)
        else:
            raise DataError(f"No such trace file or directory: {path}")
    if not found:
        raise DataError(f"No trace files found in {', '.join(map(str, paths))}")
    return found


def load_traces(paths) -> list[tuple[Path, Trace]]:
    return [(path, load_trace(path)) for path in trace_paths(paths)]
