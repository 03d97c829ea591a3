from pathlib import Path

import numpy as np
from tqdm import tqdm

from diabolo.exceptions import ConfigError
from diabolo.fileutils import RunTimer
from diabolo.services.synthetic import generate_synthetic
from diabolo.services.templates import TEMPLATES, get_template
from diabolo.services.traces import write_trace

from ._base import DiaboloCommand


class Command(DiaboloCommand):
    help = "Generate labelled synthetic traces from motion templates"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            "--template",
            action="append",
            default=None,
            help=f"Template to generate, may be repeated (default: all of {', '.join(TEMPLATES)})",
        )
        parser.add_argument("--count", type=int, default=1, help="Traces per template")
        parser.add_argument("--duration", type=float, default=2.0, help="Seconds per trace")

    def run(self, **options):
        cfg = self.load_config(options)
        seed = 0 if options["seed"] is None else options["seed"]
        timer = RunTimer("diabolo_generate", options["config"], seed)
        templates = [get_template(name) for name in (options["template"] or TEMPLATES)]
        count = options["count"]
        if count < 1:
            raise ConfigError(f"--count must be at least 1, got {count}")

        rng = np.random.default_rng(seed)
        seeds = rng.integers(0, 2**32, size=(len(templates), count))
        out = Path(options["out"])
        jobs = [(template, i) for template in templates for i in range(count)]
        bar = tqdm(jobs, desc="Generating", leave=False, disable=options["verbosity"] < 1)
        for row, (template, i) in enumerate(bar):
            trace_seed = int(seeds[row // count, i])
            trace = generate_synthetic(
                template,
                cfg.model,
                options["duration"],
                seed=trace_seed,
                sticks=cfg.sticks,
                diabolo=cfg.trace.diabolo,
            )
            path = write_trace(trace, out / f"{template.name}_{i:03d}.csv")
            timer.outputs.append(str(path))
            if options["verbosity"] > 1:
                self.stdout.write(f"  {path} (seed {trace_seed})")

        timer.write(out, templates=[t.name for t in templates], count=count, duration=options["duration"])
        self.stdout.write(self.style.SUCCESS(f"Generated {len(jobs)} traces in {out}"))
