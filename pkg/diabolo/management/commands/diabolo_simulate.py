import numpy as np

from diabolo.fileutils import RunTimer
from diabolo.services.evaluation import aligned, initial_state_from_trace, params_for_trace, stick_pairs
from diabolo.services.player import rollout_sticks
from diabolo.services.synthetic import generate_synthetic
from diabolo.services.templates import TEMPLATES, get_template
from diabolo.services.traces import load_trace, trace_from_states, write_trace

from ._base import DiaboloCommand


class Command(DiaboloCommand):
    help = "Roll the predictor along a motion template or a recorded trace's sticks and write the result as a trace"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        source = parser.add_mutually_exclusive_group()
        source.add_argument(
            "--template",
            default=None,
            help=f"Motion template to run (one of {', '.join(TEMPLATES)}; default hang)",
        )
        source.add_argument("--trace", default=None, help="Replay the stick motion of a recorded trace")
        parser.add_argument("--duration", type=float, default=2.0, help="Seconds to simulate for a template")

    def run(self, **options):
        cfg = self.load_config(options)
        timer = RunTimer("diabolo_simulate", options["config"], options["seed"])

        if options["trace"]:
            recorded = load_trace(options["trace"])
            timer.inputs.append(options["trace"])
            params = params_for_trace(cfg.model, recorded)
            recorded = aligned(recorded, params)
            sticks = stick_pairs(recorded, params.l_string)
            states = rollout_sticks(initial_state_from_trace(recorded, 0, params, sticks[0]), sticks, params)
            trace = trace_from_states(states, sticks, recorded.meta)
            source = options["trace"]
        else:
            template = get_template(options["template"] or "hang")
            trace = generate_synthetic(
                template,
                cfg.model,
                options["duration"],
                seed=options["seed"],
                sticks=cfg.sticks,
                diabolo=cfg.trace.diabolo,
            )
            source = f"template {template.name}"

        out = write_trace(trace, options["out"])
        timer.outputs.append(str(out))
        timer.write(out, source=source, samples=len(trace))

        final_speed = float(np.linalg.norm(trace.velocity[-1]))
        self.stdout.write(self.style.SUCCESS(f"Simulated {trace.duration:.3f} s from {source}: {out}"))
        self.stdout.write(
            f"Final status {trace.status[-1]}, speed {final_speed:.4f} m/s, omega {trace.omega[-1]:.2f} rad/s"
        )
