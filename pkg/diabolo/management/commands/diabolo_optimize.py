from dataclasses import replace
from pathlib import Path

from diabolo.conf import load_goals
from diabolo.fileutils import RunTimer
from diabolo.models import TraceMeta
from diabolo.services.player import optimize, rollout_sticks, stick_samples
from diabolo.services.templates import TEMPLATES, get_template
from diabolo.services.traces import trace_from_states, write_history, write_trace, write_trajectory

from ._base import DiaboloCommand


class Command(DiaboloCommand):
    help = "Search for a stick trajectory whose predicted diabolo motion meets goal waypoints"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            "--template",
            default="circular_acceleration",
            help=f"Motion template for the initial state and seed trajectory (one of {', '.join(TEMPLATES)})",
        )
        parser.add_argument("--goals", default=None, help="TOML goals file (default: the template's goal pattern)")
        parser.add_argument("--duration", type=float, default=1.6, help="Length of the seed trajectory in seconds")
        parser.add_argument("--iterations", type=int, default=None, help="Override optimizer.iterations")

    def run(self, **options):
        cfg = self.load_config(options)
        optimizer_cfg = cfg.optimizer
        if options["iterations"] is not None:
            optimizer_cfg = replace(optimizer_cfg, iterations=options["iterations"])
        timer = RunTimer("diabolo_optimize", options["config"], optimizer_cfg.seed)

        template = get_template(options["template"])
        params = cfg.model
        initial = template.initial_state(cfg.sticks, params)
        seed_traj = template.seed_trajectory(cfg.sticks, options["duration"], params)
        if options["goals"]:
            waypoints = load_goals(options["goals"], initial.position)
            timer.inputs.append(options["goals"])
        else:
            waypoints = template.default_goals(initial)

        pbar, progress_callback = self.progress_bar(optimizer_cfg.iterations, "Optimizing", options["verbosity"])
        try:
            best, residual, history = optimize(
                initial, seed_traj, waypoints, params, optimizer_cfg, progress_callback=progress_callback
            )
        finally:
            pbar.close()

        out = Path(options["out"])
        outputs = [
            write_trajectory(best, out / "trajectory.csv"),
            write_history(history, out / "history.csv"),
        ]
        meta = TraceMeta(
            diabolo=cfg.trace.diabolo,
            l_string=params.l_string,
            sample_rate=1.0 / params.dt,
            motion_class=template.motion_class,
        )
        poses = stick_samples(best, params)
        states = rollout_sticks(initial, poses, params)
        outputs.append(write_trace(trace_from_states(states, poses, meta), out / "rollout.csv"))
        timer.outputs.extend(str(p) for p in outputs)
        timer.write(out, template=template.name, waypoints=len(waypoints), seed_residual=history[0], residual=residual)

        summary = f"Residual {history[0]:.6g} -> {residual:.6g} after {len(history) - 1} iterations"
        self.stdout.write(self.style.SUCCESS(summary))
        for path in outputs:
            self.stdout.write(f"  {path}")
