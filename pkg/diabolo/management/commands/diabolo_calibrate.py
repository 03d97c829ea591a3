from dataclasses import replace

from diabolo.conf import dumps_model
from diabolo.fileutils import RunTimer, atomic_write_text
from diabolo.services.calibration import fit, free_param_values

from ._base import DiaboloCommand, load_traces


class Command(DiaboloCommand):
    help = "Fit model parameters to recorded traces and write them as a [model] config table"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("traces", nargs="+", help="Trace files or directories of *.csv traces")
        parser.add_argument("--horizon", type=float, default=None, help="Prediction horizon in seconds")
        parser.add_argument("--stride", type=float, default=None, help="Spacing of start instants in seconds")
        parser.add_argument("--iterations", type=int, default=None, help="Override optimizer.iterations")

    def run(self, **options):
        cfg = self.load_config(options)
        optimizer_cfg = cfg.optimizer
        if options["iterations"] is not None:
            optimizer_cfg = replace(optimizer_cfg, iterations=options["iterations"])
        timer = RunTimer("diabolo_calibrate", options["config"], optimizer_cfg.seed)

        loaded = load_traces(options["traces"])
        timer.inputs.extend(str(path) for path, _ in loaded)
        problem = cfg.calibration_problem(
            [trace for _, trace in loaded], horizon=options["horizon"], stride=options["stride"]
        )

        pbar, progress_callback = self.progress_bar(optimizer_cfg.iterations, "Calibrating", options["verbosity"])
        try:
            params, value = fit(problem, optimizer_cfg, base=cfg.model, progress_callback=progress_callback)
        finally:
            pbar.close()

        fitted = free_param_values(params, problem.fittable_params())
        text = dumps_model(
            params,
            comments={
                "objective_m": f"{value:.12g}",
                "free_params": ", ".join(fitted) or "none",
                "traces": len(loaded),
            },
        )
        out = atomic_write_text(options["out"], text)
        timer.outputs.append(str(out))
        timer.write(out, objective=value, fitted=fitted)

        self.stdout.write(self.style.SUCCESS(f"Objective {value:.6g} m, parameters written to {out}"))
        for name, fitted_value in fitted.items():
            self.stdout.write(f"  {name} = {fitted_value:.6g}")
