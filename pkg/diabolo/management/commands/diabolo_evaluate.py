from pathlib import Path

from diabolo.fileutils import RunTimer
from diabolo.services.evaluation import STATISTICS, error_evolution, summarize_curves
from diabolo.services.traces import smooth, write_class_report, write_error_curve

from ._base import DiaboloCommand, load_traces


class Command(DiaboloCommand):
    help = "Compute prediction error curves for recorded traces and a per-motion-class report"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("traces", nargs="+", help="Trace files or directories of *.csv traces")
        parser.add_argument("--horizon", type=float, default=None, help="Prediction horizon in seconds")
        parser.add_argument("--stride", type=float, default=None, help="Spacing of start instants in seconds")
        parser.add_argument("--statistic", choices=STATISTICS, default=None, help="Per-trace value for the report")

    def run(self, **options):
        cfg = self.load_config(options)
        settings = cfg.evaluation
        horizon = settings.horizon if options["horizon"] is None else options["horizon"]
        stride = settings.stride if options["stride"] is None else options["stride"]
        statistic = options["statistic"] or settings.statistic
        timer = RunTimer("diabolo_evaluate", options["config"], options["seed"])
        out = Path(options["out"])

        labelled = []
        for path, trace in load_traces(options["traces"]):
            timer.inputs.append(str(path))
            trace = smooth(trace, settings.smoothing_window)
            curve = error_evolution(trace, cfg.model, horizon, stride)
            labelled.append((trace.meta.motion_class, curve))
            timer.outputs.append(str(write_error_curve(curve, out / f"{path.stem}.errors.csv")))
            self.stdout.write(
                f"{path.name}: {curve.start_count} starts, mean {curve.mean_error:.4f} m, "
                f"at {horizon:g} s {curve.terminal_error:.4f} m"
            )

        report = summarize_curves(labelled, statistic)
        timer.outputs.append(str(write_class_report(report, out / "class_report.csv")))
        timer.write(out, horizon=horizon, stride=stride, statistic=statistic)

        self.stdout.write(self.style.SUCCESS(f"Evaluated {len(labelled)} traces"))
        for row in report.itertuples(index=False):
            self.stdout.write(f"  {row.motion_class}: {row.mean_error:.4f} m ({row.traces} traces)")
