"""Factory definitions for diabolo value types."""

import contextlib
import tempfile
from pathlib import Path

import factory
import numpy as np

from diabolo.models import ContactStatus, DiaboloState, ModelParams, StickPair, Trace, TraceMeta
from diabolo.services.player import GoalWaypoint, OptimizerConfig
from diabolo.services.synthetic import generate_synthetic
from diabolo.services.templates import get_template
from diabolo.services.traces import dumps_trace
from diabolo.services.trajectory import ControlPoint, StickTrajectory


@contextlib.contextmanager
def temporary_trace_file(content, suffix=".csv"):
    """Context manager for a temporary trace file; content is text or a Trace."""
    if isinstance(content, Trace):
        content = dumps_trace(content)
    with tempfile.NamedTemporaryFile(mode="w", suffix=suffix, delete=False, encoding="utf-8") as f:
        f.write(content)
        temp_path = f.name

    try:
        yield temp_path
    finally:
        with contextlib.suppress(Exception):
            Path(temp_path).unlink()


class ModelParamsFactory(factory.Factory):
    """ModelParams at the coarse 5 ms step, which keeps rollouts in tests fast."""

    class Meta:
        model = ModelParams

    dt = 0.005


class StickPairFactory(factory.Factory):
    """Horizontal sticks 0.6 m apart at 1.2 m height.

    Usage examples:
        sticks = StickPairFactory()
        sticks = StickPairFactory(left=(0, 0.5, 1), right=(0, -0.5, 1))
    """

    class Meta:
        model = StickPair

    left = factory.LazyFunction(lambda: np.array([0.0, 0.3, 1.2]))
    right = factory.LazyFunction(lambda: np.array([0.0, -0.3, 1.2]))


class DiaboloStateFactory(factory.Factory):
    class Meta:
        model = DiaboloState

    position = factory.LazyFunction(lambda: np.array([0.0, 0.0, 0.54]))
    velocity = factory.LazyFunction(lambda: np.zeros(3))
    omega = 0.0
    status = ContactStatus.ON_STRING
    time = 0.0


class FlyingStateFactory(DiaboloStateFactory):
    """A diabolo thrown upwards well above the sticks."""

    position = factory.LazyFunction(lambda: np.array([0.0, 0.0, 2.0]))
    velocity = factory.LazyFunction(lambda: np.array([0.3, 0.0, 2.0]))
    status = ContactStatus.FLYING


class GoalWaypointFactory(factory.Factory):
    class Meta:
        model = GoalWaypoint

    position = factory.LazyFunction(lambda: np.array([0.1, 0.0, 0.6]))


class OptimizerConfigFactory(factory.Factory):
    class Meta:
        model = OptimizerConfig

    iterations = 50
    seed = factory.Sequence(lambda n: n)


class ControlPointFactory(factory.Factory):
    class Meta:
        model = ControlPoint

    t = factory.Sequence(lambda n: 0.25 * n)
    left = factory.LazyFunction(lambda: np.array([0.0, 0.3, 1.2]))
    right = factory.LazyFunction(lambda: np.array([0.0, -0.3, 1.2]))


class StickTrajectoryFactory(factory.Factory):
    """Still sticks for one second, through three control points."""

    class Meta:
        model = StickTrajectory

    points = factory.LazyFunction(
        lambda: tuple(ControlPoint(t, (0.0, 0.3, 1.2), (0.0, -0.3, 1.2)) for t in (0.0, 0.5, 1.0))
    )
    l_string = 1.45


class TraceMetaFactory(factory.Factory):
    class Meta:
        model = TraceMeta

    diabolo = "Red"
    l_string = 1.45
    sample_rate = 200.0
    motion_class = "hang"


class TraceFactory(factory.Factory):
    """Recorded-style trace (positions only) of a diabolo hanging under still sticks.

    Usage examples:
        trace = TraceFactory()
        trace = TraceFactory(samples=50, meta__motion_class="swing")
    """

    class Meta:
        model = Trace

    class Params:
        samples = 20

    meta = factory.SubFactory(TraceMetaFactory)
    t = factory.LazyAttribute(lambda o: np.arange(o.samples) / o.meta.sample_rate)
    left = factory.LazyAttribute(lambda o: np.tile([0.0, 0.3, 1.2], (o.samples, 1)))
    right = factory.LazyAttribute(lambda o: np.tile([0.0, -0.3, 1.2], (o.samples, 1)))
    diabolo = factory.LazyAttribute(lambda o: np.tile([0.0, 0.0, 1.2 - np.sqrt(0.725**2 - 0.3**2)], (o.samples, 1)))


def synthetic_trace(template="swing", duration=1.0, seed=0, params=None):
    """Ground-truth trace of a motion template, at the factory's 5 ms step by default."""
    return generate_synthetic(get_template(template), params or ModelParamsFactory(), duration, seed)
