"""Service functions for diabolo simulation, trajectory search and evaluation."""

from diabolo.services import geometry, predictor

__all__ = [
    "geometry",
    "predictor",
]
