"""
Django Diabolo - A Django app for simulating diabolo-string dynamics and searching stick trajectories.
"""

__version__ = "0.3.0"
