"""
Django system checks for the diabolo app.

These validate settings.DIABOLO at startup, before any command runs.
"""

from django.conf import settings
from django.core.checks import Error, Warning, register

from diabolo.conf import unknown_keys
from diabolo.models import ModelParams

DAMPING_FACTORS = ("damp_pull_pre", "damp_pull_post", "damp_on_string")

# Timestep range the model was designed for.
DT_RANGE = (0.001, 0.005)  # s


def _model_settings():
    diabolo = getattr(settings, "DIABOLO", {}) or {}
    model = diabolo.get("model", {}) if isinstance(diabolo, dict) else {}
    return diabolo, model if isinstance(model, dict) else {}


def _number(value):
    return value if isinstance(value, int | float) and not isinstance(value, bool) else None


@register()
def check_settings_keys(app_configs, **kwargs):
    """Error on unknown sections or keys in settings.DIABOLO."""
    diabolo, _ = _model_settings()
    if not isinstance(diabolo, dict):
        return [
            Error(
                "settings.DIABOLO must be a dict of configuration sections",
                hint="Use the same sections as the TOML config file, e.g. {'model': {'dt': 0.001}}.",
                id="diabolo.E001",
            )
        ]
    problems = unknown_keys(diabolo)
    if not problems:
        return []
    return [
        Error(
            f"Unknown keys in settings.DIABOLO: {', '.join(problems)}",
            hint="Check the spelling against the configuration sections in docs/configuration.md.",
            id="diabolo.E001",
        )
    ]


@register()
def check_damping_factors(app_configs, **kwargs):
    """Damping factors are per-step multipliers and must lie in (0, 1]."""
    _, model = _model_settings()
    errors = []
    for name in DAMPING_FACTORS:
        if name not in model:
            continue
        value = _number(model[name])
        if value is None or not 0.0 < value <= 1.0:
            errors.append(
                Error(
                    f"settings.DIABOLO['model']['{name}'] must be in (0, 1], got {model[name]!r}",
                    id="diabolo.E002",
                )
            )
    return errors


@register()
def check_contact_thresholds(app_configs, **kwargs):
    """The loose threshold must stay below the flying threshold."""
    _, model = _model_settings()
    if "c_loose" not in model and "c_flying" not in model:
        return []
    defaults = ModelParams()
    c_loose = _number(model.get("c_loose", defaults.c_loose))
    c_flying = _number(model.get("c_flying", defaults.c_flying))
    if c_loose is None or c_flying is None or c_loose >= c_flying:
        return [
            Error(
                f"settings.DIABOLO['model'] needs c_loose < c_flying, got {c_loose!r} and {c_flying!r}",
                hint="The thresholds form a hysteresis band; the defaults are 0.01 m and 0.05 m.",
                id="diabolo.E003",
            )
        ]
    return []


@register()
def check_timestep(app_configs, **kwargs):
    """dt and l_string must be positive; dt outside 1-5 ms only warns."""
    _, model = _model_settings()
    errors = []
    for name in ("dt", "l_string"):
        if name not in model:
            continue
        value = _number(model[name])
        if value is None or value <= 0:
            errors.append(
                Error(
                    f"settings.DIABOLO['model']['{name}'] must be positive, got {model[name]!r}",
                    id="diabolo.E004",
                )
            )
    dt = _number(model.get("dt"))
    if dt is not None and dt > 0 and not DT_RANGE[0] <= dt <= DT_RANGE[1]:
        errors.append(
            Warning(
                f"Timestep dt={dt} s is outside the {DT_RANGE[0] * 1e3:g}-{DT_RANGE[1] * 1e3:g} ms range",
                hint="Damping factors are per step; calibrate again after changing dt.",
                id="diabolo.W001",
            )
        )
    return errors
