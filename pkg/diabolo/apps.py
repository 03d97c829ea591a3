from django.apps import AppConfig


class DiaboloAppConfig(AppConfig):
    name = "diabolo"
    verbose_name = "Diabolo"

    def ready(self):
        # Import checks to register them
        from . import checks  # noqa: F401
