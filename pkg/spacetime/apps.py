from django.apps import AppConfig


class SpacetimeConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'spacetime'
    verbose_name = 'Space-time dG core'
