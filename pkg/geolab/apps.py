from django.apps import AppConfig


class GeolabConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'geolab'
    verbose_name = 'Laboratorio de incidencias discretizadas'
