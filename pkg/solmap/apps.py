from django.apps import AppConfig


class SolmapConfig(AppConfig):
    name = 'solmap'
    verbose_name = 'Solution-map laboratory'
