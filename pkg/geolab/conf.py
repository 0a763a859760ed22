# geolab/conf.py
from django.conf import settings

# Valores por defecto si settings.DGL no define alguna clave
DEFAULTS = {
    "K_MIN": 2,
    "K_MAX": 16,
    "GUARDRAIL_TESTS": 10**8,
    "PAIR_CAP": 2 * 10**7,
    "LATTICE_SLACK": 9,
    "TUBE_NET_OVERLAP": 64,
    "FROSTMAN_C_MAX": 16.0,
    "FROSTMAN_ATTEMPTS": 8,
    "WORKERS": 1,
    "PRE_ROTATION": 1.0,
    "VERTICAL_TOL": 1e-6,
    "DUALITY_TOL": 1e-9,
    "INCIDENCE_EPS": 0.5,
    "TOLERANCES": {},
}


def dgl(name: str):
    return getattr(settings, "DGL", {}).get(name, DEFAULTS[name])


def tolerance(experiment: str, default: float = 0.2) -> float:
    return dgl("TOLERANCES").get(experiment, default)
