# dglab/settings.py — laboratorio de geometría de incidencias (escritorio)
from pathlib import Path
import os

BASE_DIR = Path(__file__).resolve().parent.parent

# ---- Local por defecto
DEBUG = True
SECRET_KEY = os.environ.get("DJANGO_SECRET_KEY", "dev-secret-key-solo-local")
ALLOWED_HOSTS = ["127.0.0.1", "localhost", "[::1]"]

# ---- Apps
# Sin admin, sesiones ni plantillas: el laboratorio solo expone comandos.
INSTALLED_APPS = [
    # Apps del proyecto
    "geolab",
]

MIDDLEWARE = []

# ---- Base de datos
# No hay persistencia de resultados: los reportes se escriben como JSON/CSV.
DATABASES = {}

# ---- i18n
LANGUAGE_CODE = "es-co"
TIME_ZONE = "America/Bogota"
USE_I18N = True
USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# ---- Salidas
# Carpeta por defecto para reportes de experimentos (--out la sobreescribe)
DGL_OUTPUT_DIR = Path(os.environ.get("DGL_OUTPUT_DIR", BASE_DIR / "runs"))

# ---- Parámetros del laboratorio
DGL = {
    # rango de escalas permitido (δ = 2^-k)
    "K_MIN": 2,
    "K_MAX": 16,
    # tope de pruebas geométricas primitivas por etapa
    "GUARDRAIL_TESTS": int(os.environ.get("DGL_GUARDRAIL_TESTS", 10**8)),
    # tope de pares enumerados en conjuntos de direcciones / rectas generadas
    "PAIR_CAP": 2 * 10**7,
    # holgura celda/bola de los números de recubrimiento
    "LATTICE_SLACK": 9,
    # constante explícita de la cota de solapamiento de T^r
    "TUBE_NET_OVERLAP": 64,
    # certificación post-hoc de conjuntos aleatorios
    "FROSTMAN_C_MAX": 16.0,
    "FROSTMAN_ATTEMPTS": 8,
    # hilos para el motor indexado y para barridos de escalas
    "WORKERS": int(os.environ.get("DGL_WORKERS", 4)),
    # rotación previa cuando alguna recta es casi vertical (dualidad)
    "PRE_ROTATION": 1.0,
    "VERTICAL_TOL": 1e-6,
    "DUALITY_TOL": 1e-9,
    # ε fijo de incidence-bound cuando la configuración no lo da
    "INCIDENCE_EPS": 0.5,
    # tolerancias por defecto de los veredictos
    "TOLERANCES": {
        "radial-exponent": 0.2,
        "furstenberg": 0.2,
        "beck": 0.4,
        "directions": 0.2,
        "incidence-bound": 0.0,
        "decompose-bench": 0.0,
    },
}

# ---- Logging
LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "simple": {"format": "%(asctime)s %(levelname)s %(name)s: %(message)s"},
    },
    "handlers": {
        "console": {"class": "logging.StreamHandler", "formatter": "simple"},
    },
    "loggers": {
        "geolab": {
            "handlers": ["console"],
            "level": os.environ.get("DGL_LOG_LEVEL", "INFO"),
            "propagate": False,
        },
    },
}
