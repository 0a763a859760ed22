# geolab/analytics.py
import logging
import time
from contextlib import contextmanager
from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)


def track(
    nombre: str,
    categoria: str,
    etiqueta: str = "",
    valor: Optional[float] = None,
    extras: Optional[Dict[str, Any]] = None,
) -> None:
    """
    Registrador 'best-effort' de etapas del laboratorio.
    Nunca interrumpe un experimento por un fallo de logging.
    """
    try:
        data = {
            "nombre": nombre,
            "categoria": categoria,
            "etiqueta": etiqueta,
            "valor": valor,
            "extras": extras or {},
        }
        logger.info("[analytics] %s", data)
    except Exception:
        logger.exception("[analytics] Falló el track() pero se ignora para no cortar el experimento.")


@contextmanager
def stage(nombre: str, categoria: str, timings: Optional[Dict[str, float]] = None, **extras):
    """Mide el tiempo de pared de una etapa, lo guarda en ``timings`` y lo registra."""
    t0 = time.perf_counter()
    try:
        yield
    finally:
        elapsed = time.perf_counter() - t0
        if timings is not None:
            timings[nombre] = elapsed
        track(nombre, categoria, valor=round(elapsed, 6), extras=extras)
