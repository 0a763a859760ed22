# geolab/errors.py
"""
Errores de precondición de las operaciones del laboratorio.

Los invariantes de los tipos (PointSet, TubeSet, ...) se validan con
``django.core.exceptions.ValidationError`` en su ``clean()``; aquí quedan
los errores propios de cada operación.
"""


class GeolabError(ValueError):
    """Base de todos los errores de operación."""


class ScaleError(GeolabError):
    """Escala fuera de rango o por debajo de la resolución de los datos."""


class EmptyInputError(GeolabError):
    pass


class DegenerateInputError(GeolabError):
    pass


class SeparationError(GeolabError):
    """El conjunto generado violaría la δ-separación."""


class UnrepresentableLineError(GeolabError):
    """Recta vertical: no tiene forma pendiente-intercepto."""


class FloorError(GeolabError):
    """Punto demasiado cerca del eje x₂ = 0 para la aplanación proyectiva."""


class UndefinedRegimeError(GeolabError):
    """s + t ≤ 1: la cota de Fu–Ren es vacía."""


class CertificationError(GeolabError):
    def __init__(self, message, profile=None):
        super().__init__(message)
        self.profile = profile


class GuardrailExceeded(RuntimeError):
    def __init__(self, stage: str, estimate: int, limit: int):
        self.stage = stage
        self.estimate = int(estimate)
        self.limit = int(limit)
        super().__init__(
            f"[{stage}] ~{self.estimate:.3e} pruebas primitivas superan el tope "
            f"{self.limit:.0e}; reduce k_max o el tamaño de los conjuntos."
        )
