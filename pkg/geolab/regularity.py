# geolab/regularity.py
"""
Perfiles de concentración y ajuste de exponentes.

Un perfil recorre las escalas diádicas r ∈ [δ, 1] y, para cada una, cuatro
retículas de lado r desplazadas por (0|r/2, 0|r/2). En cada celda Q mide

- (δ,s)-conjunto:   |P ∩ Q|_δ / (r^s · |P|_δ)
- Katz–Tao:         |P ∩ Q| / (r/δ)^s

y se queda con el máximo. La constante del perfil es el máximo sobre escalas.
Toda bola de radio r/4 cabe en alguna de las cuatro celdas desplazadas de
lado r (semilado r/2): cada bola queda dominada por una celda probada con
factor 2 en el radio.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DegenerateInputError, EmptyInputError, ScaleError
from .geom import (
    PointSet, Scale, TubeSet, cell_keys, covering_number, dyadic_radii, lattice_cells,
    line_cells, phi_bins,
)

logger = logging.getLogger(__name__)

# desplazamientos de las cuatro retículas, en unidades de r
SHIFTS: Tuple[Tuple[float, float], ...] = ((0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5))

KIND_COVERING = "covering"
KIND_KATZ_TAO = "katz-tao"


@dataclass(frozen=True)
class ProfileEntry:
    k_r: int
    r: float
    C: float
    count: int
    witness: Tuple[float, float]


@dataclass
class ConcentrationProfile:
    s: float
    kind: str
    entries: List[ProfileEntry] = field(default_factory=list)
    objects: str = "points"

    @property
    def C_star(self) -> float:
        return max(e.C for e in self.entries)

    @property
    def worst(self) -> ProfileEntry:
        # primer máximo: escala más gruesa en caso de empate
        best = self.entries[0]
        for e in self.entries[1:]:
            if e.C > best.C:
                best = e
        return best

    def certifies(self, C: float) -> bool:
        return self.C_star <= C

    def as_dict(self) -> dict:
        return {
            "s": self.s,
            "kind": self.kind,
            "objects": self.objects,
            "C_star": self.C_star,
            "entries": [
                {"k_r": e.k_r, "C": e.C, "count": e.count, "witness": list(e.witness)}
                for e in self.entries
            ],
        }


# ---------- núcleo ----------

def _delta_representatives(keys: np.ndarray) -> np.ndarray:
    """Índice del primer objeto de cada δ-celda ocupada."""
    _, first = np.unique(keys, return_index=True)
    return np.sort(first)


def _profile(coords: np.ndarray, delta: Scale, s: float, kind: str,
             cells_fn: Callable[[np.ndarray, float, Tuple[float, float]], np.ndarray],
             center_fn: Callable[[np.ndarray, float, Tuple[float, float]], Tuple[float, float]],
             objects: str) -> ConcentrationProfile:
    if len(coords) == 0:
        raise EmptyInputError("Perfil de un conjunto vacío.")
    if not (0.0 <= s <= 2.0):
        raise ScaleError(f"Exponente s = {s} fuera de [0, 2].")
    d = delta.value
    if kind == KIND_COVERING:
        reps = coords[_delta_representatives(cell_keys(cells_fn(coords, d, (0.0, 0.0))))]
        total = len(reps)
    else:
        reps = coords
        total = None

    profile = ConcentrationProfile(s=s, kind=kind, objects=objects)
    for k_r, r in dyadic_radii(delta):
        best: Optional[ProfileEntry] = None
        for sx, sy in SHIFTS:
            shift = (sx * r, sy * r)
            cells = cells_fn(reps, r, shift)
            keys = cell_keys(cells)
            uniq, first, counts = np.unique(keys, return_index=True, return_counts=True)
            i = int(np.argmax(counts))
            count = int(counts[i])
            if kind == KIND_COVERING:
                C = count / (r ** s * total)
            else:
                C = count / (r / d) ** s
            if best is None or C > best.C:
                best = ProfileEntry(k_r, r, C, count, center_fn(cells[first[i]], r, shift))
        profile.entries.append(best)
    logger.debug("perfil %s s=%s C*=%.4g", kind, s, profile.C_star)
    return profile


def _point_cells(coords, r, shift):
    return lattice_cells(coords, r, shift)


def _point_center(cell, r, shift):
    return (float((cell[0] + 0.5) * r + shift[0]), float((cell[1] + 0.5) * r + shift[1]))


def _tube_cells(coords, r, shift):
    _, width = phi_bins(r)
    return line_cells(coords[:, 0], coords[:, 1], r, (shift[0] * width / r, shift[1]))


def _tube_center(cell, r, shift):
    _, width = phi_bins(r)
    phi = (cell[0] + 0.5) * width + shift[0] * width / r
    return (float(math.fmod(phi, math.pi)), float((cell[1] + 0.5) * r + shift[1]))


# ---------- API ----------

def concentration_profile(P: PointSet, s: float) -> ConcentrationProfile:
    """Perfil (δ,s): |P ∩ Q|_δ / (r^s |P|_δ) por celda."""
    return _profile(P.xy, P.delta, s, KIND_COVERING, _point_cells, _point_center, "points")


def katz_tao_profile(P: PointSet, s: float) -> ConcentrationProfile:
    """Perfil Katz–Tao: |P ∩ Q| / (r/δ)^s por celda (conteo crudo)."""
    return _profile(P.xy, P.delta, s, KIND_KATZ_TAO, _point_cells, _point_center, "points")


def _tube_coords(T: TubeSet) -> np.ndarray:
    return np.column_stack([T.phi, T.c])


def tube_concentration_profile(T: TubeSet, s: float) -> ConcentrationProfile:
    """Mismo perfil sobre celdas (phi, c) del espacio de rectas."""
    return _profile(_tube_coords(T), T.delta, s, KIND_COVERING, _tube_cells, _tube_center, "tubes")


def tube_katz_tao_profile(T: TubeSet, s: float) -> ConcentrationProfile:
    return _profile(_tube_coords(T), T.delta, s, KIND_KATZ_TAO, _tube_cells, _tube_center, "tubes")


def cell_mass(P: PointSet, center: Tuple[float, float], r: float, s: float,
              kind: str = KIND_COVERING) -> float:
    """
    Re-evalúa la razón de concentración en la celda de lado r centrada en
    ``center`` (el testigo de un perfil). Reproduce exactamente la entrada del perfil.
    """
    d = P.delta.value
    xy = P.xy
    if kind == KIND_COVERING:
        xy = xy[_delta_representatives(cell_keys(lattice_cells(xy, d)))]
        total = len(xy)
    corner = (center[0] - r / 2, center[1] - r / 2)
    inside = np.all(lattice_cells(xy, r, corner) == 0, axis=1)
    count = int(inside.sum())
    if kind == KIND_COVERING:
        return count / (r ** s * total)
    return count / (r / d) ** s


# ---------- exponentes ----------

@dataclass
class ExponentFit:
    """Recta de mínimos cuadrados de log2 N contra k_r."""
    samples: List[Tuple[int, float]]
    slope: float
    intercept: float
    max_residual: float

    def as_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "max_residual": self.max_residual,
            "samples": [{"k_r": k, "N": n} for k, n in self.samples],
        }


def fit_exponent(samples: Sequence[Tuple[int, float]]) -> ExponentFit:
    samples = [(int(getattr(k, "k", k)), float(n)) for k, n in samples]
    if len(samples) < 3:
        raise DegenerateInputError("El ajuste necesita al menos 3 escalas.")
    ks = np.array([k for k, _ in samples], dtype=float)
    ns = np.array([n for _, n in samples], dtype=float)
    if np.all(ks == ks[0]):
        raise DegenerateInputError("Todas las muestras están en la misma escala.")
    if np.any(ns < 1):
        raise DegenerateInputError("Conteos menores que 1: log2 indefinido.")
    y = np.log2(ns)
    slope, intercept = np.polyfit(ks, y, 1)
    resid = y - (slope * ks + intercept)
    return ExponentFit(samples, float(slope), float(intercept), float(np.max(np.abs(resid))))


def covering_sweep(P: PointSet, ks: Sequence[int]) -> List[Tuple[int, int]]:
    """(k_r, N(P, 2^-k_r)) para las escalas dadas."""
    return [(k, covering_number(P, 2.0 ** -k)) for k in ks]


__all__ = [
    "ConcentrationProfile", "ProfileEntry", "ExponentFit",
    "concentration_profile", "katz_tao_profile",
    "tube_concentration_profile", "tube_katz_tao_profile",
    "cell_mass", "fit_exponent", "covering_sweep",
]
