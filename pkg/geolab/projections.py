# geolab/projections.py
"""
Proyecciones radiales, conjuntos de direcciones y rectas generadas, la dualidad
punto-recta y la aplanación proyectiva.
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, NamedTuple, Optional, Tuple, Union

import numpy as np
from django.core.exceptions import ValidationError

from .conf import dgl
from .errors import (
    DegenerateInputError, EmptyInputError, FloorError, ScaleError, UnrepresentableLineError,
)
from .geom import (
    COORD_LIMIT, LineNF, Point2, PointSet, Rebox, Scale, TubeSet, count_cells,
    line_cells,
)
from .incidence import guard

logger = logging.getLogger(__name__)

TWO_PI = 2 * math.pi
# resolución con la que se identifican rectas generadas por pares distintos
LINE_DEDUP = 1e-9
# bloque de filas al enumerar pares
PAIR_BLOCK = 1 << 21


# ========= DIRECCIONES =========

@dataclass(eq=False)
class DirectionSet:
    """Ángulos en [0, 2π) (orientados) o [0, π) (no orientados)."""
    delta: Scale
    angles: np.ndarray
    oriented: bool = True
    sampled: bool = False

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=float).reshape(-1)
        self.clean()

    @property
    def period(self) -> float:
        return TWO_PI if self.oriented else math.pi

    def clean(self):
        if self.angles.size and (self.angles.min() < 0 or self.angles.max() >= self.period):
            raise ValidationError("Ángulos fuera de su rango.")

    def __len__(self):
        return len(self.angles)

    def bins(self, r: float) -> np.ndarray:
        m = max(1, math.ceil(self.period / r - 1e-9))
        return np.floor(self.angles / (self.period / m)).astype(np.int64) % m

    def covering(self, r: float) -> int:
        if r < self.delta.value:
            raise ScaleError(f"r = {r} por debajo de δ = {self.delta.value}.")
        return int(len(np.unique(self.bins(r))))


def _wrap(angles: np.ndarray, period: float) -> np.ndarray:
    a = np.mod(angles, period)
    return np.where(a >= period, 0.0, a)


def radial_project(x: Point2, Y: PointSet) -> DirectionSet:
    """Direcciones (y − x)/|y − x| para y ∈ Y con |y − x| > δ/2."""
    v = Y.xy - np.array([x.x, x.y])
    far = np.hypot(v[:, 0], v[:, 1]) > Y.delta.value / 2
    if not far.any():
        raise EmptyInputError("Y no tiene puntos lejos del punto de vista.")
    return DirectionSet(Y.delta, _wrap(np.arctan2(v[far, 1], v[far, 0]), TWO_PI), oriented=True)


def projection_covering(x: Point2, Y: PointSet, r: float) -> int:
    if r < Y.delta.value:
        raise ScaleError(f"r = {r} por debajo de δ = {Y.delta.value}.")
    return radial_project(x, Y).covering(r)


class Viewpoint(NamedTuple):
    point: Point2
    covering: int
    index: int


def best_viewpoint(X: PointSet, Y: PointSet, r: float) -> Viewpoint:
    """argmax_x N(π_x(Y), r); empates por índice de X."""
    if len(X) == 0:
        raise EmptyInputError("X vacío.")
    if r < Y.delta.value:
        raise ScaleError(f"r = {r} por debajo de δ = {Y.delta.value}.")
    guard("punto de vista radial", len(X) * len(Y))
    best: Optional[Viewpoint] = None
    for i, x in enumerate(X.points):
        try:
            n = projection_covering(x, Y, r)
        except EmptyInputError:
            n = 0
        if best is None or n > best.covering:
            best = Viewpoint(x, n, i)
    return best


def _pair_blocks(X: PointSet, seed: int) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
    """
    Bloques (ángulo de dirección mod 2π, índice del punto base) de los pares
    {i < j}. Con más de PAIR_CAP pares se recorren PAIR_CAP pares muestreados
    con la semilla.
    """
    n = len(X)
    xy = X.xy
    cap = dgl("PAIR_CAP")
    if n * (n - 1) // 2 <= cap:
        i = 0
        while i < n - 1:
            # filas i..j−1 con a lo sumo PAIR_BLOCK pares
            rows, size = [], 0
            while i < n - 1 and (not rows or size + (n - 1 - i) <= PAIR_BLOCK):
                rows.append(i)
                size += n - 1 - i
                i += 1
            iu = np.concatenate([np.full(n - 1 - r, r) for r in rows])
            ju = np.concatenate([np.arange(r + 1, n) for r in rows])
            v = xy[ju] - xy[iu]
            yield np.arctan2(v[:, 1], v[:, 0]), iu
        return
    rng = np.random.default_rng(seed)
    for a in range(0, cap, PAIR_BLOCK):
        m = min(PAIR_BLOCK, cap - a)
        iu, ju = rng.integers(0, n, m), rng.integers(0, n, m)
        keep = iu != ju
        iu, ju = np.minimum(iu[keep], ju[keep]), np.maximum(iu[keep], ju[keep])
        v = xy[ju] - xy[iu]
        yield np.arctan2(v[:, 1], v[:, 0]), iu


def _is_sampled(X: PointSet) -> bool:
    n = len(X)
    sampled = n * (n - 1) // 2 > dgl("PAIR_CAP")
    if sampled:
        logger.info("pares: %d puntos superan el tope de %d pares, se muestrea", n, dgl("PAIR_CAP"))
    return sampled


def direction_set(X: PointSet, r: float, seed: int = 0) -> Tuple[DirectionSet, int]:
    """
    Direcciones no orientadas de todos los pares y su número de recubrimiento.
    El DirectionSet guarda un representante (el primero) por arco ocupado.
    """
    if len(X) < 2:
        raise DegenerateInputError("Se necesitan al menos dos puntos.")
    if r < X.delta.value:
        raise ScaleError(f"r = {r} por debajo de δ = {X.delta.value}.")
    sampled = _is_sampled(X)
    m = max(1, math.ceil(math.pi / r - 1e-9))
    width = math.pi / m
    seen_bins, seen_angles = [], []
    for theta, _ in _pair_blocks(X, seed):
        angles = _wrap(theta, math.pi)
        bins = np.floor(angles / width).astype(np.int64) % m
        _, first = np.unique(bins, return_index=True)
        seen_bins.append(bins[first])
        seen_angles.append(angles[first])
    bins = np.concatenate(seen_bins)
    _, first = np.unique(bins, return_index=True)
    reps = np.concatenate(seen_angles)[np.sort(first)]
    return DirectionSet(X.delta, reps, oriented=False, sampled=sampled), len(first)


def _normalize_lines(phi: np.ndarray, c: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    phi = np.mod(phi, TWO_PI)
    flip = phi >= math.pi
    phi = np.where(flip, phi - math.pi, phi)
    c = np.where(flip, -c, c)
    phi = np.where(phi >= math.pi, 0.0, phi)
    return phi, c


def spanned_lines(X: PointSet, r: float, seed: int = 0) -> Tuple[TubeSet, int]:
    """
    Rectas por pares de puntos de X (identificadas a resolución LINE_DEDUP) y su
    número de recubrimiento a escala r en el espacio (phi, c).
    """
    if len(X) < 2:
        raise DegenerateInputError("Se necesitan al menos dos puntos.")
    if r < X.delta.value:
        raise ScaleError(f"r = {r} por debajo de δ = {X.delta.value}.")
    _is_sampled(X)
    all_keys, all_phi, all_c = [], [], []
    for theta, base in _pair_blocks(X, seed):
        phi = theta + math.pi / 2
        c = X.xy[base, 0] * np.cos(phi) + X.xy[base, 1] * np.sin(phi)
        phi, c = _normalize_lines(phi, c)
        # la costura phi ≈ π se identifica con phi = 0
        seam = phi > math.pi - LINE_DEDUP
        phi = np.where(seam, 0.0, phi)
        c = np.where(seam, -c, c)
        keys = np.column_stack([np.rint(phi / LINE_DEDUP), np.rint(c / LINE_DEDUP)]).astype(np.int64)
        _, first = np.unique(keys, axis=0, return_index=True)
        all_keys.append(keys[first])
        all_phi.append(phi[first])
        all_c.append(c[first])
    keys = np.concatenate(all_keys)
    _, first = np.unique(keys, axis=0, return_index=True)
    first = np.sort(first)
    lines = TubeSet(X.delta, np.concatenate(all_phi)[first], np.concatenate(all_c)[first])
    return lines, count_cells(line_cells(lines.phi, lines.c, r))


def needs_pre_rotation(T: TubeSet) -> bool:
    """¿Algún eje está a menos de VERTICAL_TOL de la vertical?"""
    if len(T) == 0:
        return False
    return bool(np.any(np.abs(T.normals[:, 1]) < dgl("VERTICAL_TOL")))


def rotate(P: PointSet, angle: float) -> PointSet:
    """Rotación alrededor del origen; la caja pasa a [-2, 2]²."""
    cs, sn = math.cos(angle), math.sin(angle)
    R = np.array([[cs, -sn], [sn, cs]])
    return PointSet(P.delta, P.xy @ R.T, box=(-COORD_LIMIT, -COORD_LIMIT, COORD_LIMIT, COORD_LIMIT),
                    rebox=P.rebox, check_separation=False)


def rotate_tubes(T: TubeSet, angle: float) -> TubeSet:
    """La rotación alrededor del origen conserva c y suma ``angle`` a phi."""
    phi, c = _normalize_lines(T.phi + angle, T.c.copy())
    return TubeSet(T.delta, phi, c, w=T.w, separated=False)


# ========= DUALIDAD =========

class DualPoint(NamedTuple):
    """Punto del plano dual (a, b). No se encaja en la caja: las pendientes no están acotadas."""
    x: float
    y: float


def dualize_point(p: Union[Point2, DualPoint]) -> LineNF:
    """D(a, b) = {y = a·x + b} en forma normal."""
    a, b = p.x, p.y
    phi = math.atan2(1.0, -a)
    return LineNF.from_angle(phi, b / math.sqrt(1 + a * a))


def dualize_line(l: LineNF) -> DualPoint:
    """D*({y = c·x + d}) = (−c, d). Las rectas verticales no tienen dual."""
    nx, ny = l.normal
    if abs(ny) < 1e-12:
        raise UnrepresentableLineError(f"Recta vertical phi = {l.phi}.")
    return DualPoint(nx / ny, l.c / ny)


@dataclass(frozen=True)
class SlopeLine:
    """Recta y = slope·x + intercept con aritmética exacta (Fraction)."""
    slope: Fraction
    intercept: Fraction

    def __post_init__(self):
        object.__setattr__(self, "slope", Fraction(self.slope))
        object.__setattr__(self, "intercept", Fraction(self.intercept))

    def contains(self, p: Tuple) -> bool:
        x, y = Fraction(p[0]), Fraction(p[1])
        return y == self.slope * x + self.intercept

    @classmethod
    def dual_of_point(cls, p: Tuple) -> "SlopeLine":
        return cls(Fraction(p[0]), Fraction(p[1]))

    def dual_point(self) -> Tuple[Fraction, Fraction]:
        return (-self.slope, self.intercept)

    @classmethod
    def from_normal_form(cls, l: LineNF) -> "SlopeLine":
        nx, ny = l.normal
        if abs(ny) < 1e-12:
            raise UnrepresentableLineError(f"Recta vertical phi = {l.phi}.")
        return cls(Fraction(-nx / ny), Fraction(l.c / ny))


def dual_incidence(p: Tuple, line: SlopeLine) -> bool:
    """p ∈ ℓ ⇔ D*(ℓ) ∈ D(p), evaluado del lado dual."""
    return SlopeLine.dual_of_point(p).contains(line.dual_point())


class DualConfiguration(NamedTuple):
    points: PointSet
    tubes: TubeSet
    rebox: Rebox
    rotation: float


def dual_configuration(P: PointSet, T: TubeSet, w: Optional[float] = None) -> DualConfiguration:
    """
    Puntos D*(ejes de T) y tubos D(P), re-encajados con un escalado potencia de 2.
    El semiancho dual por defecto es el de T. Si algún eje es casi vertical se
    rota todo antes por PRE_ROTATION radianes.
    """
    rotation = 0.0
    if needs_pre_rotation(T):
        rotation = dgl("PRE_ROTATION")
        P, T = rotate(P, rotation), rotate_tubes(T, rotation)
        logger.info("dualidad: rotación previa de %.3f rad", rotation)
    normals = T.normals
    ny = normals[:, 1]
    if np.any(np.abs(ny) < 1e-12):
        raise UnrepresentableLineError("Eje vertical incluso tras la rotación.")
    dual_pts = np.column_stack([normals[:, 0] / ny, T.c / ny])
    a, b = P.xy[:, 0], P.xy[:, 1]
    # normal (−a, 1)/√(1+a²): phi ∈ (0, π) sin normalizar
    dphi = np.arctan2(np.ones_like(a), -a)
    dc = b / np.sqrt(1 + a * a)
    rebox = Rebox.fitting(dual_pts)
    w = T.w if w is None else w
    lam = rebox.scale
    k = P.delta.k + max(0, round(-math.log2(lam)))
    points = PointSet(Scale(k), rebox.apply(dual_pts), rebox=rebox, check_separation=False)
    tubes = TubeSet(Scale(k), dphi, lam * dc, w=lam * w)
    return DualConfiguration(points, tubes, rebox, rotation)


# ========= APLANACIÓN PROYECTIVA =========

def projective_flatten(P: PointSet, h: float) -> PointSet:
    """F(x1, x2) = (x1/x2, 1/x2) para |x2| ≥ h > 0, re-encajado si sale de [-1, 1]²."""
    if h <= 0:
        raise ValueError("El piso h debe ser positivo.")
    x1, x2 = P.xy[:, 0], P.xy[:, 1]
    low = np.abs(x2) < h
    if low.any():
        raise FloorError(f"{int(low.sum())} puntos con |x2| < h = {h}.")
    images = np.column_stack([x1 / x2, 1.0 / x2])
    rebox = Rebox.fitting(images)
    return PointSet(P.delta, rebox.apply(images), rebox=rebox, check_separation=False)


def flattening_direction(xy: np.ndarray) -> Tuple[np.ndarray, float]:
    """Dirección principal (SVD) y residuo RMS perpendicular."""
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    if len(xy) < 2:
        return np.array([1.0, 0.0]), 0.0
    centered = xy - xy.mean(axis=0)
    _, sv, vt = np.linalg.svd(centered, full_matrices=False)
    return vt[0], float(sv[-1] / math.sqrt(len(xy)))


def is_collinear(P: Union[PointSet, np.ndarray], tol: float = 1e-9) -> bool:
    xy = P.xy if isinstance(P, PointSet) else P
    return flattening_direction(xy)[1] <= tol


def flattening_preserves_lines(w: float, points_xy: np.ndarray, h: float = 1e-6,
                               tol: float = 1e-9) -> bool:
    """
    Muestras de una recta por (w, 0): sus imágenes por F deben ser colineales
    con dirección ∝ (w, 1).
    """
    xy = np.asarray(points_xy, dtype=float).reshape(-1, 2)
    if np.any(np.abs(xy[:, 1]) < h):
        raise FloorError(f"Puntos con |x2| < h = {h}.")
    images = np.column_stack([xy[:, 0] / xy[:, 1], 1.0 / xy[:, 1]])
    direction, residual = flattening_direction(images)
    target = np.array([w, 1.0]) / math.hypot(w, 1.0)
    cross = abs(direction[0] * target[1] - direction[1] * target[0])
    return residual <= tol and cross <= tol
