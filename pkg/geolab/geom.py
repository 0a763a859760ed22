# geolab/geom.py
"""
Tipos planos fundamentales (puntos, rectas en forma normal, tubos, escalas
diádicas) y las primitivas de métrica y de número de recubrimiento que usan
los demás módulos.

Convenciones:
- Caja de trabajo [-1, 1]² para objetos primales.
- Una recta es {p : p·n(phi) = c} con n(phi) = (cos phi, sin phi), phi ∈ [0, π).
- Un w-tubo es la w-vecindad cerrada de su recta, cortada con la caja.
- Los números de recubrimiento cuentan celdas semiabiertas de la retícula r·Z²
  (equivalentes a bolas salvo un factor fijo ≤ 9).
"""
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from django.core.exceptions import ValidationError
from scipy.spatial import cKDTree

from .errors import ScaleError

logger = logging.getLogger(__name__)

WORKING_BOX: Tuple[float, float, float, float] = (-1.0, -1.0, 1.0, 1.0)
COORD_LIMIT = 2.0
OFFSET_LIMIT = 4.0
MAX_HALF_WIDTH = 1.0
# Empuje relativo al dividir por el lado de celda: absorbe errores de redondeo
# de coordenadas que deberían caer exactamente sobre la retícula.
SNAP_EPS = 1e-9
# Las rectas "separadas" de un TubeSet distan al menos SEPARATION_CONST·δ.
SEPARATION_CONST = 0.5
# Holgura relativa al comprobar δ-separación (coordenadas en coma flotante).
SEPARATION_RTOL = 1e-9


# ========= PUNTOS Y ESCALAS =========

@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        self.clean()

    def clean(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValidationError("Coordenadas no finitas.")
        if abs(self.x) > COORD_LIMIT or abs(self.y) > COORD_LIMIT:
            raise ValidationError(
                f"Punto ({self.x}, {self.y}) fuera de [-2, 2]²; re-encajar antes de construirlo."
            )

    def as_tuple(self) -> Tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Scale:
    """Escala diádica δ = 2^-k."""
    k: int

    def __post_init__(self):
        self.clean()

    def clean(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValidationError({"k": "La escala necesita k ≥ 1 entero."})

    @property
    def value(self) -> float:
        return 2.0 ** -self.k

    @classmethod
    def from_value(cls, r: float) -> "Scale":
        """La escala diádica más fina que no supera a ``r``."""
        if not (0 < r <= 0.5):
            raise ScaleError(f"r = {r} fuera de (0, 1/2].")
        # frexp es exacto: r = m·2^e con m ∈ [0.5, 1)
        _, e = math.frexp(r)
        k = 1 - e
        return cls(k)

    def __str__(self):
        return f"2^-{self.k}"


def dyadic_radii(delta: Scale, top: int = 0) -> List[Tuple[int, float]]:
    """Pares (k_r, r) con r = 2^-k_r diádico en [δ, 2^-top], de grueso a fino."""
    return [(j, 2.0 ** -j) for j in range(top, delta.k + 1)]


# ========= RECTAS Y TUBOS =========

@dataclass(frozen=True)
class LineNF:
    """Recta en forma normal {p : p·(cos phi, sin phi) = c}, phi ∈ [0, π)."""
    phi: float
    c: float

    def __post_init__(self):
        self.clean()

    def clean(self):
        if not (math.isfinite(self.phi) and math.isfinite(self.c)):
            raise ValidationError("Recta con parámetros no finitos.")
        if not (0.0 <= self.phi < math.pi):
            raise ValidationError({"phi": f"phi = {self.phi} fuera de [0, π)."})
        if abs(self.c) > OFFSET_LIMIT:
            raise ValidationError({"c": f"|c| = {abs(self.c)} > 4."})

    @classmethod
    def from_angle(cls, phi: float, c: float) -> "LineNF":
        """Normaliza un ángulo arbitrario de la normal al rango [0, π)."""
        phi = math.fmod(phi, 2 * math.pi)
        if phi < 0:
            phi += 2 * math.pi
        if phi >= math.pi:
            phi -= math.pi
            c = -c
        if phi >= math.pi:  # redondeo en el borde
            phi = 0.0
        return cls(phi, c)

    @classmethod
    def through(cls, p: Point2, q: Point2) -> "LineNF":
        theta = math.atan2(q.y - p.y, q.x - p.x)
        return cls.with_direction(p, theta)

    @classmethod
    def with_direction(cls, p: Point2, theta: float) -> "LineNF":
        """Recta por ``p`` con dirección de ángulo ``theta``."""
        phi = theta + math.pi / 2
        nx, ny = math.cos(phi), math.sin(phi)
        return cls.from_angle(phi, p.x * nx + p.y * ny)

    @property
    def normal(self) -> Tuple[float, float]:
        return (math.cos(self.phi), math.sin(self.phi))

    @property
    def direction(self) -> Tuple[float, float]:
        nx, ny = self.normal
        return (-ny, nx)


@dataclass(frozen=True)
class Tube:
    line: LineNF
    w: float

    def __post_init__(self):
        self.clean()

    def clean(self):
        if not (0.0 < self.w <= MAX_HALF_WIDTH):
            raise ValidationError({"w": f"Semiancho {self.w} fuera de (0, 1]."})


def point_line_dist(p: Point2, l: LineNF) -> float:
    nx, ny = l.normal
    return abs(p.x * nx + p.y * ny - l.c)


def tube_contains(T: Tube, p: Point2) -> bool:
    return point_line_dist(p, T.line) <= T.w


def line_metric(l1: LineNF, l2: LineNF) -> float:
    """
    min(|n1 - n2| + |c1 - c2|, |n1 + n2| + |c1 + c2|): la identificación
    antipodal de la normal se resuelve tomando la mejor rama de signo.
    Comparable con ‖π_L1 − π_L2‖ + |a1 − a2| salvo un factor ≤ 4 en la caja.
    """
    n1, n2 = l1.normal, l2.normal
    same = math.hypot(n1[0] - n2[0], n1[1] - n2[1]) + abs(l1.c - l2.c)
    flipped = math.hypot(n1[0] + n2[0], n1[1] + n2[1]) + abs(l1.c + l2.c)
    return min(same, flipped)


def strip_box_polygon(line: LineNF, w: float, box=WORKING_BOX) -> List[Tuple[float, float]]:
    """Vértices del polígono convexo caja ∩ {|p·n − c| ≤ w} (Sutherland–Hodgman)."""
    x0, y0, x1, y1 = box
    poly = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
    nx, ny = line.normal
    # dos semiplanos: p·n ≤ c + w  y  −p·n ≤ −(c − w)
    for a, b, bound in ((nx, ny, line.c + w), (-nx, -ny, -(line.c - w))):
        out = []
        for i, cur in enumerate(poly):
            prev = poly[i - 1]
            fc = a * cur[0] + b * cur[1] - bound
            fp = a * prev[0] + b * prev[1] - bound
            if fc <= 0:
                if fp > 0:
                    t = fp / (fp - fc)
                    out.append((prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])))
                out.append(cur)
            elif fp <= 0:
                t = fp / (fp - fc)
                out.append((prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])))
        poly = out
        if not poly:
            break
    return poly


def tube_box_contained(inner: Tube, outer: Tube, box=WORKING_BOX, tol: float = 1e-12) -> bool:
    """¿inner ∩ caja ⊂ outer? Basta revisar los vértices del polígono recortado."""
    poly = strip_box_polygon(inner.line, inner.w, box)
    nx, ny = outer.line.normal
    return all(abs(x * nx + y * ny - outer.line.c) <= outer.w + tol for x, y in poly)


# ========= RE-ENCAJE AFÍN =========

@dataclass(frozen=True)
class Rebox:
    """Escalado afín registrado p ↦ scale·p + offset (duales e imágenes proyectivas)."""
    scale: float = 1.0
    offset: Tuple[float, float] = (0.0, 0.0)

    def apply(self, xy: np.ndarray) -> np.ndarray:
        return self.scale * np.asarray(xy, dtype=float) + np.asarray(self.offset)

    def apply_lines(self, phi: np.ndarray, c: np.ndarray) -> np.ndarray:
        """Nuevo offset de cada recta; la normal no cambia con un escalado uniforme."""
        ox, oy = self.offset
        return self.scale * np.asarray(c) + np.cos(phi) * ox + np.sin(phi) * oy

    def compose(self, other: "Rebox") -> "Rebox":
        """self ∘ other."""
        ox = self.scale * other.offset[0] + self.offset[0]
        oy = self.scale * other.offset[1] + self.offset[1]
        return Rebox(self.scale * other.scale, (ox, oy))

    @classmethod
    def fitting(cls, xy: np.ndarray, limit: float = 1.0) -> "Rebox":
        """Escalado (sin traslación) que lleva los puntos a [-limit, limit]²."""
        xy = np.asarray(xy, dtype=float)
        if xy.size == 0:
            return cls()
        extent = float(np.max(np.abs(xy)))
        if extent <= limit:
            return cls()
        # potencia de dos: el escalado es exacto en coma flotante
        return cls(scale=2.0 ** -math.ceil(math.log2(extent / limit)))

    def as_dict(self) -> dict:
        return {"scale": self.scale, "offset": list(self.offset)}


# ========= CONJUNTOS =========

def _as_xy(points) -> np.ndarray:
    if isinstance(points, np.ndarray):
        xy = np.asarray(points, dtype=float)
    else:
        xy = np.array([(p.x, p.y) if isinstance(p, Point2) else tuple(p) for p in points], dtype=float)
    return xy.reshape(-1, 2)


def min_separation(xy: np.ndarray) -> float:
    """Distancia mínima entre puntos distintos (inf si hay menos de dos)."""
    if len(xy) < 2:
        return math.inf
    dist, _ = cKDTree(xy).query(xy, k=2)
    return float(dist[:, 1].min())


@dataclass(eq=False)
class PointSet:
    """Conjunto finito δ-separado de puntos del plano con su escala y caja."""
    delta: Scale
    xy: np.ndarray
    box: Tuple[float, float, float, float] = WORKING_BOX
    rebox: Optional[Rebox] = None
    check_separation: bool = field(default=True, repr=False)

    def __post_init__(self):
        self.xy = _as_xy(self.xy)
        self.xy.setflags(write=False)
        self.box = tuple(float(v) for v in self.box)
        self.clean()

    def clean(self):
        xy = self.xy
        if not np.all(np.isfinite(xy)):
            raise ValidationError("Coordenadas no finitas en el conjunto de puntos.")
        if xy.size and np.max(np.abs(xy)) > COORD_LIMIT:
            raise ValidationError("Puntos fuera de [-2, 2]²; usar Rebox.")
        x0, y0, x1, y1 = self.box
        if xy.size and (xy[:, 0].min() < x0 or xy[:, 0].max() > x1
                        or xy[:, 1].min() < y0 or xy[:, 1].max() > y1):
            raise ValidationError("Hay puntos fuera de la caja declarada.")
        if self.check_separation:
            sep = min_separation(xy)
            if sep < self.delta.value * (1 - SEPARATION_RTOL):
                raise ValidationError(
                    f"El conjunto no es δ-separado: separación {sep:.3e} < δ = {self.delta.value:.3e}."
                )

    @classmethod
    def from_points(cls, delta: Scale, points: Iterable, **kwargs) -> "PointSet":
        return cls(delta, _as_xy(list(points)), **kwargs)

    def __len__(self) -> int:
        return len(self.xy)

    @property
    def points(self) -> List[Point2]:
        return [Point2(float(x), float(y)) for x, y in self.xy]

    def subset(self, indices) -> "PointSet":
        return PointSet(self.delta, self.xy[np.asarray(indices, dtype=int)], self.box,
                        self.rebox, check_separation=False)


@dataclass(eq=False)
class TubeSet:
    """Familia de tubos de semiancho común ``w`` (por defecto δ)."""
    delta: Scale
    phi: np.ndarray
    c: np.ndarray
    w: Optional[float] = None
    separated: bool = False

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float).reshape(-1)
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        self.phi.setflags(write=False)
        self.c.setflags(write=False)
        if self.w is None:
            self.w = self.delta.value
        self.w = float(self.w)
        self.clean()

    def clean(self):
        if self.phi.shape != self.c.shape:
            raise ValidationError("phi y c con longitudes distintas.")
        if not (0.0 < self.w <= MAX_HALF_WIDTH):
            raise ValidationError({"w": f"Semiancho común {self.w} fuera de (0, 1]."})
        if self.phi.size:
            if not (np.all(np.isfinite(self.phi)) and np.all(np.isfinite(self.c))):
                raise ValidationError("Parámetros de recta no finitos.")
            if self.phi.min() < 0.0 or self.phi.max() >= math.pi:
                raise ValidationError({"phi": "Ángulos fuera de [0, π)."})
            if np.max(np.abs(self.c)) > OFFSET_LIMIT:
                raise ValidationError({"c": "Offsets con |c| > 4."})
        if self.separated and len(self) > 1:
            # |n1∓n2| + |c1±c2| ≥ distancia euclídea en (cos, sin, c)
            emb = np.column_stack([self.normals, self.c])
            sep = min_separation(np.vstack([emb, -emb]))
            if sep < SEPARATION_CONST * self.delta.value * (1 - SEPARATION_RTOL):
                raise ValidationError("La familia declarada separada tiene rectas demasiado cercanas.")

    @classmethod
    def from_tubes(cls, delta: Scale, tubes: Sequence[Tube], **kwargs) -> "TubeSet":
        widths = {t.w for t in tubes}
        if len(widths) > 1:
            raise ValidationError("Los tubos de un TubeSet comparten semiancho.")
        w = widths.pop() if widths else kwargs.pop("w", None)
        return cls(delta, [t.line.phi for t in tubes], [t.line.c for t in tubes], w=w, **kwargs)

    @classmethod
    def from_lines(cls, delta: Scale, lines: Sequence[LineNF], **kwargs) -> "TubeSet":
        return cls(delta, [l.phi for l in lines], [l.c for l in lines], **kwargs)

    def __len__(self) -> int:
        return len(self.phi)

    @cached_property
    def normals(self) -> np.ndarray:
        # math.cos/sin, igual que LineNF.normal: misma aritmética en todos los conteos
        return np.array([(math.cos(p), math.sin(p)) for p in self.phi], dtype=float).reshape(-1, 2)

    @property
    def lines(self) -> List[LineNF]:
        return [LineNF(float(p), float(c)) for p, c in zip(self.phi, self.c)]

    @property
    def tubes(self) -> List[Tube]:
        return [Tube(l, self.w) for l in self.lines]

    def subset(self, indices) -> "TubeSet":
        idx = np.asarray(indices, dtype=int)
        return TubeSet(self.delta, self.phi[idx], self.c[idx], w=self.w)

    def union(self, other: "TubeSet") -> "TubeSet":
        if other.w != self.w:
            raise ValidationError("Unión de familias con semianchos distintos.")
        return TubeSet(self.delta, np.concatenate([self.phi, other.phi]),
                       np.concatenate([self.c, other.c]), w=self.w)


# ========= RECUBRIMIENTOS =========

def lattice_cells(xy: np.ndarray, r: float, shift: Tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
    """Índices enteros de la celda semiabierta de lado r (retícula desplazada) de cada punto."""
    return np.floor((np.asarray(xy) - np.asarray(shift)) / r + SNAP_EPS).astype(np.int64)


def cell_keys(cells: np.ndarray) -> np.ndarray:
    """Codifica cada celda (i, j) en un entero único (|i|, |j| < 2^30)."""
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, 2)
    return (cells[:, 0] + (1 << 30)) * (1 << 31) + (cells[:, 1] + (1 << 30))


def count_cells(cells: np.ndarray) -> int:
    if len(cells) == 0:
        return 0
    return int(len(np.unique(cell_keys(cells))))


def covering_number(P: PointSet, r: float) -> int:
    if r < P.delta.value:
        raise ScaleError(f"r = {r} por debajo de la escala de los datos δ = {P.delta.value}.")
    return count_cells(lattice_cells(P.xy, r))


def phi_bins(r: float) -> Tuple[int, float]:
    """Número y ancho de las clases de ángulo: π se divide en partes iguales de ancho ≤ r."""
    m = max(1, math.ceil(math.pi / r - SNAP_EPS))
    return m, math.pi / m


def line_cells(phi: np.ndarray, c: np.ndarray, r: float,
               shift: Tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
    """
    Celdas (phi, c) de lado r. El eje phi es periódico de periodo π y al dar
    la vuelta se invierte el signo de c.
    """
    m, width = phi_bins(r)
    phi = np.asarray(phi, dtype=float) - shift[0]
    c = np.asarray(c, dtype=float).copy()
    wrap = phi < 0
    phi = np.where(wrap, phi + math.pi, phi)
    c = np.where(wrap, -c, c)
    i = np.floor(phi / width + SNAP_EPS).astype(np.int64)
    over = i >= m
    i = np.where(over, i - m, i)
    c = np.where(over, -c, c)
    j = np.floor((c - shift[1]) / r + SNAP_EPS).astype(np.int64)
    return np.column_stack([i, j])


def tube_covering_number(T: TubeSet, r: float) -> int:
    if r < T.delta.value:
        raise ScaleError(f"r = {r} por debajo de la escala de los tubos δ = {T.delta.value}.")
    return count_cells(line_cells(T.phi, T.c, r))
