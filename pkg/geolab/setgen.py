# geolab/setgen.py
"""
Generadores de conjuntos de prueba deterministas por semilla:
productos de Cantor, conjuntos de Frostman aleatorios, arbustos de tubos,
la red de tubos T^r y familias aleatorias de tubos.
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Tuple

import numpy as np
from django.core.exceptions import ValidationError

from .conf import dgl
from .errors import CertificationError, ScaleError, SeparationError
from .geom import (
    SEPARATION_RTOL, Point2, PointSet, Scale, Tube, TubeSet, strip_box_polygon,
)
from .regularity import concentration_profile, tube_concentration_profile

logger = logging.getLogger(__name__)


# ========= ESPECIFICACIONES =========

@dataclass(frozen=True)
class CantorSpec:
    """Cantor de base ``base``, dígitos permitidos ``digits`` y profundidad ``level``."""
    base: int
    digits: Tuple[int, ...]
    level: int

    def __post_init__(self):
        object.__setattr__(self, "digits", tuple(int(d) for d in self.digits))
        self.clean()

    def clean(self):
        errors = {}
        if self.base < 2:
            errors["base"] = "La base debe ser ≥ 2."
        if not self.digits:
            errors["digits"] = "Se necesita al menos un dígito."
        elif len(set(self.digits)) != len(self.digits):
            errors["digits"] = "Dígitos repetidos."
        elif min(self.digits) < 0 or max(self.digits) >= self.base:
            errors["digits"] = f"Dígitos fuera de [0, {self.base})."
        if self.level < 1:
            errors["level"] = "La profundidad debe ser ≥ 1."
        if errors:
            raise ValidationError(errors)

    @property
    def dimension(self) -> float:
        return math.log(len(self.digits)) / math.log(self.base)

    def left_endpoints(self) -> np.ndarray:
        """Extremos izquierdos de los intervalos de nivel ``level``, en orden creciente."""
        ints = np.array([0], dtype=np.int64)
        for _ in range(self.level):
            ints = (ints[:, None] * self.base + np.array(sorted(self.digits))[None, :]).reshape(-1)
        return ints.astype(float) / float(self.base) ** self.level

    def natural_separation(self) -> Fraction:
        """Cota inferior exacta de la distancia entre extremos izquierdos consecutivos."""
        ds = sorted(self.digits)
        if len(ds) == 1:
            return Fraction(1)
        gaps = [b - a for a, b in zip(ds, ds[1:])]
        # dentro del último nivel, o entre el último dígito de un bloque y el primero del siguiente
        wrap = self.base - ds[-1] + ds[0]
        return Fraction(min(min(gaps), wrap), self.base ** self.level)


@dataclass(frozen=True)
class BushSpec:
    """Arbusto de tubos: todos los ejes pasan por ``apex``."""
    apex: Point2
    s: float
    delta: Scale
    count: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        self.clean()

    def clean(self):
        if not (0.0 <= self.s <= 1.0):
            raise ValidationError({"s": "El exponente de direcciones va en [0, 1]."})
        if abs(self.apex.x) > 1 or abs(self.apex.y) > 1:
            raise ValidationError({"apex": "El ápice debe estar en la caja de trabajo."})
        if self.count is not None and self.count < 1:
            raise ValidationError({"count": "Se necesita al menos un tubo."})

    @property
    def target(self) -> int:
        if self.count is not None:
            return int(self.count)
        return max(1, int(round(self.delta.value ** -self.s)))


# ========= CANTOR =========

def _snap(x: np.ndarray, step: float) -> np.ndarray:
    return np.round(x / step) * step


def gen_cantor_product(specA: CantorSpec, specB: Optional[CantorSpec], delta: Scale) -> PointSet:
    """
    Producto A×B de extremos izquierdos, ajustados a la retícula δ·Z.
    Sin ``specB`` los puntos quedan sobre el eje x.
    """
    d = delta.value
    a = _snap(specA.left_endpoints(), d)
    b = _snap(specB.left_endpoints(), d) if specB is not None else np.zeros(1)
    for name, axis in (("A", a), ("B", b)):
        if len(axis) > 1:
            gap = float(np.min(np.diff(axis)))
            if gap < d * (1 - SEPARATION_RTOL):
                raise SeparationError(
                    f"Cantor {name}: separación {gap:.3e} < δ = {d:.3e} a profundidad dada."
                )
    xs, ys = np.meshgrid(a, b, indexing="ij")
    xy = np.column_stack([xs.reshape(-1), ys.reshape(-1)])
    # la separación por ejes ya garantiza la del producto
    P = PointSet(delta, xy, check_separation=False)
    logger.debug("cantor %s×%s δ=%s |P|=%d", specA, specB, delta, len(P))
    return P


# ========= FROSTMAN ALEATORIO =========

def budget_tree(levels: int, dim: int, target: float, rng: np.random.Generator) -> np.ndarray:
    """
    Árbol diádico con presupuesto: cada nodo reparte su presupuesto entre
    1..2^dim hijos elegidos al azar. Con β = target^(1/levels), un nodo que
    aún tiene ``left`` niveles por debajo conserva ≈ presupuesto/β^left hijos.
    Devuelve los índices enteros (n, dim) de las hojas en la retícula 2^-levels.
    """
    arity = 2 ** dim
    offsets = np.array(np.meshgrid(*([[0, 1]] * dim), indexing="ij")).reshape(dim, -1).T
    nodes = np.zeros((1, dim), dtype=np.int64)
    budgets = np.array([float(target)])
    beta = float(target) ** (1.0 / levels) if levels > 0 else 1.0
    for j in range(levels):
        left = levels - j - 1
        want = budgets / beta ** left
        base = np.floor(want)
        n = base + (rng.random(len(want)) < (want - base))
        n = np.clip(n, 1, arity).astype(np.int64)
        rank = np.argsort(np.argsort(rng.random((len(nodes), arity)), axis=1), axis=1)
        keep = rank < n[:, None]
        children = 2 * nodes[:, None, :] + offsets[None, :, :]
        nodes = children[keep]
        budgets = np.broadcast_to((budgets / n)[:, None], keep.shape)[keep]
    return nodes


def gen_random_frostman(delta: Scale, s: float, seed: int) -> PointSet:
    """
    (δ,s)-conjunto aleatorio en [0,1)² con ≈ δ^-s puntos, certificado por su
    perfil de concentración (C* ≤ FROSTMAN_C_MAX). Reintenta con la semilla
    derivada (seed, intento).
    """
    if not (0.0 < s <= 2.0):
        raise ScaleError(f"s = {s} fuera de (0, 2].")
    c_max = dgl("FROSTMAN_C_MAX")
    attempts = dgl("FROSTMAN_ATTEMPTS")
    target = 2.0 ** (s * delta.k)
    profile = None
    for attempt in range(attempts):
        rng = np.random.default_rng([seed, attempt])
        cells = budget_tree(delta.k, 2, target, rng)
        P = PointSet(delta, cells.astype(float) * delta.value, check_separation=False)
        profile = concentration_profile(P, s)
        if profile.C_star <= c_max:
            logger.debug("frostman δ=%s s=%s seed=%s intento=%d |P|=%d C*=%.3g",
                         delta, s, seed, attempt, len(P), profile.C_star)
            return P
        logger.info("frostman: intento %d descartado (C* = %.3g > %.3g)", attempt, profile.C_star, c_max)
    raise CertificationError(
        f"No se obtuvo un (δ,{s})-conjunto con C* ≤ {c_max} en {attempts} intentos.", profile
    )


# ========= TUBOS =========

def _lines_through(apex: Point2, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(phi, c) de las rectas por ``apex`` con direcciones theta ∈ [0, π)."""
    phi = np.asarray(theta, dtype=float) + math.pi / 2
    phi = np.where(phi >= math.pi, phi - math.pi, phi)
    phi = np.where(phi >= math.pi, 0.0, phi)
    c = np.array([apex.x * math.cos(p) + apex.y * math.sin(p) for p in phi], dtype=float)
    return phi, c


def gen_tube_bush(spec: BushSpec) -> TubeSet:
    """
    Tubos de ancho δ por ``apex`` con un conjunto (δ,s) de direcciones. Las
    direcciones dependen solo de la semilla: dos ápices con la misma semilla
    comparten direcciones.
    """
    rng = np.random.default_rng(spec.seed)
    u = budget_tree(spec.delta.k, 1, spec.target, rng)[:, 0].astype(float) * spec.delta.value
    phi, c = _lines_through(spec.apex, math.pi * u)
    return TubeSet(spec.delta, phi, c)


def gen_tube_net(r: float) -> TubeSet:
    """
    Red T^r de tubos de semiancho 2r: direcciones iπ/m con m = ⌈π/(0.6 r)⌉ y
    offsets en el centro de ⌈4/r⌉ intervalos de [-2, 2]. Todo r-tubo que corta
    la caja queda dentro de algún miembro; el solapamiento es O(1/dist).
    """
    if not (0.0 < r <= 0.5):
        raise ScaleError(f"r = {r} fuera de (0, 1/2].")
    m = math.ceil(math.pi / (0.6 * r))
    n = math.ceil(4.0 / r)
    phis = np.arange(m) * (math.pi / m)
    cs = -2.0 + (np.arange(n) + 0.5) * (4.0 / n)
    phi, c = np.meshgrid(phis, cs, indexing="ij")
    net = TubeSet(Scale.from_value(r), phi.reshape(-1), c.reshape(-1), w=2 * r, separated=True)
    logger.debug("T^r r=%s: %d×%d = %d tubos", r, m, n, len(net))
    return net


def net_member_containing(net: TubeSet, tube: Tube) -> Optional[int]:
    """Primer índice de la red cuyo tubo contiene ``tube`` ∩ caja (None si ninguno)."""
    poly = np.array(strip_box_polygon(tube.line, tube.w), dtype=float).reshape(-1, 2)
    if len(poly) == 0:
        return 0 if len(net) else None
    normals = net.normals
    # |v·n − c| para cada vértice y cada miembro
    dist = np.abs(poly @ normals.T - net.c[None, :])
    ok = np.all(dist <= net.w + 1e-12, axis=0)
    hits = np.flatnonzero(ok)
    return int(hits[0]) if len(hits) else None


def net_pair_overlap(net: TubeSet, x: Point2, y: Point2) -> int:
    """Cuántos miembros de la red contienen a la vez a x e y."""
    n = net.normals
    dx = np.abs(n[:, 0] * x.x + n[:, 1] * x.y - net.c) <= net.w
    dy = np.abs(n[:, 0] * y.x + n[:, 1] * y.y - net.c) <= net.w
    return int(np.count_nonzero(dx & dy))


def net_overlap_bound(x: Point2, y: Point2) -> float:
    """Techo TUBE_NET_OVERLAP/|x − y| para ``net_pair_overlap`` (infinito si x = y)."""
    d = math.hypot(x.x - y.x, x.y - y.y)
    return dgl("TUBE_NET_OVERLAP") / d if d > 0 else math.inf


def gen_random_tubes(delta: Scale, t: float, seed: int, n: Optional[int] = None) -> TubeSet:
    """
    (δ,t)-familia aleatoria de tubos: árbol con presupuesto sobre (phi, c) ∈
    [0, π) × [-1, 1). Se certifica con el perfil de tubos igual que los puntos.

    Con ``n`` < δ^-t el presupuesto se recorta a n tubos repartidos por el mismo
    árbol. Esa familia no puede cumplir C* ≤ FROSTMAN_C_MAX, así que no se
    certifica aquí: el llamador mide su perfil.
    """
    if not (0.0 < t <= 2.0):
        raise ScaleError(f"t = {t} fuera de (0, 2].")
    if n is not None and n < 1:
        raise ScaleError(f"n = {n} debe ser ≥ 1.")
    c_max = dgl("FROSTMAN_C_MAX")
    attempts = dgl("FROSTMAN_ATTEMPTS")
    target = 2.0 ** (t * delta.k)
    capped = n is not None and n < target
    if capped:
        target = float(n)
    profile = None
    for attempt in range(attempts):
        rng = np.random.default_rng([seed, attempt, 1])
        cells = budget_tree(delta.k, 2, target, rng).astype(float) * delta.value
        T = TubeSet(delta, math.pi * cells[:, 0], 2.0 * cells[:, 1] - 1.0)
        if capped:
            logger.debug("tubos aleatorios recortados: δ=%s t=%s |T|=%d", delta, t, len(T))
            return T
        profile = tube_concentration_profile(T, t)
        if profile.C_star <= c_max:
            return T
        logger.info("tubos aleatorios: intento %d descartado (C* = %.3g)", attempt, profile.C_star)
    raise CertificationError(
        f"No se obtuvo una (δ,{t})-familia de tubos con C* ≤ {c_max} en {attempts} intentos.", profile
    )
