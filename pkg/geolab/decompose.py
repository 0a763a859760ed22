# geolab/decompose.py
"""
Descomposición constructiva de un (δ,t)-conjunto en ≲ δ^-ε partes Katz–Tao.

Algoritmo:
1. Para cada escala diádica r ∈ {2, 1, ..., δ} se recubre la caja con bolas
   de radio r centradas en la retícula (r/2)·Z² (solapamiento acotado).
2. En cada bola B, P ∩ B se parte en grupos consecutivos de H puntos con
   H = ⌈4^(t+1)·C·|P|·δ^t⌉.
3. Se forma el grafo con arista entre dos puntos que comparten grupo en
   alguna escala, y se colorea con el voraz de networkx (grado descendente,
   empates por índice). Cada clase de color es una parte.

Con C ≥ la constante del recubrimiento (``cover_concentration``) cada parte
queda con constante Katz–Tao ≤ 4^t.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import networkx as nx
import numpy as np

from .errors import DegenerateInputError, EmptyInputError, ScaleError
from .geom import WORKING_BOX, PointSet, TubeSet, dyadic_radii
from .regularity import katz_tao_profile, tube_katz_tao_profile

logger = logging.getLogger(__name__)

# ventana de índices de la retícula que puede contener una bola de radio r = 2·paso
WINDOW = 2
# la aproximación racional de 4^(t+1) se redondea con esta holgura relativa
H_RTOL = 1e-12
# caja del espacio de rectas (phi, c) al descomponer tubos
LINE_BOX = (0.0, -4.0, math.pi, 4.0)


# ========= RECUBRIMIENTO POR BOLAS =========

@dataclass(frozen=True)
class BallCover:
    """
    Bolas cerradas de radio r con centros en box_min + (r/2)·{0..n}². Los centros
    no se materializan: se identifican por la clave ix·(n+1) + iy.
    """
    r: float
    box: Tuple[float, float, float, float] = WORKING_BOX

    @property
    def spacing(self) -> float:
        return self.r / 2

    @property
    def n(self) -> Tuple[int, int]:
        x0, y0, x1, y1 = self.box
        return (math.ceil((x1 - x0) / self.spacing - 1e-12),
                math.ceil((y1 - y0) / self.spacing - 1e-12))

    @property
    def size(self) -> int:
        nx_, ny_ = self.n
        return (nx_ + 1) * (ny_ + 1)

    def center(self, key: int) -> Tuple[float, float]:
        ix, iy = divmod(int(key), self.n[1] + 1)
        return (self.box[0] + ix * self.spacing, self.box[1] + iy * self.spacing)

    @property
    def centers(self) -> np.ndarray:
        """Todos los centros (solo para radios gruesos)."""
        nx_, ny_ = self.n
        xs = self.box[0] + self.spacing * np.arange(nx_ + 1)
        ys = self.box[1] + self.spacing * np.arange(ny_ + 1)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.column_stack([gx.reshape(-1), gy.reshape(-1)])

    def memberships(self, xy: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Pares (índice de punto, clave de bola) con |p − centro| ≤ r."""
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        nx_, ny_ = self.n
        h = self.spacing
        base_x = np.rint((xy[:, 0] - self.box[0]) / h).astype(np.int64)
        base_y = np.rint((xy[:, 1] - self.box[1]) / h).astype(np.int64)
        idx = np.arange(len(xy))
        pts, keys = [], []
        for dx in range(-WINDOW, WINDOW + 1):
            ix = base_x + dx
            cx = self.box[0] + ix * h
            for dy in range(-WINDOW, WINDOW + 1):
                iy = base_y + dy
                cy = self.box[1] + iy * h
                ok = ((ix >= 0) & (ix <= nx_) & (iy >= 0) & (iy <= ny_)
                      & (np.hypot(xy[:, 0] - cx, xy[:, 1] - cy) <= self.r))
                pts.append(idx[ok])
                keys.append(ix[ok] * (ny_ + 1) + iy[ok])
        return np.concatenate(pts), np.concatenate(keys)

    def ball_counts(self, xy: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Claves de bolas ocupadas y |P ∩ B| de cada una."""
        _, keys = self.memberships(xy)
        return np.unique(keys, return_counts=True)


def build_ball_cover(r: float, box=WORKING_BOX) -> BallCover:
    if not (0.0 < r <= 2.0):
        raise ScaleError(f"Radio de recubrimiento r = {r} fuera de (0, 2].")
    return BallCover(float(r), tuple(box))


def _cover_radii(delta) -> List[float]:
    return [2.0] + [r for _, r in dyadic_radii(delta)]


def _coords_concentration(xy: np.ndarray, delta, t: float, box) -> float:
    n = len(xy)
    best = 0.0
    for r in _cover_radii(delta):
        _, counts = build_ball_cover(r, box).ball_counts(xy)
        if len(counts):
            best = max(best, float(counts.max()) / (r ** t * n))
    return best


def cover_concentration(P: PointSet, t: float) -> float:
    """max |P ∩ B| / (r^t |P|) sobre las bolas de todos los recubrimientos usados."""
    if len(P) == 0:
        raise EmptyInputError("Conjunto vacío.")
    return _coords_concentration(P.xy, P.delta, t, WORKING_BOX)


# ========= DESCOMPOSICIÓN =========

@dataclass
class Decomposition:
    source: Union[PointSet, TubeSet]
    indices: List[np.ndarray]
    t: float
    C: float
    H: int
    edges: int
    max_degree: int
    # constante Katz–Tao de cada parte (recalculada al construir)
    certificates: List[float] = field(default_factory=list)
    # m(B) ≤ ⌈(r/δ)^t / 4^(t+1)⌉ en todas las bolas
    chain_ok: bool = True
    chain_violations: int = 0

    @property
    def N(self) -> int:
        return len(self.indices)

    @property
    def parts(self) -> list:
        return [self.source.subset(idx) for idx in self.indices]

    def as_dict(self) -> dict:
        return {
            "t": self.t,
            "C": self.C,
            "H": self.H,
            "N": self.N,
            "edges": self.edges,
            "max_degree": self.max_degree,
            "part_sizes": [int(len(i)) for i in self.indices],
            "certificates": self.certificates,
            "chain_ok": self.chain_ok,
            "chain_violations": self.chain_violations,
        }


def group_size(n: int, delta_value: float, t: float, C: float) -> int:
    raw = 4.0 ** (t + 1) * C * n * delta_value ** t
    if raw < 1 - H_RTOL:
        raise DegenerateInputError(
            f"H = 4^(t+1)·C·|P|·δ^t = {raw:.4g} < 1: |P| es demasiado pequeño para (C, t)."
        )
    return max(1, math.ceil(raw * (1 - H_RTOL)))


def _group_edges(pts: np.ndarray, keys: np.ndarray, H: int, n: int) -> Tuple[np.ndarray, int]:
    """
    Aristas (codificadas u·n + v, u < v) entre puntos del mismo grupo de H
    consecutivos (por índice) dentro de cada bola. También devuelve cuántas
    bolas violan m(B) ≤ cota (la cota la calcula quien llama).
    """
    order = np.lexsort((pts, keys))
    pts, keys = pts[order], keys[order]
    starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
    seg = np.repeat(starts, np.diff(np.r_[starts, len(keys)]))
    rank = np.arange(len(keys)) - seg
    group = keys * (n // H + 2) + rank // H
    codes = []
    for d in range(1, H):
        if d >= len(pts):
            break
        same = group[:-d] == group[d:]
        if not same.any():
            break
        u, v = pts[:-d][same], pts[d:][same]
        codes.append(np.minimum(u, v) * n + np.maximum(u, v))
    sizes = np.diff(np.r_[starts, len(keys)])
    return (np.concatenate(codes) if codes else np.empty(0, dtype=np.int64)), sizes


def _decompose_coords(xy: np.ndarray, delta, t: float, C: float, box):
    n = len(xy)
    if n == 0:
        raise EmptyInputError("Conjunto vacío.")
    if t < 0:
        raise ScaleError("t debe ser ≥ 0.")
    d = delta.value
    H = group_size(n, d, t, C)
    all_codes = []
    violations = 0
    for r in _cover_radii(delta):
        pts, keys = build_ball_cover(r, box).memberships(xy)
        codes, sizes = _group_edges(pts, keys, H, n)
        bound = math.ceil((r / d) ** t / 4.0 ** (t + 1) * (1 + H_RTOL))
        violations += int(np.count_nonzero(np.ceil(sizes / H) > bound))
        all_codes.append(codes)
    codes = np.unique(np.concatenate(all_codes)) if all_codes else np.empty(0, dtype=np.int64)

    G = nx.Graph()
    G.add_nodes_from(range(n))
    G.add_edges_from(zip((codes // n).tolist(), (codes % n).tolist()))
    degree = dict(G.degree())
    order = sorted(G.nodes, key=lambda v: (-degree[v], v))
    coloring = nx.greedy_color(G, strategy=lambda graph, colors: order)
    colors = np.array([coloring[v] for v in range(n)], dtype=np.int64)
    indices = [np.flatnonzero(colors == c) for c in range(int(colors.max()) + 1)]
    max_degree = max(degree.values()) if degree else 0
    logger.info("descomposición: |P|=%d H=%d aristas=%d grado máx=%d partes=%d",
                n, H, len(codes), max_degree, len(indices))
    return indices, H, len(codes), max_degree, violations


def katz_tao_decompose(P: PointSet, t: float, C: float) -> Decomposition:
    indices, H, edges, max_degree, violations = _decompose_coords(P.xy, P.delta, t, C, WORKING_BOX)
    D = Decomposition(P, indices, t, C, H, edges, max_degree,
                      chain_ok=violations == 0, chain_violations=violations)
    D.certificates = [katz_tao_profile(part, t).C_star for part in D.parts]
    return D


def katz_tao_decompose_tubes(T: TubeSet, t: float, C: float) -> Decomposition:
    """
    Misma construcción sobre las coordenadas (phi, c) de los ejes. La costura
    periódica phi ~ phi + π no se identifica en el recubrimiento.
    """
    xy = np.column_stack([T.phi, T.c])
    indices, H, edges, max_degree, violations = _decompose_coords(xy, T.delta, t, C, LINE_BOX)
    D = Decomposition(T, indices, t, C, H, edges, max_degree,
                      chain_ok=violations == 0, chain_violations=violations)
    D.certificates = [tube_katz_tao_profile(part, t).C_star for part in D.parts]
    return D


def tube_cover_concentration(T: TubeSet, t: float) -> float:
    if len(T) == 0:
        raise EmptyInputError("Familia vacía.")
    return _coords_concentration(np.column_stack([T.phi, T.c]), T.delta, t, LINE_BOX)


def degree_bound(H: int, delta_value: float) -> float:
    """Cota del grado: solapamiento de cada recubrimiento × H × número de escalas."""
    return 64.0 * H * math.log2(1.0 / delta_value)


# ========= VERIFICACIÓN =========

@dataclass
class DecompositionReport:
    disjoint: bool
    union_ok: bool
    katz_tao_ok: bool
    c0: float
    worst_part: Optional[int]
    worst_C: float
    count_bound: float
    count_bound_ok: bool
    failures: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.disjoint and self.union_ok and self.katz_tao_ok

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "disjoint": self.disjoint,
            "union_ok": self.union_ok,
            "katz_tao_ok": self.katz_tao_ok,
            "c0": self.c0,
            "worst_part": self.worst_part,
            "worst_C": self.worst_C,
            "count_bound": self.count_bound,
            "count_bound_ok": self.count_bound_ok,
            "failures": self.failures,
        }


def _coords(S: Union[PointSet, TubeSet]) -> np.ndarray:
    """Puntos tal cual; tubos por las coordenadas (phi, c) de sus ejes."""
    if isinstance(S, TubeSet):
        return np.column_stack([S.phi, S.c])
    return S.xy


def _sorted_rows(xy: np.ndarray) -> np.ndarray:
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    return xy[np.lexsort((xy[:, 1], xy[:, 0]))]


def verify_decomposition(D: Decomposition, P: Union[PointSet, TubeSet], t: float,
                         eps: float = 0.1) -> DecompositionReport:
    """
    Recalcula todo desde las partes: disyunción, unión igual a P como multiconjunto
    y constante Katz–Tao ≤ 4^t por parte. La cota N ≤ C|P|δ^(t−ε) se informa
    pero no decide ``passed``. Con una familia de tubos se compara por (phi, c)
    y se usa el perfil Katz–Tao de tubos.
    """
    profile_fn = tube_katz_tao_profile if isinstance(P, TubeSet) else katz_tao_profile
    parts = D.parts
    c0 = 4.0 ** t
    failures: List[str] = []
    union = np.vstack([_coords(p) for p in parts]) if parts else np.empty((0, 2))
    ordered = _sorted_rows(union)
    dup = np.all(ordered[1:] == ordered[:-1], axis=1) if len(ordered) > 1 else np.zeros(0, bool)
    disjoint = not bool(dup.any())
    if not disjoint:
        failures.append(f"punto repetido entre partes: {ordered[1:][dup][0].tolist()}")
    target = _sorted_rows(_coords(P))
    union_ok = ordered.shape == target.shape and bool(np.all(ordered == target))
    if not union_ok:
        failures.append(f"la unión tiene {len(ordered)} puntos; P tiene {len(target)}")

    worst_part, worst_C = None, 0.0
    for i, part in enumerate(parts):
        if len(part) == 0:
            continue
        C_part = profile_fn(part, t).C_star
        if C_part > worst_C:
            worst_part, worst_C = i, C_part
    katz_tao_ok = worst_C <= c0 * (1 + 1e-12)
    if not katz_tao_ok:
        failures.append(f"parte {worst_part}: constante Katz–Tao {worst_C:.4g} > 4^t = {c0:.4g}")

    count_bound = D.C * len(P) * P.delta.value ** (t - eps)
    return DecompositionReport(
        disjoint=disjoint,
        union_ok=union_ok,
        katz_tao_ok=katz_tao_ok,
        c0=c0,
        worst_part=worst_part,
        worst_C=worst_C,
        count_bound=count_bound,
        count_bound_ok=D.N <= count_bound,
        failures=failures,
    )
