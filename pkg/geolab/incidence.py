# geolab/incidence.py
"""
Conteo de incidencias δ entre puntos y tubos, y comprobación de la cota de Fu–Ren.

Una incidencia es un par (p, T) con |p·n − c| ≤ w. Hay dos motores:

- ``count_bruteforce``: todos los pares (oráculo).
- ``count_indexed``: retícula de celdas de lado max(δ, w) con los puntos
  agrupados por celda; cada tubo solo visita las celdas que su banda toca.

Ambos evalúan exactamente la misma expresión en coma flotante, así que los
conteos coinciden bit a bit.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .conf import dgl
from .errors import CertificationError, EmptyInputError, GuardrailExceeded, UndefinedRegimeError
from .geom import PointSet, TubeSet, Tube, point_line_dist, Point2
from .regularity import concentration_profile, tube_concentration_profile

logger = logging.getLogger(__name__)

# máximo de pares punto-tubo por bloque del motor de fuerza bruta
BRUTE_BLOCK = 1 << 22
# tubos por tarea en el motor indexado
TUBE_CHUNK = 256


@dataclass
class IncidenceReport:
    total: int
    per_tube: np.ndarray
    method: str = "indexed"
    kappa: Optional[float] = None
    eps: Optional[float] = None
    fu_ren_ceiling: Optional[float] = None
    margin: Optional[float] = None
    violation: bool = False
    certificates: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "total": self.total,
            "method": self.method,
            "kappa": self.kappa,
            "eps": self.eps,
            "fu_ren_ceiling": self.fu_ren_ceiling,
            "margin": self.margin,
            "violation": self.violation,
            "certificates": self.certificates,
            "max_per_tube": int(self.per_tube.max()) if len(self.per_tube) else 0,
        }


def _report(per_tube: np.ndarray, method: str) -> IncidenceReport:
    per_tube = np.asarray(per_tube, dtype=np.int64)
    return IncidenceReport(total=int(per_tube.sum()), per_tube=per_tube, method=method)


def guard(stage: str, estimate: float) -> None:
    limit = dgl("GUARDRAIL_TESTS")
    if estimate > limit:
        raise GuardrailExceeded(stage, int(estimate), limit)


# ========= FUERZA BRUTA =========

def count_bruteforce(P: PointSet, T: TubeSet) -> IncidenceReport:
    if len(T) == 0 or len(P) == 0:
        return _report(np.zeros(len(T), dtype=np.int64), "bruteforce")
    guard("incidencias (fuerza bruta)", len(P) * len(T))
    x, y = P.xy[:, 0], P.xy[:, 1]
    normals = T.normals
    step = max(1, BRUTE_BLOCK // len(P))
    out = np.empty(len(T), dtype=np.int64)
    for a in range(0, len(T), step):
        nx = normals[a:a + step, 0][:, None]
        ny = normals[a:a + step, 1][:, None]
        c = T.c[a:a + step][:, None]
        hit = np.abs(x[None, :] * nx + y[None, :] * ny - c) <= T.w
        out[a:a + step] = hit.sum(axis=1)
    return _report(out, "bruteforce")


# ========= MOTOR INDEXADO =========

@dataclass(frozen=True)
class _Grid:
    """Celdas ocupadas en orden de clave col·nrow + fila; starts delimita sus puntos."""
    x0: float
    y0: float
    h: float
    ncol: int
    nrow: int
    keys: np.ndarray
    starts: np.ndarray
    cols: np.ndarray
    rows: np.ndarray
    xs: np.ndarray
    ys: np.ndarray


def _build_grid(xy: np.ndarray, h: float) -> _Grid:
    x0, y0 = float(xy[:, 0].min()), float(xy[:, 1].min())
    ix = np.floor((xy[:, 0] - x0) / h).astype(np.int64)
    iy = np.floor((xy[:, 1] - y0) / h).astype(np.int64)
    ncol, nrow = int(ix.max()) + 1, int(iy.max()) + 1
    cell = ix * nrow + iy
    order = np.argsort(cell, kind="stable")
    # solo celdas ocupadas: a escala fina la retícula densa no cabe en memoria
    keys, first = np.unique(cell[order], return_index=True)
    starts = np.append(first, len(cell)).astype(np.int64)
    return _Grid(x0, y0, h, ncol, nrow, keys, starts, np.unique(ix), np.unique(iy),
                 xy[order, 0].copy(), xy[order, 1].copy())


def _band(centers: np.ndarray, line_at: np.ndarray, half: float, origin: float,
          h: float, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Índices [lo, hi] de celdas cuyo centro cae en line_at ± half."""
    lo = np.ceil((line_at - half - origin) / h - 0.5).astype(np.int64)
    hi = np.floor((line_at + half - origin) / h - 0.5).astype(np.int64)
    return np.clip(lo, 0, n - 1), np.minimum(hi, n - 1)


def _count_tube(g: _Grid, nx: float, ny: float, c: float, w: float) -> int:
    # margen de celda: el centro dista ≤ h·√2/2 de cualquier punto de la celda
    reach = w + g.h * math.sqrt(2) / 2 + 1e-7 * g.h + 1e-12
    if abs(ny) >= abs(nx):
        cols = g.cols
        xc = g.x0 + (cols + 0.5) * g.h
        lo, hi = _band(xc, (c - xc * nx) / ny, reach / abs(ny), g.y0, g.h, g.nrow)
        major, minor_lo, minor_hi = cols, lo, hi
        cell_of = lambda a, b: a * g.nrow + b
    else:
        rows = g.rows
        yc = g.y0 + (rows + 0.5) * g.h
        lo, hi = _band(yc, (c - yc * ny) / nx, reach / abs(nx), g.x0, g.h, g.ncol)
        major, minor_lo, minor_hi = rows, lo, hi
        cell_of = lambda a, b: b * g.nrow + a
    lens = minor_hi - minor_lo + 1
    keep = lens > 0
    if not keep.any():
        return 0
    major, minor_lo, lens = major[keep], minor_lo[keep], lens[keep]
    run_start = np.repeat(np.cumsum(lens) - lens, lens)
    minor = np.repeat(minor_lo, lens) + (np.arange(lens.sum()) - run_start)
    cells = cell_of(np.repeat(major, lens), minor)
    pos = np.searchsorted(g.keys, cells)
    found = pos < len(g.keys)
    found[found] = g.keys[pos[found]] == cells[found]
    pos = pos[found]
    if len(pos) == 0:
        return 0
    s, e = g.starts[pos], g.starts[pos + 1]
    sizes = e - s
    total = int(sizes.sum())
    if total == 0:
        return 0
    offs = np.repeat(s - (np.cumsum(sizes) - sizes), sizes) + np.arange(total)
    hit = np.abs(g.xs[offs] * nx + g.ys[offs] * ny - c) <= w
    return int(np.count_nonzero(hit))


def estimate_indexed_tests(P: PointSet, T: TubeSet) -> float:
    """Pruebas primitivas esperadas: |T|·(|P|·área de banda) con área ≈ 2·√2·(2w + 2h)."""
    h = max(P.delta.value, T.w)
    return len(T) * max(1.0, len(P) * min(1.0, 2 * math.sqrt(2) * (2 * T.w + 2 * h) / 4.0))


def count_indexed(P: PointSet, T: TubeSet, workers: Optional[int] = None) -> IncidenceReport:
    if len(T) == 0 or len(P) == 0:
        return _report(np.zeros(len(T), dtype=np.int64), "indexed")
    guard("incidencias (indexado)", estimate_indexed_tests(P, T))
    g = _build_grid(P.xy, max(P.delta.value, T.w))
    normals = T.normals
    w = T.w

    def run(a: int) -> np.ndarray:
        b = min(a + TUBE_CHUNK, len(T))
        return np.array([_count_tube(g, normals[i, 0], normals[i, 1], T.c[i], w)
                         for i in range(a, b)], dtype=np.int64)

    chunks = range(0, len(T), TUBE_CHUNK)
    workers = workers if workers is not None else dgl("WORKERS")
    if workers > 1 and len(T) > TUBE_CHUNK:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(a) for a in chunks]
    return _report(np.concatenate(parts), "indexed")


# ========= COTA DE FU–REN =========

def fu_ren_kappa(s: float, t: float) -> float:
    if not (0.0 <= s <= 2.0 and 0.0 <= t <= 2.0):
        raise UndefinedRegimeError(f"(s, t) = ({s}, {t}) fuera de [0, 2]².")
    if s + t <= 1:
        raise UndefinedRegimeError(f"s + t = {s + t} ≤ 1: la cota no está definida.")
    return min(0.5, 1.0 / (s + t - 1))


def fu_ren_check(P: PointSet, T: TubeSet, s: float, t: float, epsP: float, epsT: float,
                 certify: bool = True) -> IncidenceReport:
    """
    I(P, T) ≤ |P|·|T|·δ^(κ(s+t−1) − 5ε), con ε = max(epsP, epsT). Antes de
    contar se certifica que P es (δ,s,δ^-epsP) y T es (δ,t,δ^-epsT).
    """
    kappa = fu_ren_kappa(s, t)
    eps = max(epsP, epsT)
    d = P.delta.value
    certificates = {}
    if certify:
        for label, objs, exponent, e, fn in (("P", P, s, epsP, concentration_profile),
                                             ("T", T, t, epsT, tube_concentration_profile)):
            if len(objs) == 0:
                continue
            profile = fn(objs, exponent)
            certificates[label] = profile.C_star
            if profile.C_star > d ** -e * (1 + 1e-12):
                raise CertificationError(
                    f"{label} no es un (δ,{exponent},δ^-{e})-conjunto: C* = {profile.C_star:.4g} "
                    f"> {d ** -e:.4g}.", profile,
                )
    report = count_indexed(P, T)
    ceiling = len(P) * len(T) * d ** (kappa * (s + t - 1) - 5 * eps)
    report.kappa, report.eps, report.fu_ren_ceiling = kappa, eps, ceiling
    report.certificates = certificates
    if report.total > 0:
        report.margin = math.log2(ceiling / report.total)
    report.violation = report.total > ceiling
    if report.violation:
        logger.warning("Fu–Ren: I = %d supera el techo %.4g (κ=%.3f, ε=%.3f)",
                       report.total, ceiling, kappa, eps)
    return report


def heavy_tubes(P: PointSet, T: TubeSet, sigma: float, eps: float) -> TubeSet:
    """Tubos con |P ∩ T| ≥ δ^(σ+ε)·|P|."""
    report = count_indexed(P, T)
    threshold = np.nextafter(P.delta.value ** (sigma + eps) * len(P), -np.inf)
    return T.subset(np.flatnonzero(report.per_tube >= threshold))


# ========= DOS EXTREMOS =========

@dataclass(frozen=True)
class TwoEndsResult:
    concentrated: bool
    witness: Optional[Tuple[float, float]]
    count: int
    needed: int
    rho: float

    def as_dict(self) -> dict:
        return {"concentrated": self.concentrated, "witness": self.witness,
                "count": self.count, "needed": self.needed, "rho": self.rho}


def two_ends_test(points: PointSet, rho: float) -> TwoEndsResult:
    """
    ¿Hay una bola de radio ρ con al menos ⌈n/3⌉ de los puntos? Los centros
    candidatos son la retícula (ρ/2)·Z² alrededor de cada punto; toda bola de
    radio ρ/2 con la masa queda dentro de una de radio ρ con centro candidato.
    """
    n = len(points)
    if n == 0:
        raise EmptyInputError("Conjunto vacío.")
    if rho <= 0:
        raise ValueError("ρ debe ser positivo.")
    step = rho / 2
    base = np.rint(points.xy / step).astype(np.int64)
    offs = np.arange(-3, 4)
    ox, oy = np.meshgrid(offs, offs, indexing="ij")
    cand = (base[:, None, :] + np.column_stack([ox.reshape(-1), oy.reshape(-1)])[None, :, :]).reshape(-1, 2)
    cand = np.unique(cand, axis=0)
    centers = cand.astype(float) * step
    counts = cKDTree(points.xy).query_ball_point(centers, rho, return_length=True)
    best = int(np.argmax(counts))
    needed = math.ceil(n / 3)
    count = int(counts[best])
    return TwoEndsResult(count >= needed, tuple(map(float, centers[best])), count, needed, rho)


def points_in_tube(P: PointSet, tube: Tube) -> PointSet:
    nx, ny = tube.line.normal
    hit = np.abs(P.xy[:, 0] * nx + P.xy[:, 1] * ny - tube.line.c) <= tube.w
    return P.subset(np.flatnonzero(hit))


def incidence_oracle_pair(p: Point2, tube: Tube) -> bool:
    """Prueba primitiva escalar (misma aritmética que los motores vectoriales)."""
    return point_line_dist(p, tube.line) <= tube.w
