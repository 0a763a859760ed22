# geolab/experiments.py
"""
Experimentos de barrido de escalas δ = 2^-k, k ∈ [k_min, k_max].

Cada experimento construye sus conjuntos a profundidad ajustada a k, mide una
cantidad por escala, ajusta la pendiente de log2 N contra k y emite veredictos
con tolerancias fijas. Las escalas se procesan en paralelo (hilos) y la tabla
se ensambla en orden de k: el reporte es reproducible bit a bit desde
(configuración, semilla). Los tiempos van aparte.
"""
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from django.core.exceptions import ValidationError

from .analytics import stage, track
from .conf import dgl, tolerance
from .decompose import cover_concentration, degree_bound, katz_tao_decompose, verify_decomposition
from .errors import CertificationError, DegenerateInputError
from .geom import (
    WORKING_BOX, PointSet, Scale, TubeSet, count_cells, lattice_cells, tube_covering_number,
)
from .incidence import fu_ren_check, fu_ren_kappa, heavy_tubes
from .projections import best_viewpoint, direction_set, is_collinear, spanned_lines
from .regularity import ExponentFit, concentration_profile, fit_exponent, tube_concentration_profile
from .setgen import (
    BushSpec, CantorSpec, budget_tree, gen_cantor_product, gen_random_frostman, gen_random_tubes,
    gen_tube_bush, gen_tube_net,
)
from utils.reports import write_json, write_table

logger = logging.getLogger(__name__)

EXPERIMENTS = (
    "radial-exponent",
    "incidence-bound",
    "furstenberg",
    "beck",
    "decompose-bench",
    "directions",
)
POINT_KINDS = ("cantor", "frostman", "grid", "segment", "points")
TUBE_KINDS = ("random-tubes", "tube-net")


def derive_seed(*parts: int) -> int:
    """Semilla entera estable derivada de (semilla, k, rol, ...)."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


# ========= ESPECIFICACIONES DE CONJUNTOS =========

@dataclass(frozen=True)
class SetSpec:
    """
    Conjunto de puntos o tubos construible a cualquier escala:

    - cantor:  {a: {base, digits}, b: {base, digits} | null, offset: [x, y]}
    - frostman: {s}
    - grid:    retícula δ completa de [0, 1)²
    - segment: {start: [x, y], end: [x, y]} muestreado con paso δ
    - points:  {points: [[x, y], ...]} fijo en todas las escalas
    - random-tubes: {t, n}; n recorta la familia a n tubos
    - tube-net: T^r con semiancho δ
    """
    kind: str
    params: Dict[str, Any] = field(default_factory=dict)

    @property
    def is_tubes(self) -> bool:
        return self.kind in TUBE_KINDS

    @property
    def dimension(self) -> float:
        p = self.params
        if self.kind == "cantor":
            dim = _cantor(p["a"], 1).dimension
            if p.get("b"):
                dim += _cantor(p["b"], 1).dimension
            return dim
        if self.kind == "frostman":
            return float(p["s"])
        if self.kind == "random-tubes":
            return float(p["t"])
        if self.kind in ("grid", "tube-net"):
            return 2.0
        if self.kind == "segment":
            return 1.0
        return 0.0

    def build(self, k: int, seed: int):
        """El conjunto a δ = 2^-k, o None si la profundidad no encaja con k."""
        delta = Scale(k)
        p = self.params
        if self.kind == "cantor":
            a = _matched_cantor(p["a"], k)
            b = _matched_cantor(p["b"], k) if p.get("b") else None
            if a is None or (p.get("b") and b is None):
                return None
            P = gen_cantor_product(a, b, delta)
            offset = p.get("offset")
            if offset:
                P = PointSet(delta, P.xy + np.asarray(offset, dtype=float), check_separation=False)
            return P
        if self.kind == "frostman":
            return gen_random_frostman(delta, float(p["s"]), seed)
        if self.kind == "grid":
            g = np.arange(2 ** k) * delta.value
            gx, gy = np.meshgrid(g, g, indexing="ij")
            return PointSet(delta, np.column_stack([gx.reshape(-1), gy.reshape(-1)]),
                            check_separation=False)
        if self.kind == "segment":
            start, end = np.asarray(p["start"], float), np.asarray(p["end"], float)
            n = int(math.floor(np.linalg.norm(end - start) / delta.value)) + 1
            u = np.arange(n)[:, None] / max(n - 1, 1)
            return PointSet(delta, start + u * (end - start))
        if self.kind == "points":
            return PointSet(delta, np.asarray(p.get("points") or [], float).reshape(-1, 2))
        if self.kind == "random-tubes":
            return gen_random_tubes(delta, float(p["t"]), seed, n=p.get("n"))
        if self.kind == "tube-net":
            return gen_tube_net(delta.value / 2)
        raise ValidationError({"kind": f"Tipo de conjunto desconocido: {self.kind}"})


def _cantor(d: dict, level: int) -> CantorSpec:
    return CantorSpec(int(d["base"]), tuple(d["digits"]), level)


def _matched_cantor(d: dict, k: int) -> Optional[CantorSpec]:
    """
    Profundidad ajustada a δ = 2^-k. Base 2^a: nivel k/a solo si a divide a k
    (dimensión nominal exacta). Otras bases: el nivel más profundo cuya
    separación natural sigue siendo ≥ δ.
    """
    base = int(d["base"])
    a = int(round(math.log2(base)))
    if 2 ** a == base:
        return _cantor(d, k // a) if k % a == 0 and k // a >= 1 else None
    level = 1
    while _cantor(d, level + 1).natural_separation() * 2 ** k >= 1:
        level += 1
    spec = _cantor(d, level)
    return spec if spec.natural_separation() * 2 ** k >= 1 else None


# ========= CONFIGURACIÓN Y REPORTE =========

@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    k_min: int
    k_max: int
    x: Optional[SetSpec] = None
    y: Optional[SetSpec] = None
    tubes: Optional[SetSpec] = None
    s: Optional[float] = None
    t: Optional[float] = None
    sigma: Optional[float] = None
    eps: Optional[float] = None
    # incidence-bound: ε mínimo que certifica cada conjunto, en vez de uno fijo
    auto_eps: bool = False
    C: Optional[float] = None
    tolerance: Optional[float] = None
    seed: int = 0
    mode: str = "tubes"
    out: Optional[str] = None

    @property
    def scales(self) -> List[int]:
        return list(range(self.k_min, self.k_max + 1))

    @property
    def tol(self) -> float:
        return self.tolerance if self.tolerance is not None else tolerance(self.experiment)

    def echo(self) -> dict:
        data = asdict(self)
        data.pop("out", None)
        return data


@dataclass
class Verdict:
    criterion: str
    passed: bool
    observed: Optional[float]
    threshold: Optional[float]
    # los veredictos informativos no deciden el resultado del experimento
    asserted: bool = True
    detail: str = ""


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    rows: List[dict] = field(default_factory=list)
    fit: Optional[ExponentFit] = None
    verdicts: List[Verdict] = field(default_factory=list)
    extras: dict = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts if v.asserted)

    def as_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "config": self.config,
            "rows": self.rows,
            "fit": self.fit.as_dict() if self.fit else None,
            "verdicts": [asdict(v) for v in self.verdicts],
            "extras": self.extras,
            "passed": self.passed,
        }

    def write(self, out_dir: str) -> List[str]:
        os.makedirs(out_dir, exist_ok=True)
        paths = [
            write_json(self.as_dict(), os.path.join(out_dir, "report.json")),
            write_table(self.rows, os.path.join(out_dir, "table.csv")),
            write_json(self.timings, os.path.join(out_dir, "timings.json")),
        ]
        logger.info("reporte %s escrito en %s", self.experiment, out_dir)
        return paths


# ========= INFRAESTRUCTURA =========

def _sweep(cfg: ExperimentConfig, report: ExperimentReport,
           measure: Callable[[int], Optional[dict]]) -> None:
    """Mide cada escala en paralelo y añade las filas en orden de k."""
    def run(k):
        with stage(f"k={k}", cfg.experiment, report.timings, k=k):
            return measure(k)

    workers = max(1, dgl("WORKERS"))
    if workers > 1 and len(cfg.scales) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, cfg.scales))
    else:
        rows = [run(k) for k in cfg.scales]
    report.rows.extend(row for row in rows if row is not None)


def _fit_rows(report: ExperimentReport, key: str = "N") -> Optional[ExponentFit]:
    samples = [(row["k_r"], row[key]) for row in report.rows if row.get(key, 0) >= 1]
    try:
        report.fit = fit_exponent(samples)
    except DegenerateInputError as exc:
        report.extras["fit_error"] = str(exc)
        report.fit = None
    return report.fit


def _slope_verdict(report: ExperimentReport, criterion: str, bound: float, tol: float,
                   asserted: bool = True, detail: str = "") -> Verdict:
    slope = report.fit.slope if report.fit else None
    v = Verdict(criterion, slope is not None and slope >= bound - tol, slope, bound - tol,
                asserted=asserted, detail=detail)
    report.verdicts.append(v)
    return v


def _require(cfg: ExperimentConfig, *names: str) -> None:
    missing = [n for n in names if getattr(cfg, n) is None]
    if missing:
        raise ValidationError({n: "Requerido para este experimento." for n in missing})


def _first_built(spec: SetSpec, cfg: ExperimentConfig, role: int):
    for k in cfg.scales:
        built = spec.build(k, derive_seed(cfg.seed, k, role))
        if built is not None:
            return built
    raise ValidationError({"k_min": "Ninguna escala del rango encaja con la profundidad del conjunto."})


def _new_report(cfg: ExperimentConfig) -> ExperimentReport:
    track("inicio", cfg.experiment, extras={"k_min": cfg.k_min, "k_max": cfg.k_max, "seed": cfg.seed})
    return ExperimentReport(cfg.experiment, cfg.echo())


# ========= EXPERIMENTOS =========

def radial_bound(dim_x: float, dim_y: float) -> float:
    """Cota de la dimensión de π_x(Y) para algún x ∈ X."""
    if dim_y > 1:
        return min(dim_x + dim_y - 1, 1.0)
    return min(dim_x, dim_y, 1.0)


def run_radial_exponent(cfg: ExperimentConfig) -> ExperimentReport:
    _require(cfg, "x", "y")
    dim_x, dim_y = cfg.x.dimension, cfg.y.dimension
    bound = radial_bound(dim_x, dim_y)
    if dim_y <= 1 and is_collinear(_first_built(cfg.x, cfg, 1)):
        raise ValidationError({"x": "X está contenido en una recta: la cota con dim Y ≤ 1 no aplica."})
    report = _new_report(cfg)
    report.extras.update({"dim_x": dim_x, "dim_y": dim_y, "bound": bound,
                          "branch": "dim Y > 1" if dim_y > 1 else "dim Y ≤ 1"})

    def measure(k):
        X = cfg.x.build(k, derive_seed(cfg.seed, k, 1))
        Y = cfg.y.build(k, derive_seed(cfg.seed, k, 2))
        if X is None or Y is None:
            return None
        vp = best_viewpoint(X, Y, Scale(k).value)
        return {"k_r": k, "N": vp.covering, "n_x": len(X), "n_y": len(Y),
                "viewpoint": [vp.point.x, vp.point.y]}

    _sweep(cfg, report, measure)
    _fit_rows(report)
    _slope_verdict(report, "radial-exponent-trend", bound, cfg.tol)
    return report


def furstenberg_gamma(s: float, t: float) -> float:
    return s + min(s, t)


def _chord(phi: float, c: float, box=WORKING_BOX):
    """Extremos del segmento recta ∩ caja (None si no la corta)."""
    nx, ny = math.cos(phi), math.sin(phi)
    foot = np.array([c * nx, c * ny])
    d = np.array([-ny, nx])
    lo, hi = -math.inf, math.inf
    for i, (a, b) in enumerate(((box[0], box[2]), (box[1], box[3]))):
        if abs(d[i]) < 1e-15:
            if not (a <= foot[i] <= b):
                return None
            continue
        l1, l2 = sorted(((a - foot[i]) / d[i], (b - foot[i]) / d[i]))
        lo, hi = max(lo, l1), min(hi, l2)
    if lo > hi:
        return None
    return foot + lo * d, foot + hi * d


def run_furstenberg(cfg: ExperimentConfig) -> ExperimentReport:
    _require(cfg, "x", "s")
    s = cfg.s
    t = cfg.t if cfg.t is not None else cfg.x.dimension
    gamma = furstenberg_gamma(s, t)
    report = _new_report(cfg)
    report.extras.update({"s": s, "t": t, "gamma": gamma, "mode": cfg.mode})

    def measure_tubes(k):
        delta = Scale(k)
        P = cfg.x.build(k, derive_seed(cfg.seed, k, 1))
        if P is None:
            return None
        phi, c = [], []
        for i, apex in enumerate(P.points):
            bush = gen_tube_bush(BushSpec(apex, s, delta, seed=derive_seed(cfg.seed, k, 3, i)))
            phi.append(bush.phi)
            c.append(bush.c)
        union = TubeSet(delta, np.concatenate(phi), np.concatenate(c))
        return {"k_r": k, "N": tube_covering_number(union, delta.value), "n_p": len(P), "n_tubes": len(union)}

    def measure_points(k):
        # forma dual: P_T ⊂ T con T en una (δ,t)-familia, se mide |∪ P_T|_δ
        delta = Scale(k)
        T = gen_random_tubes(delta, t, derive_seed(cfg.seed, k, 4))
        pts = []
        for i, (phi, c) in enumerate(zip(T.phi, T.c)):
            chord = _chord(phi, c)
            if chord is None:
                continue
            a, b = chord
            rng = np.random.default_rng(derive_seed(cfg.seed, k, 5, i))
            u = budget_tree(k, 1, 2.0 ** (s * k), rng)[:, 0].astype(float) * delta.value
            pts.append(a + u[:, None] * (b - a))
        xy = np.vstack(pts) if pts else np.empty((0, 2))
        return {"k_r": k, "N": count_cells(lattice_cells(xy, delta.value)), "n_tubes": len(T),
                "n_points": len(xy)}

    _sweep(cfg, report, measure_points if cfg.mode == "points" else measure_tubes)
    _fit_rows(report)
    _slope_verdict(report, "furstenberg-gamma-trend", gamma, cfg.tol)
    if t > s:
        # la mejora ε sobre 2s no es observable a esta escala: solo se informa
        v = _slope_verdict(report, "furstenberg-2s-baseline", 2 * s, 0.0, asserted=False)
        if report.fit:
            report.extras["excess_over_2s"] = report.fit.slope - 2 * s
        logger.info("furstenberg: pendiente vs 2s = %s", v.observed)
    return report


def _auto_eps(C_star: float, k: int) -> float:
    return max(0.0, math.log2(C_star) / k) if C_star > 0 else 0.0


def run_incidence_bound(cfg: ExperimentConfig) -> ExperimentReport:
    _require(cfg, "x", "tubes")
    s = cfg.s if cfg.s is not None else cfg.x.dimension
    t = cfg.t if cfg.t is not None else cfg.tubes.dimension
    kappa = fu_ren_kappa(s, t)
    report = _new_report(cfg)
    fixed_eps = cfg.eps if cfg.eps is not None else dgl("INCIDENCE_EPS")
    report.extras.update({"s": s, "t": t, "kappa": kappa, "certification_failures": [],
                          "eps_mode": "auto" if cfg.auto_eps else "fixed",
                          "eps": None if cfg.auto_eps else fixed_eps})

    def measure(k):
        P = cfg.x.build(k, derive_seed(cfg.seed, k, 1))
        T = cfg.tubes.build(k, derive_seed(cfg.seed, k, 2))
        if P is None or T is None:
            return None
        if cfg.auto_eps:
            epsP = _auto_eps(concentration_profile(P, s).C_star, k) if len(P) else 0.0
            epsT = _auto_eps(tube_concentration_profile(T, t).C_star, k) if len(T) else 0.0
        else:
            epsP = epsT = fixed_eps
        row = {"k_r": k, "n_p": len(P), "n_t": len(T), "epsP": epsP, "epsT": epsT}
        try:
            rep = fu_ren_check(P, T, s, t, epsP, epsT)
        except CertificationError as exc:
            report.extras["certification_failures"].append(
                {"k_r": k, "error": str(exc), "profile": exc.profile.as_dict() if exc.profile else None}
            )
            row.update({"certified": False})
            return row
        row.update({"certified": True, "total": rep.total, "ceiling": rep.fu_ren_ceiling,
                    "margin": rep.margin, "violation": rep.violation,
                    "C_P": rep.certificates.get("P"), "C_T": rep.certificates.get("T")})
        if cfg.sigma is not None and len(P) and len(T):
            row["heavy"] = len(heavy_tubes(P, T, cfg.sigma, max(epsP, epsT)))
        return row

    _sweep(cfg, report, measure)
    report.extras["certification_failures"].sort(key=lambda f: f["k_r"])
    certified = [r for r in report.rows if r.get("certified")]
    worst = min((r["margin"] for r in certified if r.get("margin") is not None), default=None)
    report.verdicts.append(Verdict("fu-ren-non-violation",
                                   not any(r["violation"] for r in certified), worst, 0.0))
    report.verdicts.append(Verdict("incidence-certification",
                                   len(certified) == len(report.rows), len(certified), len(report.rows)))
    return report


def run_beck(cfg: ExperimentConfig) -> ExperimentReport:
    _require(cfg, "x")
    dim = cfg.x.dimension
    bound = min(2 * dim, 2.0)
    report = _new_report(cfg)
    report.extras.update({"dim": dim, "bound": bound})

    def measure(k):
        X = cfg.x.build(k, derive_seed(cfg.seed, k, 1))
        if X is None:
            return None
        lines, covering = spanned_lines(X, Scale(k).value, seed=derive_seed(cfg.seed, k, 6))
        return {"k_r": k, "N": covering, "n_x": len(X), "lines": len(lines)}

    _sweep(cfg, report, measure)
    _fit_rows(report)
    _slope_verdict(report, "beck-trend", bound, cfg.tol)
    return report


def run_directions(cfg: ExperimentConfig) -> ExperimentReport:
    _require(cfg, "x")
    dim = cfg.x.dimension
    bound = min(dim, 1.0)
    report = _new_report(cfg)
    report.extras.update({"dim": dim, "bound": bound})

    def measure(k):
        X = cfg.x.build(k, derive_seed(cfg.seed, k, 1))
        if X is None:
            return None
        ds, covering = direction_set(X, Scale(k).value, seed=derive_seed(cfg.seed, k, 7))
        return {"k_r": k, "N": covering, "n_x": len(X), "sampled": ds.sampled}

    _sweep(cfg, report, measure)
    _fit_rows(report)
    _slope_verdict(report, "directions-trend", bound, cfg.tol)
    return report


def run_decompose_bench(cfg: ExperimentConfig) -> ExperimentReport:
    _require(cfg, "x")
    t = cfg.t if cfg.t is not None else cfg.x.dimension
    eps = cfg.eps if cfg.eps is not None else 0.1
    report = _new_report(cfg)
    report.extras.update({"t": t, "eps": eps})

    def measure(k):
        P = cfg.x.build(k, derive_seed(cfg.seed, k, 1))
        if P is None:
            return None
        C = cfg.C if cfg.C is not None else cover_concentration(P, t)
        D = katz_tao_decompose(P, t, C)
        rep = verify_decomposition(D, P, t, eps)
        return {"k_r": k, "n_p": len(P), "C": C, "H": D.H, "N": D.N, "edges": D.edges,
                "max_degree": D.max_degree, "degree_bound": degree_bound(D.H, P.delta.value),
                "worst_C": rep.worst_C, "passed": rep.passed, "chain_ok": D.chain_ok,
                "count_bound": rep.count_bound, "count_bound_ok": rep.count_bound_ok}

    _sweep(cfg, report, measure)
    rows = report.rows
    report.verdicts.append(Verdict("decomposition-certificate", all(r["passed"] for r in rows),
                                   max((r["worst_C"] for r in rows), default=None), 4.0 ** t))
    report.verdicts.append(Verdict("decomposition-degree",
                                   all(r["max_degree"] <= r["degree_bound"] for r in rows),
                                   max((r["max_degree"] for r in rows), default=None), None))
    held = [r["k_r"] for r in rows if r["count_bound_ok"]]
    report.extras["largest_delta_count_bound"] = 2.0 ** -min(held) if held else None
    report.verdicts.append(Verdict("decomposition-count-bound", all(r["count_bound_ok"] for r in rows),
                                   max((r["N"] for r in rows), default=None), None, asserted=False))
    return report


RUNNERS: Dict[str, Callable[[ExperimentConfig], ExperimentReport]] = {
    "radial-exponent": run_radial_exponent,
    "incidence-bound": run_incidence_bound,
    "furstenberg": run_furstenberg,
    "beck": run_beck,
    "decompose-bench": run_decompose_bench,
    "directions": run_directions,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    if cfg.experiment not in RUNNERS:
        raise ValidationError({"experiment": f"Experimento desconocido: {cfg.experiment}"})
    report = RUNNERS[cfg.experiment](cfg)
    track("fin", cfg.experiment, valor=sum(report.timings.values()),
          extras={"passed": report.passed, "escalas": len(report.rows)})
    return report
