# utils/reports.py
"""
Lectura y escritura de los artefactos del laboratorio:

- conjunto de puntos: CSV ``x,y`` + JSON lateral ``{"k": ..., "box": [...]}``
- familia de tubos: CSV ``phi,c,w`` + JSON lateral ``{"k": ..., "separated": ...}``
- reportes: JSON (NaN/inf se escriben como null) y tablas CSV por escala

Los reales se escriben con ``.17g`` para que la lectura recupere el mismo double.
"""
import csv
import json
import math
import os
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from django.core.exceptions import ValidationError

from geolab.geom import WORKING_BOX, PointSet, Scale, TubeSet


def fmt_real(v) -> str:
    return format(float(v), ".17g")


def sidecar_path(path: str) -> str:
    root, _ = os.path.splitext(path)
    return root + ".json"


def _ensure_dir(path: str) -> None:
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)


# ---------- JSON ----------

def jsonable(obj: Any) -> Any:
    """Convierte numpy y floats no finitos a tipos JSON estándar."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(obj: Any, path: str) -> str:
    _ensure_dir(path)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(jsonable(obj), fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")
    return path


def read_json(path: str) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# ---------- Tablas ----------

def write_table(rows: Sequence[Dict[str, Any]], path: str, columns: Optional[List[str]] = None) -> str:
    """Tabla CSV por escala; las columnas salen de la primera fila si no se dan."""
    _ensure_dir(path)
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(col)) for col in columns])
    return path


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return fmt_real(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(_cell(x) for x in v)
    return str(v)


def read_sweep(path: str) -> List[Tuple[int, float]]:
    """CSV ``k_r,N`` de un barrido de escalas (para ``dgl fit``)."""
    samples = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or not {"k_r", "N"} <= set(reader.fieldnames):
            raise ValidationError(f"{path}: se esperaban columnas k_r,N.")
        for n, row in enumerate(reader, start=2):
            try:
                samples.append((int(row["k_r"]), float(row["N"])))
            except (TypeError, ValueError):
                raise ValidationError(f"{path}:{n}: fila no numérica {row!r}.")
    return samples


# ---------- Puntos ----------

def write_point_set(P: PointSet, path: str) -> str:
    _ensure_dir(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y"])
        for x, y in P.xy:
            writer.writerow([fmt_real(x), fmt_real(y)])
    meta = {"k": P.delta.k, "box": list(P.box)}
    if P.rebox is not None:
        meta["rebox"] = P.rebox.as_dict()
    write_json(meta, sidecar_path(path))
    return path


def _read_columns(path: str, names: Iterable[str]) -> np.ndarray:
    names = list(names)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != names:
            raise ValidationError(f"{path}: encabezado esperado {','.join(names)}.")
        values = []
        for n, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(names):
                raise ValidationError(f"{path}:{n}: se esperaban {len(names)} columnas.")
            try:
                values.append([float(v) for v in row])
            except ValueError:
                raise ValidationError(f"{path}:{n}: valor no numérico.")
    return np.array(values, dtype=float).reshape(-1, len(names))


def read_point_set(path: str, k: Optional[int] = None) -> PointSet:
    meta = read_json(sidecar_path(path)) if os.path.exists(sidecar_path(path)) else {}
    k = k if k is not None else meta.get("k")
    if k is None:
        raise ValidationError(f"{path}: falta la escala k (JSON lateral o --k).")
    xy = _read_columns(path, ["x", "y"])
    return PointSet(Scale(int(k)), xy, box=tuple(meta.get("box", WORKING_BOX)))


# ---------- Tubos ----------

def write_tube_set(T: TubeSet, path: str) -> str:
    _ensure_dir(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["phi", "c", "w"])
        w = fmt_real(T.w)
        for phi, c in zip(T.phi, T.c):
            writer.writerow([fmt_real(phi), fmt_real(c), w])
    write_json({"k": T.delta.k, "separated": T.separated}, sidecar_path(path))
    return path


def read_tube_set(path: str, k: Optional[int] = None) -> TubeSet:
    meta = read_json(sidecar_path(path)) if os.path.exists(sidecar_path(path)) else {}
    data = _read_columns(path, ["phi", "c", "w"])
    widths = np.unique(data[:, 2])
    if len(widths) > 1:
        raise ValidationError(f"{path}: los tubos deben compartir semiancho.")
    w = float(widths[0]) if len(widths) else None
    k = k if k is not None else meta.get("k")
    if k is None:
        if w is None:
            raise ValidationError(f"{path}: falta la escala k (JSON lateral o --k).")
        k = Scale.from_value(min(w, 0.5)).k
    return TubeSet(Scale(int(k)), data[:, 0], data[:, 1], w=w,
                   separated=bool(meta.get("separated", False)))
