# geolab/forms.py
"""
Validación de configuraciones YAML con formularios de Django.

Un documento de experimento se carga con ``yaml.safe_load`` y pasa por
``ExperimentConfigForm``; las especificaciones anidadas (x, y, tubes) pasan
por ``SetSpecForm`` y, según su tipo, por ``CantorSpecForm`` o
``FrostmanSpecForm``. Los errores salen como ValidationError por campo.
"""
import math
import os
from typing import Any, Dict, Optional

import yaml
from django import forms
from django.core.exceptions import ValidationError

from .conf import dgl
from .experiments import EXPERIMENTS, POINT_KINDS, TUBE_KINDS, ExperimentConfig, SetSpec
from .geom import Point2, Scale
from .setgen import BushSpec, CantorSpec


def _errors_text(form: forms.Form) -> str:
    return "; ".join(f"{k}: {' '.join(v)}" for k, v in form.errors.items())


class CantorSpecForm(forms.Form):
    base = forms.IntegerField(min_value=2)
    digits = forms.JSONField()
    level = forms.IntegerField(required=False, min_value=1)

    def clean_digits(self):
        v = self.cleaned_data.get("digits")
        if not isinstance(v, list) or not all(isinstance(d, int) and not isinstance(d, bool) for d in v):
            raise ValidationError("Los dígitos deben ser una lista de enteros.")
        return v

    def clean(self):
        cleaned = super().clean()
        if self.errors:
            return cleaned
        try:
            CantorSpec(cleaned["base"], tuple(cleaned["digits"]), cleaned.get("level") or 1)
        except ValidationError as exc:
            for field, msgs in exc.message_dict.items():
                self.add_error(field if field in self.fields else None, msgs)
        return cleaned

    def to_spec(self, level: Optional[int] = None) -> CantorSpec:
        c = self.cleaned_data
        return CantorSpec(c["base"], tuple(c["digits"]), level or c.get("level") or 1)


class FrostmanSpecForm(forms.Form):
    s = forms.FloatField(min_value=0.0, max_value=2.0)

    def clean_s(self):
        s = self.cleaned_data["s"]
        if s <= 0:
            raise ValidationError("s debe ser > 0.")
        return s


class BushSpecForm(forms.Form):
    apex = forms.JSONField()
    s = forms.FloatField(min_value=0.0, max_value=1.0)
    k = forms.IntegerField()
    count = forms.IntegerField(required=False, min_value=1)
    seed = forms.IntegerField(required=False, min_value=0)

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.fields["k"].validators.append(_k_range)

    def clean_apex(self):
        v = self.cleaned_data.get("apex")
        return _pair(v, "El ápice debe ser [x, y].")

    def to_spec(self) -> BushSpec:
        c = self.cleaned_data
        return BushSpec(Point2(*c["apex"]), c["s"], Scale(c["k"]), c.get("count"), c.get("seed") or 0)


def _k_range(value):
    if not (dgl("K_MIN") <= value <= dgl("K_MAX")):
        raise ValidationError(f"k = {value} fuera de [{dgl('K_MIN')}, {dgl('K_MAX')}].")


def _pair(v, message):
    if (not isinstance(v, (list, tuple)) or len(v) != 2
            or not all(isinstance(x, (int, float)) and math.isfinite(x) for x in v)):
        raise ValidationError(message)
    return [float(v[0]), float(v[1])]


class SetSpecForm(forms.Form):
    kind = forms.ChoiceField(choices=[(k, k) for k in POINT_KINDS + TUBE_KINDS])
    a = forms.JSONField(required=False)
    b = forms.JSONField(required=False)
    offset = forms.JSONField(required=False)
    s = forms.FloatField(required=False)
    t = forms.FloatField(required=False, min_value=0.0, max_value=2.0)
    n = forms.IntegerField(required=False, min_value=1)
    start = forms.JSONField(required=False)
    end = forms.JSONField(required=False)
    points = forms.JSONField(required=False)

    def clean(self):
        cleaned = super().clean()
        kind = cleaned.get("kind")
        if kind == "cantor":
            for axis in ("a", "b"):
                sub = cleaned.get(axis)
                if sub is None:
                    if axis == "a":
                        self.add_error("a", "El Cantor necesita al menos el eje a.")
                    continue
                form = CantorSpecForm(sub if isinstance(sub, dict) else {})
                if not isinstance(sub, dict) or not form.is_valid():
                    self.add_error(axis, _errors_text(form) or "Especificación de Cantor inválida.")
            if cleaned.get("offset") is not None:
                try:
                    cleaned["offset"] = _pair(cleaned["offset"], "offset debe ser [x, y].")
                except ValidationError as exc:
                    self.add_error("offset", exc)
        elif kind == "frostman":
            form = FrostmanSpecForm({"s": cleaned.get("s")})
            if not form.is_valid():
                self.add_error("s", _errors_text(form))
        elif kind == "random-tubes":
            if cleaned.get("t") is None:
                self.add_error("t", "Requerido para random-tubes.")
            elif cleaned["t"] <= 0:
                self.add_error("t", "t debe ser > 0.")
        elif kind == "segment":
            for name in ("start", "end"):
                try:
                    cleaned[name] = _pair(cleaned.get(name), f"{name} debe ser [x, y].")
                except ValidationError as exc:
                    self.add_error(name, exc)
        elif kind == "points":
            pts = cleaned.get("points") or []
            try:
                cleaned["points"] = [_pair(p, "Cada punto debe ser [x, y].") for p in pts]
            except ValidationError as exc:
                self.add_error("points", exc)
        return cleaned

    def to_spec(self) -> SetSpec:
        c = self.cleaned_data
        keys = {
            "cantor": ("a", "b", "offset"),
            "frostman": ("s",),
            "random-tubes": ("t", "n"),
            "segment": ("start", "end"),
            "points": ("points",),
        }.get(c["kind"], ())
        return SetSpec(c["kind"], {k: c.get(k) for k in keys})


class ExperimentConfigForm(forms.Form):
    experiment = forms.ChoiceField(choices=[(e, e) for e in EXPERIMENTS])
    k_min = forms.IntegerField()
    k_max = forms.IntegerField()
    x = forms.JSONField(required=False)
    y = forms.JSONField(required=False)
    tubes = forms.JSONField(required=False)
    s = forms.FloatField(required=False, min_value=0.0, max_value=2.0)
    t = forms.FloatField(required=False, min_value=0.0, max_value=2.0)
    sigma = forms.FloatField(required=False, min_value=0.0)
    eps = forms.FloatField(required=False, min_value=0.0)
    auto_eps = forms.BooleanField(required=False)
    C = forms.FloatField(required=False, min_value=0.0)
    tolerance = forms.FloatField(required=False, min_value=0.0)
    seed = forms.IntegerField(required=False, min_value=0)
    mode = forms.ChoiceField(required=False, choices=[("tubes", "tubes"), ("points", "points")])
    out = forms.CharField(required=False)

    # qué especificaciones exige cada experimento y de qué clase
    REQUIRED = {
        "radial-exponent": {"x": "points", "y": "points"},
        "incidence-bound": {"x": "points", "tubes": "tubes"},
        "furstenberg": {"x": "points"},
        "beck": {"x": "points"},
        "decompose-bench": {"x": "points"},
        "directions": {"x": "points"},
    }

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._specs: Dict[str, SetSpec] = {}

    def clean(self):
        cleaned = super().clean()
        k_min, k_max = cleaned.get("k_min"), cleaned.get("k_max")
        if k_min is not None and k_min < dgl("K_MIN"):
            self.add_error("k_min", f"k_min debe ser ≥ {dgl('K_MIN')}.")
        if k_max is not None and k_max > dgl("K_MAX"):
            self.add_error("k_max", f"k_max debe ser ≤ {dgl('K_MAX')}.")
        if k_min is not None and k_max is not None and k_min > k_max:
            self.add_error("k_max", "k_max debe ser ≥ k_min.")

        experiment = cleaned.get("experiment")
        required = self.REQUIRED.get(experiment, {})
        for name in ("x", "y", "tubes"):
            raw = cleaned.get(name)
            if raw is None:
                if name in required:
                    self.add_error(name, f"Requerido por {experiment}.")
                continue
            form = SetSpecForm(raw if isinstance(raw, dict) else {})
            if not isinstance(raw, dict) or not form.is_valid():
                self.add_error(name, _errors_text(form) or "Especificación inválida.")
                continue
            spec = form.to_spec()
            wants = required.get(name)
            if wants == "points" and spec.is_tubes or wants == "tubes" and not spec.is_tubes:
                self.add_error(name, f"{name} debe ser un conjunto de {wants}.")
                continue
            self._specs[name] = spec

        if experiment == "furstenberg" and cleaned.get("s") is None:
            self.add_error("s", "El exponente de los arbustos s es requerido.")
        if experiment == "furstenberg" and cleaned.get("s") is not None and cleaned["s"] > 1:
            self.add_error("s", "El exponente de direcciones va en [0, 1].")
        if cleaned.get("auto_eps") and cleaned.get("eps") is not None:
            self.add_error("auto_eps", "auto_eps y eps son excluyentes.")
        return cleaned

    def to_config(self) -> ExperimentConfig:
        c = self.cleaned_data
        return ExperimentConfig(
            experiment=c["experiment"],
            k_min=c["k_min"],
            k_max=c["k_max"],
            x=self._specs.get("x"),
            y=self._specs.get("y"),
            tubes=self._specs.get("tubes"),
            s=c.get("s"),
            t=c.get("t"),
            sigma=c.get("sigma"),
            eps=c.get("eps"),
            auto_eps=bool(c.get("auto_eps")),
            C=c.get("C"),
            tolerance=c.get("tolerance"),
            seed=c.get("seed") or 0,
            mode=c.get("mode") or "tubes",
            out=c.get("out") or None,
        )


class GenConfigForm(forms.Form):
    """Documento de ``dgl gen``: exactamente uno de set, bush, tube_net."""
    k = forms.IntegerField(required=False)
    seed = forms.IntegerField(required=False, min_value=0)
    set = forms.JSONField(required=False)
    bush = forms.JSONField(required=False)
    tube_net = forms.JSONField(required=False)

    def clean(self):
        cleaned = super().clean()
        targets = [n for n in ("set", "bush", "tube_net") if cleaned.get(n) is not None]
        if len(targets) != 1:
            raise ValidationError("Indica exactamente uno de: set, bush, tube_net.")
        target = targets[0]
        if target == "set":
            if cleaned.get("k") is None:
                self.add_error("k", "Requerido para generar un conjunto.")
            else:
                _k_range(cleaned["k"])
            form = SetSpecForm(cleaned["set"] if isinstance(cleaned["set"], dict) else {})
            if not form.is_valid():
                self.add_error("set", _errors_text(form) or "Especificación inválida.")
            else:
                cleaned["set"] = form.to_spec()
        elif target == "bush":
            data = dict(cleaned["bush"]) if isinstance(cleaned["bush"], dict) else {}
            data.setdefault("k", cleaned.get("k"))
            form = BushSpecForm(data)
            if not form.is_valid():
                self.add_error("bush", _errors_text(form))
            else:
                cleaned["bush"] = form.to_spec()
        else:
            r = cleaned["tube_net"].get("r") if isinstance(cleaned["tube_net"], dict) else None
            if not isinstance(r, (int, float)) or not (0 < r <= 0.5):
                self.add_error("tube_net", "tube_net.r debe estar en (0, 1/2].")
        cleaned["target"] = target
        return cleaned


# ---------- carga ----------

def read_yaml(path: str) -> Dict[str, Any]:
    if not os.path.exists(path):
        raise ValidationError(f"No existe el archivo de configuración {path}.")
    with open(path, encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ValidationError(f"YAML inválido en {path}: {exc}")
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: se esperaba un documento clave-valor.")
    return data


def load_config(path: str, **overrides) -> ExperimentConfig:
    data = read_yaml(path)
    data.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(data)


def config_from_dict(data: Dict[str, Any]) -> ExperimentConfig:
    form = ExperimentConfigForm(data)
    if not form.is_valid():
        raise ValidationError(form.errors.as_data())
    return form.to_config()
