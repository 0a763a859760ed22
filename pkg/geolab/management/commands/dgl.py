# geolab/management/commands/dgl.py
"""
python manage.py dgl <subcomando> ...

    gen         genera un conjunto (puntos o tubos) desde un YAML
    check       perfil de concentración de un CSV de puntos o tubos
    decompose   descomposición Katz–Tao de un CSV (o --config decompose-bench)
    incidences  conteo de incidencias + Fu–Ren (o --config incidence-bound)
    radial | beck | furstenberg | directions   experimentos por barrido
    fit         ajuste de exponente de un CSV k_r,N

Códigos de salida: 0 veredictos OK, 1 veredicto fallido, 2 uso/validación.
"""
import json
import logging
import os

from django.conf import settings
from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from geolab.decompose import cover_concentration, katz_tao_decompose, verify_decomposition
from geolab.errors import GeolabError, GuardrailExceeded
from geolab.experiments import run_experiment
from geolab.forms import GenConfigForm, load_config, read_yaml
from geolab.geom import TubeSet
from geolab.incidence import count_bruteforce, count_indexed, fu_ren_check, heavy_tubes
from geolab.regularity import (
    concentration_profile, fit_exponent, katz_tao_profile, tube_concentration_profile,
    tube_katz_tao_profile,
)
from geolab.setgen import gen_tube_bush, gen_tube_net
from utils.reports import (
    jsonable, read_point_set, read_sweep, read_tube_set, write_json, write_point_set,
    write_tube_set,
)

logger = logging.getLogger(__name__)

# subcomando → experimento que acepta con --config
EXPERIMENT_OF = {
    "radial": "radial-exponent",
    "beck": "beck",
    "furstenberg": "furstenberg",
    "directions": "directions",
    "incidences": "incidence-bound",
    "decompose": "decompose-bench",
}


def _validation_text(exc: ValidationError) -> str:
    if hasattr(exc, "error_dict"):
        return "; ".join(f"{k}: {' '.join(v)}" for k, v in exc.message_dict.items())
    return " ".join(exc.messages)


class Command(BaseCommand):
    help = "Laboratorio de geometría de incidencias discretizada."

    def add_arguments(self, parser):
        sub = parser.add_subparsers(dest="subcommand", required=True)

        def common(p, config_required=False):
            p.add_argument("--config", required=config_required, help="Documento YAML")
            p.add_argument("--out", help="Carpeta de salida")
            p.add_argument("--seed", type=int, help="Semilla (sobrescribe la del YAML)")
            return p

        common(sub.add_parser("gen", help="Genera un conjunto"), config_required=True)

        pc = common(sub.add_parser("check", help="Perfil de concentración"))
        pc.add_argument("--points", help="CSV x,y")
        pc.add_argument("--tubes", help="CSV phi,c,w")
        pc.add_argument("-s", "--s-exp", dest="s", type=float, required=True,
                        help="Exponente s")
        pc.add_argument("--katz-tao", action="store_true", help="Perfil Katz–Tao (conteo crudo)")
        pc.add_argument("--C", type=float, help="Constante a certificar (sale con 1 si falla)")

        pd = common(sub.add_parser("decompose", help="Descomposición Katz–Tao"))
        pd.add_argument("--points", help="CSV x,y")
        pd.add_argument("-t", "--t-exp", dest="t", type=float, help="Exponente t")
        pd.add_argument("--C", type=float, help="Por defecto, la constante del recubrimiento")
        pd.add_argument("--eps", type=float, default=0.1)

        pi = common(sub.add_parser("incidences", help="Incidencias y cota de Fu–Ren"))
        pi.add_argument("--points", help="CSV x,y")
        pi.add_argument("--tubes", help="CSV phi,c,w")
        pi.add_argument("-s", "--s-exp", dest="s", type=float, help="Exponente s de los puntos")
        pi.add_argument("-t", "--t-exp", dest="t", type=float, help="Exponente t de los tubos")
        pi.add_argument("--eps", type=float, default=0.0)
        pi.add_argument("--oracle", action="store_true", help="Compara con fuerza bruta")
        pi.add_argument("--heavy", nargs=2, type=float, metavar=("SIGMA", "EPS"),
                        help="Escribe los tubos pesados")

        for name in ("radial", "beck", "furstenberg", "directions"):
            common(sub.add_parser(name, help=f"Experimento {EXPERIMENT_OF[name]}"), config_required=True)

        pf = common(sub.add_parser("fit", help="Ajuste de exponente de un barrido"))
        pf.add_argument("--sweep", help="CSV k_r,N")

    def handle(self, *args, **opts):
        sub = opts["subcommand"]
        try:
            getattr(self, f"cmd_{sub}")(opts)
        except ValidationError as exc:
            raise CommandError(f"Configuración inválida: {_validation_text(exc)}", returncode=2)
        except GuardrailExceeded as exc:
            raise CommandError(str(exc), returncode=2)
        except GeolabError as exc:
            raise CommandError(f"{type(exc).__name__}: {exc}", returncode=2)

    # ---------- utilidades ----------

    def _out_dir(self, opts, default_name: str) -> str:
        return opts.get("out") or os.path.join(str(settings.DGL_OUTPUT_DIR), default_name)

    def _emit(self, data) -> None:
        self.stdout.write(json.dumps(jsonable(data), indent=2, sort_keys=True, ensure_ascii=False))

    def _run_config(self, opts, sub: str) -> None:
        cfg = load_config(opts["config"], seed=opts.get("seed"))
        if cfg.experiment != EXPERIMENT_OF[sub]:
            raise ValidationError({"experiment": f"'{sub}' espera {EXPERIMENT_OF[sub]}, no {cfg.experiment}."})
        report = run_experiment(cfg)
        out = opts.get("out") or cfg.out or os.path.join(str(settings.DGL_OUTPUT_DIR), cfg.experiment)
        report.write(out)
        self._emit({"experiment": cfg.experiment, "passed": report.passed, "out": out,
                    "verdicts": [v.__dict__ for v in report.verdicts],
                    "slope": report.fit.slope if report.fit else None})
        if not report.passed:
            raise CommandError("Veredicto fallido.", returncode=1)

    # ---------- subcomandos ----------

    def cmd_gen(self, opts):
        data = read_yaml(opts["config"])
        if opts.get("seed") is not None:
            data["seed"] = opts["seed"]
        form = GenConfigForm(data)
        if not form.is_valid():
            raise ValidationError(form.errors.as_data())
        c = form.cleaned_data
        out = self._out_dir(opts, "gen")
        seed = c.get("seed") or 0
        if c["target"] == "set":
            built = c["set"].build(c["k"], seed)
            if built is None:
                raise ValidationError({"k": "La profundidad del Cantor no encaja con k."})
        elif c["target"] == "bush":
            built = gen_tube_bush(c["bush"])
        else:
            built = gen_tube_net(float(c["tube_net"]["r"]))
        if isinstance(built, TubeSet):
            path = write_tube_set(built, os.path.join(out, "tubes.csv"))
        else:
            path = write_point_set(built, os.path.join(out, "points.csv"))
        self._emit({"path": path, "size": len(built)})

    def cmd_check(self, opts):
        if bool(opts.get("points")) == bool(opts.get("tubes")):
            raise ValidationError("Indica exactamente uno de --points o --tubes.")
        s = opts["s"]
        if opts.get("points"):
            P = read_point_set(opts["points"])
            profile = (katz_tao_profile if opts["katz_tao"] else concentration_profile)(P, s)
        else:
            T = read_tube_set(opts["tubes"])
            profile = (tube_katz_tao_profile if opts["katz_tao"] else tube_concentration_profile)(T, s)
        if opts.get("out"):
            write_json(profile.as_dict(), os.path.join(opts["out"], "profile.json"))
        self._emit(profile.as_dict())
        if opts.get("C") is not None and not profile.certifies(opts["C"]):
            raise CommandError(f"C* = {profile.C_star:.4g} > C = {opts['C']}.", returncode=1)

    def cmd_decompose(self, opts):
        if opts.get("config"):
            return self._run_config(opts, "decompose")
        if not opts.get("points") or opts.get("t") is None:
            raise ValidationError("decompose necesita --points y --t-exp (o --config).")
        P = read_point_set(opts["points"])
        t = opts["t"]
        C = opts["C"] if opts.get("C") is not None else cover_concentration(P, t)
        D = katz_tao_decompose(P, t, C)
        report = verify_decomposition(D, P, t, opts["eps"])
        out = self._out_dir(opts, "decompose")
        for i, part in enumerate(D.parts):
            write_point_set(part, os.path.join(out, f"part_{i:04d}.csv"))
        summary = {"decomposition": D.as_dict(), "verification": report.as_dict()}
        write_json(summary, os.path.join(out, "decomposition.json"))
        self._emit(summary)
        if not report.passed:
            raise CommandError("La descomposición no pasó la verificación.", returncode=1)

    def cmd_incidences(self, opts):
        if opts.get("config"):
            return self._run_config(opts, "incidences")
        if not opts.get("points") or not opts.get("tubes"):
            raise ValidationError("incidences necesita --points y --tubes (o --config).")
        P = read_point_set(opts["points"])
        T = read_tube_set(opts["tubes"])
        if opts.get("s") is not None and opts.get("t") is not None:
            report = fu_ren_check(P, T, opts["s"], opts["t"], opts["eps"], opts["eps"])
        else:
            report = count_indexed(P, T)
        summary = report.as_dict()
        failed = bool(report.violation)
        if opts.get("oracle"):
            oracle = count_bruteforce(P, T)
            agree = bool((oracle.per_tube == report.per_tube).all())
            summary["oracle"] = {"total": oracle.total, "agree": agree}
            failed = failed or not agree
        out = self._out_dir(opts, "incidences")
        if opts.get("heavy"):
            sigma, eps = opts["heavy"]
            heavy = heavy_tubes(P, T, sigma, eps)
            summary["heavy"] = {"count": len(heavy), "path": write_tube_set(heavy, os.path.join(out, "heavy.csv"))}
        write_json(summary, os.path.join(out, "incidences.json"))
        self._emit(summary)
        if failed:
            raise CommandError("Violación de la cota o desacuerdo con el oráculo.", returncode=1)

    def cmd_radial(self, opts):
        self._run_config(opts, "radial")

    def cmd_beck(self, opts):
        self._run_config(opts, "beck")

    def cmd_furstenberg(self, opts):
        self._run_config(opts, "furstenberg")

    def cmd_directions(self, opts):
        self._run_config(opts, "directions")

    def cmd_fit(self, opts):
        path = opts.get("sweep") or opts.get("config")
        if not path:
            raise ValidationError("fit necesita --sweep (CSV k_r,N).")
        fit = fit_exponent(read_sweep(path))
        if opts.get("out"):
            write_json(fit.as_dict(), os.path.join(opts["out"], "fit.json"))
        self._emit(fit.as_dict())
