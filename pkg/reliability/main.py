import argparse
import logging
import os
import sys

from dotenv import load_dotenv

from reliability import __version__
from reliability.services.config_service import ConfigError, default_output_dir, load_config, with_overrides
from reliability.services.examples_service import run_example, run_method, run_metrics
from reliability.utils import parse_grid

# Carregar variáveis de ambiente
load_dotenv()

LOG_DIR = os.getenv("RELIABILITY_LOG_DIR", "logs")

logger = logging.getLogger(__name__)

COMANDOS = [
    {
        "comando": "example",
        "uso": "example <1|2|3>",
        "descricao": "Reproduz um dos três exemplos do sistema de dois processadores",
    },
    {
        "comando": "run",
        "uso": "run <config.json>",
        "descricao": "Executa um único método (ode, mc, pinn ou pigan) a partir de um JSON",
    },
    {
        "comando": "metrics",
        "uso": "metrics <pasta-ensemble> <referencia.csv>",
        "descricao": "Calcula o RMSE por estado de um conjunto de trajetórias",
    },
]


def configurar_logging():
    os.makedirs(LOG_DIR, exist_ok=True)
    logging.basicConfig(
        level=os.getenv("RELIABILITY_LOG_LEVEL", "INFO").upper(),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        handlers=[
            logging.FileHandler(os.path.join(LOG_DIR, "app.log"), encoding="utf-8"),
            logging.StreamHandler(),
        ],
    )


def texto_ajuda() -> str:
    linhas = ["📋 Comandos disponíveis:"]
    for cmd in COMANDOS:
        linhas.append(f"  • {cmd['uso']:<45} → {cmd['descricao']}")
    return "\n".join(linhas)


def _grade(texto: str):
    try:
        return parse_grid(texto)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def criar_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reliability",
        description="Avaliação de confiabilidade multiestado com RK4, Monte Carlo, PINN e PIGAN",
        epilog=texto_ajuda(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="comando", required=True, metavar="comando")
    descricoes = {cmd["comando"]: cmd["descricao"] for cmd in COMANDOS}

    p_example = sub.add_parser("example", help=descricoes["example"])
    p_example.add_argument("numero", type=int, choices=(1, 2, 3))
    p_example.add_argument("--seed", type=int, default=0)
    p_example.add_argument("--out", default=None)
    p_example.add_argument("--grid", type=_grade, default=None, help="inicio:fim:passo")
    p_example.add_argument("--replications", type=int, default=None)
    p_example.add_argument("--full-scale", action="store_true", help="escala completa (MC 50×10⁵, 10⁵ iterações)")
    p_example.add_argument("--iterations", type=int, default=None)

    p_run = sub.add_parser("run", help=descricoes["run"])
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--grid", default=None, help="inicio:fim:passo")
    p_run.add_argument("--replications", type=int, default=None)
    p_run.add_argument("--iterations", type=int, default=None)

    p_metrics = sub.add_parser("metrics", help=descricoes["metrics"])
    p_metrics.add_argument("ensemble_dir")
    p_metrics.add_argument("reference")
    p_metrics.add_argument("--out", default=None)

    return parser


def _aplicar_overrides(config, args):
    grade = None
    if args.grid is not None:
        inicio, fim, passo = (float(p) for p in args.grid.split(":"))
        grade = {"start": inicio, "end": fim, "step": passo}
    return with_overrides(
        config, seed=args.seed, output_dir=args.out, replications=args.replications, grid=grade,
    )


def main(argv=None) -> int:
    configurar_logging()
    parser = criar_parser()
    args = parser.parse_args(argv)

    try:
        if args.comando == "example":
            out = args.out or os.path.join(default_output_dir(), f"example{args.numero}")
            resultado = run_example(
                args.numero, out, seed=args.seed, grid=args.grid, replications=args.replications,
                full_scale=args.full_scale, iterations=args.iterations,
            )
        elif args.comando == "run":
            config = _aplicar_overrides(load_config(args.config), args)
            resultado = run_method(config, iterations=args.iterations)
        else:
            out = args.out or os.path.join(default_output_dir(), "metrics")
            resultado = run_metrics(args.ensemble_dir, args.reference, out)
    except (ConfigError, ValueError) as exc:
        logger.error("❌ Configuração inválida: %s", exc)
        return 2

    print(f"{'✅' if resultado.status == 0 else '❌'} {args.comando}: {resultado.summary} "
          f"({sum(resultado.manifest.durations.values()):.1f}s) → {resultado.output_dir}", flush=True)
    return resultado.status


if __name__ == "__main__":
    sys.exit(main())
