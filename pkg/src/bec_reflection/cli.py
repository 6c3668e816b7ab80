"""Command-line entry point: ``bec-reflection <command> [options]``."""

import argparse
import logging
import sys
from dataclasses import fields

from bec_reflection import pipeline
from bec_reflection.config import CACHE_ENV, PRESETS, ConfigError, RunConfig, build_config
from bec_reflection.errors import DegenerateSolutionError, DomainError, NonConvergenceError, PropagationError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3
EXIT_PROPAGATION = 4
EXIT_SWEEP_FAILED = 5

log = logging.getLogger("bec_reflection")


def _common_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key=value config file")
    common.add_argument("--preset", choices=sorted(PRESETS), help="apply a named parameter set")
    common.add_argument("--set", dest="set_pairs", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    common.add_argument("-v", "--verbose", action="count", default=0)
    keys = common.add_argument_group("config keys", f"every config key as a flag; cache also from ${CACHE_ENV}")
    for f in fields(RunConfig):
        keys.add_argument(f"--{f.name.replace('_', '-')}", f"--{f.name}", dest=f"key_{f.name}",
                          metavar=f.type.__name__.upper(), default=None,
                          help=f"(default: {f.default!r})")
    return common


def make_parser():
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="bec-reflection", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("fig1", parents=[common], help="line width Gamma(kappa) -> kappa,Gamma")
    sub.add_parser("linewidth", parents=[common], help="alias of fig1 for any gamma")
    sub.add_parser("fig2", parents=[common], help="numeric vs analytic decay for (sigma, 0) and (sigma, gamma)")
    sub.add_parser("fig3", parents=[common], help="reflection probabilities -> kappa,R2_gamma0,R2_gamma")
    sub.add_parser("spectrum", parents=[common], help="dump A(kappa) -> kappa,A")
    sub.add_parser("propagate", parents=[common], help="raw GPE run -> tau,rho")
    sweep = sub.add_parser("sweep", parents=[common], help="run a figure pipeline over parameter values")
    sweep.add_argument("--param", required=True, choices=pipeline.SWEEP_PARAMETERS)
    sweep.add_argument("--values", required=True, help="comma-separated values")
    sweep.add_argument("--figure", default="fig3", choices=sorted(pipeline.FIGURES))
    return parser


def _config_from_args(args):
    flags = {f.name: getattr(args, f"key_{f.name}") for f in fields(RunConfig)
             if getattr(args, f"key_{f.name}") is not None}
    return build_config(preset=args.preset, config_path=args.config, set_pairs=args.set_pairs, flags=flags)


def _run(args, cfg):
    out = cfg.out
    if args.command in ("fig1", "linewidth"):
        name = "fig1_linewidth" if args.command == "fig1" else f"linewidth_gamma{cfg.gamma:g}"
        res = pipeline.run_fig1(cfg, out, name=name)
        d = res["profile"].diagnostics
        log.info("line width converged in %s iterations, residual %.3e (cache %s)",
                 d.get("iterations"), d.get("residual", 0.0), "hit" if res["cache_hit"] else "miss")
        print(res["csv"])
    elif args.command == "fig2":
        results = pipeline.run_fig2(cfg, out)
        for label, res in results.items():
            rep = res["report"]
            status = "PASS" if rep.passed else "FAIL"
            print(f"{label} (gamma={res['gamma']:g}): max relative deviation {rep.max_deviation:.4f} "
                  f"on [{cfg.t_skip}, {cfg.t_end}], tolerance {cfg.report_tol} -> {status}")
        if not all(r["report"].passed for r in results.values()):
            log.warning("analytic and numeric decay differ by more than report_tol; see fig2_report.json")
    elif args.command == "fig3":
        print(pipeline.run_fig3(cfg, out)["csv"])
    elif args.command == "spectrum":
        print(pipeline.run_spectrum(cfg, out)["csv"])
    elif args.command == "propagate":
        print(pipeline.run_propagate(cfg, out)["csv"])
    elif args.command == "sweep":
        try:
            values = [float(v) for v in args.values.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"bad --values {args.values!r}") from None
        if not values:
            raise ConfigError("--values is empty")
        results = pipeline.run_sweep(cfg, args.param, values, args.figure, out)
        failed = [v for v, err, _ in results if err is not None]
        for value, err, _ in results:
            print(f"{args.param}={value:g}: {'ok' if err is None else f'FAILED ({err})'}")
        if failed:
            return EXIT_SWEEP_FAILED
    return EXIT_OK


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = _config_from_args(args)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return _run(args, cfg)
    except (NonConvergenceError, DegenerateSolutionError) as exc:
        residual = getattr(exc, "residual", None)
        print(f"line-width solver failed: {exc}" + (f" (residual {residual:.3e})" if residual is not None else ""),
              file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except PropagationError as exc:
        print(f"propagation failed: {exc}", file=sys.stderr)
        return EXIT_PROPAGATION
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
