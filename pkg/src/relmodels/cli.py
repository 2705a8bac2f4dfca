"""Command-line front end: ``relmodels {inspect,fit,exists,transform,oracle}``.

Exit codes: 0 success, 1 bad input or invalid model, 2 no positive MLE
(with ``--extended off``), 3 an iteration cap was hit.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .errors import NoConvergence, NoPositiveMLE, RelModelError
from .existence import existence_check
from .mle import ALGORITHMS, EXTENDED_MODES, Tolerances, fit, loglik
from .model import MEMBERSHIP_TOL, KernelBasis, ModelMatrix, membership_residuals, odds_ratio_specs
from .oracle import DEFAULT_SEED, brute_force_mle
from .transform import add_overall, homogenize, remove_overall

EXIT_OK, EXIT_INPUT, EXIT_NO_MLE, EXIT_NO_CONVERGENCE = 0, 1, 2, 3


@dataclass
class RunConfig:
    model_path: str
    data_path: str | None = None
    algorithm: str = "auto"
    extended: str = "auto"
    tolerances: Tolerances = Tolerances()
    output_format: str = "json"
    seed: int = DEFAULT_SEED
    output: str | None = None


def _positive(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"{text} is not positive")
    return value


class _Parser(argparse.ArgumentParser):
    # usage errors share the exit code of other input errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", required=True,
                        help="model JSON file, or the name of a bundled example")
    common.add_argument("--format", choices=("json", "table"), default="json", dest="output_format")
    common.add_argument("--output", help="write the report here instead of stdout")
    common.add_argument("--tol-membership", type=_positive, default=MEMBERSHIP_TOL)

    fitting = argparse.ArgumentParser(add_help=False)
    fitting.add_argument("--data", required=True, help="counts as JSON or cell,count CSV")
    fitting.add_argument("--tol-inner", type=_positive, default=Tolerances.inner)
    fitting.add_argument("--tol-outer", type=_positive, default=Tolerances.outer)
    fitting.add_argument("--max-sweeps", type=int, default=Tolerances.max_sweeps)
    fitting.add_argument("--algorithm", choices=ALGORITHMS, default="auto")
    fitting.add_argument("--extended", choices=EXTENDED_MODES, default="auto")

    parser = _Parser(prog="relmodels", description=__doc__.splitlines()[0])
    parser.add_argument("--list-examples", action="store_true", help="list bundled files and exit")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("inspect", parents=[common], help="structure and odds-ratio form of a model")
    p.add_argument("--data", help="optional probability vector to check for membership")
    sub.add_parser("fit", parents=[common, fitting], help="maximum likelihood fit")
    p = sub.add_parser("exists", parents=[common], help="decide whether the positive MLE exists")
    p.add_argument("--data", required=True)
    p = sub.add_parser("transform", parents=[common], help="add, remove or homogenize the overall effect")
    p.add_argument("--op", choices=("add", "remove", "homogenize"), required=True)
    p.add_argument("--model-output", help="also write the transformed model to this file")
    p = sub.add_parser("oracle", parents=[common, fitting], help="brute-force MLE for small models")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--starts", type=int, default=20, help="random starts besides theta = 0")
    p.add_argument("--compare", action="store_true", help="also run fit and compare")
    return parser


def _config(args) -> RunConfig:
    tol = Tolerances(
        inner=getattr(args, "tol_inner", Tolerances.inner),
        outer=getattr(args, "tol_outer", Tolerances.outer),
        membership=args.tol_membership,
        max_sweeps=getattr(args, "max_sweeps", Tolerances.max_sweeps),
    )
    return RunConfig(args.model, getattr(args, "data", None), getattr(args, "algorithm", "auto"),
                     getattr(args, "extended", "auto"), tol, args.output_format,
                     getattr(args, "seed", DEFAULT_SEED), args.output)


def _dual(basis: KernelBasis, cells) -> list[dict]:
    return [{"vector": list(spec.vector), "odds_ratio": spec.format(cells),
             "homogeneous": spec.homogeneous} for spec in odds_ratio_specs(basis)]


def run_inspect(cfg: RunConfig) -> tuple[int, dict]:
    model = io.load_model(cfg.model_path)
    report = {
        "name": model.name,
        "I": model.I,
        "J": model.J,
        "K": model.K,
        "overall_effect": model.has_overall_effect,
        "cells": list(model.cells),
        "kernel_basis": [list(r) for r in model.kernel.rows],
        "odds_ratios": _dual(model.kernel, model.cells),
    }
    if cfg.data_path:
        p = io.load_counts(cfg.data_path, model)
        res = membership_residuals(p, model.kernel)
        worst = float(np.max(np.abs(res))) if res.size else 0.0
        report["membership"] = {
            "residuals": [float(r) for r in res],
            "max_abs_residual": worst,
            "tolerance": cfg.tolerances.membership,
            "member": worst <= cfg.tolerances.membership,
            "cross_product_differences": [spec.difference(p) for spec in odds_ratio_specs(model.kernel)],
        }
    return EXIT_OK, report


def _load(cfg: RunConfig) -> tuple[ModelMatrix, np.ndarray]:
    model = io.load_model(cfg.model_path)
    return model, io.load_counts(cfg.data_path, model)


def run_fit(cfg: RunConfig) -> tuple[int, dict]:
    model, counts = _load(cfg)
    res = fit(model, counts, algorithm=cfg.algorithm, extended=cfg.extended, tol=cfg.tolerances)
    report = res.to_dict(model.cells)
    report["loglik"] = res.loglik(counts)
    return EXIT_OK, report


def run_exists(cfg: RunConfig) -> tuple[int, dict]:
    model, counts = _load(cfg)
    return EXIT_OK, existence_check(model, counts).to_dict(model.cells)


def run_transform(cfg: RunConfig, op: str, model_output: str | None = None) -> tuple[int, dict]:
    model = io.load_model(cfg.model_path)
    if op == "add":
        new, removed = add_overall(model), []
    elif op == "homogenize":
        new, removed = homogenize(model), []
    else:
        rep = remove_overall(model)
        new, removed = rep.reduced, sorted(rep.removed_cells)
    if op == "remove":
        dimension_check = rep.dimension_check
        dual_after = _dual(rep.reduced_basis, new.cells)
    else:
        # adding 1' costs one kernel direction; homogenizing adds a row and a cell
        dimension_check = new.K == model.K - (op == "add")
        dual_after = _dual(new.kernel, new.cells)
    if model_output:
        io.save_model(new, model_output)
    report = {
        "model": io.model_to_dict(new),
        "report": {
            "removed_cells": removed,
            "removed_labels": [model.cells[i] for i in removed],
            "dimension_check": dimension_check,
            "dual_before": _dual(model.kernel, model.cells),
            "dual_after": dual_after,
        },
    }
    return EXIT_OK, report


def run_oracle(cfg: RunConfig, starts: int = 20, compare: bool = False) -> tuple[int, dict]:
    model, counts = _load(cfg)
    res = brute_force_mle(model, counts, seed=cfg.seed, n_starts=starts)
    report = res.to_dict(model.cells)
    if compare:
        fitted = fit(model, counts, algorithm=cfg.algorithm, extended=cfg.extended, tol=cfg.tolerances)
        ll_fit = loglik(fitted.p_hat, counts)
        report["comparison"] = {
            "fit_loglik": ll_fit,
            "oracle_loglik": res.loglik,
            "loglik_difference": res.loglik - ll_fit,
            "max_abs_p_difference": float(np.max(np.abs(res.p_star - fitted.p_hat))),
            "fit": fitted.to_dict(),
        }
    return EXIT_OK, report


def _table(obj, indent: int = 0) -> str:
    pad = "  " * indent
    lines = []
    for key, value in obj.items():
        if isinstance(value, dict):
            lines.append(f"{pad}{key}:")
            lines.append(_table(value, indent + 1))
        elif isinstance(value, list) and value and isinstance(value[0], (dict, list)):
            lines.append(f"{pad}{key}:")
            for item in value:
                if isinstance(item, dict):
                    lines.append(f"{pad}  - " + ", ".join(f"{k}={_fmt(v)}" for k, v in item.items()))
                else:
                    lines.append(f"{pad}  - {_fmt(item)}")
        else:
            lines.append(f"{pad}{key}: {_fmt(value)}")
    return "\n".join(lines)


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.10g}"
    if isinstance(value, list):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    return str(value)


def _emit(report: dict, cfg: RunConfig) -> None:
    text = io.dumps(report) if cfg.output_format == "json" else _table(report)
    if cfg.output:
        Path(cfg.output).write_text(text + "\n")
    else:
        print(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_examples:
        print("\n".join(io.bundled_names()))
        return EXIT_OK
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_INPUT
    cfg = _config(args)
    try:
        if args.command == "inspect":
            code, report = run_inspect(cfg)
        elif args.command == "fit":
            code, report = run_fit(cfg)
        elif args.command == "exists":
            code, report = run_exists(cfg)
        elif args.command == "transform":
            code, report = run_transform(cfg, args.op, args.model_output)
        else:
            code, report = run_oracle(cfg, args.starts, args.compare)
    except NoPositiveMLE as exc:
        print(f"relmodels: {exc}", file=sys.stderr)
        return EXIT_NO_MLE
    except NoConvergence as exc:
        print(f"relmodels: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except (RelModelError, ValueError, OSError) as exc:
        print(f"relmodels: {exc}", file=sys.stderr)
        return EXIT_INPUT
    _emit(report, cfg)
    return code


if __name__ == "__main__":
    sys.exit(main())
