"""Command-line harness: ``cplab <experiment> [flags]``.

Exit codes: 0 success, 2 invalid parameters, 3 request exceeds an
enumeration limit.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
import warnings
from dataclasses import dataclass
from typing import Callable

from . import hard_instances as hi
from .cpset import best_cut, cp_farness_lower_bound
from . import learning as lr
from . import prob
from . import sep_instances as sep
from .errors import InfeasibleError, ValidationError
from .report import ExperimentReport, write_atomic
from .rng import RandomStream

log = logging.getLogger("cplab")


def int_grid(text: str) -> list[int]:
    try:
        vals = [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise ValidationError(f"expected a comma-separated list of integers, got {text!r}")
    if not vals:
        raise ValidationError("grid is empty")
    return vals


@dataclass
class Param:
    name: str
    type: Callable
    default: object = None
    help: str = ""
    required: bool = False

    @property
    def flag(self) -> str:
        return "--" + self.name.replace("_", "-")


@dataclass
class Experiment:
    name: str
    anchor: str
    params: list[Param]
    run: Callable[[dict, RandomStream], tuple[list[dict], list[str], list[str]]]


# ---- runners: each returns (rows, stream labels, notes) ----------------------


def _run_cp_hardness(p: dict, rng: RandomStream):
    d, eps = p["d"], p["eps"]
    if d % 2 or d < 2:
        raise ValidationError(f"--d must be a positive even integer (got {d}); for odd d use d-1")
    if not 0 < eps <= 0.5:
        raise ValidationError(f"--eps must lie in (0, 1/2], got {eps}")
    if p["trials"] < 0:
        raise ValidationError("--trials must be >= 0")
    if any(n < 0 for n in p["n_grid"]):
        raise ValidationError("--n-grid entries must be >= 0")
    if d > hi.LIMITS.max_subset_enum_d:
        raise InfeasibleError(f"d={d} exceeds the subset-enumeration limit {hi.LIMITS.max_subset_enum_d}")
    rows = hi.distinguishing_experiment(d, eps, p["n_grid"], p["trials"], rng)
    streams = [f"cp-hardness[n={n}]" for n in p["n_grid"]] if p["trials"] else []
    return rows, streams, []


def _run_cp_learning(p: dict, rng: RandomStream):
    d, eps = p["d"], p["eps"]
    if d % 4 or d < 4:
        raise ValidationError(f"--d must be a positive multiple of 4, got {d}")
    if not 0 < eps < 0.5:
        raise ValidationError(f"--eps must lie in (0, 1/2), got {eps}")
    if p["trials"] < 1:
        raise ValidationError("--trials must be >= 1")
    ens = lr.build_packing(d, eps, p["N_target"], rng)
    notes = []
    if ens.shortfall:
        notes.append(f"code construction stopped at N={ens.N} of target {ens.n_target}")
    if p.get("export_ensemble"):
        write_atomic(p["export_ensemble"], json.dumps(ens.to_dict(materialize=True)) + "\n")
    results = lr.plugin_learner_experiment(ens, p["n_grid"], p["trials"], rng)
    knee = lr.identification_knee(results)
    kl_max = lr.max_pairwise_kl(ens)
    fano = lr.fano_sample_bound(ens.N, kl_max, 1 / 3) if ens.N >= 2 and kl_max > 0 else None
    rows = []
    for r in results:
        row = r.as_row()
        row.update(N=ens.N, m=ens.m, kl_max=kl_max, fano_bound=fano, knee=knee)
        rows.append(row)
    streams = ["packing-code"] + [f"cp-learning[n={n}]" for n in p["n_grid"]]
    return rows, streams, notes


def _run_sep_farness(p: dict, rng: RandomStream):
    if p["net_size"] < 1 or p["trials"] < 0:
        raise ValidationError("--net-size must be >= 1 and --trials >= 0")
    notes = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", sep.SeparableRegimeWarning)
        rows = sep.farness_certification_experiment(p["d"], p["eps"], p["net_size"], p["trials"], rng)
    notes.extend(str(w.message) for w in caught)
    streams = ["product-net"] + [f"sep-instance[{t}]" for t in range(p["trials"])]
    return rows, streams, notes


def _run_concentration(p: dict, rng: RandomStream):
    if p["trials"] < 0:
        raise ValidationError("--trials must be >= 0")
    rows = sep.concentration_experiment(p["k"], p["c"], p["trials"], rng)
    return rows, [f"concentration-sphere[{p['k']}]", f"concentration-chi2[{p['k']}]"], []


def _load_grid(path: str | None, d: int | None) -> prob.GridDistribution:
    if path is None:
        if d is None:
            raise ValidationError("give --q or --d for the default uniform reference")
        return prob.uniform_grid(d)
    with open(path) as fh:
        text = fh.read()
    if path.endswith(".csv"):
        return prob.GridDistribution.from_csv(text)
    return prob.GridDistribution.from_json(text)


def _run_metrics(p: dict, rng: RandomStream):
    P = _load_grid(p["p"], None)
    Q = _load_grid(p["q"], P.d)
    mode = "exhaustive" if P.d <= hi.LIMITS.max_exhaustive_cut_d else "local-search"
    w = best_cut(P, mode, rng)
    row = {
        "d": P.d,
        "tv": prob.tv_distance(P, Q),
        "chi2": prob.chi2_distance(P, Q),
        "kl": prob.kl_divergence(P, Q),
        "cut_mode": mode,
        "cut_quad_form": w.quad_form,
        "cut_weight": w.cut_weight,
        "cp_l1_lower_bound": cp_farness_lower_bound(P, w),
    }
    return [row], (["best_cut"] if mode == "local-search" else []), []


def _run_reduction(p: dict, rng: RandomStream):
    f = p["frac_certified"]
    notes = []
    if f is None:
        rows = sep.farness_certification_experiment(p["d"], p["eps"], p["net_size"], p["trials"], rng)
        f = rows[0]["frac_certified"]
        notes.append(f"frac_certified measured from sep-farness at d={p['d']}, eps={p['eps']}")
    rows = sep.reduction_protocol_trace(f)
    if rows[0]["vacuous"]:
        notes.append("error bound is not below 2/3: the reduction gives no information")
    return rows, [], notes


_SEED = Param("seed", int, 0, "64-bit seed for all random streams")

EXPERIMENTS: dict[str, Experiment] = {
    e.name: e for e in [
        Experiment("cp-hardness", "CP testing lower bound: mixture D_n of eps-far instances A^S vs uniform",
                   [Param("d", int, 4, "even grid side"), Param("eps", float, 0.2, "tilt in (0, 1/2]"),
                    Param("n_grid", int_grid, [1, 2, 4], "comma-separated sample counts"),
                    Param("trials", int, 2000, "Monte Carlo trials per n"), _SEED],
                   _run_cp_hardness),
        Experiment("cp-learning", "CP learning lower bound: q_(i,j) packing with Fano bound",
                   [Param("d", int, 4, "grid side, multiple of 4"), Param("eps", float, 0.2, "tilt in (0, 1/2)"),
                    Param("n_grid", int_grid, [50, 100, 200, 400, 800], "comma-separated sample counts"),
                    Param("trials", int, 200, "learner trials per n"),
                    Param("N_target", int, None, "target code size (default 2^(m/6))"), _SEED,
                    Param("export_ensemble", str, None, "optional path for the ensemble JSON")],
                   _run_cp_learning),
        Experiment("sep-farness", "Separability lower bound: Haar-rotated D_eps certified far via Hölder witness",
                   [Param("d", int, 8, "local dimension (even)"), Param("eps", float, 0.35, "spectral gap in [0, 1/2]"),
                    Param("net_size", int, 4096, "product states in the random net"),
                    Param("trials", int, 100, "random instances"), _SEED],
                   _run_sep_farness),
        Experiment("concentration", "Concentration of <u|Z|u> for uniform unit vectors",
                   [Param("k", int, 256, "even dimension"), Param("c", float, 2.0, "constant c > 0"),
                    Param("trials", int, 100000, "samples"), _SEED],
                   _run_concentration),
        Experiment("metrics", "TV, chi^2, KL between grid distributions; cut witness lower bound on CP distance",
                   [Param("p", str, None, "distribution file (.json or .csv)", required=True),
                    Param("q", str, None, "reference distribution file (default uniform)"), _SEED],
                   _run_metrics),
        Experiment("reduction-audit", "Separability-to-mixedness reduction: 1/3 + 1/3*2/3 = 5/9 error budget",
                   [Param("frac_certified", float, None, "certified fraction; measured via sep-farness if omitted"),
                    Param("d", int, 8, "sep-farness d"), Param("eps", float, 0.35, "sep-farness eps"),
                    Param("net_size", int, 4096, "sep-farness net size"), Param("trials", int, 100, "sep-farness instances"),
                    _SEED],
                   _run_reduction),
    ]
}


def list_experiments() -> list[dict]:
    return [
        {"name": e.name, "anchor": e.anchor,
         "params": {p.flag: {"type": getattr(p.type, "__name__", str(p.type)), "default": p.default, "help": p.help}
                    for p in e.params}}
        for e in EXPERIMENTS.values()
    ]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cplab", description="CP / separability testing laboratory")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="print the experiment catalog as JSON")
    for e in EXPERIMENTS.values():
        sp = sub.add_parser(e.name, help=e.anchor, description=e.anchor)
        for p in e.params:
            # defaults are applied after --config merging
            sp.add_argument(p.flag, dest=p.name, type=str, default=None, help=f"{p.help} (default: {p.default})")
        sp.add_argument("--config", default=None, help="JSON file of parameters; flags take precedence")
        sp.add_argument("--out", default=None, help="report path (.json or .csv); stdout if omitted")
        sp.add_argument("--format", choices=["json", "csv"], default=None)
    return parser


def resolve_params(exp: Experiment, args: argparse.Namespace) -> dict:
    config = {}
    if args.config:
        with open(args.config) as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ValidationError("--config must hold a JSON object")
        known = {p.name for p in exp.params}
        for k, v in raw.items():
            key = k.lstrip("-").replace("-", "_")
            if key not in known:
                raise ValidationError(f"unknown config key {k!r} for {exp.name}")
            config[key] = v
    out = {}
    for p in exp.params:
        flag_val = getattr(args, p.name)
        if flag_val is not None:
            val = flag_val
        elif p.name in config:
            val = config[p.name]
        else:
            if p.required:
                raise ValidationError(f"{p.flag} is required")
            out[p.name] = p.default
            continue
        try:
            out[p.name] = val if p.type is int_grid and isinstance(val, list) else p.type(val)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"{p.flag}: {exc}")
    return out


def run(command: str, params: dict) -> ExperimentReport:
    exp = EXPERIMENTS[command]
    seed = params.get("seed", 0)
    if not 0 <= seed < 2**64:
        raise ValidationError("--seed must be a 64-bit unsigned integer")
    rng = RandomStream(seed).child(command)
    t0 = time.perf_counter()
    rows, streams, notes = exp.run(params, rng)
    for r in rows:
        log.info("%s %s", command, json.dumps(r, default=str))
    return ExperimentReport(command, dict(params), rows, time.perf_counter() - t0, streams, notes)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    if args.command == "list":
        print(json.dumps(list_experiments(), indent=1))
        return 0
    try:
        params = resolve_params(EXPERIMENTS[args.command], args)
        report = run(args.command, params)
    except ValidationError as exc:
        print(f"cplab {args.command}: invalid parameters: {exc}", file=sys.stderr)
        return 2
    except InfeasibleError as exc:
        print(f"cplab {args.command}: infeasible: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"cplab {args.command}: {exc}", file=sys.stderr)
        return 2
    if args.out:
        report.write(args.out, args.format)
    else:
        sys.stdout.write(report.to_csv() if args.format == "csv" else report.to_json())
    return 0


if __name__ == "__main__":
    sys.exit(main())
