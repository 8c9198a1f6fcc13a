"""Command line entry point.

Exit codes: 0 success, 1 a ``verify`` check failed, 2 parse error,
3 validation error, 4 infeasible eps, 5 numerical error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import designer, experiments, oracle
from .errors import GeofairError, InfeasibleEpsilonError
from .instance_io import bundled_instance_path, load_instance

LOG2 = math.log(2)


def _units(value_nats: float, base: str) -> str:
    if base == "bits":
        return f"{value_nats / LOG2:.10g} bits ({value_nats:.10g} nats)"
    return f"{value_nats:.10g} nats ({value_nats / LOG2:.10g} bits)"


def _write(text: str, path) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _matrix(m) -> str:
    return np.array2string(np.asarray(m), precision=6, suppress_small=True)


def _oracle_config(args, overrides: dict) -> oracle.OracleConfig:
    kw = dict(overrides)
    for name in ("grid_resolution", "y_cardinality", "measure"):
        value = getattr(args, name, None)
        if value is not None:
            kw[name] = value
    if getattr(args, "no_refine", False):
        kw["refine_candidates"] = 0
    if getattr(args, "workers", None):
        kw["workers"] = args.workers
    return oracle.OracleConfig(**kw)


def _instance(args):
    f = load_instance(args.instance)
    inst = f.instance
    if getattr(args, "eps", None) is not None:
        inst = inst.with_eps(args.eps)
    if getattr(args, "rate", None) is not None:
        inst = inst.with_rate(args.rate)
    return f, inst


def cmd_design(args) -> int:
    _, inst = _instance(args)
    lb = designer.lower_bound(inst)
    ops_report = [
        f"eps            {inst.eps:g}",
        f"rate           {inst.rate:g} nats",
        f"sigma_max      {designer.spectral_data(designer.build_operators(inst).w_ty).sigma_max:.6f}",
        f"sigma used     {lb.sigma:.6f}{' (second, top is the unit value)' if lb.used_second else ''}",
        f"direction v    {_matrix(lb.direction)}",
        f"K              {lb.k_factor:.10g}",
        f"P2             {_units(lb.p2_value, args.log_base)}",
        f"tight          {lb.tight}",
        f"P_Y            {_matrix(lb.design.p_y.probs)}",
        f"L_y (rows)     {_matrix(lb.design.l_vectors)}",
    ]
    out = {
        "eps": inst.eps, "rate": inst.rate, "sigma": lb.sigma, "used_second": lb.used_second,
        "k_factor": lb.k_factor, "p2_value_nats": lb.p2_value, "p2_value_bits": lb.p2_value / LOG2,
        "tight": lb.tight, "p_y": lb.design.p_y.probs.tolist(),
        "l_vectors": lb.design.l_vectors.tolist(),
    }
    code = 0
    try:
        sol = designer.solve(inst)
    except InfeasibleEpsilonError as exc:
        ops_report.append(f"reconstruction INFEASIBLE: {exc}")
        out["infeasible"] = str(exc)
        code = exc.exit_code
    else:
        ops_report += [
            f"P(S|Y) cols    {_matrix(sol.p_s_given_y.matrix)}",
            f"P(T|Y) cols    {_matrix(sol.p_t_given_y.matrix)}",
            f"P(X|Y) cols    {_matrix(sol.p_x_given_y.matrix)}",
            f"P(Y|X) cols    {_matrix(sol.p_y_given_x.matrix)}",
        ]
        out.update(
            p_s_given_y=sol.p_s_given_y.matrix.tolist(),
            p_t_given_y=sol.p_t_given_y.matrix.tolist(),
            p_x_given_y=sol.p_x_given_y.matrix.tolist(),
            p_y_given_x=sol.p_y_given_x.matrix.tolist(),
            joint_stxy=sol.joint.table.tolist(),
        )
    print("\n".join(ops_report))
    if args.output:
        _write(json.dumps(out, indent=2) + "\n", args.output)
    return code


def cmd_sweep(args) -> int:
    f, inst = _instance(args)
    eps_grid = f.eps_grid if f.eps_grid is not None else [inst.eps]
    rate_grid = f.rate_grid if f.rate_grid is not None else [inst.rate]
    cfg = _oracle_config(args, f.oracle)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        records = experiments.run_sweep(inst, eps_grid, rate_grid, cfg, workers=args.workers or 1)
    _write(experiments.records_to_csv(records), args.output or "-")
    if args.plot_data:
        _write(experiments.records_to_plot_data(records), args.plot_data)
    return 0


def cmd_oracle(args) -> int:
    f, inst = _instance(args)
    cfg = _oracle_config(args, f.oracle)
    res = oracle.grid_search(inst, cfg)
    print(f"measure        {res.measure.value}")
    print(f"best I(Y;T)    {_units(res.best_value, args.log_base)}")
    print(f"P(Y|X) cols    {_matrix(res.best_channel.matrix)}")
    print(f"evaluated      {res.evaluated_count}")
    print(f"feasible       {res.feasible_count}")
    if args.output:
        _write(json.dumps({
            "measure": res.measure.value, "best_value_nats": res.best_value,
            "best_value_bits": res.best_value_bits, "best_channel": res.best_channel.matrix.tolist(),
            "evaluated_count": res.evaluated_count, "feasible_count": res.feasible_count,
        }, indent=2) + "\n", args.output)
    return 0


def cmd_verify(args) -> int:
    _, inst = _instance(args)
    checks = experiments.golden_checks(inst)
    for c in checks:
        print(f"{'PASS' if c.ok else 'FAIL'}  {c.name}: {c.detail}")
    failed = [c.name for c in checks if not c.ok]
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="geofair", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--eps", type=float, help="override eps from the instance file")
    common.add_argument("--rate", type=float, help="override the rate budget (nats)")
    common.add_argument("--log-base", choices=("nats", "bits"), default="nats")
    common.add_argument("--output", "-o", help="output file ('-' for stdout)")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--grid-resolution", type=int)
    grid.add_argument("--y-cardinality", type=int)
    grid.add_argument("--no-refine", action="store_true", help="plain lattice search only")
    grid.add_argument("--workers", type=int, default=None)

    d = sub.add_parser("design", parents=[common], help="closed-form design and its posteriors")
    d.add_argument("instance")
    d.set_defaults(func=cmd_design)

    s = sub.add_parser("sweep", parents=[common, grid], help="eps/rate sweep to CSV")
    s.add_argument("instance")
    s.add_argument("--plot-data", help="also write a whitespace-separated data file")
    s.set_defaults(func=cmd_sweep)

    o = sub.add_parser("oracle", parents=[common, grid], help="exhaustive search on one instance")
    o.add_argument("instance")
    o.add_argument("--measure", choices=("chi2", "mi"), default=None)
    o.set_defaults(func=cmd_oracle)

    v = sub.add_parser("verify", parents=[common], help="check the worked example's published constants")
    v.add_argument("instance", nargs="?", default=str(bundled_instance_path()))
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", category=UserWarning)
            return args.func(args)
    except GeofairError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
