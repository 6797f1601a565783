"""Command-line driver: solves, parametrization, sweeps, optimization and
recovery studies with reproducible, hash-stamped outputs."""

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import ConfigError, ExperimentConfig
from .control import (ControlProblem, continuation_delta, h1_vstar_norm,
                      recovery_sequence, solve_vocp)
from .dissipation import DissipationParams
from .parametrize import bv_residuals, physical_time_solution, reparametrize
from .solver import (SolverError, delta_convergence_study, solve_ris,
                     variation_z)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_INFEASIBLE = 4


def _write_csv(path, header, rows, cfg_hash):
    with open(path, "w") as fh:
        fh.write(f"# config={cfg_hash}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(f"{float(x):.17g}" for x in row) + "\n")


def _write_json(path, payload, cfg_hash):
    payload = dict(payload)
    payload["config_hash"] = cfg_hash
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _state_rows(grid, values):
    return np.column_stack([grid.nodes, values])


def _setup(cfg, out_dir):
    model = cfg.build_model()
    grid = cfg.build_grid()
    ell = cfg.build_load(model.spaces, grid)
    z0 = cfg.initial_state(model.spaces)
    os.makedirs(out_dir, exist_ok=True)
    return model, grid, ell, z0


def cmd_solve(cfg, out_dir):
    model, grid, ell, z0 = _setup(cfg, out_dir)
    path, report = solve_ris(model, ell, z0, cfg.build_params())
    cols = ["t"] + [f"z{i}" for i in range(model.spaces.n)]
    _write_csv(os.path.join(out_dir, "state.csv"), cols,
               _state_rows(grid, path.values), cfg.hash())
    _write_json(os.path.join(out_dir, "report.json"), report.to_dict(),
                cfg.hash())
    return EXIT_OK


def cmd_parametrize(cfg, out_dir):
    model, grid, ell, z0 = _setup(cfg, out_dir)
    params = cfg.build_params()
    path, _ = solve_ris(model, ell, z0, params, compute_residuals=False)
    pcfg = cfg.raw["parametrize"]
    psol = reparametrize(model, path, ell, params.eps, m_out=pcfg["m_out"],
                         g_threshold=pcfg["g_threshold"])
    res = bv_residuals(model, psol)
    _, jumps = physical_time_solution(psol,
                                      jump_threshold=pcfg["jump_threshold"])
    n = model.spaces.n
    cols = ["s", "t_hat"] + [f"z{i}" for i in range(n)] + ["dist", "g_flag"]
    rows = np.column_stack([psol.s_nodes, psol.hat_t, psol.hat_z, psol.dist,
                            psol.G_mask.astype(float)])
    _write_csv(os.path.join(out_dir, "parametrized.csv"), cols, rows, cfg.hash())
    payload = {**res, "total_length": psol.total_length,
               "jumps": [{"t": t, "z_before": list(zb), "z_after": list(za)}
                         for t, zb, za in jumps]}
    _write_json(os.path.join(out_dir, "residuals.json"), payload, cfg.hash())
    return EXIT_OK


def _variation_task(args):
    cfg_dict, eps, delta = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    model = cfg.build_model()
    grid = cfg.build_grid()
    ell = cfg.build_load(model.spaces, grid)
    z0 = cfg.initial_state(model.spaces)
    path, _ = solve_ris(model, ell, z0, DissipationParams(eps=eps, delta=delta),
                        compute_residuals=False)
    return eps, delta, variation_z(path, model.spaces)


def cmd_sweep(cfg, out_dir, workers=1):
    model, grid, ell, z0 = _setup(cfg, out_dir)
    study = cfg.raw["study"]
    if study["kind"] == "variation":
        eps_list = study["eps_list"] or [cfg.build_params().eps]
        delta_list = study["delta_list"] or [cfg.build_params().delta]
        tasks = [(cfg.raw, e, d) for e in eps_list for d in delta_list]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_variation_task, tasks))
        else:
            results = [_variation_task(t) for t in tasks]
        _write_csv(os.path.join(out_dir, "variation.csv"),
                   ["eps", "delta", "var_z"], results, cfg.hash())
        return EXIT_OK
    deltas = study["delta_list"]
    if not deltas:
        raise ConfigError("study.delta_list is required for the delta sweep")
    res = delta_convergence_study(model, ell, z0, cfg.build_params().eps, deltas)
    rows = [(d, e, res.order) for d, e in zip(res.deltas, res.errors)]
    _write_csv(os.path.join(out_dir, "delta_rates.csv"),
               ["delta", "sup_err_z", "order"], rows, cfg.hash())
    return EXIT_OK


def _build_problem(cfg, model, grid):
    d = cfg.raw["dissipation"]
    c = cfg.raw["control"]
    return ControlProblem(model=model, z_des=cfg.target_state(model.spaces),
                          beta=float(c["beta"]), z0=cfg.initial_state(model.spaces),
                          grid=grid, eps=float(d["eps"]), delta=float(d["delta"]),
                          sigma=float(d["sigma"]) or 1e-3,
                          variant=c["variant"],
                          penalty_weight=float(c["penalty_weight"]))


def cmd_optimize(cfg, out_dir):
    model, grid, ell, _ = _setup(cfg, out_dir)
    problem = _build_problem(cfg, model, grid)
    deltas = cfg.raw["study"]["delta_list"]
    if deltas:
        results = continuation_delta(problem, deltas, ell)
        rows = []
        for prev, res in zip([None] + results[:-1], results):
            gap = np.nan if prev is None else h1_vstar_norm(
                grid, res.ell_star.values - prev.ell_star.values,
                model.spaces.mass)
            rows.append((res.continuation[-1], res.J_star,
                         res.feasibility["end_dist"], gap))
        _write_csv(os.path.join(out_dir, "continuation.csv"),
                   ["delta", "J", "end_dist", "ell_gap_h1"], rows, cfg.hash())
        result = results[-1]
    else:
        result = solve_vocp(problem, ell)
    n = model.spaces.n
    _write_csv(os.path.join(out_dir, "ell_star.csv"),
               ["t"] + [f"l{i}" for i in range(n)],
               _state_rows(grid, result.ell_star.values), cfg.hash())
    _write_csv(os.path.join(out_dir, "z_star.csv"),
               ["t"] + [f"z{i}" for i in range(n)],
               _state_rows(grid, result.z_star.values), cfg.hash())
    _write_json(os.path.join(out_dir, "optimum.json"),
                {"J": result.J_star, "iterations": result.iterations,
                 "feasible": result.feasible, **result.feasibility},
                cfg.hash())
    return EXIT_OK if result.feasible else EXIT_INFEASIBLE


def cmd_recover(cfg, out_dir):
    model, grid, ell, z0 = _setup(cfg, out_dir)
    rcfg = cfg.raw["recovery"]
    eps_list = cfg.raw["study"]["eps_list"]
    if not eps_list:
        raise ConfigError("study.eps_list is required for recovery studies")
    tilde_params = DissipationParams(eps=float(rcfg["eps_tilde"]))
    ztilde, _ = solve_ris(model, ell, z0, tilde_params, compute_residuals=False)
    psol = reparametrize(model, ztilde, ell, tilde_params.eps)
    min_tp = float(np.min(np.diff(psol.hat_t) / np.diff(psol.s_nodes)))
    study = recovery_sequence(model, ztilde, ell, eps_list,
                              candidate_tol=float(rcfg["candidate_tol"]),
                              rho=float(rcfg["rho"]), min_that_prime=min_tp)
    rows = [(r.eps, r.end_dist, r.ell_gap_h1, r.z_gap_h1) for r in study.records]
    _write_csv(os.path.join(out_dir, "recovery.csv"),
               ["eps", "end_dist", "ell_gap_h1", "z_gap_h1"], rows, cfg.hash())
    _write_json(os.path.join(out_dir, "recovery.json"),
                {"eta_bar": study.eta_bar, "end_dist_order": study.end_dist_order,
                 "candidate_residual": study.candidate_residual,
                 "min_that_prime": min_tp}, cfg.hash())
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="risopt",
                                     description="Rate-independent system "
                                     "toolkit: viscous solves, arc-length "
                                     "reparametrization, control.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "parametrize", "sweep", "optimize", "recover"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML experiment config")
        p.add_argument("--preset", help="named built-in configuration")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
        p.add_argument("--seed", type=int, default=None)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            cfg = ExperimentConfig.from_yaml(args.config)
        elif args.preset:
            cfg = ExperimentConfig.from_preset(args.preset)
        else:
            print("error: one of --config/--preset is required", file=sys.stderr)
            return EXIT_CONFIG
        if args.seed is not None:
            cfg = ExperimentConfig.from_dict({**cfg.raw, "seed": args.seed})
        out_dir = args.out or cfg.raw["output_dir"]
    except (ConfigError, FileNotFoundError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "solve":
            return cmd_solve(cfg, out_dir)
        if args.command == "parametrize":
            return cmd_parametrize(cfg, out_dir)
        if args.command == "sweep":
            return cmd_sweep(cfg, out_dir, workers=args.workers)
        if args.command == "optimize":
            return cmd_optimize(cfg, out_dir)
        if args.command == "recover":
            return cmd_recover(cfg, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, ValueError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
