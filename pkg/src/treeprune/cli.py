"""Command-line workflows: train, prune, path, compress, eval, render.

Every subcommand prints one JSON metrics object to stdout and writes its
artifacts to the paths given by flags. Outputs are bit-identical across
repeated runs with the same flags and seed. Set TREEPRUNE_LOG=DEBUG (or any
logging level name) for progress chatter on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__, dataio
from .approx import (PathConfig, active_set_fit, cbcd_fit, fit_path,
                     lambda_grid, state_selection)
from .ensemble import fit_gbt, predict, r2
from .exact import ExactConfig, solve_exact, write_trace_csv
from .relax import RelaxConfig, relax_and_round
from .rulespace import (AttributeScheme, build_rulespace, predict_rule_model,
                        render_rules, selection_to_rule_model,
                        validate_rule_model)

log = logging.getLogger("treeprune")

_SCHEMES = {
    "rule": AttributeScheme.RULE,
    "depth": AttributeScheme.DEPTH,
    "feature": AttributeScheme.FEATURE,
}


def main(argv=None) -> int:
    _setup_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (KeyboardInterrupt, BrokenPipeError):
        raise
    except Exception as exc:  # structured failure, nonzero exit
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)},
                         sort_keys=True), file=sys.stderr)
        log.debug("traceback", exc_info=True)
        return 1


def _setup_logging() -> None:
    level = os.environ.get("TREEPRUNE_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="treeprune",
        description="Extract compact weighted rule sets from boosted tree ensembles.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True)

    t = sub.add_parser("train", help="fit a boosted ensemble on a CSV")
    t.add_argument("--data", required=True)
    t.add_argument("--target", required=True)
    t.add_argument("--trees", type=int, default=100)
    t.add_argument("--depth", type=int, default=3)
    t.add_argument("--lr", type=float, default=0.1)
    t.add_argument("--min-leaf", type=int, default=5)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("prune", help="extract a rule set from a trained ensemble")
    pr.add_argument("--ensemble", required=True)
    pr.add_argument("--data", required=True)
    pr.add_argument("--target", required=True)
    pr.add_argument("--mode", required=True, choices=["exact", "cbcd", "relax"])
    pr.add_argument("--K", type=int, default=None, help="attribute budget")
    pr.add_argument("--lam", type=float, default=None, help="penalty strength")
    pr.add_argument("--scheme", choices=sorted(_SCHEMES), default="rule")
    pr.add_argument("--gamma", type=float, default=1.0)
    pr.add_argument("--tol", type=float, default=1e-6)
    pr.add_argument("--time-limit", type=float, default=600.0)
    pr.add_argument("--out", required=True)
    pr.add_argument("--trace", default=None, help="CSV of solver bounds per iteration")
    pr.add_argument("--plain-sweeps", action="store_true",
                    help="cbcd: cycle all trees instead of the active set")
    pr.add_argument("--no-recycle", action="store_true",
                    help="cbcd: disable cut recycling")
    pr.set_defaults(func=cmd_prune)

    pa = sub.add_parser("path", help="regularization path over a lambda grid")
    pa.add_argument("--ensemble", required=True)
    pa.add_argument("--data", required=True)
    pa.add_argument("--target", required=True)
    pa.add_argument("--lambda-grid", default="1:1000:50", metavar="LO:HI:N")
    pa.add_argument("--scheme", choices=sorted(_SCHEMES), default="rule")
    pa.add_argument("--gamma", type=float, default=1.0)
    pa.add_argument("--valid-data", default=None,
                    help="CSV scored per path point (same target column)")
    pa.add_argument("--out", required=True)
    pa.add_argument("--plain-sweeps", action="store_true")
    pa.add_argument("--no-recycle", action="store_true")
    pa.set_defaults(func=cmd_path)

    co = sub.add_parser("compress",
                        help="train, path, and report compression per margin")
    co.add_argument("--data", required=True)
    co.add_argument("--target", required=True)
    co.add_argument("--trees", type=int, default=500)
    co.add_argument("--depth", type=int, default=7)
    co.add_argument("--lr", type=float, default=0.1)
    co.add_argument("--min-leaf", type=int, default=5)
    co.add_argument("--seed", type=int, default=0)
    co.add_argument("--margins", default="0.01,0.025,0.05",
                    help="comma-separated validation R2 margins in (0,1]")
    co.add_argument("--scheme", choices=sorted(_SCHEMES), default="rule")
    co.add_argument("--gamma", type=float, default=1.0)
    co.add_argument("--lambda-grid", default="1:1000:50", metavar="LO:HI:N")
    co.add_argument("--split", default="0.7,0.15,0.15",
                    help="train,valid,test fractions")
    co.add_argument("--out", required=True, help="report JSON")
    co.add_argument("--models-dir", default=None,
                    help="also save the chosen rule model per margin here")
    co.set_defaults(func=cmd_compress)

    ev = sub.add_parser("eval", help="score a rule model on a CSV")
    ev.add_argument("--model", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--target", required=True)
    ev.set_defaults(func=cmd_eval)

    re = sub.add_parser("render", help="print a rule model as text")
    re.add_argument("--model", required=True)
    re.set_defaults(func=cmd_render)
    return p


def _emit(metrics: dict) -> None:
    print(json.dumps(metrics, sort_keys=True))


def _load_pruning_inputs(ens_path, data_path, target):
    ens = dataio.load_ensemble(ens_path)
    ds = dataio.load_csv(data_path, target)
    ens.attach_member_rows(ds.feature_matrix)
    rs = build_rulespace(ens)
    log.info("ensemble %s: %d trees, %d nodes; data %s: %d rows",
             ens_path, ens.num_trees, ens.node_count, data_path, rs.n)
    # solvers see the centered response; base_score rides along in metadata
    v = ds.response - ens.base_score
    return ens, ds, rs, v


def _parse_grid(text: str) -> np.ndarray:
    try:
        lo, hi, num = text.split(":")
        return lambda_grid(float(lo), float(hi), int(num))
    except ValueError as exc:
        raise ValueError(f"bad --lambda-grid {text!r}, expected LO:HI:N") from exc


def cmd_train(args) -> int:
    ds = dataio.load_csv(args.data, args.target)
    log.info("training %d trees (depth %d, lr %g) on %d rows",
             args.trees, args.depth, args.lr, ds.response.size)
    ens = fit_gbt(ds, args.trees, args.depth, args.lr, args.min_leaf, args.seed)
    dataio.save_ensemble(ens, args.out)
    pred = predict(ens, ds.feature_matrix)
    _emit({
        "subcommand": "train",
        "seed": args.seed,
        "num_trees": ens.num_trees,
        "node_count": ens.node_count,
        "train_r2": r2(ds.response, pred),
        "base_score": ens.base_score,
        "skipped_rows": ds.skipped_rows,
        "out": args.out,
    })
    return 0


def cmd_prune(args) -> int:
    if args.mode in ("exact", "relax") and args.K is None:
        raise ValueError(f"--mode {args.mode} requires --K")
    if args.mode == "cbcd" and args.lam is None:
        raise ValueError("--mode cbcd requires --lam")
    if args.K is not None and args.K < 0:
        raise ValueError("--K must be >= 0")
    ens, ds, rs, v = _load_pruning_inputs(args.ensemble, args.data, args.target)
    scheme = _SCHEMES[args.scheme]
    counters: dict = {}
    tau = 0.0
    status = "optimal"

    if args.mode == "exact":
        cfg = ExactConfig(budget=args.K, scheme=scheme, gamma=args.gamma,
                          tol=args.tol, time_limit=args.time_limit)
        result = solve_exact(rs, v, cfg)
        sel, tau, status = result.selection, result.gap, result.status
        counters = {"iterations": result.iterations, "num_cuts": result.num_cuts}
        if args.trace:
            write_trace_csv(result, args.trace)
    elif args.mode == "cbcd":
        fit = cbcd_fit if args.plain_sweeps else active_set_fit
        state = fit(rs, v, args.lam, args.gamma, scheme,
                    recycle=not args.no_recycle, tol=args.tol)
        sel = state_selection(rs, v, args.gamma, scheme, state)
        status = "sweep_limit" if state.sweep_limit_hit else "converged"
        counters = dict(state.counters)
        counters["sweeps"] = state.sweeps
        if args.trace:
            _write_objective_trace(state.objective_trace, args.trace)
    else:
        cfg = RelaxConfig(gamma=args.gamma, tol=args.tol)
        result = relax_and_round(rs, v, args.K, scheme, cfg)
        sel, status = result.selection, result.status
        if sel.objective > 0.0:
            tau = max(0.0, (sel.objective - result.relax_bound) / sel.objective)
        counters = {"iterations": result.iterations,
                    "relax_bound": result.relax_bound,
                    "relax_value": result.relax_value}

    log.debug("solver counters: %s", counters)
    model = selection_to_rule_model(rs, sel, metadata={
        "gamma": args.gamma,
        "scheme": args.scheme,
        "mode": args.mode,
    })
    validate_rule_model(model)
    dataio.save_rule_model(model, args.out)
    pred = predict_rule_model(model, ds.feature_matrix)
    _emit({
        "subcommand": "prune",
        "mode": args.mode,
        "scheme": args.scheme,
        "objective": sel.objective,
        "num_rules": len(sel.support),
        "attribute_sum": sel.attribute_sum,
        "intercept": model.intercept,
        "tau": tau,
        "status": status,
        "train_r2": r2(ds.response, pred),
        "counters": counters,
        "out": args.out,
    })
    return 0


def _write_objective_trace(trace, path) -> None:
    with open(path, "w") as fh:
        fh.write("update,objective\n")
        for i, obj in enumerate(trace):
            fh.write(f"{i},{obj!r}\n")


def cmd_path(args) -> int:
    ens, ds, rs, v = _load_pruning_inputs(args.ensemble, args.data, args.target)
    cfg = PathConfig(lambdas=_parse_grid(args.lambda_grid),
                     gamma=args.gamma, scheme=_SCHEMES[args.scheme],
                     active_set=not args.plain_sweeps,
                     recycle=not args.no_recycle)
    log.info("path over %d lambdas in [%g, %g]", cfg.lambdas.size,
             cfg.lambdas.min(), cfg.lambdas.max())
    path = fit_path(rs, v, cfg)
    log.debug("path counters: %s", path.counters)
    if args.valid_data:
        valid = dataio.load_csv(args.valid_data, args.target)
        for pt in path.points:
            model = selection_to_rule_model(rs, pt.selection)
            pt.valid_r2 = r2(valid.response,
                             predict_rule_model(model, valid.feature_matrix))
    dataio.write_path_csv(path, args.out)
    _emit({
        "subcommand": "path",
        "scheme": args.scheme,
        "points": len(path.points),
        "counters": path.counters,
        "out": args.out,
    })
    return 0


def cmd_compress(args) -> int:
    margins = [float(tok) for tok in args.margins.split(",") if tok]
    if not margins or any(not (0.0 < phi <= 1.0) for phi in margins):
        raise ValueError("--margins must be fractions in (0, 1]")
    fractions = tuple(float(tok) for tok in args.split.split(","))
    if len(fractions) != 3:
        raise ValueError("--split needs three fractions")
    ds = dataio.load_csv(args.data, args.target)
    train, valid, test = dataio.split(ds, fractions, args.seed)
    log.info("split %d/%d/%d rows; training %d trees at depth %d",
             train.response.size, valid.response.size, test.response.size,
             args.trees, args.depth)
    ens = fit_gbt(train, args.trees, args.depth, args.lr, args.min_leaf,
                  args.seed)
    full_valid = r2(valid.response, predict(ens, valid.feature_matrix))
    full_test = r2(test.response, predict(ens, test.feature_matrix))
    full_nodes = ens.node_count

    ens.attach_member_rows(train.feature_matrix)
    rs = build_rulespace(ens)
    v = train.response - ens.base_score
    cfg = PathConfig(lambdas=_parse_grid(args.lambda_grid), gamma=args.gamma,
                     scheme=_SCHEMES[args.scheme])
    path = fit_path(rs, v, cfg)

    scored = []
    for pt in path.points:
        if not pt.selection.support:
            continue
        model = selection_to_rule_model(rs, pt.selection)
        scored.append((pt, model,
                       r2(valid.response,
                          predict_rule_model(model, valid.feature_matrix))))

    rows = []
    for phi in margins:
        floor = full_valid - phi * abs(full_valid)
        ok = [(pt, model, vr2) for pt, model, vr2 in scored if vr2 >= floor]
        if not ok:
            rows.append({"margin": phi, "status": "none"})
            continue
        ok.sort(key=lambda item: (item[0].num_rules, -item[2], item[0].lam))
        pt, model, vr2 = ok[0]
        test_r2 = r2(test.response,
                     predict_rule_model(model, test.feature_matrix))
        decrease = ((full_test - test_r2) / abs(full_test) * 100.0
                    if full_test != 0.0 else 0.0)
        rows.append({
            "margin": phi,
            "status": "ok",
            "lambda": pt.lam,
            "num_rules": pt.num_rules,
            "compression_factor": full_nodes / pt.num_rules,
            "valid_r2": vr2,
            "test_r2": test_r2,
            "test_r2_decrease_pct": decrease,
        })
        if args.models_dir:
            os.makedirs(args.models_dir, exist_ok=True)
            dataio.save_rule_model(model, os.path.join(
                args.models_dir, f"model_margin_{phi:g}.json"))

    report = {
        "subcommand": "compress",
        # pruned-model "node count" in the factor denominator = selected rules,
        # one terminal node each; condition counts are NOT the denominator
        "denominator": "selected_rules",
        "seed": args.seed,
        "scheme": args.scheme,
        "full_model": {"nodes": full_nodes, "valid_r2": full_valid,
                       "test_r2": full_test, "trees": args.trees,
                       "depth": args.depth},
        "rows": rows,
        "out": args.out,
    }
    with open(args.out, "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=1)
        fh.write("\n")
    _emit(report)
    return 0


def cmd_eval(args) -> int:
    model = dataio.load_rule_model(args.model)
    validate_rule_model(model)
    ds = dataio.load_csv(args.data, args.target)
    pred = predict_rule_model(model, ds.feature_matrix)
    err = ds.response - pred
    _emit({
        "subcommand": "eval",
        "num_rules": model.num_rules,
        "r2": r2(ds.response, pred),
        "mse": float(np.mean(err ** 2)),
        "intercept": model.intercept,
    })
    return 0


def cmd_render(args) -> int:
    model = dataio.load_rule_model(args.model)
    validate_rule_model(model)
    print(render_rules(model))
    return 0


if __name__ == "__main__":
    sys.exit(main())
