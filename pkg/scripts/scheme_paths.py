"""Trace how the attribute scheme shapes the rule sets along a penalty path.

Fits one ensemble, runs the same lambda grid under rule-, depth-, and
feature-count weighting, and prints size/depth/feature statistics per point.

    python3 scripts/scheme_paths.py --rows 2000 --trees 40
"""
import argparse

from treeprune import synthetic
from treeprune.approx import PathConfig, fit_path, lambda_grid
from treeprune.ensemble import fit_gbt
from treeprune.rulespace import AttributeScheme, build_rulespace


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=2000)
    ap.add_argument("--trees", type=int, default=40)
    ap.add_argument("--depth", type=int, default=5)
    ap.add_argument("--grid", default="0.5:500:12")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    lo, hi, num = args.grid.split(":")
    grid = lambda_grid(float(lo), float(hi), int(num))
    ds = synthetic.station_winds(args.rows, 14, seed=args.seed)
    ens = fit_gbt(ds, args.trees, args.depth, 0.1, 25, args.seed)
    ens.attach_member_rows(ds.feature_matrix)
    rs = build_rulespace(ens)
    v = ds.response - ens.base_score
    print(f"ensemble: {ens.num_trees} trees, {ens.node_count} nodes")

    for scheme in (AttributeScheme.RULE, AttributeScheme.DEPTH,
                   AttributeScheme.FEATURE):
        path = fit_path(rs, v, PathConfig(lambdas=grid, scheme=scheme))
        print(f"\nscheme={scheme.name.lower()}")
        print(f"{'lambda':>10} {'rules':>6} {'mean depth':>11} "
              f"{'features':>9} {'train obj':>12}")
        for pt in path.points:
            mean_depth = pt.sum_depth / pt.num_rules if pt.num_rules else 0.0
            print(f"{pt.lam:>10.3f} {pt.num_rules:>6} {mean_depth:>11.2f} "
                  f"{pt.num_features:>9} {pt.train_obj:>12.3f}")


if __name__ == "__main__":
    main()
