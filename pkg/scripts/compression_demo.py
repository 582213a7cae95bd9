"""End-to-end compression walkthrough on the synthetic station data.

Writes a CSV, trains a large ensemble through the CLI, and prints the
compression report rows for a few validation margins. Everything goes through
the installed `treeprune` entry point so the artifacts match what the CLI
produces.

    python3 scripts/compression_demo.py --outdir /tmp/compress_demo
"""
import argparse
import json
import pathlib
import subprocess
import sys

from treeprune import dataio, synthetic


def run(argv) -> None:
    print("+", " ".join(argv))
    subprocess.run(argv, check=True)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--outdir", default="/tmp/compress_demo")
    ap.add_argument("--rows", type=int, default=6574)
    ap.add_argument("--trees", type=int, default=300)
    ap.add_argument("--depth", type=int, default=6)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    outdir = pathlib.Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    data = outdir / "station.csv"
    dataio.write_csv(synthetic.station_winds(args.rows, 14, seed=args.seed),
                     data, target="y")

    report = outdir / "report.json"
    run([sys.executable, "-m", "treeprune.cli", "compress",
         "--data", str(data), "--target", "y",
         "--trees", str(args.trees), "--depth", str(args.depth),
         "--min-leaf", "120", "--margins", "0.01,0.025,0.05",
         "--gamma", "4.0", "--lambda-grid", "0.4:2000:12",
         "--seed", str(args.seed),
         "--out", str(report), "--models-dir", str(outdir / "models")])

    rep = json.loads(report.read_text())
    full = rep["full_model"]
    print(f"\nfull ensemble: {full['nodes']} nodes, "
          f"valid R2 {full['valid_r2']:.4f}, test R2 {full['test_r2']:.4f}")
    for row in rep["rows"]:
        if row["status"] != "ok":
            print(f"margin {row['margin']:>6}: no rule set met the floor")
            continue
        print(f"margin {row['margin']:>6}: {row['num_rules']:>4} rules, "
              f"factor {row['compression_factor']:>7.1f}, "
              f"test R2 {row['test_r2']:.4f} "
              f"({row['test_r2_decrease_pct']:+.2f}%)")
    models = sorted((outdir / "models").glob("*.json"))
    if models:
        print("\nrendered smallest model:\n")
        run([sys.executable, "-m", "treeprune.cli", "render",
             "--model", str(models[0])])


if __name__ == "__main__":
    main()
