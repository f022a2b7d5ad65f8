"""Repeat the calibrated experiment over many seeds and summarise.

    python scripts/calibrated_experiment.py --config configs/calibrated.cfg --runs 20

Prints per-run accuracy, the always-true baseline and per-topic mean detection
levels, then the aggregate checks (mean accuracy, runs beating the baseline,
how often the Tech <= Pol and Research <= Movie orderings hold).
"""

import argparse
import json
import statistics
import time

from veritas.cli import load_config
from veritas.graph import load_graph
from veritas.sim import detection_level_stats, run_simulation
from veritas.trust import Topic


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="configs/calibrated.cfg")
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--first-seed", type=int, default=0)
    ap.add_argument("--json", help="also write the per-run rows here")
    args = ap.parse_args()

    base_cfg = load_config(args.config, args.first_seed)
    graph = load_graph(base_cfg.graph_source)
    print(f"graph: {graph.node_count} nodes, {len(graph.edges)} edges")

    rows = []
    for k in range(args.runs):
        seed = args.first_seed + k
        cfg = load_config(args.config, seed)
        t0 = time.perf_counter()
        rep = run_simulation(cfg, graph=graph)
        levels = detection_level_stats(rep)
        row = {
            "seed": seed,
            "accuracy": rep.accuracy,
            "baseline": rep.baseline_accuracy,
            "levels": {t.name: levels.get(t) for t in Topic},
            "seconds": round(time.perf_counter() - t0, 2),
        }
        rows.append(row)
        lv = " ".join(f"{n}={v:.2f}" for n, v in row["levels"].items() if v is not None)
        print(f"seed {seed:3d}  acc {row['accuracy']:.2f}  base {row['baseline']:.2f}  "
              f"{lv}  ({row['seconds']}s)")

    def holds(row, lo, hi):
        a, b = row["levels"][lo.name], row["levels"][hi.name]
        return a is not None and b is not None and a <= b

    print()
    print(f"mean accuracy        {statistics.mean(r['accuracy'] for r in rows):.4f}")
    print(f"mean baseline        {statistics.mean(r['baseline'] for r in rows):.4f}")
    print(f"runs above baseline  {sum(r['accuracy'] > r['baseline'] for r in rows)}/{len(rows)}")
    print(f"Tech <= Pol          {sum(holds(r, Topic.Tech, Topic.Pol) for r in rows)}/{len(rows)}")
    print(f"Research <= Movie    {sum(holds(r, Topic.Research, Topic.Movie) for r in rows)}/{len(rows)}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=1)


if __name__ == "__main__":
    main()
