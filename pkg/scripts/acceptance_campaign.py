#!/usr/bin/env python3
"""Populate the acceptance cache ahead of running the acceptance tests.

Runs every campaign the acceptance suite needs, in increasing order of cost,
persisting records under .cache/acceptance (or WUGO_ACCEPTANCE_DIR). Safe to
interrupt and re-run: completed runs are reused from disk.

    python scripts/acceptance_campaign.py [--parallel P] [--stage N]
"""

import argparse
import os
import sys
import time
from pathlib import Path

from wugo.bench import ablation_kappa, run_suite

TWO_D = ["three_hump_camel", "ackley", "levi", "himmelblau"]
BASE_SEED = 42


def log_run(cfg, rec):
    print(
        f"  [{cfg.blackbox} {cfg.method} k={cfg.kappa:g} seed={cfg.seed}] "
        f"{rec.status} calls={rec.n_simulator_calls} "
        f"best={rec.distances()[-1]:.4g}",
        flush=True,
    )


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--parallel", type=int, default=1)
    ap.add_argument("--stage", type=int, default=0, help="run a single stage (1-5)")
    args = ap.parse_args()

    out = Path(
        os.environ.get(
            "WUGO_ACCEPTANCE_DIR",
            Path(__file__).resolve().parent.parent / ".cache" / "acceptance",
        )
    )
    out.mkdir(parents=True, exist_ok=True)
    print(f"acceptance cache: {out}", flush=True)

    stages = {
        1: ("GP baselines (ego_gp, lcb_gp on the 2-D suite)", lambda: [
            run_suite(TWO_D, m, BASE_SEED, out_dir=out, parallel=args.parallel,
                      log=log_run)
            for m in ("ego_gp", "lcb_gp")
        ]),
        2: ("deep-ensemble baselines (ego_de, lcb_de)", lambda: [
            run_suite(TWO_D, m, BASE_SEED, out_dir=out, parallel=args.parallel,
                      log=log_run)
            for m in ("ego_de", "lcb_de")
        ]),
        3: ("WU-GO on the 2-D suite", lambda: [
            run_suite(TWO_D, "wugo_wgan", BASE_SEED, out_dir=out,
                      parallel=args.parallel, log=log_run)
        ]),
        4: ("kappa ablation on three_hump_camel", lambda: [
            ablation_kappa("three_hump_camel", [0.5, 1.0, 2.0, 4.0, 8.0],
                           repeats=5, base_seed=BASE_SEED, out_dir=out,
                           parallel=args.parallel, log=log_run)
        ]),
        5: ("rosenbrock8 smoke (R=3)", lambda: [
            run_suite(["rosenbrock8"], "wugo_wgan", BASE_SEED, repeats=3,
                      out_dir=out, parallel=args.parallel, log=log_run)
        ]),
    }

    todo = [args.stage] if args.stage else sorted(stages)
    for n in todo:
        name, fn = stages[n]
        print(f"== stage {n}: {name}", flush=True)
        t0 = time.time()
        fn()
        print(f"== stage {n} done in {time.time() - t0:.0f}s", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
