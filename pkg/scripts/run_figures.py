"""Run every shipped scenario and write one CSV report per scenario.

    python scripts/run_figures.py --out results --trials 200 --threads 4
"""
import argparse
import logging
import warnings
from pathlib import Path

from sparsedft import harness as hs


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results")
    ap.add_argument("--trials", type=int, help="override the trial count of every scenario")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in hs.shipped_scenarios():
        sc = hs.load_scenario(name)
        if args.trials:
            sc.n_trials = args.trials
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rep = hs.run(sc, threads=args.threads)
        path = out / f"{name}.{args.format}"
        hs.emit(rep, args.format, path)
        logging.info("%s -> %s", name, path)


if __name__ == "__main__":
    main()
