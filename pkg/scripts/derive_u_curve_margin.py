"""First run of the subarray-size sweep at M in {8, 17, 64}.

Prints the mean rates and the 95% half-width of the paired difference between
sweep points (every sweep point sees the same users and channels). The
acceptance test freezes the larger half-width as its U-curve margin.
"""
import math
import warnings

import numpy as np

from sparsedft import harness as hs


def main(trials: int = 200):
    sc = hs.load_scenario("fig9")
    sc.n_trials = trials
    sc.sweep_values = [8.0, 17.0, 64.0]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = hs.run(sc)
    rows = {r.sweep_value: r for r in rep.rows}
    for m, r in rows.items():
        print(f"M={m:g}: mean rate {r.mean_rate_bpshz:.4f} ci95 {r.ci95:.4f}")
    per_m = {m: np.array([r.rate for r in sorted(rep.records, key=lambda r: r.trial) if r.sweep_value == m])
             for m in rows}
    for a, b in ((17.0, 8.0), (17.0, 64.0)):
        d = per_m[a] - per_m[b]
        hw = 1.96 * d.std(ddof=1) / math.sqrt(len(d))
        print(f"M={a:g} vs M={b:g}: paired diff {d.mean():.4f} half-width {hw:.4f}")


if __name__ == "__main__":
    main()
