"""Failure rate and oracle-call scaling of the amplitude-estimation emulator.

For each scheme, amplitude and accuracy, runs seeded trials and writes one
CSV row; the fitted exponent of mean calls against 1/eps is printed per
scheme.
"""
import argparse
import csv
import time
from pathlib import Path

import numpy as np

from qvlasov.qae import QaeConfig, qae_estimate_batch


def parse_args():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="runs/qae_scaling.csv")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--eps", type=float, nargs="+", default=[0.04, 0.02, 0.01, 0.005])
    p.add_argument("--amplitudes", type=float, nargs="+", default=[0.1, 0.25, 0.5])
    p.add_argument("--schemes", nargs="+", default=["sampling-mle", "iterative"])
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    return p.parse_args()


def main():
    args = parse_args()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    for scheme in args.schemes:
        means = []
        for eps in args.eps:
            calls_here = []
            for a in args.amplitudes:
                t0 = time.perf_counter()
                cfg = QaeConfig(eps, args.delta, args.seed, scheme)
                est, calls = qae_estimate_batch(a, cfg, args.trials)
                err = np.abs(est - a)
                rows.append({
                    "scheme": scheme, "a": a, "eps": eps, "trials": args.trials,
                    "failure_rate": float(np.mean(err > eps)), "max_error": float(err.max()),
                    "mean_calls": float(calls.mean()), "seconds": time.perf_counter() - t0,
                })
                calls_here.append(calls.mean())
            means.append(np.mean(calls_here))
        slope = np.polyfit(np.log(1 / np.array(args.eps)), np.log(means), 1)[0]
        print(f"{scheme}: calls ~ (1/eps)^{slope:.2f}")
    with out.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    worst = max(rows, key=lambda r: r["failure_rate"])
    print(f"worst failure rate {worst['failure_rate']:.3f} ({worst['scheme']}, a={worst['a']}, eps={worst['eps']})")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
