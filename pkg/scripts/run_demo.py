"""Reference run: Maxwellian in a sinusoidal force, n_gr = 64, dense backend.

Writes the snapshots, density contrast and power spectrum into --out and
prints the structural checks (extrema of delta, dominant mode, dominance).
"""
import argparse
import sys

from qvlasov.cli import main


def parse_args():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="runs/demo")
    p.add_argument("--ngr", default="64")
    p.add_argument("--nt", default="2", help="even, so T/2 is a step boundary")
    return p.parse_args()


if __name__ == "__main__":
    a = parse_args()
    sys.exit(main(["demo", "--out", a.out, "--ngr", a.ngr, "--nt", a.nt, "--force-analytic=-1,pi",
                   "--init", "maxwell:0.1", "--box-length", "2", "--vmax", "1", "--tmax", "0.2"]))
