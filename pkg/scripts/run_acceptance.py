"""Run the acceptance suite twice and report every criterion, including determinism.

Usage: python scripts/run_acceptance.py [--seed 0] [--out results/accept]
"""
import sys

from margin_phase.cli import main

if __name__ == "__main__":
    args = sys.argv[1:]
    if "--seed" not in args:
        args += ["--seed", "0"]
    sys.exit(main(["accept", "--repeat", *args]))
