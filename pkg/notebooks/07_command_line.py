"""
Running a small sweep through the command line
==============================================

The same entry point as the ``midas`` console script. A sweep writes one
directory per (algorithm, eta, seed) run and an aggregate CSV.
"""

import csv
import tempfile
from pathlib import Path

from midas.cli import main

out = Path(tempfile.mkdtemp()) / "sweep"
code = main([
    "sweep", "--experiment", "mixture", "--dim", "2", "--eta", "0.5,1",
    "--budget", "12000", "--checkpoint-every", "4000", "--seeds", "2",
    "--ref-size", "2000", "--out", str(out),
])
print("exit code", code)

for p in sorted(out.rglob("*"))[:12]:
    print(" ", p.relative_to(out))

with open(out / "aggregate.csv", newline="") as fh:
    for row in csv.DictReader(fh):
        print(f"  {row['algo']} eta={row['eta']:<4} budget={row['budget']:>6} mean log SW {float(row['mean_log_sw2']):.3f}")

# a bad learning rate is a configuration error (exit code 2)
print("exit code for eta=1.5:", main(["validate-schedule", "--eta", "1.5"]))
