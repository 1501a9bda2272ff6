"""
Command line reports
====================

The same sweeps are available from the shell:

    bayesmarkowitz sweep-sigma0 --out results --svg
    bayesmarkowitz simulate --config configs/figure4.ini --paths 20000 --workers 4
    bayesmarkowitz report-all --out results

This script drives the CLI in-process and prints the head of one table.
"""

import tempfile
from pathlib import Path

from bayesmarkowitz import cli

with tempfile.TemporaryDirectory() as tmp:
    rc = cli.main(["sweep-horizon", "--config", "configs/figure5.ini", "--out", tmp, "--svg"])
    print("exit code", rc)
    for f in sorted(Path(tmp).iterdir()):
        print(f.name, f.stat().st_size, "bytes")
    text = (Path(tmp) / "sweep_horizon.csv").read_text().splitlines()
    print("\n".join(line for line in text if not line.startswith("#"))[:400])
