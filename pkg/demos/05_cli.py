"""
Driving everything from JSON configs
====================================

The command-line front end reads a run config, writes JSON results and
CSV tables. The same entry point can be called from Python.
"""

import json
import tempfile
from pathlib import Path

from eqdividend.cli import load_json, run

print(json.dumps(load_json("pseudo_l01"), indent=1))

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    run(["solve", "--config", "mixture_w04", "--out", str(tmp / "sol.json")])
    run(["verify", "--config", str(tmp / "sol.json"), "--out", str(tmp / "report.json")])
    print(json.loads((tmp / "report.json").read_text())["passed"])
    run(["figure", "--example", "pseudo", "--out", str(tmp)])
    print((tmp / "pseudo_l01.csv").read_text().splitlines()[:4])
