"""Run experiment 3 on both model problems; CSVs land in ``results/``.

Extra arguments are passed to the CLI and override the config files,
e.g. ``python3 scripts/run_exp3.py --mesh-n 16``.
"""
import sys
from pathlib import Path

from pxkacanov.cli import main

HERE = Path(__file__).resolve().parent

if __name__ == "__main__":
    out = Path("results")
    out.mkdir(exist_ok=True)
    for problem in ("meq1", "meq2"):
        cfg = HERE / "configs" / f"exp3_{problem}.cfg"
        code = main(["-v", "exp3", "--config", str(cfg),
                     "--out", str(out / f"exp3_{problem}.csv"), *sys.argv[1:]])
        if code:
            sys.exit(code)
