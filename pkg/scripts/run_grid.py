#!/usr/bin/env python3
"""Run one or more grid configs and print the merged table.

    python scripts/run_grid.py scripts/configs/edit.ini
    python scripts/run_grid.py scripts/configs/length.ini --workdir /tmp/len --set grid.seeds=0
"""

import argparse
import logging
import sys

from ctrlgen.config import load_config
from ctrlgen.pipeline import run_grid


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("configs", nargs="+")
    ap.add_argument("--workdir", help="override experiment.workdir for every config")
    ap.add_argument("--out", help="where table.txt and report.json go (default <workdir>/report)")
    ap.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")

    overrides = dict(item.split("=", 1) for item in args.set)
    if args.workdir:
        overrides["experiment.workdir"] = args.workdir
    configs = [load_config(path, overrides, check_model=False) for path in args.configs]
    result = run_grid(configs, args.out)
    print(result.table())
    return 1 if result.failed else 0


if __name__ == "__main__":
    sys.exit(main())
