"""Generate a toy continent and run every pipeline stage on it.

    python scripts/run_toy_pipeline.py OUTDIR [--seed 0] [--size 256]

Prints the accuracy table and stress-test counts at the end.
"""

import argparse
import logging
from pathlib import Path

import pandas as pd

from wtdml import pipeline
from wtdml.config import PipelineConfig
from wtdml.toy import make_toy_continent


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("outdir", type=Path)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--n-wells", type=int, default=4000)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")

    config = make_toy_continent(args.seed, args.size, args.n_wells).write(args.outdir)
    cfg = PipelineConfig.load(config)
    pipeline.run_all(cfg)

    metrics = pd.read_csv(cfg.output_dir / "metrics.csv")
    with pd.option_context("display.width", 120, "display.float_format", "{:.3f}".format):
        print(metrics[metrics.region == "all"].to_string(index=False))
    print((cfg.output_dir / "report.md").read_text(encoding="utf-8").split("## Stress test")[-1])


if __name__ == "__main__":
    main()
