"""Command-line entry point: ``wtdml <command> --config config.yaml``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure, 1 anything else.  On failure a JSON error record is printed to
stderr as the last line.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import pipeline
from .config import PipelineConfig
from .errors import ConfigError, DataError, NumericError, WtdError

log = logging.getLogger("wtdml")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wtdml", description="Water-table-depth ML pipeline")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def cmd(name, help_):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", "-c", required=True, help="YAML pipeline config")
        return s

    cmd("prepare-features", "build the per-pixel feature table")
    cmd("process-wells", "filter, classify and aggregate well readings")
    cmd("build-proxies", "derive interior, shoreline and HAND proxy records")
    for name, help_ in (("train", "random search + final fit per variant"),
                        ("cross-validate", "per-ecoregion k-fold CV")):
        s = cmd(name, help_)
        s.add_argument("--variant", choices=["v1", "v2", "v3"])
    cmd("evaluate", "accuracy metrics and descriptive analyses")
    s = cmd("stress-test", "count monotonicity violations under a climate scenario")
    s.add_argument("--variant", choices=["v1", "v2", "v3"])
    s.add_argument("--delta-t", type=float)
    s.add_argument("--precip-scale", type=float)
    s.add_argument("--tolerance", type=float)
    cmd("report", "write report.md from existing outputs")
    cmd("run-all", "every stage in order")
    s = sub.add_parser("make-toy", help="write a synthetic toy continent and its config")
    s.add_argument("outdir")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--size", type=int, default=256)
    s.add_argument("--n-wells", type=int, default=4000)
    return p


def _dispatch(args) -> None:
    if args.command == "make-toy":
        from .toy import make_toy_continent

        path = make_toy_continent(args.seed, args.size, args.n_wells).write(args.outdir)
        print(path)
        return
    cfg = PipelineConfig.load(args.config)
    c = args.command
    if c == "prepare-features":
        t = pipeline.prepare_features(cfg)
        print(f"features: {len(t)} rows ({t.dropped} cells dropped)")
    elif c == "process-wells":
        px, rep = pipeline.process_wells(cfg)
        print(json.dumps(rep, sort_keys=True))
    elif c == "build-proxies":
        i, s, h = pipeline.build_proxies(cfg)
        print(f"interior {len(i)}, shoreline {len(s)}, hand {len(h)}")
    elif c == "train":
        for v, sr in pipeline.train(cfg, args.variant).items():
            print(f"{v}: best validation R2 {sr.log['valid_r2'].max():.4f}")
    elif c == "cross-validate":
        for v, df in pipeline.cross_validate(cfg, args.variant).items():
            print(f"{v}: {len(df)} out-of-fold predictions")
    elif c == "evaluate":
        print(pipeline.evaluate(cfg).to_string(index=False))
    elif c == "stress-test":
        res = pipeline.stress_test(cfg, args.variant, args.delta_t, args.precip_scale,
                                   args.tolerance)
        for v, n in res.items():
            print(f"{v}: {n} violations")
    elif c == "report":
        print(pipeline.report(cfg))
    elif c == "run-all":
        pipeline.run_all(cfg)
        print(cfg.output_dir / "report.md")
    else:  # pragma: no cover - argparse guards this
        raise ConfigError(f"unknown command {c}")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _dispatch(args)
    except WtdError as exc:
        category = next((k.__name__ for k in (ConfigError, DataError, NumericError)
                         if isinstance(exc, k)), "WtdError")
        record = {"error": type(exc).__name__, "category": category, "message": str(exc),
                  "exit_code": exc.exit_code}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001
        record = {"error": type(exc).__name__, "category": "internal", "message": str(exc),
                  "exit_code": 1}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
