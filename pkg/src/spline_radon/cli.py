"""Command-line front end.

Subcommands: ``forward``, ``reconstruct``, ``experiment``, ``phantom-raster``.
Exit status is 0 on success, 1 when a reconstruction is flagged for too many
fallback windows or produces non-finite values, and 2 for usage, config or
input errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .fourier_algorithm import GriddingConfig, reconstruct
from .radon import (
    Phantom,
    Sinogram,
    disk_phantom,
    fbp_reconstruct,
    interior_mask,
    rasterize,
    rmse,
    shepp_logan_phantom,
    sinogram_analytic,
    write_image,
)

log = logging.getLogger("spline_radon")

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2
PRESETS = {"disk": disk_phantom, "shepp-logan": shepp_logan_phantom}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _add_phantom_args(sp):
    sp.add_argument("--phantom", help="phantom JSON file")
    sp.add_argument("--preset", choices=sorted(PRESETS), help="built-in phantom when --phantom is absent")


def _add_gridding_args(sp):
    d = GriddingConfig()
    sp.add_argument("--m", type=int, default=d.m, help="spline order in Step 2")
    sp.add_argument("--eps", type=float, default=d.eps)
    sp.add_argument("--neighbor-count", type=int, default=d.neighbor_count)
    sp.add_argument("--oversample", type=int, default=d.oversample)
    sp.add_argument("--min-separation", type=float, default=d.min_separation)
    sp.add_argument("--taper", type=float, default=d.taper)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="spline-radon", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="JSON file whose keys override command-line flags")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("forward", help="analytic sinogram of a phantom")
    _add_phantom_args(f)
    f.add_argument("--q", type=int, default=64)
    f.add_argument("--p", type=int, help="directions (default round(pi q))")
    f.add_argument("--noise", type=float, default=0.0, help="std of additive Gaussian noise")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", required=True, help="sinogram CSV")
    f.add_argument("--report", help="report JSON")

    r = sub.add_parser("reconstruct", help="image from a sinogram")
    r.add_argument("--sinogram", required=True)
    r.add_argument("--method", default="spline", help="spline, nearest or fbp")
    _add_gridding_args(r)
    r.add_argument("--truth", help="phantom JSON for metrics")
    r.add_argument("--truth-preset", choices=sorted(PRESETS))
    r.add_argument("--interior", type=float, default=0.9, help="radius of the metrics mask")
    r.add_argument("--out", required=True, help="PGM path (sidecar JSON is written next to it)")
    r.add_argument("--metrics", help="metrics/report JSON")
    r.add_argument("--timings", action="store_true", help="include wall-clock timings in the report")

    e = sub.add_parser("experiment", help="tidy CSV tables")
    e.add_argument("name", help="|".join(experiments.EXPERIMENTS))
    e.add_argument("--out", required=True)
    e.add_argument("--levels", type=int, nargs="+", default=[0, 1, 2])
    e.add_argument("--r", type=int, default=1)
    e.add_argument("--orders", type=int, nargs="+", default=[2, 4, 8])
    e.add_argument("--jitters", type=float, nargs="+", default=[0.0, 0.1, 0.2, 0.3, 0.4])
    e.add_argument("--qs", type=int, nargs="+", default=[16, 32, 64])
    e.add_argument("--spacing", type=float, default=0.1)
    e.add_argument("--jitter", type=float, default=0.3)
    e.add_argument("--noise", type=float, default=0.0)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--timings", action="store_true")
    _add_gridding_args(e)

    pr = sub.add_parser("phantom-raster", help="rasterize a phantom to PGM")
    _add_phantom_args(pr)
    pr.add_argument("--q", type=int, default=64)
    pr.add_argument("--out", required=True)
    pr.add_argument("--write-json", help="also save the phantom as JSON")
    return ap


def _apply_config(args: argparse.Namespace) -> dict:
    if not args.config:
        return {}
    try:
        cfg = json.loads(Path(args.config).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.config}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    for key, val in cfg.items():
        attr = key.replace("-", "_")
        if attr in ("command", "config") or not hasattr(args, attr):
            raise UsageError(f"unknown config key {key!r} for '{args.command}'")
        setattr(args, attr, val)
    return cfg


def _phantom(args) -> Phantom:
    if getattr(args, "phantom", None):
        return Phantom.load(args.phantom)
    if getattr(args, "preset", None):
        return PRESETS[args.preset]()
    raise UsageError("give --phantom or --preset")


def _gridding(args) -> GriddingConfig:
    return GriddingConfig(m=args.m, eps=args.eps, neighbor_count=args.neighbor_count,
                          oversample=args.oversample, min_separation=args.min_separation,
                          taper=args.taper)


def _echo(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items())}


def _dump(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n")


def cmd_forward(args) -> int:
    ph = _phantom(args)
    p = args.p if args.p else round(math.pi * args.q)
    sino = sinogram_analytic(ph, p, args.q)
    if args.noise > 0:
        rng = np.random.default_rng(args.seed)
        sino = Sinogram(p, args.q, sino.data + rng.normal(0.0, args.noise, sino.data.shape))
    sino.to_csv(args.out)
    if args.report:
        _dump(args.report, {"config": _echo(args), "p": p, "q": args.q,
                            "support_radius": ph.support_radius()})
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    sino = Sinogram.from_csv(args.sinogram)
    if args.method not in ("spline", "nearest", "fbp"):
        raise UsageError(f"unknown method {args.method!r}")
    report: dict = {"config": _echo(args), "method": args.method}
    status = EXIT_OK
    if args.method == "fbp":
        img = fbp_reconstruct(sino)
    else:
        img, rep = reconstruct(sino, _gridding(args), args.method)
        d = rep.to_dict()
        if not args.timings:
            d.pop("timings")
        report["run"] = d
        if rep.flagged:
            status = EXIT_NUMERICAL
    if not np.all(np.isfinite(img)):
        log.error("reconstruction produced non-finite values")
        return EXIT_NUMERICAL
    write_image(args.out, img)
    truth = None
    if args.truth:
        truth = Phantom.load(args.truth)
    elif args.truth_preset:
        truth = PRESETS[args.truth_preset]()
    if truth is not None:
        ref = rasterize(truth, sino.q)
        mask = interior_mask(sino.q, args.interior)
        err = rmse(img, ref, mask)
        peak = float(np.max(np.abs(ref))) or 1.0
        report["metrics"] = {"rmse": err, "psnr": 20 * math.log10(peak / err) if err > 0 else math.inf,
                             "interior_radius": args.interior}
    if args.metrics:
        _dump(args.metrics, report)
    return status


def cmd_experiment(args) -> int:
    name = args.name
    if name == "convergence_l":
        rows = experiments.convergence_l(tuple(args.levels), args.r, args.spacing, args.jitter,
                                         args.eps, seed=args.seed)
    elif name == "sinc_limit":
        rows = experiments.sinc_limit(tuple(args.orders))
    elif name == "jitter_sweep":
        rows = experiments.jitter_sweep(tuple(args.jitters), noise=args.noise, seed=args.seed)
    elif name == "complexity":
        rows = experiments.complexity(tuple(args.qs), _gridding(args), args.timings)
    else:
        raise UsageError(f"unknown experiment {name!r}; choose from {', '.join(experiments.EXPERIMENTS)}")
    Path(args.out).write_text(experiments.rows_to_csv(rows))
    return EXIT_OK


def cmd_phantom_raster(args) -> int:
    ph = _phantom(args)
    write_image(args.out, rasterize(ph, args.q))
    if args.write_json:
        ph.save(args.write_json)
    return EXIT_OK


COMMANDS = {
    "forward": cmd_forward,
    "reconstruct": cmd_reconstruct,
    "experiment": cmd_experiment,
    "phantom-raster": cmd_phantom_raster,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        _apply_config(args)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
