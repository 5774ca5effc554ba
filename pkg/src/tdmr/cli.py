"""Command line: ``tdmr run|sweep|gen|tables``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness, trellis
from .codec import ITERATIVE, NON_ITERATIVE
from .grains import generate_grain_image, solve_grain_distribution

log = logging.getLogger("tdmr")

_FLAG_KEYS = {
    "p2": "p2", "rate": "rate", "mode": "mode", "blocks": "blocks", "seed": "seed",
    "ber_target": "ber_target", "gauss_mean": "gauss_mean", "gauss_var": "gauss_var", "workers": "workers",
}


def _common(p: argparse.ArgumentParser, with_rate: bool = True) -> None:
    p.add_argument("--config", type=Path, help="flat key = value file; flags override it")
    p.add_argument("--mode", choices=(ITERATIVE, NON_ITERATIVE))
    p.add_argument("--blocks", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--ber-target", type=float)
    p.add_argument("--gauss-mean", type=float)
    p.add_argument("--gauss-var", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--no-genie", action="store_true", help="disable stopping on known data")
    p.add_argument("--out", type=Path, help="CSV path (a .manifest.json is written next to it)")
    if with_rate:
        p.add_argument("--rate", type=float)


def _settings(args) -> dict:
    values = harness.parse_config_text(args.config.read_text()) if args.config else {}
    for attr, key in _FLAG_KEYS.items():
        v = getattr(args, attr, None)
        if v is not None and not isinstance(v, list):
            values[key] = v
    if args.no_genie:
        values["genie_stop"] = False
    return values


def _progress(cfg, block):
    log.info("p2=%g rate=%g block %d: errors=%d outer=%d", cfg.p2, cfg.rate, block.block,
             block.bit_errors, block.outer_iters)


def _emit(reports, out: Path | None, manifest_config: dict, extra: dict | None = None) -> None:
    if out is None:
        w = sys.stdout
        w.write(",".join(harness.CSV_HEADER) + "\n")
        for r in reports:
            w.write(",".join(str(v) for v in r.csv_row()) + "\n")
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    harness.write_csv(reports, out)
    harness.write_manifest(harness.manifest_path(out), manifest_config, reports, extra)
    log.info("wrote %s", out)


def cmd_run(args) -> int:
    values = _settings(args)
    if "p2" not in values or "rate" not in values:
        raise SystemExit("run needs --p2 and --rate (or a config file providing them)")
    cfg = harness.make_config(values)
    report = harness.run_point(cfg, progress=_progress)
    _emit([report], args.out, cfg.as_dict())
    return 0


def cmd_sweep(args) -> int:
    values = _settings(args)
    values.pop("rate", None)
    p2s = args.p2 if args.p2 else [values.get("p2", 0.0)]
    values.pop("p2", None)
    gauss = harness.LlrGaussianModel(values.pop("gauss_mean", 1.0), values.pop("gauss_var", 1.69))
    mode = values.pop("mode", ITERATIVE)
    blocks = values.pop("blocks", 20)
    ber_target = values.pop("ber_target", 1e-5)
    seed = values.pop("seed", 0)
    grid = harness.rate_grid(args.rate_start, args.rate_stop, args.rate_step)
    reports, best = [], {}
    for p2 in p2s:
        res = harness.rate_search(p2, mode, ber_target, blocks, grid, seed=seed, gaussian=gauss,
                                  progress=_progress, **values)
        reports.extend(res.reports)
        best[f"{p2:g}"] = res.best_rate
        log.info("p2=%g best rate %g (%g user bits/grain)", p2, res.best_rate, res.best_user_bits_per_grain)
    manifest = dict(values, mode=mode, blocks=blocks, ber_target=ber_target, seed=seed, p2=p2s,
                    gauss_mean=gauss.mean, gauss_var=gauss.var, grid=grid)
    _emit(reports, args.out, manifest, {"best_rate": best})
    return 0


def cmd_gen(args) -> int:
    image = generate_grain_image(solve_grain_distribution(args.p2), args.rows, args.cols, args.seed)
    text = image.to_text()
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    freq = image.grain_frequencies()
    log.info("grain frequencies A/BC/DE/FGHI: %s", " ".join(f"{f:.4f}" for f in freq))
    return 0


def cmd_tables(args) -> int:
    dist = solve_grain_distribution(args.p2) if args.p2 is not None else None
    text = trellis.dump_tables(dist)
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tdmr", description="Two-row grain-channel detector and SCCC simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    verbose = argparse.ArgumentParser(add_help=False)
    verbose.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = sub.add_parser("run", parents=[verbose], help="simulate blocks at one (p2, rate) point")
    p.add_argument("--p2", type=float)
    _common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", parents=[verbose], help="rate search for each p2")
    p.add_argument("--p2", type=float, nargs="+")
    _common(p, with_rate=False)
    p.add_argument("--rate-start", type=float, default=0.20)
    p.add_argument("--rate-stop", type=float, default=0.60)
    p.add_argument("--rate-step", type=float, default=0.01)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen", parents=[verbose], help="print a random grain image")
    p.add_argument("--p2", type=float, required=True)
    p.add_argument("--rows", type=int, default=16)
    p.add_argument("--cols", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("tables", parents=[verbose], help="dump the trellis transition and output tables")
    p.add_argument("--p2", type=float, help="also evaluate the transitions numerically")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_tables)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"tdmr: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
