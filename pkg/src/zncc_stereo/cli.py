"""Command-line front end.

Exit codes: 0 success, 2 I/O or file-format failure, 3 invalid arguments or
inputs, 4 internal check failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import selftest
from .aggregation import DtParams, dt_aggregate
from .cost_volume import ScanConfig, write_cost_volume
from .image_io import (
    PgmFormatError,
    check_readable,
    read_disparity_pgm,
    read_pgm,
    synth_shift_pair,
    write_disparity_map,
)
from .pipeline import (
    PipelineConfig,
    benchmark,
    benchmark_csv,
    compute_cost_volume,
    evaluate_d1,
    run_pipeline,
    wta,
    wta_cost,
)

EXIT_OK = 0
EXIT_IO = 2
EXIT_VALIDATION = 3
EXIT_INTERNAL = 4

DEFAULTS = {
    "radius": 1,
    "max_disp": 128,
    "vz": 4,
    "hz": 32,
    "sum": "auto",
    "dt_mode": "float",
    "sigma_s": 5.0,
    "sigma_r": 52.0,
    "scale_t": 21,
    "d_arb": 0,
    "threads": 1,
    "repeats": 3,
}

_TYPES = {
    "radius": int, "max_disp": int, "vz": int, "hz": int, "scale_t": int, "d_arb": int,
    "threads": int, "repeats": int, "sigma_s": float, "sigma_r": float,
    "sum": str, "dt_mode": str,
}


class ValidationError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _add_tuning(p):
    p.add_argument("--radius", type=int)
    p.add_argument("--max-disp", type=int)
    p.add_argument("--vz", type=int)
    p.add_argument("--hz", type=int)
    p.add_argument("--sum", choices=["direct", "integral", "auto"])
    p.add_argument("--dt-mode", choices=["off", "float", "int32", "int16", "int8"])
    p.add_argument("--no-dt", action="store_true", help="same as --dt-mode off")
    p.add_argument("--sigma-s", type=float)
    p.add_argument("--sigma-r", type=float)
    p.add_argument("--scale-t", type=int)
    p.add_argument("--d-arb", type=int)
    p.add_argument("--threads", type=int, help="worker count, 0 = all cores")
    p.add_argument("--config", help="text file of key=value lines; flags override it")


def build_parser():
    parser = _Parser(prog="zncc-stereo", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    m = sub.add_parser("match", help="compute a disparity map")
    m.add_argument("--left", required=True)
    m.add_argument("--right", required=True)
    m.add_argument("--out", required=True)
    m.add_argument("--dump-cost", help="also write the ZNCC cost volume")
    _add_tuning(m)

    e = sub.add_parser("eval", help="D1 error of an estimate against ground truth")
    e.add_argument("--est", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--noc-mask", help="8-bit PGM, non-zero = non-occluded")

    b = sub.add_parser("bench", help="time every stage, write CSV")
    b.add_argument("--left", help="defaults to a synthetic 640x192 pair")
    b.add_argument("--right")
    b.add_argument("--out", help="CSV path; stdout when omitted")
    b.add_argument("--repeats", type=int)
    _add_tuning(b)

    s = sub.add_parser("selftest", help="exhaustive codec check and oracle comparisons")
    s.add_argument("--inject-codec-fault", action="store_true", help=argparse.SUPPRESS)
    return parser


def load_config_file(path):
    """Parse ``key=value`` lines; ``#`` starts a comment, dashes equal underscores."""
    check_readable(path)
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _TYPES:
                raise ValidationError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _TYPES[key](value)
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return values


def resolve_settings(args):
    """Built-in defaults, overlaid by the config file, overlaid by flags."""
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        settings.update(load_config_file(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    if getattr(args, "no_dt", False):
        settings["dt_mode"] = "off"
    return settings


def config_from_settings(s):
    try:
        aggregate = s["dt_mode"] != "off"
        return PipelineConfig(
            scan=ScanConfig(r=s["radius"], D=s["max_disp"], vz=s["vz"], hz=s["hz"]),
            dt=DtParams(
                sigma_s=s["sigma_s"],
                sigma_r=s["sigma_r"],
                d_arb=s["d_arb"],
                T=s["scale_t"],
                mode=s["dt_mode"] if aggregate else "float",
            ),
            summation_method=s["sum"],
            aggregation_enabled=aggregate,
            threads=s["threads"],
        )
    except ValueError as exc:
        raise ValidationError(str(exc)) from None


def _load_pair(left, right):
    for path in (left, right):
        check_readable(path)
    ref, tgt = read_pgm(left), read_pgm(right)
    if ref.shape != tgt.shape:
        raise ValidationError(f"image sizes differ: {ref.shape} vs {tgt.shape}")
    return ref, tgt


def cmd_match(args):
    cfg = config_from_settings(resolve_settings(args))
    ref, tgt = _load_pair(args.left, args.right)
    if args.dump_cost:
        cv = compute_cost_volume(ref, tgt, cfg)
        write_cost_volume(cv, args.dump_cost)
        if cfg.aggregation_enabled:
            disp = wta_cost(dt_aggregate(cv, ref, cfg.dt, threads=cfg.workers))
        else:
            disp = wta(cv)
    else:
        disp = run_pipeline(ref, tgt, cfg)
    write_disparity_map(disp, args.out, 256.0)
    logging.info("wrote %s (%dx%d)", args.out, disp.shape[1], disp.shape[0])
    return EXIT_OK


def cmd_eval(args):
    paths = [args.est, args.gt] + ([args.noc_mask] if args.noc_mask else [])
    for path in paths:
        check_readable(path)
    est = read_disparity_pgm(args.est)
    gt = read_disparity_pgm(args.gt)
    mask = read_pgm(args.noc_mask) if args.noc_mask else None
    if est.shape != gt.shape or (mask is not None and mask.shape != gt.shape):
        raise ValidationError(f"size mismatch: estimate {est.shape}, ground truth {gt.shape}")
    report = evaluate_d1(est, gt, mask)
    print(json.dumps(report.as_dict(), separators=(",", ":")))
    return EXIT_OK


def cmd_bench(args):
    settings = resolve_settings(args)
    cfg = config_from_settings(settings)
    if settings["repeats"] < 3:
        raise ValidationError("--repeats must be at least 3")
    if args.left or args.right:
        if not (args.left and args.right):
            raise ValidationError("--left and --right go together")
        ref, tgt = _load_pair(args.left, args.right)
    else:
        ref, tgt = synth_shift_pair(640, 192, 7, seed=0)
    rows = benchmark(ref, tgt, cfg, repeats=settings["repeats"])
    text = benchmark_csv(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_selftest(args):
    results = selftest.run_all(inject_codec_fault=args.inject_codec_fault)
    ok = True
    for name, passed, total in results:
        print(f"{name}: {passed}/{total} passed")
        ok &= passed == total
    print("selftest " + ("PASSED" if ok else "FAILED"))
    return EXIT_OK if ok else EXIT_INTERNAL


COMMANDS = {"match": cmd_match, "eval": cmd_eval, "bench": cmd_bench, "selftest": cmd_selftest}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors and --help
        return exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (FileNotFoundError, PgmFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except AssertionError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
