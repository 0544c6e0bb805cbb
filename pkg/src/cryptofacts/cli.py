"""Command-line front end.

Exit codes: 0 when every requested analysis succeeds, 1 when at least one
analysis fails, 2 for invalid arguments or configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pipeline, synth
from .errors import CryptoFactsError, SpecError

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


def _kv(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def _floats(text):
    return [float(x) for x in text.split(",") if x]


def _ints(text):
    return [int(x) for x in text.split(",") if x]


def _add_common(p, multi=True):
    p.add_argument("inputs", nargs="+" if multi else 1,
                   help=f"bar CSV or single-column series files (relative paths also searched in ${pipeline.DATA_ENV})")
    p.add_argument("-o", "--out", default=".", help="output directory")
    p.add_argument("--format", choices=("default", "binance"), default="default", help="bar file layout")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--dt", type=int, help="return interval in minutes")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cryptofacts", description="Stylized-fact analyses of high-frequency series.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="per-asset inter-trade time, zero-return share, volume per minute, group")
    _add_common(p)

    p = sub.add_parser("cdf", help="survival functions and tail exponents")
    _add_common(p)
    p.add_argument("--tail-fraction", type=float)
    p.add_argument("--stretched-range", type=_floats, help="lo,hi for a stretched-exponential fit")

    p = sub.add_parser("acf", help="volatility autocorrelation and power-law ranges")
    _add_common(p)
    p.add_argument("--max-lag", type=int)

    p = sub.add_parser("mf", help="fluctuation functions, h(q) and f(alpha)")
    _add_common(p)
    for name in ("q-min", "q-max", "q-step"):
        p.add_argument(f"--{name}", type=float)
    for name in ("s-min", "s-max", "per-decade", "poly-degree"):
        p.add_argument(f"--{name}", type=int)
    p.add_argument("--fit-range", type=_ints, help="s_lo,s_hi")

    p = sub.add_parser("rho", help="q-dependent detrended cross-correlation of every input pair")
    _add_common(p)
    p.add_argument("--q", type=_floats, help="comma-separated q values")
    for name in ("s-min", "s-max", "per-decade", "poly-degree"):
        p.add_argument(f"--{name}", type=int)
    p.add_argument("--return-volume", action="store_true", help="also correlate |r| with volume per asset")
    p.add_argument("--sessions", help="trading-session file")

    p = sub.add_parser("impact", help="conditional price impact by volume cell")
    _add_common(p)
    p.add_argument("--dt-list", type=_ints)
    p.add_argument("--kappas", type=_floats)
    p.add_argument("--p", type=float)

    p = sub.add_parser("mst", help="correlation matrix, distances and minimal spanning tree")
    _add_common(p)
    p.add_argument("--q", type=float)
    p.add_argument("--s", type=int)
    p.add_argument("--sessions")

    p = sub.add_parser("intermarket", help="crypto x traditional correlation block")
    _add_common(p)
    p.add_argument("--crypto", required=True, help="comma-separated labels (file stems)")
    p.add_argument("--traditional", required=True, help="comma-separated labels (file stems)")
    p.add_argument("--q", type=float)
    p.add_argument("--s", type=int)
    p.add_argument("--coverage-floor", type=float)
    p.add_argument("--sessions")

    p = sub.add_parser("synth", help="write a synthetic series")
    p.add_argument("kind", choices=synth.KINDS)
    p.add_argument("-o", "--out", required=True, help="output CSV path")
    p.add_argument("--length", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--param", type=_kv, action="append", default=[], metavar="KEY=VALUE",
                   help="generator parameter, e.g. H=0.7 or p=0.6")

    p = sub.add_parser("run", help="run the analyses listed in a TOML configuration")
    p.add_argument("config")
    p.add_argument("--set", type=_kv, action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key, e.g. mf.s_max=1000")
    p.add_argument("--workers", type=int)
    p.add_argument("--output-dir")
    p.add_argument("--seed", type=int)
    return ap


# option name -> parameter key, per analysis
_OPTION_KEYS = {
    "cdf": ("dt", "tail_fraction", "stretched_range"),
    "acf": ("dt", "max_lag"),
    "mf": ("dt", "q_min", "q_max", "q_step", "s_min", "s_max", "per_decade", "poly_degree", "fit_range"),
    "rho": ("dt", "q", "s_min", "s_max", "per_decade", "poly_degree", "return_volume"),
    "impact": ("dt_list", "kappas", "p"),
    "mst": ("dt", "q", "s"),
    "intermarket": ("dt", "q", "s", "coverage_floor"),
    "stats": ("dt",),
}


def _params_from_args(args) -> dict:
    given = {}
    for key in _OPTION_KEYS[args.command]:
        value = getattr(args, key, None)
        if value is not None and value is not False:
            given[key] = value
    if args.command == "intermarket":
        given["crypto"] = [x for x in args.crypto.split(",") if x]
        given["traditional"] = [x for x in args.traditional.split(",") if x]
    return pipeline.analysis_params(args.command, given)


def _single(args) -> int:
    params = _params_from_args(args)
    paths = [pipeline.resolve_path(p) for p in args.inputs]
    missing = [str(p) for p in paths if not p.is_file()]
    if missing:
        raise pipeline.ConfigError(f"input files not found: {missing}")
    sessions = None
    if getattr(args, "sessions", None):
        sp = pipeline.resolve_path(args.sessions)
        if not sp.is_file():
            raise pipeline.ConfigError(f"session file {args.sessions} not found")
        sessions = pipeline.ingest.parse_session_spec(sp)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    assets = [pipeline.load_asset(p, args.format) for p in paths]
    kwargs = {"sessions": sessions} if args.command in pipeline.NEEDS_SESSIONS else {}
    try:
        files = pipeline.RUNNERS[args.command](assets, params, out, workers=args.workers, **kwargs)
    except (CryptoFactsError, ValueError) as exc:
        print(f"{args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED
    for f in files:
        print(f)
    return EXIT_OK


def _parse_param(value: str):
    try:
        return json.loads(value)
    except json.JSONDecodeError:
        return value


def _synth(args) -> int:
    params = {k: _parse_param(v) for k, v in args.param}
    spec = synth.GeneratorSpec(args.kind, args.length, args.seed, params)
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    pipeline.write_values(out, synth.generate(spec))
    print(out)
    return EXIT_OK


def _run(args) -> int:
    overrides = dict(args.set)
    if args.workers is not None:
        overrides["workers"] = str(args.workers)
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.output_dir is not None:
        overrides["output_dir"] = json.dumps(str(Path(args.output_dir).resolve()))
    cfg = pipeline.load_config(args.config, overrides)
    manifest = pipeline.run(cfg)
    for name, rec in manifest["analyses"].items():
        line = f"{name}: {rec['status']}"
        if rec["status"] != "ok":
            line += f" ({rec['error']})"
        print(line)
    print(cfg.output_dir / "manifest.json")
    return EXIT_OK if manifest["ok"] else EXIT_FAILED


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            return _synth(args)
        if args.command == "run":
            return _run(args)
        return _single(args)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CryptoFactsError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
