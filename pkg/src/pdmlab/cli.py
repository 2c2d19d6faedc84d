"""Command-line entry point: ``pdmlab {list-models,simulate,verify,map,report}``.

Exit status: 0 when every asserted check passes, 1 when any asserted check
fails or a run aborts, 2 for configuration and lookup errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import yaml

from .catalog import list_models
from .config import parse_config
from .errors import CatalogError, ConfigError, InputError, ParameterError, PdmError
from .experiments import run_map, run_report, run_simulate, run_verify, write_bundle

RUNNERS = {"simulate": run_simulate, "verify": run_verify, "map": run_map, "report": run_report}
EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _color(text, code, stream):
    if os.environ.get("NO_COLOR") is not None or not stream.isatty():
        return text
    return f"\033[{code}m{text}\033[0m"


def _fmt(v):
    if v is None:
        return "-"
    if isinstance(v, str):
        return v
    return f"{v:.3e}"


def print_table(rows, headers, stream=sys.stdout, colors=None):
    widths = [max(len(str(h)), *(len(str(r[i])) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
    stream.write("  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip() + "\n")
    for k, row in enumerate(rows):
        cells = [str(c).ljust(w) for c, w in zip(row, widths)]
        if colors and colors[k]:
            cells[0] = _color(cells[0], colors[k], stream)
        stream.write("  ".join(cells).rstrip() + "\n")


def _check_rows(bundle):
    codes = {"asserted-pass": "32", "asserted-fail": "31", "diagnostic": "36"}
    rows, colors = [], []
    for c in bundle.checks:
        bound = "" if c.kind == "diagnostic" else f"{c.comparator} {_fmt(c.tolerance)}"
        rows.append((c.verdict, c.id, _fmt(c.measured) if c.error is None else "error", bound))
        colors.append(codes[c.verdict])
    return rows, colors


def cmd_list_models(args, out):
    records = list_models()
    if args.format == "json":
        out.write(json.dumps(records, indent=2) + "\n")
        return EXIT_OK
    rows = [(r["name"], r["kind"], r["system"], r["closed_form"], r["maps_to"]) for r in records]
    print_table(rows, ("model", "kind", "system", "closed form", "maps to"), out)
    out.write("\ndefaults:\n")
    for r in records:
        pairs = ", ".join(f"{k}={list(v) if isinstance(v, tuple) else v}" for k, v in r["defaults"].items())
        out.write(f"  {r['name']}: {pairs}\n")
    return EXIT_OK


def _config_text(args):
    if args.config is None:
        return ""
    try:
        with open(args.config) as fh:
            return fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc.strerror}") from None


def build_config(args):
    """Merge the config file, the positional model and the flag overrides (flags win)."""
    text = _config_text(args)
    overrides = []
    if args.model is not None:
        overrides.append(f"model={args.model}")
    elif args.command == "report" and "model" not in _top_keys(text):
        # report covers the whole catalog; the model key only has to be valid
        overrides.append("model=ml1")
    overrides += list(args.set or [])
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.periods is not None:
        overrides += ["time=", f"periods={args.periods}"]
    if args.out is not None:
        overrides.append(f"output.dir={args.out}")
    if args.format is not None:
        overrides.append(f"output.format={args.format}")
    return parse_config(text, overrides)


def _top_keys(text):
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError:
        return set()
    return set(doc) if isinstance(doc, dict) else set()


def cmd_run(args, out, err):
    try:
        cfg = build_config(args)
    except (ConfigError, CatalogError, InputError, ParameterError) as exc:
        err.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    try:
        bundle = RUNNERS[args.command](cfg)
    except PdmError as exc:
        err.write(f"run failed: {type(exc).__name__}: {exc}\n")
        return EXIT_FAIL
    written = write_bundle(bundle, cfg.output_dir, cfg.output_format)
    if bundle.checks:
        rows, colors = _check_rows(bundle)
        print_table(rows, ("verdict", "check", "measured", "bound"), out, colors)
    for key, val in bundle.summary.items():
        if not isinstance(val, dict):
            out.write(f"{key}: {_fmt(val) if isinstance(val, float) else val}\n")
    for name, d in bundle.drift.items():
        if "max_rel_deviation" in d:
            out.write(f"drift {name}: rel {_fmt(d['max_rel_deviation'])}\n")
    if bundle.checks:
        counts = bundle.counts()
        status = "FAIL" if bundle.failed else "PASS"
        out.write(_color(status, "31" if bundle.failed else "32", out)
                  + f"  {counts['asserted-pass']} passed, {counts['asserted-fail']} failed, "
                  f"{counts['diagnostic']} diagnostics\n")
    for path in written:
        out.write(f"wrote {path}\n")
    return EXIT_FAIL if bundle.failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pdmlab", description="Position-dependent-mass oscillator lab.")
    sub = parser.add_subparsers(dest="command", required=True)
    lm = sub.add_parser("list-models", help="catalog of models with their defaults")
    lm.add_argument("--format", choices=("text", "json"), default="text")
    helps = {"simulate": "integrate a PDM system and monitor energies",
             "verify": "run the verification ledger of one model",
             "map": "integrate, map to the unit-mass frame and compare",
             "report": "verify every catalog model"}
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("model", nargs="?", help="catalog model name")
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--out", help="output directory (default: out)")
        p.add_argument("--seed", type=int, help="seed for randomized checks (unsigned 64-bit)")
        p.add_argument("--format", choices=("csv", "json", "both"), help="files to write (default: both)")
        p.add_argument("--periods", type=float, help="duration in model periods")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)")
    return parser


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    args = build_parser().parse_args(argv)
    if args.command == "list-models":
        return cmd_list_models(args, out)
    return cmd_run(args, out, err)


if __name__ == "__main__":
    sys.exit(main())
