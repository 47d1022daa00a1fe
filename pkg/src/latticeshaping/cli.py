"""Command-line front end: ``latticeshaping <subcommand> [flags]``.

Every subcommand accepts ``--config file.json`` with flat keys named like
the flags (``max_codewords`` or ``max-codewords``); explicit flags win over
the file.  Results go to ``--out`` (CSV) plus a JSON sidecar.

Exit status: 0 success, 1 bad arguments, 2 internal failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness
from .errors import ArgumentError, SpecificationError

EXIT_OK, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ArgumentError(message)


def _float_list(text) -> list[float]:
    """``"1,2,3"`` or ``"start:stop:step"`` (inclusive stop)."""
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    if isinstance(text, (int, float)):
        return [float(text)]
    text = str(text).strip()
    if text.count(":") == 2:
        start, stop, step = (float(p) for p in text.split(":"))
        if step <= 0 or stop < start:
            raise ValueError(f"bad range {text!r}")
        count = int(round((stop - start) / step)) + 1
        return [round(start + i * step, 10) for i in range(count)]
    return [float(p) for p in text.split(",") if p.strip()]


def _int_list(text) -> list[int]:
    vals = _float_list(text)
    if any(v != int(v) for v in vals):
        raise ValueError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def _components(text) -> list[tuple[float, int]]:
    """``"15:9500,3:350"`` -> ``[(15.0, 9500), (3.0, 350)]``."""
    if isinstance(text, (list, tuple)):
        return [(float(s), int(c)) for s, c in text]
    out = []
    for part in str(text).split(","):
        sigma2, _, count = part.partition(":")
        out.append((float(sigma2), int(count or 1)))
    return out


# (flag, type, default, help) per option group; defaults are applied after the config merge
_COMMON = [
    ("config", str, None, "JSON file with flat keys mirroring the flags"),
    ("out", str, None, "CSV output path (JSON sidecar written next to it)"),
    ("seed", int, None, "master seed (required)"),
]
_CODE = [
    ("construction", str, "systematic", "systematic or mixed"),
    ("shaping", str, "E8:16", "shaping preset: E8:M, BW16:M or hypercube:M[:m]"),
    ("n", int, 1000, "code length"),
    ("degree", int, 7, "LDLC degree"),
    ("code-seed", int, 0, "seed of the parity-check construction"),
    ("tail-rows", int, 64, "rows given the coarser tail diagonal"),
    ("tail-scale", float, 0.5, "diagonal value on the tail rows"),
    ("dither", str, "none", "none, random or best"),
    ("dither-seed", int, 0, "seed of the random dither"),
]
_RUN = [
    ("snr", _float_list, None, "SNR points in dB: a,b,c or start:stop:step"),
    ("target-errors", int, 100, "stop a point after this many symbol errors"),
    ("max-codewords", int, 200, "codeword cap per point"),
    ("min-codewords", int, 1, "codeword floor per point"),
    ("threads", int, None, "worker threads (default: LATTICE_THREADS or 1)"),
]

_SPECS = {
    "quantize-selftest": (
        "fast quantizer against the sphere-decoder oracle",
        _COMMON + [
            ("lattice", str, "E8", "E8 or BW16"),
            ("trials", int, 100_000, "random points"),
            ("box", float, 4.0, "points are uniform in [-box, box]^m"),
        ],
    ),
    "shaping-gain": (
        "shaping gain versus the hypercube at equal rate",
        _COMMON + [
            ("construction", str, "systematic", "systematic or mixed"),
            ("shaping", str, "E8:32", "preset (E8:32) or family (E8) combined with --M"),
            ("M", _float_list, None, "scales to sweep, e.g. 4,8,16,32"),
            ("dither", str, "none", "none, random or best"),
            ("n", int, 1000, "code length"),
            ("samples", int, 1_000_000, "Monte Carlo samples (coordinates) per scale"),
            ("degree", int, 7, "LDLC degree"),
            ("code-seed", int, 0, "seed of the parity-check construction"),
        ],
    ),
    "ser": (
        "point-to-point symbol error rate",
        _COMMON + _CODE + _RUN + [
            ("prior", str, "map", "map (shaped-power prior) or flat"),
            ("symbols", str, "integers", "count errors on lattice integers or on messages"),
            ("r", float, 1.0, "channel gain"),
        ],
    ),
    "cf": (
        "two-user compute-and-forward symbol error rate",
        _COMMON + [(f, t, {"construction": "mixed", "shaping": "BW16:16", "n": 1008}.get(f, d), h)
                   for f, t, d, h in _CODE] + _RUN + [
            ("gains", _float_list, [2.1, 1.0], "channel gains r_l"),
            ("coefficients", _int_list, [21, 10], "integer coefficients a_l"),
            ("noiseless-codewords", int, 0, "extra noiseless row with this many codewords"),
        ],
    ),
    "huffman-rate": (
        "average Huffman rate of Gaussian integer sources",
        _COMMON + [
            ("components", _components, list(harness.DEFAULT_MIXTURE), "sigma2:coordinates,..."),
            ("p-min", float, 1e-6, "support threshold on the Gaussian density"),
            ("roundtrip", int, 0, "random sequences for the bijectivity check"),
            ("sequence-length", int, 100, "integers per roundtrip sequence"),
        ],
    ),
}


def _dest(flag: str) -> str:
    return flag.replace("-", "_")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="latticeshaping", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    for name, (help_text, options) in _SPECS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        for flag, typ, default, text in options:
            shown = f" (default: {default})" if default is not None else ""
            p.add_argument(f"--{flag}", dest=_dest(flag), type=typ, default=argparse.SUPPRESS, help=text + shown)
    return parser


def resolve_config(command: str, given: dict) -> dict:
    """Defaults, then the config file, then explicit flags."""
    options = {_dest(f): (t, d) for f, t, d, _ in _SPECS[command][1]}
    values = {k: d for k, (_, d) in options.items()}
    cfg_path = given.get("config")
    if cfg_path:
        try:
            loaded = json.loads(Path(cfg_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ArgumentError(f"config: cannot read {cfg_path}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ArgumentError("config: top level must be a JSON object")
        for key, val in loaded.items():
            k = _dest(key)
            if k not in options or k == "config":
                raise ArgumentError(f"config: unknown field {key!r} for {command}")
            typ = options[k][0]
            try:
                values[k] = typ(val) if val is not None else None
            except (TypeError, ValueError) as exc:
                raise ArgumentError(f"config: bad value for {key!r}: {exc}") from None
    values.update({k: v for k, v in given.items() if k != "config"})
    if values.get("seed") is None:
        raise ArgumentError("seed: a seed is required (flag --seed or config key 'seed')")
    return values


def _code_params(v: dict) -> harness.CodeParams:
    return harness.CodeParams(
        construction=v["construction"], shaping=v["shaping"], n=v["n"], degree=v["degree"],
        code_seed=v["code_seed"], tail_rows=v["tail_rows"], tail_scale=v["tail_scale"],
        dither=v["dither"], dither_seed=v["dither_seed"],
    )


def _need_snr(v: dict) -> list[float]:
    if not v.get("snr"):
        raise ArgumentError("snr: give at least one SNR point")
    return v["snr"]


def run_command(command: str, v: dict) -> tuple[harness.ExperimentResult, str]:
    """Run one subcommand; returns the result and its one-line summary."""
    if command == "quantize-selftest":
        res = harness.run_quantize_selftest(v["lattice"], v["trials"], v["seed"], v["box"])
        row = res.rows[0]
        verdict = "PASS" if row["passed"] else "FAIL"
        return res, (f"{verdict} lattice={row['lattice']} trials={row['trials']} "
                     f"max-distance-delta={harness._fmt(row['max_distance_delta'])} "
                     f"point-mismatches={row['point_mismatches']}")
    if command == "shaping-gain":
        res = harness.run_shaping_gain(v["construction"], v["shaping"], v["M"], v["dither"], v["n"],
                                       v["samples"], v["seed"], v["degree"], v["code_seed"])
        parts = [f"M={harness._fmt(r['M'])}: {r['gain_db']:.3f}+-{r['gain_stderr_db']:.3f} dB" for r in res.rows]
        return res, "shaping gain " + ", ".join(parts)
    if command == "ser":
        if v["prior"] not in ("map", "flat"):
            raise ArgumentError(f"prior: expected map or flat, got {v['prior']!r}")
        res = harness.run_ser(_code_params(v), _need_snr(v), v["target_errors"], v["max_codewords"], v["seed"],
                              v["prior"], v["r"], v["min_codewords"], threads=v["threads"],
                              symbols=v["symbols"])
        return res, _ser_summary(res)
    if command == "cf":
        res = harness.run_cf(_code_params(v), v["gains"], v["coefficients"], v["snr"] or [],
                             v["target_errors"], v["max_codewords"], v["seed"], v["min_codewords"],
                             threads=v["threads"], noiseless_codewords=v["noiseless_codewords"])
        return res, _ser_summary(res)
    if command == "huffman-rate":
        res = harness.run_huffman_rate(v["components"], v["p_min"], v["roundtrip"], v["sequence_length"], v["seed"])
        mix = res.rows[-1]
        return res, f"average rate {mix['average_length']:.4f} bits/dim over {mix['coordinates']} coordinates"
    raise ArgumentError(f"unknown command {command!r}")


def _ser_summary(res: harness.ExperimentResult) -> str:
    pts = ", ".join(f"{harness._fmt(r['snr_db'])} dB: {r['ser']:.3g}" for r in res.rows)
    return f"SER {pts} (rate {res.extra['rate']:.4f})"


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        try:
            ns = parser.parse_args(argv)
        except SystemExit as exc:  # --help
            return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
        if ns.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        given = {k: val for k, val in vars(ns).items() if k != "command"}
        values = resolve_config(ns.command, given)
        res, summary = run_command(ns.command, values)
        out = values.get("out") or f"{ns.command}.csv"
        res.write(out)
        print(summary)
        return EXIT_OK
    except (ArgumentError, SpecificationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # reported as an internal failure
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
