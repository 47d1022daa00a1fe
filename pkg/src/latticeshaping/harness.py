"""Channels and Monte Carlo experiment drivers.

Every driver returns an :class:`ExperimentResult` whose CSV body depends only
on the configuration and seeds.  Timing and timestamps go to the JSON
sidecar.  Random streams are keyed by ``(seed, trial)`` and do not depend on
the SNR, so the points of one curve share messages and noise shapes (common
random numbers), as do curves run with the same seed.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.stats import binomtest

from .codes import MixedNestedCode, make_code
from .errors import ArgumentError
from .huffman import huffman_bits_to_integers, huffman_build, huffman_integers_to_bits, mixture_rate
from .lattices import NamedLattice, LatticeKind, brute_force_nearest, quantize_nearest
from .ldlc import DecoderConfig, build_ldlc, cf_prior
from .mixed import modulo_sum, reverse_blocks
from .shaping import shaping_preset

SER_COLUMNS = ("snr_db", "trials", "errors", "ser", "ci_lo", "ci_hi")
# pilot codewords used to measure the transmit power that defines SNR
PILOT_CODEWORDS = 64


# ---------------------------------------------------------------- channels


@dataclass(frozen=True, eq=False)
class ChannelObservation:
    y: np.ndarray
    r: float | np.ndarray
    sigma_z2: float
    seed: int | Sequence[int] | None


def _noise(shape, sigma_z2: float, seed) -> np.ndarray:
    if sigma_z2 < 0:
        raise ArgumentError("noise variance must be non-negative")
    if sigma_z2 == 0:
        return np.zeros(shape)
    return np.sqrt(sigma_z2) * np.random.default_rng(seed).standard_normal(shape)


def awgn(x_prime, r: float, sigma_z2: float, seed) -> ChannelObservation:
    """``y = r x' + z`` with i.i.d. Gaussian ``z``; deterministic per seed."""
    x = np.asarray(x_prime, dtype=float)
    return ChannelObservation(r * x + _noise(x.shape, sigma_z2, seed), r, sigma_z2, seed)


def mac(x_primes, r, sigma_z2: float, seed) -> ChannelObservation:
    """Multiple-access channel ``y = sum_l r_l x'_l + z``."""
    xs = np.asarray(x_primes, dtype=float)
    rv = np.atleast_1d(np.asarray(r, dtype=float))
    if xs.shape[0] != rv.size:
        raise ArgumentError(f"{xs.shape[0]} users but {rv.size} channel gains")
    y = np.tensordot(rv, xs, axes=(0, 0))
    return ChannelObservation(y + _noise(y.shape, sigma_z2, seed), rv, sigma_z2, seed)


# ---------------------------------------------------------------- results


def wilson_interval(errors: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    if trials <= 0:
        return 0.0, 1.0
    ci = binomtest(int(errors), int(trials)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.10g}"
    return str(v)


@dataclass
class ExperimentResult:
    """Rows of one experiment plus the configuration that produced them."""

    kind: str
    config: dict
    columns: tuple[str, ...]
    rows: list[dict]
    runtime_s: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        return config_hash({"kind": self.kind, **self.config})

    def column(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(_fmt(row[c]) for c in self.columns) + "\n")
        return buf.getvalue()

    def sidecar(self) -> dict:
        return {
            "kind": self.kind,
            "config": self.config,
            "config_hash": self.config_hash,
            "runtime_s": self.runtime_s,
            "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "extra": self.extra,
        }

    def write(self, path) -> tuple[Path, Path]:
        """Write ``path`` (CSV) and ``path`` with a ``.json`` suffix."""
        csv_path = Path(path)
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        csv_path.write_text(self.to_csv())
        json_path = csv_path.with_suffix(".json")
        json_path.write_text(json.dumps(self.sidecar(), indent=2, sort_keys=True, default=_json_default) + "\n")
        return csv_path, json_path


def _json_default(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return str(v)


# ---------------------------------------------------------------- threading


def resolve_threads(threads: int | None = None) -> int:
    """Explicit value, else ``LATTICE_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get("LATTICE_THREADS")
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise ArgumentError(f"LATTICE_THREADS={env!r} is not an integer") from None
        else:
            threads = 1
    if threads < 1:
        raise ArgumentError("threads must be >= 1")
    return int(threads)


def _map_ordered(fn: Callable, items: Sequence, threads: int) -> list:
    if threads == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- code presets


@dataclass(frozen=True)
class CodeParams:
    """Everything needed to rebuild a code deterministically.

    The last ``tail_rows`` coordinates (rounded up to whole shaping blocks)
    get diagonal ``tail_scale`` in the parity-check matrix: a coarser
    lattice and a smaller alphabet there, protecting the low-degree tail.
    """

    construction: str = "systematic"
    shaping: str = "E8:4"
    n: int = 1000
    degree: int = 7
    code_seed: int = 0
    tail_rows: int = 0
    tail_scale: float = 0.5
    dither: str = "none"
    dither_seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def build_code(params: CodeParams, dither_seed: int | None = None):
    theta = shaping_preset(params.shaping)
    m = theta.m
    n = params.n
    if n % m:
        raise ArgumentError(f"n={n} is not a multiple of the shaping dimension {m}")
    nb = n // m
    tail_blocks = min(-(-params.tail_rows // m), nb) if params.tail_rows > 0 else 0
    profile = np.ones(nb)
    if tail_blocks:
        profile[nb - tail_blocks:] = params.tail_scale
    block = m if params.construction == "mixed" else None
    H = build_ldlc(n, params.degree, params.code_seed, diag_profile=np.repeat(profile, m), block_size=block)
    seed = params.dither_seed if dither_seed is None else dither_seed
    return make_code(params.construction, H, theta, params.dither, seed)


# ---------------------------------------------------------------- shaping gain


def _power_stats(code, samples: int, seed: int, batch_rows: int = 0) -> tuple[float, float, int]:
    """Mean per-dimension power and its standard error over fresh codewords."""
    n = code.n
    count = max(2, -(-samples // n))
    batch_rows = batch_rows or max(1, min(count, 400_000 // n))
    rng = np.random.default_rng(seed)
    per = []
    done = 0
    while done < count:
        k = min(batch_rows, count - done)
        xp = code.encode(code.random_messages(rng, k))
        per.append(np.mean(xp * xp, axis=1))
        done += k
    p = np.concatenate(per)
    return float(p.mean()), float(p.std(ddof=1) / np.sqrt(p.size)), p.size * n


def run_shaping_gain(
    construction: str,
    shaping: str,
    M_list: Sequence[float] | None = None,
    dither: str = "none",
    n: int = 1000,
    samples: int = 1_000_000,
    seed: int = 0,
    degree: int = 7,
    code_seed: int = 0,
) -> ExperimentResult:
    """Shaping gain versus the hypercube at the same rate, one row per ``M``.

    ``shaping`` is a family (``"E8"``) combined with ``M_list``, or a full
    preset (``"E8:32"``) when ``M_list`` is omitted.
    """
    t0 = time.perf_counter()
    family, _, scale = shaping.partition(":")
    if M_list is None:
        if not scale:
            raise ArgumentError("give M values or a full shaping preset such as E8:32")
        M_list = [float(scale)]
    rows = []
    for M in M_list:
        preset = f"{family}:{_fmt(float(M))}"
        params = CodeParams(construction, preset, n, degree, code_seed, 0, 0.5, dither, seed)
        code = build_code(params)
        power, se, count = _power_stats(code, samples, seed)
        baseline = 2.0 ** (2.0 * code.rate) / 12.0
        gain = 10.0 * np.log10(baseline / power)
        rows.append({
            "M": float(M),
            "rate": code.rate,
            "samples": count,
            "power": power,
            "gain_db": gain,
            "gain_stderr_db": 10.0 / np.log(10.0) * se / power,
        })
    config = {
        "construction": construction, "shaping": family, "M_list": [float(M) for M in M_list],
        "dither": dither, "n": n, "samples": samples, "seed": seed, "degree": degree, "code_seed": code_seed,
    }
    columns = ("M", "rate", "samples", "power", "gain_db", "gain_stderr_db")
    return ExperimentResult("shaping-gain", config, columns, rows, time.perf_counter() - t0)


# ---------------------------------------------------------------- SER


def _trial_seed(seed: int, stream: int, trial: int) -> list[int]:
    return [int(seed), int(stream), int(trial)]


def pilot_power(code, seed: int, codewords: int = PILOT_CODEWORDS) -> float:
    rng = np.random.default_rng(_trial_seed(seed, 99, 0))
    xp = code.encode(code.random_messages(rng, codewords))
    return float(np.mean(xp * xp))


def _ser_rows(snr_db, outcomes_per_snr, n) -> list[dict]:
    rows = []
    for snr, outs in zip(snr_db, outcomes_per_snr):
        errors = int(sum(o[0] for o in outs))
        trials = len(outs) * n
        lo, hi = wilson_interval(errors, trials)
        rows.append({"snr_db": float(snr), "trials": trials, "errors": errors,
                     "ser": errors / trials if trials else 0.0, "ci_lo": lo, "ci_hi": hi})
    return rows


def _run_until(trial_fn, target_errors: int, max_codewords: int, min_codewords: int, threads: int, chunk: int):
    """Run ``trial_fn(index) -> (errors, failed, iterations)`` in fixed-size
    chunks until enough symbol errors accumulate.  The stopping point does not
    depend on ``threads``."""
    outs: list = []
    errors = 0
    while len(outs) < max_codewords:
        idx = list(range(len(outs), min(len(outs) + chunk, max_codewords)))
        res = _map_ordered(trial_fn, idx, threads)
        outs.extend(res)
        errors += sum(r[0] for r in res)
        if errors >= target_errors and len(outs) >= min_codewords:
            break
    return outs


def run_ser(
    params: CodeParams,
    snr_db: Sequence[float],
    target_errors: int = 100,
    max_codewords: int = 200,
    seed: int = 0,
    prior: str = "map",
    r: float = 1.0,
    min_codewords: int = 1,
    chunk: int = 4,
    threads: int | None = None,
    decoder_config: DecoderConfig | None = None,
    symbols: str = "integers",
) -> ExperimentResult:
    """Symbol error rate per SNR for a point-to-point link.

    SNR is ``10 log10(P / sigma_z2)`` with ``P = E|x'|^2 / n`` from pilot
    encodes.  ``prior`` is ``"map"`` (shaped-power Gaussian prior) or
    ``"flat"`` (channel likelihood only).  A failed decode counts through the
    symbols it gets wrong.

    ``symbols`` picks what an error is: ``"integers"`` compares the lattice
    integer coordinates ``w``, ``"messages"`` compares ``b``.  The shaping
    relabelling ``w -> b`` can turn one integer error into several message
    errors within a block.  Both counts land in ``extra``; ``symbols`` only
    chooses the table columns and the stopping rule.
    """
    if prior not in ("map", "flat"):
        raise ArgumentError(f"prior must be 'map' or 'flat', not {prior!r}")
    if symbols not in ("integers", "messages"):
        raise ArgumentError(f"symbols must be 'integers' or 'messages', not {symbols!r}")
    t0 = time.perf_counter()
    threads = resolve_threads(threads)
    code = build_code(params)
    power = pilot_power(code, seed)
    cfg = decoder_config or DecoderConfig()
    code.decoder(cfg)  # build the graph tables once, before any worker thread starts
    n = code.n
    by_messages = symbols == "messages"
    outcomes, failures, iters = [], [], []
    counts = {"integers": [], "messages": []}
    for snr in snr_db:
        sigma_z2 = power / 10.0 ** (snr / 10.0)

        def trial(i, sigma_z2=sigma_z2):
            rng = np.random.default_rng(_trial_seed(seed, 1, i))
            b = code.random_messages(rng, 1)[0]
            x, w = code.encode_with_integers(b)
            obs = awgn(x, r, sigma_z2, _trial_seed(seed, 2, i))
            out = code.decode(obs.y, r, sigma_z2, power if prior == "map" else None, cfg)
            integer_errors = int(np.count_nonzero(out.w != w))
            message_errors = int(np.count_nonzero(out.b != b))
            if by_messages:
                return message_errors, out.failed, out.iterations, integer_errors
            return integer_errors, out.failed, out.iterations, message_errors

        outs = _run_until(trial, target_errors, max_codewords, min_codewords, threads, chunk)
        outcomes.append(outs)
        failures.append(int(sum(o[1] for o in outs)))
        iters.append(float(np.mean([o[2] for o in outs])))
        primary, other = [o[0] for o in outs], [o[3] for o in outs]
        counts["integers"].append(other if by_messages else primary)
        counts["messages"].append(primary if by_messages else other)
    rows = _ser_rows(snr_db, outcomes, n)
    config = {
        "code": params.to_dict(), "snr_db": [float(s) for s in snr_db], "target_errors": target_errors,
        "max_codewords": max_codewords, "min_codewords": min_codewords, "seed": seed, "prior": prior,
        "r": r, "chunk": chunk, "decoder": asdict(cfg), "symbols": symbols,
    }
    extra = {"transmit_power": power, "rate": code.rate, "decode_failures": failures,
             "mean_iterations": iters, "threads": threads,
             "integer_errors": counts["integers"], "message_errors": counts["messages"]}
    return ExperimentResult("ser", config, SER_COLUMNS, rows, time.perf_counter() - t0, extra)


def snr_at_ser(result: ExperimentResult, target: float) -> float:
    """SNR where the curve crosses ``target``, by linear interpolation of log SER."""
    snr = result.column("snr_db")
    ser = result.column("ser")
    order = np.argsort(snr)
    snr, ser = snr[order], ser[order]
    for i in range(len(snr) - 1):
        if ser[i] >= target > ser[i + 1]:
            if ser[i + 1] == 0:
                return float(snr[i + 1])
            lo, hi = np.log10(ser[i]), np.log10(ser[i + 1])
            frac = (lo - np.log10(target)) / (lo - hi)
            return float(snr[i] + frac * (snr[i + 1] - snr[i]))
    raise ArgumentError(f"SER curve does not cross {target:g} inside the SNR range")


# ---------------------------------------------------------------- compute-and-forward


def run_cf(
    params: CodeParams,
    r: Sequence[float] = (2.1, 1.0),
    a: Sequence[int] = (21, 10),
    snr_db: Sequence[float] = (),
    target_errors: int = 100,
    max_codewords: int = 100,
    seed: int = 0,
    min_codewords: int = 1,
    chunk: int = 4,
    threads: int | None = None,
    decoder_config: DecoderConfig | None = None,
    noiseless_codewords: int = 0,
) -> ExperimentResult:
    """Two or more users share one mixed nested code; the relay decodes
    ``sum_l a_l b_l`` (mod alphabet) from the superposition.

    SNR is per user: ``10 log10(P / sigma_z2)``.  ``noiseless_codewords``
    adds a row at ``snr_db = inf`` checked through the lattice map alone.
    """
    if params.construction != "mixed":
        raise ArgumentError("compute-and-forward needs the mixed construction")
    rv = np.asarray(r, dtype=float)
    av = np.asarray(a, dtype=np.int64)
    if rv.size < 2 or rv.size != av.size:
        raise ArgumentError("need at least two users and one coefficient per user")
    t0 = time.perf_counter()
    threads = resolve_threads(threads)
    users: list[MixedNestedCode] = [build_code(params, dither_seed=params.dither_seed + l) for l in range(rv.size)]
    base = users[0]
    power = pilot_power(base, seed)
    cfg = decoder_config or DecoderConfig()
    decoder = base.decoder(cfg)
    n = base.n
    offset = sum(int(al) * u.offset for al, u in zip(av, users))

    def encode_all(i):
        rng = np.random.default_rng(_trial_seed(seed, 1, i))
        bs = np.stack([u.random_messages(rng, 1)[0] for u in users])
        xs = np.stack([u.encode(b) for u, b in zip(users, bs)])
        return bs, xs

    rows_snr, outcomes = [], []
    if noiseless_codewords:
        def clean(i):
            bs, xs = encode_all(i)
            u = np.tensordot(av, xs, axes=(0, 0)) + offset
            w = np.rint(base.H.multiply(u)).astype(np.int64)
            got = reverse_blocks(w, base.H, base.theta)
            want = modulo_sum(bs, av, base.alphabet)
            return int(np.count_nonzero(got != want)), False, 0

        rows_snr.append(float("inf"))
        outcomes.append(_map_ordered(clean, list(range(noiseless_codewords)), threads))

    iters, failures = [], []
    for snr in snr_db:
        sigma_z2 = power / 10.0 ** (snr / 10.0)

        def trial(i, sigma_z2=sigma_z2):
            bs, xs = encode_all(i)
            obs = mac(xs, rv, sigma_z2, _trial_seed(seed, 2, i))
            prior = cf_prior(obs.y, av, rv, power, sigma_z2).shifted(offset)
            res = decoder.decode(prior)
            got = reverse_blocks(res.w, base.H, base.theta)
            want = modulo_sum(bs, av, base.alphabet)
            return int(np.count_nonzero(got != want)), res.failed, res.iterations

        outs = _run_until(trial, target_errors, max_codewords, min_codewords, threads, chunk)
        rows_snr.append(float(snr))
        outcomes.append(outs)
        failures.append(int(sum(o[1] for o in outs)))
        iters.append(float(np.mean([o[2] for o in outs])))
    rows = _ser_rows(rows_snr, outcomes, n)
    config = {
        "code": params.to_dict(), "r": rv.tolist(), "a": av.tolist(), "snr_db": [float(s) for s in snr_db],
        "target_errors": target_errors, "max_codewords": max_codewords, "min_codewords": min_codewords,
        "seed": seed, "chunk": chunk, "noiseless_codewords": noiseless_codewords, "decoder": asdict(cfg),
    }
    extra = {"transmit_power": power, "rate": base.rate, "decode_failures": failures,
             "mean_iterations": iters, "threads": threads}
    return ExperimentResult("cf", config, SER_COLUMNS, rows, time.perf_counter() - t0, extra)


# ---------------------------------------------------------------- Huffman


DEFAULT_MIXTURE = ((15.0, 9500), (3.0, 350), (15.0 / 9.0, 150))


def run_huffman_rate(
    components: Sequence[tuple[float, int]] = DEFAULT_MIXTURE,
    p_min: float = 1e-6,
    roundtrip_sequences: int = 0,
    sequence_length: int = 100,
    seed: int = 0,
) -> ExperimentResult:
    """Average Huffman length per component and for the coordinate-weighted mixture.

    With ``roundtrip_sequences`` set, random bit strings are decoded to
    integers and re-encoded; mismatches are reported per row.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    rows = []
    for sigma2, count in components:
        code = huffman_build(sigma2, p_min)
        mismatches = 0
        for _ in range(roundtrip_sequences):
            ints = rng.choice(code.support, size=sequence_length, p=code.dyadic_probabilities)
            bits = huffman_integers_to_bits(ints, code)
            back = huffman_bits_to_integers(bits, code)
            if back.shape != ints.shape or np.any(back != ints):
                mismatches += 1
        rows.append({"component": f"{sigma2:.10g}", "coordinates": int(count),
                     "support": len(code.support), "average_length": code.average_length,
                     "kraft_sum": code.kraft_sum, "roundtrip_failures": mismatches})
    total = int(sum(c for _, c in components))
    rows.append({"component": "mixture", "coordinates": total, "support": 0,
                 "average_length": mixture_rate(list(components), p_min), "kraft_sum": 1.0,
                 "roundtrip_failures": int(sum(r["roundtrip_failures"] for r in rows))})
    config = {"components": [list(c) for c in components], "p_min": p_min,
              "roundtrip_sequences": roundtrip_sequences, "sequence_length": sequence_length, "seed": seed}
    columns = ("component", "coordinates", "support", "average_length", "kraft_sum", "roundtrip_failures")
    return ExperimentResult("huffman-rate", config, columns, rows, time.perf_counter() - t0)


# ---------------------------------------------------------------- quantizer self-test


def run_quantize_selftest(lattice: str = "E8", trials: int = 100_000, seed: int = 0, box: float = 4.0) -> ExperimentResult:
    """Fast quantizer against the sphere-decoder oracle on uniform points in ``[-box, box]^m``."""
    t0 = time.perf_counter()
    name = lattice.upper()
    kinds = {"E8": LatticeKind.E8, "BW16": LatticeKind.BW16}
    if name not in kinds:
        raise ArgumentError(f"unknown lattice {lattice!r}; use E8 or BW16")
    lat = NamedLattice(kinds[name], 1.0)
    x = np.random.default_rng(seed).uniform(-box, box, size=(trials, lat.dimension))
    fast = quantize_nearest(x, lat)
    oracle = brute_force_nearest(x, lat)
    d_fast = np.sum((x - fast) ** 2, axis=1)
    d_oracle = np.sum((x - oracle) ** 2, axis=1)
    delta = float(np.max(np.abs(d_fast - d_oracle))) if trials else 0.0
    mismatches = int(np.count_nonzero(np.any(fast != oracle, axis=1)))
    passed = delta <= 1e-9 and mismatches == 0
    rows = [{"lattice": name, "trials": trials, "max_distance_delta": delta,
             "point_mismatches": mismatches, "passed": passed}]
    config = {"lattice": name, "trials": trials, "seed": seed, "box": box}
    columns = ("lattice", "trials", "max_distance_delta", "point_mismatches", "passed")
    return ExperimentResult("quantize-selftest", config, columns, rows, time.perf_counter() - t0)
