"""Command-line front end.

Exit codes: 0 success, 2 input error, 3 residue method refused (repeated
pole), 4 Monte Carlo estimate did not converge.  ``MARKOVKEY_MAX_WORKERS``
sets the number of worker threads.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import BoundsConfig, min_memory_lifetime
from .counting import error_pmf, heralded_error, nonheralded_error
from .exceptions import (
    InsufficientSamples,
    InvalidProcess,
    MarkovKeyError,
    MultiplePoleDetected,
    NeverSecure,
    NonTerminating,
)
from .innsbruck import DEFAULT_LAMBDA_GRID, RepeaterConfig, normalized_key_rate, simplified_key_rate
from .markov import CountedMatrix, build_process, completion_pmf, load_graph
from .pgf import cdf, mean, pgf, pmf, poles_and_residues, variance

EXIT_INPUT = 2
EXIT_POLES = 3
EXIT_SAMPLES = 4
POWER_TAIL = 1e-15
POWER_LIMIT = 1_000_000


class InputError(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([v if isinstance(v, str) else _fmt(v) for v in r])
    return buf.getvalue()


def _emit(text: str, out: str | None, args: argparse.Namespace, started: float, extra=None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    data = text.encode()
    Path(out).write_bytes(data)
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out")}
    manifest = {
        "command": args.command,
        "params": params,
        "seed": params.get("seed"),
        "version": __version__,
        "wall_clock_seconds": round(time.perf_counter() - started, 6),
        "sha256": hashlib.sha256(data).hexdigest(),
    }
    if extra:
        manifest["summary"] = extra
    Path(out + ".manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _load(path: str) -> CountedMatrix:
    try:
        return build_process(load_graph(path))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except InvalidProcess as exc:
        raise InputError(str(exc)) from exc


def _power_pmf(m: CountedMatrix, t_max: int | None = None) -> np.ndarray:
    """Matrix-power pmf, up to ``t_max`` or until the remaining tail is negligible."""
    if t_max is not None:
        return completion_pmf(m, t_max)
    n = 256
    while True:
        p = completion_pmf(m, n)
        if 1.0 - p.sum() < POWER_TAIL:
            return p
        if n >= POWER_LIMIT:
            raise NonTerminating("completion probability does not converge")
        n *= 4


def _pole_set(m: CountedMatrix):
    return poles_and_residues(pgf(m))


def cmd_pmf(args) -> dict | None:
    m = _load(args.config)
    t = np.arange(args.t_max + 1)
    if args.method == "power":
        p = _power_pmf(m, args.t_max)
        c = np.cumsum(p)
    else:
        try:
            ps = _pole_set(m)
            p, c = pmf(ps, t), cdf(ps, t)
        except MultiplePoleDetected:
            if args.method == "residue":
                raise
            p = _power_pmf(m, args.t_max)
            c = np.cumsum(p)
    return _csv(["t", "p_t", "cdf"], zip(t, np.atleast_1d(p), np.atleast_1d(c))), None


def _moments_power(m: CountedMatrix) -> tuple[float, float, int]:
    p = _power_pmf(m)
    t = np.arange(len(p))
    mu = float(t @ p)
    var = max(0.0, float((t * t) @ p) - mu * mu)
    return mu, var, int(np.searchsorted(np.cumsum(p), 0.99 - 1e-15))


def cmd_moments(args):
    m = _load(args.config)
    try:
        ps = _pole_set(m)
        mu, var = mean(ps), variance(ps)
        probe = 16
        while cdf(ps, probe) < 0.99 and probe < POWER_LIMIT:
            probe *= 2
        t = np.arange(probe + 1)
        q99 = int(np.searchsorted(cdf(ps, t), 0.99 - 1e-15))
    except MultiplePoleDetected:
        mu, var, q99 = _moments_power(m)
    doc = {"mean": mu, "variance": var, "cdf_99": q99}
    return json.dumps(doc, sort_keys=True) + "\n", doc


def cmd_errors(args):
    m = _load(args.config)
    if not m.counters:
        raise InputError("the process has no counting variables")
    if args.counter is not None and args.counter not in m.counters:
        raise InputError(f"unknown counter {args.counter!r}; available: {list(m.counters)}")
    counter = args.counter or (m.counters[0] if len(m.counters) == 1 else None)
    if counter is None:
        raise InputError(f"several counters {list(m.counters)}; choose one with --counter")
    dist = error_pmf(m, args.t, counter)
    k = np.arange(len(dist.counts))
    summary = None
    if args.eps is not None:
        value = nonheralded_error(m, args.t, args.eps, counter)
        summary = {"nonheralded_error": value}
        rows = zip(k, dist.counts, heralded_error(k, args.eps))
        text = _csv(["k", "p_k_given_t", "heralded_error"], rows)
        if args.out is None:
            sys.stderr.write(f"nonheralded_error={_fmt(value)}\n")
    else:
        text = _csv(["k", "p_k_given_t"], zip(k, dist.counts))
    return text, summary


def _parse_lambda_grid(text: str | None) -> tuple[float, ...]:
    if not text:
        return DEFAULT_LAMBDA_GRID
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise InputError(f"bad lambda grid {text!r}") from exc


def _parse_q0(text: str) -> list[int]:
    try:
        if ".." in text:
            a, b = text.split("..")
            return list(range(int(a), int(b) + 1))
        return [int(x) for x in text.split(",")]
    except ValueError as exc:
        raise InputError(f"bad q0 specification {text!r}") from exc


def _innsbruck_rows(args, q0s: list[int]):
    if args.samples < 1:
        raise InputError("--samples must be positive")
    rows = []
    for q0 in q0s:
        try:
            cfg = RepeaterConfig(
                q0=q0,
                p=args.p,
                f_init=args.f_init,
                eps_w=args.eps_w,
                eps_l=args.eps_l,
                lambda_grid=_parse_lambda_grid(args.lambda_grid),
                samples=args.samples,
                seed=args.seed,
            )
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        simp = simplified_key_rate(cfg)
        if args.simplified:
            rows.append((q0, simp.lam, "nan", simp.value, simp.stderr, simp.t_truncation))
        else:
            k = normalized_key_rate(cfg)
            rows.append((q0, k.lam, k.value, simp.value, k.stderr, k.t_truncation))
    header = ["q0", "lambda", "K", "K_simplified", "stderr", "t_truncation"]
    return _csv(header, rows), None


def cmd_innsbruck(args):
    q0s = _parse_q0(args.q0) if args.sweep else [int(args.q0)]
    return _innsbruck_rows(args, q0s)


def _parse_grid(text: str) -> np.ndarray:
    try:
        a, b, n = text.split(":")
        return np.linspace(float(a), float(b), int(n))
    except ValueError as exc:
        raise InputError(f"bad grid {text!r}; expected start:stop:count") from exc


def cmd_thresholds(args):
    rows = []
    mode = "statistical" if args.statistical else "non-statistical"
    for p in _parse_grid(args.p_grid):
        try:
            cfg = BoundsConfig(
                n_sections=args.sections,
                p=float(p),
                f_init=args.f_init,
                eps_l=args.eps_l,
                L=args.L,
                c=args.c,
                statistical=args.statistical,
            )
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        try:
            tau = min_memory_lifetime(cfg)
        except NeverSecure:
            tau = math.inf
        rows.append((float(p), tau, mode))
    return _csv(["p", "tau_seconds", "mode"], rows), None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="markovkey", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pmf", help="completion-time pmf and CDF of a process graph")
    p.add_argument("--config", required=True)
    p.add_argument("--t-max", type=int, required=True)
    p.add_argument("--method", choices=("power", "residue", "auto"), default="auto")
    p.add_argument("--out")
    p.set_defaults(func=cmd_pmf)

    p = sub.add_parser("moments", help="mean, variance and 99%% quantile of the completion time")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("errors", help="distribution of counted traversals at time t")
    p.add_argument("--config", required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--eps", type=float)
    p.add_argument("--counter")
    p.add_argument("--out")
    p.set_defaults(func=cmd_errors)

    p = sub.add_parser("innsbruck", help="normalized and simplified key rates")
    p.add_argument("sweep", nargs="?", choices=("sweep",), help="sweep q0 over a range such as 2..8")
    p.add_argument("--q0", required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--eps-w", type=float, required=True)
    p.add_argument("--f-init", type=float, default=0.95)
    p.add_argument("--eps-l", type=float, default=0.0)
    p.add_argument("--lambda-grid")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--simplified", action="store_true", help="skip the full estimate")
    p.add_argument("--out")
    p.set_defaults(func=cmd_innsbruck)

    p = sub.add_parser("thresholds", help="minimum memory lifetime over a grid of p")
    p.add_argument("--sections", type=int, default=8)
    p.add_argument("--L", type=float, default=25.0)
    p.add_argument("--c", type=float, default=2.0e5)
    p.add_argument("--f-init", type=float, required=True)
    p.add_argument("--eps-l", type=float, default=0.0)
    p.add_argument("--p-grid", required=True)
    p.add_argument("--no-statistical", dest="statistical", action="store_false")
    p.add_argument("--out")
    p.set_defaults(func=cmd_thresholds)
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else 0
    started = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", InsufficientSamples)
        try:
            text, extra = args.func(args)
        except InputError as exc:
            sys.stderr.write(f"error: {exc}\n")
            return EXIT_INPUT
        except MultiplePoleDetected as exc:
            sys.stderr.write(f"error: {exc}; rerun with --method power or auto\n")
            return EXIT_POLES
        except (MarkovKeyError, ValueError) as exc:
            sys.stderr.write(f"error: {exc}\n")
            return EXIT_INPUT
    _emit(text, args.out, args, started, extra)
    for w in caught:
        if not issubclass(w.category, InsufficientSamples):
            warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    if any(issubclass(w.category, InsufficientSamples) for w in caught):
        sys.stderr.write("warning: Monte Carlo standard error above 5% of the estimate\n")
        return EXIT_SAMPLES
    return 0


if __name__ == "__main__":
    sys.exit(main())
