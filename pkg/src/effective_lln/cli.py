"""Command-line entry point: ``effective-lln <command> ...``.

Every numeric command emits rows (CSV with a header, or a JSON list with
the same records).  Each row names its schema and carries the parameters
that produced it.  Exit status: 0 on success, 1 on a domain error, 2 on a
usage error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io as _io
import json
import sys
from fractions import Fraction

from . import bounds as B
from .core import (FiniteProbabilitySpace, RealRandomVariable, SequencePrefix, family_measure, shannon_entropy,
                   to_fraction, word_measure)
from .devtests import DEFAULT_CAP, CheckpointSpec, checkpoint_joint_probability, rv_checkpoint_joint_probability
from .lln import DICHOTOMY_COLUMNS, aep_scan, dichotomy_experiment, lln_witness_scan, rv_witness_scan
from .seqio import read_sequence, sample_sequence, write_sequence
from .slln import (SLLN_COLUMNS, BoundedDiscreteRV, as_convergence_scan, effectivization_certificate,
                   sample_iid, slln_checkpoint_experiment)
from .speedlimit import (adversarial_generate, checkpoint_scan, montecarlo_pass_rate, rv_checkpoint_scan,
                         rv_montecarlo_pass_rate)


class UsageError(Exception):
    pass


def _cell(v):
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return v.numerator
        if max(v.numerator.bit_length(), v.denominator.bit_length()) > 128:
            return float(v)
        return str(v)
    if isinstance(v, (list, tuple, dict)):
        return json.dumps(v, default=str)
    return v


def _json_value(v):
    if isinstance(v, Fraction):
        return _cell(v)
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    return v


def emit(rows: list[dict], fmt: str, out, columns=None):
    if fmt == "json":
        out.write(json.dumps([_json_value(r) for r in rows], indent=1) + "\n")
        return
    fields = list(columns or [])
    for r in rows:
        fields += [k for k in r if k not in fields]
    w = csv.DictWriter(out, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _cell(v) for k, v in r.items()})


def _rationals(text: str) -> list[Fraction]:
    return [to_fraction(x.strip()) for x in text.split(",") if x.strip()]


def _pair(text: str) -> tuple[int, int]:
    lo, hi = (int(x) for x in text.split(","))
    return lo, hi


def _space(args) -> FiniteProbabilitySpace:
    P = FiniteProbabilitySpace.load(args.space)
    return FiniteProbabilitySpace(P.names, P.probs, precision_bits=args.precision_bits)


def _prefix(args, P) -> SequencePrefix:
    return read_sequence(args.prefix, P, args.mode)


def _rv(args, P) -> RealRandomVariable:
    values = _rationals(args.values)
    if len(values) != len(P):
        raise ValueError(f"--values needs {len(P)} entries, got {len(values)}")
    return RealRandomVariable.of(values)


def _entropy_value(H):
    return {"entropy": H.lo} if H.is_point else {"entropy": float(H.mid), "lo": float(H.lo), "hi": float(H.hi)}


# --------------------------------------------------------------------------
# commands


def cmd_entropy(args):
    P = _space(args)
    H = shannon_entropy(P, args.precision_bits)
    return [{"schema": "entropy/1", "space": args.space, "exact": H.is_point, **_entropy_value(H)}]


def cmd_measure(args):
    P = _space(args)
    words = [tuple(w.split(",")) if w else () for w in args.word]
    value = word_measure(P, words[0]) if len(words) == 1 else family_measure(P, words)
    return [{"schema": "measure/1", "space": args.space, "words": ";".join(args.word), "measure": value,
             "float": float(value)}]


def cmd_bounds(args):
    if args.chernoff:
        cert = B.chernoff_tail(args.q, args.eps, args.n)
    elif args.hoeffding:
        cert = B.hoeffding_tail(args.a, args.b, args.eps, args.n)
    elif args.double_tail:
        cert = B.double_tail_bound(args.g, args.eps, args.c)
    elif args.find_g:
        g = B.find_g(args.m, args.eps, args.c)
        cert = B.double_tail_bound(g, args.eps, args.c)
        cert = B.BoundCertificate(cert.quantity, cert.value, cert.derivation, {**cert.params, "m": args.m})
    elif args.clt_r:
        r = B.clt_r(args.p)
        band = B.normal_band_enclosure(3 / (to_fraction(args.p) * (1 - to_fraction(args.p))))
        cert = B.BoundCertificate("r with P(|Z| <= sqrt(3/(pq))) < r < 1", float(r),
                                  (B._step("normal-band", lo=band.lo, hi=band.hi),), {"p": args.p, "r": r})
    else:
        raise UsageError("bounds needs one of --chernoff, --hoeffding, --double-tail, --find-g, --clt-r")
    d = cert.to_dict()
    return [{"schema": "bound/1", **d}]


def _scan_rows(report, extra):
    return [{"schema": "witness/1", **extra, **row} for row in report.to_rows()]


def cmd_lln_scan(args):
    P = _space(args)
    s = _prefix(args, P)
    report = lln_witness_scan(s, P, args.eps, args.nmax, args.nmin)
    return _scan_rows(report, {"prefix": args.prefix, "eps": args.eps})


def cmd_rv_scan(args):
    P = _space(args)
    s = _prefix(args, P)
    report = rv_witness_scan(s, P, _rv(args, P), args.eps, args.nmax, args.nmin, args.precision_bits)
    return _scan_rows(report, {"prefix": args.prefix, "values": args.values, "eps": args.eps})


def cmd_aep(args):
    P = _space(args)
    s = _prefix(args, P)
    result = aep_scan(s, P, args.eps, args.nmax, args.nmin, args.precision_bits)
    zero = result.first_zero_position
    return _scan_rows(result.report, {"prefix": args.prefix, "eps": args.eps,
                                      "positivity": zero is None, "first_zero_position": zero or ""})


def cmd_dichotomy(args):
    P = _space(args)
    rows = dichotomy_experiment(P, args.symbol, _rationals(args.t), args.trials, args.length, args.seed,
                                _pair(args.window), _pair(args.checkpoint_window), args.workers)
    return rows, DICHOTOMY_COLUMNS


def cmd_speedlimit_scan(args):
    P = _space(args)
    s = _prefix(args, P)
    if args.values:
        report = rv_checkpoint_scan(s, P, _rv(args, P), args.n1, args.n)
    elif args.symbol is None:
        raise UsageError("speedlimit scan needs --symbol or --values")
    else:
        report = checkpoint_scan(s, P, args.symbol, args.n1, args.n)
    base = {"schema": "checkpoint/1", "prefix": args.prefix, "symbol": args.symbol, "values": args.values or ""}
    rows = [{**base, **r.to_dict()} for r in report.records]
    rows += [{**base, "k": k, "length": 4**k, "pass": "undetermined"} for k in report.undetermined]
    return rows


def cmd_speedlimit_generate(args):
    P = _space(args)
    s = adversarial_generate(P, args.symbol, args.depth, args.seed)
    return _write_or_print(s, args)


def cmd_speedlimit_mc(args):
    P = _space(args)
    if args.values is None and args.symbol is None:
        raise UsageError("speedlimit mc needs --symbol or --values")
    if args.values:
        X = _rv(args, P)
        est = rv_montecarlo_pass_rate(P, X, args.n1, args.n, args.trials, args.seed, args.workers)
        dp = rv_checkpoint_joint_probability(P, X, args.n1, args.n) if 4**args.n <= DEFAULT_CAP else None
    else:
        est = montecarlo_pass_rate(P, args.symbol, args.n1, args.n, args.trials, args.seed, args.workers)
        p = P.prob(args.symbol)
        dp = (checkpoint_joint_probability(CheckpointSpec(P.index(args.symbol), p, args.n1, args.n))
              if 4**args.n <= DEFAULT_CAP else None)
    row = {"schema": "speedlimit-mc/1", **est.to_row(), "trials": args.trials,
           "dp": dp.value if dp else "", "dp_error": dp.error if dp else ""}
    return [row]


def cmd_slln_cert(args):
    rv = BoundedDiscreteRV.load(args.rv)
    m, cert = effectivization_certificate(rv, args.eps, args.delta)
    return [{"schema": "slln-cert/1", "rv": args.rv, "m": m, **cert.to_dict()}]


def cmd_slln_scan(args):
    rv = BoundedDiscreteRV.load(args.rv)
    run = sample_iid(rv, args.samples, args.seed)
    report = as_convergence_scan(run, rv.mean, args.eps, args.nmax, args.nmin)
    return _scan_rows(report, {"rv": args.rv, "samples": args.samples, "seed": args.seed, "mu": rv.mean})


def cmd_slln_checkpoint(args):
    rv = BoundedDiscreteRV.load(args.rv)
    rows = slln_checkpoint_experiment(rv, args.n1, args.n, args.trials, args.seed, args.workers)
    return [{**r, "rv": args.rv} for r in rows], SLLN_COLUMNS


def _write_or_print(s: SequencePrefix, args):
    if args.out:
        write_sequence(args.out, s, args.mode)
    elif args.mode == "bytes":
        sys.stdout.buffer.write(s.array.astype("uint8").tobytes())
    else:
        sys.stdout.write("".join(s.names[i] + "\n" for i in s.array.tolist()))
    return None


def cmd_gen(args):
    P = _space(args)
    return _write_or_print(sample_sequence(P, args.length, args.seed, args.trial), args)


def cmd_io(args):
    P = _space(args)
    s = _prefix(args, P)
    if args.write:
        write_sequence(args.write, s, args.write_mode)
    digest = hashlib.sha256(s.array.astype("uint16").tobytes()).hexdigest()
    return [{"schema": "io/1", "prefix": args.prefix, "mode": args.mode, "length": len(s),
             **{f"count_{name}": c for name, c in zip(P.names, s.counts)}, "sha256": digest}]


# --------------------------------------------------------------------------
# parser


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--seed", type=int, default=0, help="experiment seed (default 0)")
    g.add_argument("--format", choices=("csv", "json"), default=None, help="output format (default csv; json for bounds)")
    g.add_argument("--precision-bits", type=int, default=64, help="interval arithmetic precision (default 64)")
    g.add_argument("--out", default=None, help="write output here instead of stdout")
    g.add_argument("--workers", type=int, default=1, help="worker processes; results do not depend on it")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="effective-lln", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def leaf(subparsers, name, fn, help_text, default_format="csv"):
        p = subparsers.add_parser(name, parents=[common], help=help_text, description=help_text)
        p.set_defaults(fn=fn, default_format=default_format)
        return p

    def space_arg(p):
        p.add_argument("--space", required=True, help="alphabet manifest JSON {symbols, probs}")

    def prefix_args(p):
        p.add_argument("--prefix", required=True, help="sequence file")
        p.add_argument("--mode", choices=("tokens", "bytes"), default="tokens", help="sequence file format")

    p = leaf(sub, "entropy", cmd_entropy, "Shannon entropy H(P) in bits")
    space_arg(p)

    p = leaf(sub, "measure", cmd_measure, "cylinder measure of a word, or of a family of words")
    space_arg(p)
    p.add_argument("--word", action="append", required=True, help="comma-separated symbol names; repeat for a family")

    p = leaf(sub, "bounds", cmd_bounds, "concentration and double-tail certificates", "json")
    kind = p.add_mutually_exclusive_group(required=True)
    for flag in ("--chernoff", "--hoeffding", "--double-tail", "--find-g", "--clt-r"):
        kind.add_argument(flag, action="store_true")
    for name in ("q", "eps", "a", "b", "p"):
        p.add_argument(f"--{name}", type=to_fraction)
    p.add_argument("--c", type=to_fraction, default=Fraction(1))
    for name in ("n", "g", "m"):
        p.add_argument(f"--{name}", type=int)

    for name, fn, text in (("lln-scan", cmd_lln_scan, "witness scan of symbol frequencies"),
                           ("rv-scan", cmd_rv_scan, "witness scan of empirical means of X"),
                           ("aep", cmd_aep, "positivity and empirical-entropy witness scan")):
        p = leaf(sub, name, fn, text)
        space_arg(p)
        prefix_args(p)
        p.add_argument("--eps", type=to_fraction, required=True, help="schedule exponent: k >= n^(2+eps)")
        p.add_argument("--nmax", type=int, required=True)
        p.add_argument("--nmin", type=int, default=1)
        if name == "rv-scan":
            p.add_argument("--values", required=True, help="comma-separated X(a) in alphabet order")

    p = leaf(sub, "dichotomy", cmd_dichotomy, "pass rates of the rate condition across exponents t")
    space_arg(p)
    p.add_argument("--symbol", required=True)
    p.add_argument("--t", required=True, help="comma-separated rational exponents")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--window", default="4,10", help="n window lo,hi (default 4,10)")
    p.add_argument("--checkpoint-window", default="1,5", help="checkpoint window lo,hi (default 1,5)")

    sl = sub.add_parser("speedlimit", help="checkpoint scans, adversarial sequences, Monte Carlo")
    sls = sl.add_subparsers(dest="action", required=True, metavar="ACTION")
    p = leaf(sls, "scan", cmd_speedlimit_scan, "checkpoint scan of a prefix")
    space_arg(p)
    prefix_args(p)
    p.add_argument("--symbol", default=None)
    p.add_argument("--values", default=None, help="scan partial sums of X instead (band 2^(k+1), strict)")
    p.add_argument("--n1", type=int, default=1)
    p.add_argument("--n", type=int, default=None)
    p = leaf(sls, "generate", cmd_speedlimit_generate, "adversarial prefix passing every checkpoint")
    space_arg(p)
    p.add_argument("--symbol", required=True)
    p.add_argument("--depth", type=int, required=True, help="last checkpoint; the prefix has length 4^depth")
    p.add_argument("--mode", choices=("tokens", "bytes"), default="tokens")
    p = leaf(sls, "mc", cmd_speedlimit_mc, "Monte Carlo checkpoint pass rate")
    space_arg(p)
    p.add_argument("--symbol", default=None)
    p.add_argument("--values", default=None, help="use partial sums of X (band 2^(k+1), strict)")
    p.add_argument("--n1", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trials", type=int, required=True)

    sn = sub.add_parser("slln", help="bounded i.i.d. sums")
    sns = sn.add_subparsers(dest="action", required=True, metavar="ACTION")
    p = leaf(sns, "cert", cmd_slln_cert, "Hoeffding effectivization certificate", "json")
    p.add_argument("--rv", required=True, help="JSON {support, probs, envelope}")
    p.add_argument("--eps", type=to_fraction, required=True)
    p.add_argument("--delta", type=to_fraction, required=True)
    p = leaf(sns, "scan", cmd_slln_scan, "almost-sure convergence witness scan of one sampled run")
    p.add_argument("--rv", required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--eps", type=to_fraction, required=True)
    p.add_argument("--nmax", type=int, required=True)
    p.add_argument("--nmin", type=int, default=1)
    p = leaf(sns, "checkpoint", cmd_slln_checkpoint, "checkpoint pass rates against r^(n-n1)")
    p.add_argument("--rv", required=True)
    p.add_argument("--n1", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trials", type=int, required=True)

    p = leaf(sub, "gen", cmd_gen, "sample a sequence prefix")
    space_arg(p)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--mode", choices=("tokens", "bytes"), default="tokens")

    p = leaf(sub, "io", cmd_io, "read a sequence file, summarize it, optionally rewrite it")
    space_arg(p)
    prefix_args(p)
    p.add_argument("--write", default=None, help="rewrite the sequence to this path")
    p.add_argument("--write-mode", choices=("tokens", "bytes"), default="tokens")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    fmt = args.format or args.default_format
    try:
        result = args.fn(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if result is None:
        return 0
    rows, columns = result if isinstance(result, tuple) else (result, None)
    buf = _io.StringIO()
    emit(rows, fmt, buf, columns)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return 0


if __name__ == "__main__":
    sys.exit(main())
