"""Command-line front end.

Every subcommand prints a JSON summary on stdout. With ``--out DIR`` (or the
PSOCID_OUTPUT_DIR environment variable) it also writes its tables as CSV or
JSON lines plus a manifest listing each file with its SHA-256.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from . import asymptotics as asym
from . import experiments as exp
from . import info
from .errors import DomainError, PsocidError
from .model import Certificate, Instance, honest_certificate, run_search, verify_certificate
from .reporting import FORMATS, RunManifest, as_row, emit_report
from .rng import generator
from .strategies import Schedule, ScheduleKind, hit_position_distribution, load_script

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("psocid")

ENV_OUTPUT_DIR = "PSOCID_OUTPUT_DIR"
ENV_LOG_LEVEL = "PSOCID_LOG_LEVEL"

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2

# ExperimentConfig field -> CLI flag that sets it
CONFIG_FLAGS = {
    "n": "--n",
    "N_sweep": "--N-min",
    "p": "--p",
    "poly": "--p-degree",
    "epsilon": "--epsilon",
    "trials": "--trials",
    "master_seed": "--seed",
    "schedule_kind": "--schedule",
    "output_sink": "--out",
    "output_format": "--format",
}

SCHEDULES = [k.value for k in ScheduleKind]


class Output:
    def __init__(self, summary, tables=None):
        self.summary = summary
        self.tables = tables or {}  # name -> (rows, columns)


def _power_of_two(text: str) -> int:
    n = int(text)
    if n < 2 or n & (n - 1):
        raise argparse.ArgumentTypeError(f"{n} is not a power of two >= 2")
    return n


def _fraction(text: str) -> float:
    if "/" in text:
        a, b = text.split("/")
        return float(a) / float(b)
    return float(text)


def _schedule(args, n: int) -> Schedule:
    kind = ScheduleKind.parse(args.schedule)
    script = load_script(args.script) if getattr(args, "script", None) else None
    return Schedule(kind, n, args.seed, script)


def _config(args) -> exp.ExperimentConfig:
    N_sweep = None
    if getattr(args, "N_min", None) is not None:
        N_sweep = tuple(range(args.N_min, args.N_max + 1))
    poly = None
    if getattr(args, "p_degree", None) is not None:
        poly = exp.PolySpec(args.p_degree, args.p_coeff)
    n = getattr(args, "n", None)
    if isinstance(n, list):
        n = n[0] if len(n) == 1 else None
    return exp.ExperimentConfig(
        n=n,
        N_sweep=N_sweep,
        p=getattr(args, "p", None),
        poly=poly,
        epsilon=getattr(args, "epsilon", 0.0) or 0.0,
        trials=getattr(args, "trials", 1) or 1,
        master_seed=getattr(args, "seed", 0) or 0,
        schedule_kind=getattr(args, "schedule", "lex") or "lex",
        output_sink=str(args.out) if args.out else None,
        output_format=args.format,
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> Output:
    n = args.n if args.n else 1 << args.N
    bits = n.bit_length() - 1
    rng = generator(args.seed)
    w = args.wstar if args.wstar is not None else int(rng.integers(0, n))
    instance = Instance(bits, w, key=rng.bytes(32))
    sched = _schedule(args, n)
    max_rounds = args.max_rounds or (-(-n // args.p) * (1 if sched.kind.without_replacement else 16))
    res = run_search(instance, sched, args.p, max_rounds)
    verdict = verify_certificate(instance, honest_certificate(instance, res)).value if res.found else None
    summary = {
        "n": n, "w_star": w, "schedule": sched.kind.value, "p": args.p,
        "found": res.found, "t_search": res.t_search, "winning_searcher": res.winning_searcher,
        "q": res.q, "q_rounds": res.q_rounds, "transcript": res.transcript.outcomes,
        "candidates": res.transcript.candidates, "verdict": verdict,
    }
    rows = [r.to_dict() for r in res.transcript]
    return Output(summary, {"transcript": (rows, ["t", "j", "candidate", "y"])})


def cmd_mi(args) -> Output:
    n = args.n
    qs = [args.q] if args.q is not None else range(n + 1)
    brute = None
    if args.brute_force:
        brute = info.brute_force_mi_curve(n, _schedule(args, n), max(qs))
    rows = []
    for q in qs:
        row = {"n": n, "q": q, "chain_bound_bits": info.chain_rule_bound(n, q),
               "exact_mi_bits": info.exact_transcript_mi(n, q)}
        if brute is not None:
            row["brute_force_bits"] = float(brute[q])
        rows.append(row)
    cols = list(rows[0])
    return Output(rows[0] if len(rows) == 1 else {"n": n, "rows": len(rows)}, {"mi": (rows, cols)})


def cmd_bounds(args) -> Output:
    n, eps = args.n, args.epsilon
    if args.q is not None:
        q = args.q
        reached = True
    else:
        q = info.min_probes_for_recovery(n, eps, args.mode)
        reached = q.reached
    report = info.bound_report(n, int(q), eps)
    summary = dict(report.to_dict(), mode=args.mode, fraction=int(q) / n, reached=reached)
    return Output(summary, {"bounds": ([report], list(info.BoundReport.FIELDS))})


def cmd_threshold(args) -> Output:
    rows = []
    for n in args.n:
        sol = asym.solve_threshold(n, args.epsilon)
        row = dict(as_row(sol), limit_fraction=asym.limit_fraction(args.epsilon))
        if args.compare:
            q = info.min_probes_for_recovery(n, args.epsilon, info.RecoveryMode.CHAIN_BOUND)
            row["summation_fraction"] = int(q) / n
        rows.append(row)
    return Output(rows[0] if len(rows) == 1 else rows, {"threshold": (rows, list(rows[0]))})


def cmd_constants(args) -> Output:
    cutoffs = [args.M >> k for k in range(args.levels - 1, -1, -1)]
    table = asym.convergence_table(args.which, cutoffs)
    rows = [{"M": c.M, "estimate": c.estimate, "corrected": c.corrected, "delta": c.delta_last_doubling}
            for c in table]
    summary = dict(as_row(table[-1]))
    if args.which == "gamma-prime":
        summary["reference"] = asym.GAMMA_PRIME_REFERENCE
    return Output(summary, {"constants": (rows, ["M", "estimate", "corrected", "delta"])})


def cmd_poly_limit(args) -> Output:
    closed = dict(asym.poly_regime_limit(range(args.N_min, args.N_max + 1), args.exponent))
    rows = []
    for N in range(args.N_min, args.N_max + 1):
        rows.append({
            "N": N,
            "q": N ** args.exponent,
            "info_bits": info.poly_probe_info(N, args.exponent, 1),
            "closed_form_bits": closed[N],
            "fano_floor_bits": info.fano_required_info(1 << N, args.epsilon, exact=False),
        })
    summary = {"rows": len(rows), "epsilon": args.epsilon,
               "max_info_bits": max(r["info_bits"] for r in rows),
               "min_fano_floor_bits": min(r["fano_floor_bits"] for r in rows)}
    return Output(summary, {"poly_limit": (rows, list(rows[0]))})


def cmd_tradeoff(args) -> Output:
    p_of_N = exp.PolySpec(args.p_degree, args.p_coeff)
    rows = exp.tradeoff_table(range(args.N_min, args.N_max + 1), p_of_N, args.c_s, args.trials,
                              args.seed, args.method)
    cols = [f for f in exp.TradeoffRow.__dataclass_fields__]
    summary = {"rows": len(rows), "min_TS_over_2N": min(r.TS_over_2N for r in rows)}
    return Output(summary, {"tradeoff": (rows, cols)})


def cmd_audit(args) -> Output:
    kinds = list(exp.DecoderKind) if args.decoder == "all" else [exp.DecoderKind(args.decoder)]
    sched = _schedule(args, args.n)
    if args.q is None:
        reports = exp.decoder_audit_sweep(args.n, kinds, sched)
    else:
        reports = [exp.decoder_audit(args.n, args.q, k, sched) for k in kinds]
    rows = [r.to_dict() for r in reports]
    bad = sum(1 for r in reports if not r.ok)
    summary = rows[0] if len(rows) == 1 else {"audits": len(rows), "violations": bad}
    return Output(summary, {"audit": (rows, list(rows[0]))})


def cmd_verify_cert(args) -> Output:
    rng = generator(args.seed)
    instance = Instance(args.N, args.wstar, key=rng.bytes(32))
    try:
        token = bytes.fromhex(args.token) if args.token is not None else instance.mark_token()
    except ValueError as e:
        raise DomainError(f"token is not hex: {e}") from None
    claimed = args.claimed if args.claimed is not None else args.wstar
    verdict = verify_certificate(instance, Certificate(claimed, token))
    row = {"N": args.N, "claimed_index": claimed, "accepted": verdict.accepted, "verdict": verdict.value}
    return Output(row, {"verify": ([row], list(row))})


def cmd_hit_time(args) -> Output:
    est = exp.expected_hit_time(args.n, args.trials, args.seed, args.schedule, args.exhaustive, args.workers)
    row = dict(as_row(est), z=est.z)
    return Output(row, {"hit_time": ([row], list(row))})


def cmd_success_curve(args) -> Output:
    pts = exp.success_curve(args.n, args.q, args.trials, args.seed, args.schedule, args.workers)
    rows = [as_row(p) for p in pts]
    return Output(rows, {"success_curve": (rows, ["q", "empirical", "analytic", "sigma"])})


def cmd_rounds(args) -> Output:
    r = exp.two_stage_rounds(args.N, args.p, args.trials, args.seed, args.analytic, exhaustive=args.exhaustive)
    row = as_row(r)
    return Output(row, {"rounds": ([row], list(row))})


def cmd_hitdist(args) -> Output:
    h = hit_position_distribution(args.schedule, args.n, args.trials, args.seed, args.exhaustive)
    rows = [{"position": k + 1, "count": int(c)} for k, c in enumerate(h.counts)]
    summary = {"n": args.n, "trials": h.trials, "chi2": h.chi2, "p_value": h.p_value}
    return Output(summary, {"hitdist": (rows, ["position", "count"])})


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _common() -> argparse.ArgumentParser:
    c = argparse.ArgumentParser(add_help=False)
    g = c.add_argument_group("output")
    g.add_argument("--out", type=Path, default=os.environ.get(ENV_OUTPUT_DIR) or None,
                   help=f"directory for tables and manifest (env {ENV_OUTPUT_DIR})")
    g.add_argument("--format", choices=FORMATS, default="csv", help="table format (default csv)")
    g.add_argument("--config", type=Path, help="TOML file of flag values; explicit flags win")
    g.add_argument("--log-level", default=os.environ.get(ENV_LOG_LEVEL, "WARNING"),
                   help=f"logging level (env {ENV_LOG_LEVEL})")
    g.add_argument("--quiet", action="store_true", help="suppress the JSON summary on stdout")
    return c


def _seed(p):
    p.add_argument("--seed", type=int, default=0, help="master seed for every random draw (default 0)")


def _sched(p, default="lex"):
    p.add_argument("--schedule", choices=SCHEDULES, default=default,
                   help=f"probing schedule kind (default {default})")


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(prog="psocid", description="Equality-probe search laboratory.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    subs = {}

    def add(name, func, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        p.set_defaults(func=func)
        subs[name] = p
        return p

    p = add("simulate", cmd_simulate, "run one search and print its transcript")
    size = p.add_mutually_exclusive_group(required=True)
    size.add_argument("--n", type=_power_of_two, help="library size (power of two)")
    size.add_argument("--N", type=int, help="bit length; n = 2**N")
    p.add_argument("--wstar", type=int, help="hidden index (default: drawn from --seed)")
    p.add_argument("--p", type=int, default=1, help="parallel searchers per round (default 1)")
    p.add_argument("--max-rounds", type=int, help="round budget (default: enough to sweep the library)")
    p.add_argument("--script", type=Path, help="JSON array of candidates for --schedule scripted")
    _sched(p)
    _seed(p)

    p = add("mi", cmd_mi, "chain-rule bound, exact and brute-force transcript information")
    p.add_argument("--n", type=_power_of_two, required=True, help="library size (power of two)")
    p.add_argument("--q", type=int, help="probe count (default: every q in 0..n)")
    p.add_argument("--brute-force", action="store_true", help="add the enumeration oracle column")
    p.add_argument("--script", type=Path, help="JSON array of candidates for --schedule scripted")
    _sched(p)
    _seed(p)

    p = add("bounds", cmd_bounds, "bound report at the minimal recovering probe count")
    p.add_argument("--n", type=int, required=True, help="library size")
    p.add_argument("--epsilon", type=_fraction, default=0.0, help="target error probability, < 1/3")
    p.add_argument("--mode", choices=[m.value for m in info.RecoveryMode], default="chain-bound",
                   help="information measure compared against the Fano requirement")
    p.add_argument("--q", type=int, help="report at this q instead of the minimal one")

    p = add("threshold", cmd_threshold, "solve the threshold quadratic for q/n")
    p.add_argument("--n", type=int, nargs="+", required=True, help="library size(s)")
    p.add_argument("--epsilon", type=_fraction, default=0.0, help="target error probability, < 1/3")
    p.add_argument("--compare", action="store_true", help="add the summation-based fraction")

    p = add("constants", cmd_constants, "convergence table for the summation constants")
    p.add_argument("--which", choices=sorted(asym.ESTIMATORS), required=True, help="constant to estimate")
    p.add_argument("--M", type=int, default=10 ** 7, help="largest summation cutoff (default 1e7)")
    p.add_argument("--levels", type=int, default=4, help="number of halvings tabulated (default 4)")

    p = add("poly-limit", cmd_poly_limit, "information of N**k probes against the Fano floor")
    p.add_argument("--N-min", type=int, default=20, help="smallest bit length (default 20)")
    p.add_argument("--N-max", type=int, default=60, help="largest bit length (default 60)")
    p.add_argument("--exponent", type=int, default=3, help="probe budget exponent k (default 3)")
    p.add_argument("--epsilon", type=_fraction, default=1 / 3, help="error level of the floor (default 1/3)")

    p = add("tradeoff", cmd_tradeoff, "time-space product table")
    p.add_argument("--N-min", type=int, default=16, help="smallest bit length (default 16)")
    p.add_argument("--N-max", type=int, default=40, help="largest bit length (default 40)")
    p.add_argument("--p-degree", type=int, default=2, help="p(N) = ceil(coeff * N**degree) (default 2)")
    p.add_argument("--p-coeff", type=float, default=1.0, help="coefficient of p(N) (default 1)")
    p.add_argument("--c-s", type=int, default=1, help="workspace bits per searcher (default 1)")
    p.add_argument("--trials", type=int, default=2000, help="trials per simulated row (default 2000)")
    p.add_argument("--method", choices=["auto", "simulated", "analytic", "exhaustive"], default="auto",
                   help="auto simulates N <= 24 and uses the exact expectation above")
    _seed(p)

    p = add("audit", cmd_audit, "exact Fano and data-processing audit of decoders")
    p.add_argument("--n", type=_power_of_two, required=True, help="library size (power of two, <= 1024)")
    p.add_argument("--q", type=int, help="probe count (default: every q)")
    p.add_argument("--decoder", choices=[k.value for k in exp.DecoderKind] + ["all"], default="all",
                   help="decoder to audit (default all)")
    p.add_argument("--script", type=Path, help="JSON array of candidates for --schedule scripted")
    _sched(p)
    _seed(p)

    p = add("verify-cert", cmd_verify_cert, "check a certificate against an instance")
    p.add_argument("--N", type=int, required=True, help="bit length")
    p.add_argument("--wstar", type=int, required=True, help="hidden index of the instance")
    p.add_argument("--claimed", type=int, help="claimed index (default: the true one)")
    p.add_argument("--token", help="mark token as hex (default: the canonical token)")
    _seed(p)

    p = add("hit-time", cmd_hit_time, "expected hit position against (n+1)/2")
    p.add_argument("--n", type=int, required=True, help="library size")
    p.add_argument("--trials", type=int, default=100000, help="Monte Carlo trials (default 1e5)")
    p.add_argument("--exhaustive", action="store_true", help="enumerate every hidden index once")
    p.add_argument("--workers", type=int, default=1, help="worker processes; results do not depend on it")
    _sched(p)
    _seed(p)

    p = add("success-curve", cmd_success_curve, "empirical P(hit within q probes) against q/n")
    p.add_argument("--n", type=int, required=True, help="library size")
    p.add_argument("--q", type=int, nargs="+", required=True, help="probe counts to evaluate")
    p.add_argument("--trials", type=int, default=100000, help="Monte Carlo trials (default 1e5)")
    p.add_argument("--workers", type=int, default=1, help="worker processes; results do not depend on it")
    _sched(p, "random")
    _seed(p)

    p = add("rounds", cmd_rounds, "search, verification and total rounds")
    p.add_argument("--N", type=int, required=True, help="bit length")
    p.add_argument("--p", type=int, required=True, help="parallel searchers per round")
    p.add_argument("--trials", type=int, default=10000, help="Monte Carlo trials (default 1e4)")
    p.add_argument("--analytic", action="store_true", help="use the exact expectation instead of sampling")
    p.add_argument("--exhaustive", action="store_true", help="enumerate every hidden index (N <= 16)")
    _seed(p)

    p = add("hitdist", cmd_hitdist, "histogram of hit positions with a chi-square test")
    p.add_argument("--n", type=int, required=True, help="library size")
    p.add_argument("--trials", type=int, default=100000, help="Monte Carlo trials (default 1e5)")
    p.add_argument("--exhaustive", action="store_true", help="enumerate every hidden index once")
    _sched(p)
    _seed(p)

    return parser, subs


def load_config(path: Path) -> dict:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return {k.replace("-", "_"): v for k, v in raw.items()}


def _parse(argv: Optional[Sequence[str]]):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if a in subs), None)
    if known.config and command:
        _apply_config(subs[command], load_config(known.config))
    return parser.parse_args(argv)


def _apply_config(sub: argparse.ArgumentParser, cfg: dict) -> None:
    """Install file values as defaults so explicit flags still win."""
    actions = {a.dest: a for a in sub._actions if a.dest != "help"}
    unknown = sorted(set(cfg) - set(actions))
    if unknown:
        sub.error(f"unknown config keys: {', '.join(unknown)}")
    for key, value in cfg.items():
        action = actions[key]
        action.required = False
        if action.type is not None and not isinstance(value, (list, bool)):
            try:
                value = action.type(str(value))
            except (argparse.ArgumentTypeError, ValueError) as e:
                sub.error(f"config key {key}: {e}")
        cfg[key] = value
    for group in sub._mutually_exclusive_groups:
        if any(a.dest in cfg for a in group._group_actions):
            group.required = False
    sub.set_defaults(**cfg)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = _parse(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    except (OSError, tomllib.TOMLDecodeError) as e:
        print(f"psocid: config: {e}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=str(args.log_level).upper(), format="%(levelname)s %(name)s: %(message)s")
    manifest = None
    try:
        config = _config(args)
        manifest = RunManifest(args.command, config.to_dict())
        result = args.func(args)
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            for name, (rows, cols) in result.tables.items():
                sink = out / f"{args.command}-{name}.{args.format}"
                emit_report(rows, args.format, sink, cols, config.metadata(), manifest)
                log.info("wrote %s", sink)
            manifest.write(out / f"{args.command}-manifest.json")
    except PsocidError as e:
        print(f"psocid: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as e:
        print(f"psocid: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    if not args.quiet:
        print(json.dumps(_json_ready(result.summary), indent=2))
    return EXIT_OK


def _json_ready(obj):
    if isinstance(obj, dict):
        return {k: _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return as_row({"v": obj})["v"]


if __name__ == "__main__":
    sys.exit(main())
