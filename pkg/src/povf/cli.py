"""Command line driver: ``povf selftest | vdf | sim | report``.

Exit codes: 0 success, 1 a verification came out false, 2 usage or config
error, 3 an internal invariant was violated during a run.

Integers on the command line may be decimal or ``0x``-prefixed hex; integers
printed by ``vdf`` are bare lowercase hex.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import random
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional, Sequence

from povf import __version__, metrics, vdf, vrf

EXIT_OK = 0
EXIT_FALSE = 1
EXIT_USAGE = 2
EXIT_INTERNAL = 3

DEFAULT_SEED = 1
OUT_ENV = "POVF_OUT_DIR"


class UsageError(Exception):
    pass


def _int(text: str) -> int:
    try:
        return int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(p, 0) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}") from None


def _hex(v: int) -> str:
    return format(v, "x")


def _note_seed(seed: int) -> None:
    print(f"seed: {seed}", file=sys.stderr)


# -- selftest -------------------------------------------------------------------

def _selftest_cases(seed: int) -> list[tuple[str, Callable[[], bool]]]:
    def vdf_example():
        params = vdf.VdfParams(101, 41, 10, 1)
        out = vdf.vdf_eval(params, 2)
        return (out.output_y, out.proof_pi) == (5, 5)

    def vdf_example_verify():
        params = vdf.VdfParams(101, 41, 10, 1)
        return vdf.vdf_verify(params, 2, 5, 5) and not vdf.vdf_verify(params, 2, 5, 6)

    def vdf_roundtrip():
        params = vdf.vdf_setup(256, 2000, 10, b"selftest|" + str(seed).encode())
        x = vdf.seed_to_group(seed * 7919 + 3, params.modulus_N)
        out = vdf.vdf_eval(params, x)
        return vdf.vdf_verify(params, x, out.output_y, out.proof_pi)

    def vrf_roundtrip():
        kp = vrf.vrf_keygen(b"selftest|" + str(seed).encode(), 512)
        out = vrf.vrf_eval(kp.secret_key, b"epoch-1")
        again = vrf.vrf_eval(kp.secret_key, b"epoch-1")
        return (again == out and vrf.vrf_verify(kp.public_key, b"epoch-1", out)
                and not vrf.vrf_verify(kp.public_key, b"epoch-2", out))

    return [
        ("vdf-example-2", vdf_example),
        ("vdf-example-2-verify", vdf_example_verify),
        ("vdf-roundtrip", vdf_roundtrip),
        ("vrf-roundtrip", vrf_roundtrip),
        ("gini-0-0-0-4", lambda: metrics.gini([0, 0, 0, 4]) == Fraction(3, 4)),
        ("gini-uniform", lambda: metrics.gini([5, 5, 5]) == 0),
        ("gini-1-3", lambda: metrics.gini([1, 3]) == Fraction(1, 4)),
        ("stddev-1-2-3-4", lambda: abs(metrics.std_dev([1, 2, 3, 4]) - math.sqrt(1.25)) < 1e-12),
        ("stddev-0-0-0-4", lambda: abs(metrics.std_dev([0, 0, 0, 4]) - math.sqrt(3)) < 1e-12),
        ("tps-average", lambda: metrics.average_tps(
            [_B(0, 0, 0), _B(1, 2000, 100), _B(2, 4000, 100)]) == 50),
    ]


class _B:
    __slots__ = ("height", "timestamp", "tx_count")

    def __init__(self, height: int, timestamp: int, tx_count: int):
        self.height, self.timestamp, self.tx_count = height, timestamp, tx_count


def cmd_selftest(args) -> int:
    failed = []
    for name, check in _selftest_cases(args.seed):
        try:
            ok = bool(check())
        except Exception as exc:  # a crash is a failure of that case
            ok = False
            print(f"{name}: error: {exc}", file=sys.stderr)
        print(f"{name}: {'PASS' if ok else 'FAIL'}")
        if not ok:
            failed.append(name)
    if failed:
        print(f"failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_FALSE
    return EXIT_OK


# -- vdf ------------------------------------------------------------------------

def _vdf_params(args, time_T: int) -> vdf.VdfParams:
    if args.bits is not None:
        if args.n is not None or args.l is not None:
            raise UsageError("give either --bits or --n/--l, not both")
        return vdf.vdf_setup(args.bits, time_T, 1, b"cli|" + str(args.seed).encode())
    if args.n is None or args.l is None:
        raise UsageError("--n and --l are required unless --bits is given")
    return vdf.VdfParams(args.n, args.l, time_T, 1)


def _backend(name: str):
    if name == "auto":
        return None
    kernels = vdf.available_backends()
    if name not in kernels:
        raise UsageError(f"backend {name!r} not available (have: {', '.join(sorted(kernels))})")
    return kernels[name]


def cmd_vdf_eval(args) -> int:
    params = _vdf_params(args, args.t)
    if args.bits is not None:
        _note_seed(args.seed)
    out = vdf.vdf_eval(params, args.x, kernel=_backend(args.backend))
    if args.bits is not None:
        print(f"n={_hex(params.modulus_N)} l={_hex(params.proof_prime_l)}")
    print(f"y={_hex(out.output_y)} pi={_hex(out.proof_pi)}")
    return EXIT_OK


def cmd_vdf_verify(args) -> int:
    params = _vdf_params(args, args.t)
    ok = vdf.vdf_verify(params, args.x, args.y, args.pi)
    print("true" if ok else "false")
    return EXIT_OK if ok else EXIT_FALSE


def _best_time(fn, repeat: int) -> float:
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_rows(params: vdf.VdfParams, x: int, ts: Sequence[int], repeat: int = 3,
               kernel=None) -> list[dict]:
    rows = []
    for T in ts:
        out = vdf.vdf_eval(params, x, T, kernel=kernel)
        ev = _best_time(lambda: vdf.vdf_eval(params, x, T, kernel=kernel), repeat)
        vt = _best_time(lambda: vdf.vdf_verify(params, x, out.output_y, out.proof_pi, T),
                        max(repeat, 5))
        rows.append({"T": T, "eval_s": ev, "verify_s": vt, "verify_over_eval": vt / ev})
    return rows


def cmd_vdf_bench(args) -> int:
    if args.n is None and args.bits is None:
        args.bits = 2048
    ts = args.t_list
    if not ts or any(T < 1 for T in ts):
        raise UsageError("--t-list needs positive round counts")
    params = _vdf_params(args, max(ts))
    _note_seed(args.seed)
    rng = random.Random(args.seed)
    x = args.x if args.x is not None else vdf.seed_to_group(
        rng.getrandbits(params.modulus_N.bit_length()), params.modulus_N)
    kernel = _backend(args.backend)
    name = args.backend if kernel is not None else vdf.BACKEND
    print(f"backend={name} bits={params.modulus_N.bit_length()}")
    print(f"{'T':>10} {'eval_s':>12} {'verify_s':>12} {'verify/eval':>12}")
    rows = bench_rows(params, x, ts, args.repeat, kernel)
    for r in rows:
        print(f"{r['T']:>10} {r['eval_s']:>12.6f} {r['verify_s']:>12.6f} "
              f"{r['verify_over_eval']:>12.6f}")
    for a, b in zip(rows, rows[1:]):
        print(f"eval ratio T={b['T']}/T={a['T']}: {b['eval_s'] / a['eval_s']:.3f}")
    return EXIT_OK


# -- sim / report -----------------------------------------------------------------

def _default_out(config_path: Path, seed: int) -> Path:
    root = Path(os.environ.get(OUT_ENV) or "povf-runs")
    return root / f"{config_path.stem}-seed{seed}"


def cmd_sim(args) -> int:
    from povf.sim import ConfigError, SimulationAbort, load_config, run
    from povf.sim.config import with_seed
    from povf.sim.report import write_run

    path = Path(args.config)
    try:
        cfg = load_config(path)
        if args.seed is not None:
            cfg = with_seed(cfg, args.seed)
    except FileNotFoundError:
        raise UsageError(f"config not found: {path}") from None
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _note_seed(cfg.rng_seed)
    out = Path(args.out) if args.out else _default_out(path, cfg.rng_seed)
    try:
        report = run(cfg)
    except SimulationAbort as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    summary = write_run(report, out, str(path))
    print(f"output: {out}")
    for key in ("average_tps", "max_instantaneous_tps", "gini", "max_clock_offset_ms"):
        print(f"{key}: {summary.get(key)}")
    print(f"fork_free: {summary['forks']['fork_free']}")
    return EXIT_OK


def read_counts(path: Path) -> list[int]:
    try:
        words = path.read_text().split()
    except OSError as exc:
        raise UsageError(f"cannot read counts file: {exc}") from None
    try:
        counts = [int(w) for w in words]
    except ValueError:
        raise UsageError("counts file must hold whitespace-separated integers") from None
    if not counts or any(c < 0 for c in counts) or sum(counts) == 0:
        raise UsageError("counts must be non-negative with a positive total")
    return counts


def cmd_report(args) -> int:
    from povf.sim.report import TraceError, heights_csv, load_trace, summarize, summarize_counts

    if args.counts_file:
        if args.trace_dir:
            raise UsageError("give either a trace directory or --counts-file")
        summary = summarize_counts(read_counts(Path(args.counts_file)))
        if args.format == "csv":
            print("metric,value")
            for k in ("gini", "std_dev"):
                print(f"{k},{summary[k]}")
        else:
            print(json.dumps(summary, sort_keys=True, indent=2))
        return EXIT_OK
    if not args.trace_dir:
        raise UsageError("a trace directory or --counts-file is required")
    try:
        trace = load_trace(args.trace_dir)
        if args.format == "csv":
            sys.stdout.write(heights_csv(trace))
        else:
            sys.stdout.write(json.dumps(summarize(trace), sort_keys=True, indent=2) + "\n")
    except TraceError as exc:
        print(f"trace error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


# -- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="povf", description="PoVF consensus toolkit")
    p.add_argument("--version", action="version", version=f"povf {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    st = sub.add_parser("selftest", help="check worked examples and round trips")
    st.add_argument("--seed", type=_int, default=DEFAULT_SEED)
    st.set_defaults(func=cmd_selftest)

    v = sub.add_parser("vdf", help="evaluate, verify or benchmark the VDF")
    vsub = v.add_subparsers(dest="vdf_command", required=True)

    def common(sp, need_t=True):
        sp.add_argument("--n", type=_int, help="modulus N")
        sp.add_argument("--l", type=_int, help="proof prime l")
        sp.add_argument("--bits", type=_int, help="generate N and l of this size instead")
        sp.add_argument("--seed", type=_int, default=DEFAULT_SEED)
        if need_t:
            sp.add_argument("--t", type=_int, required=True, help="number of squarings T")

    ev = vsub.add_parser("eval", help="print y and pi")
    common(ev)
    ev.add_argument("--x", type=_int, required=True)
    ev.add_argument("--backend", default="auto", choices=("auto", "compiled", "python"))
    ev.set_defaults(func=cmd_vdf_eval)

    ve = vsub.add_parser("verify", help="exit 0 if (y, pi) is correct, else 1")
    common(ve)
    ve.add_argument("--x", type=_int, required=True)
    ve.add_argument("--y", type=_int, required=True)
    ve.add_argument("--pi", type=_int, required=True)
    ve.set_defaults(func=cmd_vdf_verify)

    be = vsub.add_parser("bench", help="eval/verify wall times over a T sweep")
    common(be, need_t=False)
    be.add_argument("--x", type=_int)
    be.add_argument("--t-list", type=_int_list, default=[10_000, 100_000],
                    help="comma-separated round counts (default 10000,100000)")
    be.add_argument("--repeat", type=_int, default=3)
    be.add_argument("--backend", default="auto", choices=("auto", "compiled", "python"))
    be.set_defaults(func=cmd_vdf_bench)

    sm = sub.add_parser("sim", help="run a simulation from a TOML/JSON config")
    sm.add_argument("config")
    sm.add_argument("--seed", type=_int, help="override rng_seed from the config")
    sm.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<config>-seed<seed>)")
    sm.set_defaults(func=cmd_sim)

    rp = sub.add_parser("report", help="recompute metrics from a trace or a counts file")
    rp.add_argument("trace_dir", nargs="?")
    rp.add_argument("--format", choices=("json", "csv"), default="json")
    rp.add_argument("--counts-file")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"povf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (vdf.VdfDomainError, vdf.VdfSetupError) as exc:
        print(f"povf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
