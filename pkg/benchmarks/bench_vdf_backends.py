"""Compare the compiled and pure-Python squaring kernels.

    python3 benchmarks/bench_vdf_backends.py [--bits 64,512,2048] [--t 20000] [--json out.json]

Both kernels run the same ``(params, x, T)`` and must agree on ``(y, pi)``;
the table reports the best of ``--repeat`` wall times and the speedup.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
import time

from povf import vdf


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run(bits_list, T, repeat, seed=1):
    kernels = vdf.available_backends()
    rng = random.Random(seed)
    rows = []
    for bits in bits_list:
        params = vdf.vdf_setup(bits, T, 1, b"bench|" + str(bits).encode())
        x = vdf.seed_to_group(rng.getrandbits(bits), params.modulus_N)
        outputs = {}
        row = {"bits": bits, "T": T}
        for name, kernel in sorted(kernels.items()):
            outputs[name] = vdf.vdf_eval(params, x, kernel=kernel)
            row[name + "_s"] = best_of(lambda: vdf.vdf_eval(params, x, kernel=kernel), repeat)
        if len({(o.output_y, o.proof_pi) for o in outputs.values()}) != 1:
            raise SystemExit(f"kernels disagree at {bits} bits")
        if "compiled" in kernels:
            row["speedup"] = row["python_s"] / row["compiled_s"]
        rows.append(row)
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--bits", default="64,512,2048")
    ap.add_argument("--t", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json")
    args = ap.parse_args(argv)
    bits = [int(b) for b in args.bits.split(",")]
    print(f"default backend: {vdf.BACKEND}; available: {', '.join(sorted(vdf.available_backends()))}")
    rows = run(bits, args.t, args.repeat)
    print(f"{'bits':>6} {'T':>8} {'python_s':>10} {'compiled_s':>11} {'speedup':>8}")
    for r in rows:
        print(f"{r['bits']:>6} {r['T']:>8} {r['python_s']:>10.4f} "
              f"{r.get('compiled_s', float('nan')):>11.4f} {r.get('speedup', float('nan')):>8.1f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
