"""Compare the compiled and pure-Python familiarity kernels.

    python3 benchmarks/bench_kernels.py [--users 1000] [--depth 2000] [--repeat 3]

Inputs are one run from the default synthetic world, encoded once; only the
kernel calls are timed. Outputs of both backends are checked for bitwise
equality.
"""

import argparse
import time

import numpy as np

from commoneval import _kernels
from commoneval.commonality import encode_run
from commoneval.synth import SynthSpec, random_run, synth_world


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return min(times), result


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--users", type=int, default=1000)
    ap.add_argument("--items", type=int, default=2000)
    ap.add_argument("--depth", type=int, default=None, help="default: full catalog")
    ap.add_argument("--gamma", type=float, default=0.9)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    world = synth_world(SynthSpec(n_users=args.users, n_items=args.items))
    enc = encode_run(random_run(world, 0, args.depth or args.items), world.index)
    positions = int(enc.offsets[-1])
    print(f"{args.users} users x {positions // args.users} ranks x {len(enc.labels)} categories")
    print(f"{'backend':<8} {'familiarity_matrix':>20} {'log_column_sums':>16} {'Mpos/s':>8}")

    results = {}
    for name in sorted(_kernels.BACKENDS):
        mod = _kernels.BACKENDS[name]
        t_fam, table = best_of(
            lambda: mod.familiarity_matrix(
                enc.items, enc.offsets, enc.item_cat_ptr, enc.item_cat_idx, enc.cat_sizes, args.gamma, False
            ),
            args.repeat,
        )
        t_log, sums = best_of(lambda: mod.log_column_sums(table), args.repeat)
        results[name] = (t_fam, table, sums)
        print(f"{name:<8} {t_fam * 1e3:>18.1f}ms {t_log * 1e3:>14.2f}ms {positions / t_fam / 1e6:>8.1f}")

    if len(results) == 2:
        (_, ct, cs), (_, pt, ps) = results["cython"], results["python"]
        same = ct.tobytes() == pt.tobytes() and cs.tobytes() == ps.tobytes()
        print(f"speedup {results['python'][0] / results['cython'][0]:.0f}x; bitwise equal: {same}")
        if not same:
            raise SystemExit(1)
    else:
        print("compiled extension not built; only the fallback was timed")
    assert np.isfinite(results[sorted(results)[0]][1]).all()


if __name__ == "__main__":
    main()
