"""Time the pure-Python and compiled numeric kernels on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints one line per kernel with the best time per call for each backend
and the speedup.  Both backends must agree before anything is timed.
"""

import argparse
import math
import random
import timeit

from cogkernel import kernels


def workloads(rng):
    history = sorted(rng.uniform(0, 99_000) for _ in range(200))
    batch = [sorted(rng.uniform(0, 99_000) for _ in range(rng.randint(1, 40))) for _ in range(300)]
    times = [50.0 * i for i in range(2000)]
    intervals = []
    for _ in range(400):
        a = rng.uniform(0, 100_000)
        b = a + rng.uniform(0, 20_000) if rng.random() < 0.8 else math.inf
        intervals.append((a, b))
    acts = [rng.gauss(0, 1) for _ in range(500)]
    return {
        "bla": ((history, 100_000.0, 0.5, 1.0), {}),
        "bla_batch": ((batch, 100_000.0, 0.5, 1.0), {}),
        "episode_scores": ((times, intervals), {}),
        "softmax_weights": ((acts, 0.5), {}),
    }


def close(a, b) -> bool:
    if isinstance(a, (list, tuple)):
        return len(a) == len(b) and all(close(x, y) for x, y in zip(a, b))
    return math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-12)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=200)
    args = ap.parse_args()
    impls = kernels.backends()
    if "compiled" not in impls:
        print("compiled backend not built; only the Python fallback is available")
    loads = workloads(random.Random(42))
    print(f"{'kernel':<16} " + " ".join(f"{n:>12}" for n in impls) + "   speedup")
    for name, (a, kw) in loads.items():
        results = {n: getattr(m, name)(*a, **kw) for n, m in impls.items()}
        ref = results["python"]
        for n, r in results.items():
            if not close(list(r) if not isinstance(r, float) else r, list(ref) if not isinstance(ref, float) else ref):
                raise SystemExit(f"{name}: {n} disagrees with the python backend")
        best = {}
        for n, m in impls.items():
            fn = getattr(m, name)
            t = min(timeit.repeat(lambda: fn(*a, **kw), repeat=args.repeat, number=args.number))
            best[n] = t / args.number
        cols = " ".join(f"{best[n] * 1e6:>10.1f}us" for n in impls)
        speed = f"{best['python'] / best['compiled']:>8.1f}x" if "compiled" in best else ""
        print(f"{name:<16} {cols} {speed}")


if __name__ == "__main__":
    main()
