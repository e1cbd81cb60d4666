"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py --ne 200000 --repeat 3

Times the three hot paths (matrix sampling, prefix histograms and the
min-p-value lookup behind alpha calibration) on each available backend and
checks that both backends return identical arrays.
"""

import argparse
import time

import numpy as np

from fairtopk import _backend
from fairtopk.audit import pvalue_table
from fairtopk.models import FiniteBinomial, Hypergeometric, PopulationSpec, WeightedHypergeometric, prefix_laws
from fairtopk.sampling import min_table_lookup, prefix_histogram, sample_matrix

MODELS = {
    "hyper": Hypergeometric(),
    "binom": FiniteBinomial(0.3),
    "weighted": WeightedHypergeometric(7 / 3),
}


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=100)
    parser.add_argument("--np", type=int, default=30)
    parser.add_argument("--ne", type=int, default=200_000)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args(argv)

    pop = PopulationSpec(args.n, args.np)
    backends = _backend.available()
    previous = _backend.current()
    print(f"n={pop.n} n_p={pop.n_p} n_e={args.ne} workers={args.workers} backends={backends}")
    print(f"{'model':9} {'kernel':10} " + " ".join(f"{b:>10}" for b in backends) + "   speedup")
    try:
        for name, model in MODELS.items():
            table = np.ascontiguousarray(pvalue_table(prefix_laws(model, pop), "lower"))
            jobs = {
                "matrix": lambda: sample_matrix(model, pop, args.ne, 1, workers=args.workers),
                "histogram": lambda: prefix_histogram(model, pop, pop.n, args.ne, 1, workers=args.workers),
                "min_lookup": lambda: min_table_lookup(model, pop, table, args.ne, 1, workers=args.workers),
            }
            for kernel, fn in jobs.items():
                times, outs = [], []
                for b in backends:
                    _backend.set_backend(b)
                    t, out = best_of(fn, args.repeat)
                    times.append(t)
                    outs.append(out)
                same = all(np.array_equal(outs[0], o) for o in outs[1:])
                speed = f"{times[-1] / times[0]:8.1f}x" if len(times) > 1 else "       -"
                cells = " ".join(f"{t:9.3f}s" for t in times)
                print(f"{name:9} {kernel:10} {cells} {speed}{'' if same else '  MISMATCH'}")
    finally:
        _backend.set_backend(previous)


if __name__ == "__main__":
    main()
