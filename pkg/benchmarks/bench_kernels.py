"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py --repeats 5

Times the decision-tree split sweep and the Louvain local-move pass at the
sizes the incremental harness sees (140 participants, 32 features), plus one
bagged-trees fit with each backend swapped in.  Reports the best of
``--repeats`` runs per case.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from lcforecast import classifiers, kernels
from lcforecast.features import FeatureMatrix
from lcforecast.social_graph import _csr


def _split_case(rng: np.random.Generator, n: int, d: int):
    xs = rng.normal(size=(n, d))
    ys = (xs[:, 0] + rng.normal(scale=1.0, size=n) > 0).astype(np.int64)
    order = np.argsort(xs, axis=0, kind="stable").astype(np.intp)
    return xs, ys, order


def _graph_case(rng: np.random.Generator, n: int, p: float):
    upper = np.triu(rng.random((n, n)) < p, 1)
    r, c = np.nonzero(upper)
    w = rng.integers(1, 20, size=r.size).astype(np.float64)
    rows = np.concatenate([r, c]).astype(np.intp)
    cols = np.concatenate([c, r]).astype(np.intp)
    vals = np.concatenate([w, w])
    indptr, indices, weights = _csr(n, rows, cols, vals)
    degree = np.bincount(rows, weights=vals, minlength=n)
    return indptr, indices, weights, degree, float(degree.sum())


def bench_split(impl, case, repeats: int) -> float:
    xs, ys, order = case
    return min(timeit.repeat(lambda: impl.split_sweep(xs, ys, order, 2), number=20, repeat=repeats)) / 20


def bench_moves(impl, case, order, repeats: int) -> float:
    indptr, indices, weights, degree, m2 = case
    n = degree.size

    def run():
        comm = np.arange(n, dtype=np.intp)
        tot = degree.copy()
        impl.move_nodes(indptr, indices, weights, degree, comm, tot, order, m2, 1.0)

    return min(timeit.repeat(run, number=10, repeat=repeats)) / 10


def bench_bagging(impl, m: FeatureMatrix, repeats: int) -> float:
    saved = kernels.split_sweep
    kernels.split_sweep = impl.split_sweep
    try:
        return min(timeit.repeat(lambda: classifiers.train("bagged_trees", m, seed=0), number=1, repeat=repeats))
    finally:
        kernels.split_sweep = saved


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--participants", type=int, default=140)
    ap.add_argument("--features", type=int, default=32)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled backend not built; timing the numpy fallback only")
    rng = np.random.default_rng(args.seed)
    split = _split_case(rng, args.participants, args.features)
    graph = _graph_case(rng, args.participants, 0.08)
    order = rng.permutation(args.participants).astype(np.intp)
    xs, ys, _ = split
    m = FeatureMatrix([f"p{i}" for i in range(len(ys))], xs, ys, "bench")

    cases = {
        "split_sweep": lambda impl: bench_split(impl, split, args.repeats),
        "move_nodes": lambda impl: bench_moves(impl, graph, order, args.repeats),
        "bagged_trees fit": lambda impl: bench_bagging(impl, m, args.repeats),
    }
    print(f"{'case':<18}" + "".join(f"{name:>14}" for name in backends) + f"{'speedup':>10}")
    for label, fn in cases.items():
        times = {name: fn(impl) for name, impl in backends.items()}
        row = f"{label:<18}" + "".join(f"{1e3 * t:>12.3f}ms" for t in times.values())
        if "cython" in times:
            row += f"{times['python'] / times['cython']:>9.1f}x"
        print(row)
    print(f"active backend: {kernels.BACKEND}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
