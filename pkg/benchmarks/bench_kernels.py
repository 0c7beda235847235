"""Compare the compiled and pure-Python kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints best-of-N wall time per workload and the speedup. Exits non-zero if
the backends disagree on any input.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
import timeit

from rdpipe import _kernels_py

try:
    from rdpipe import _kernels as _compiled
except ImportError:
    _compiled = None


def _pairs(rng: random.Random, n: int, length: int) -> list[tuple[str, str]]:
    alphabet = "abcdefghij .,LMS"
    out = []
    for _ in range(n):
        a = "".join(rng.choice(alphabet) for _ in range(rng.randint(length // 2, length)))
        b = "".join(rng.choice(alphabet) for _ in range(rng.randint(length // 2, length)))
        out.append((a, b))
    return out


def _completion(rng: random.Random, records: int) -> str:
    rows = [{"genus": f"Genus{i}", "epithet": "sp" + "}" * rng.randint(0, 2), "authors": 'L. "x" [y]'}
            for i in range(records)]
    return "Here is the JSON you asked for:\n```json\n" + json.dumps(rows) + "\n```\n"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _compiled is None:
        print("compiled extension not built; nothing to compare")
        return 1

    rng = random.Random(20240501)
    workloads = {
        "levenshtein 2000 pairs, len<=40": (
            "levenshtein", [(p,) for p in _pairs(rng, 2000, 40)]),
        "levenshtein 50 pairs, len<=400": (
            "levenshtein", [(p,) for p in _pairs(rng, 50, 400)]),
        "find_balanced_end 200 completions x 300 records": (
            "find_balanced_end", [(_completion(rng, 300),) for _ in range(200)]),
    }

    print(f"{'workload':<50} {'python s':>10} {'cython s':>10} {'speedup':>8}")
    for title, (name, inputs) in workloads.items():
        py_fn, cy_fn = getattr(_kernels_py, name), getattr(_compiled, name)

        def call(fn):
            if name == "levenshtein":
                return [fn(a, b) for ((a, b),) in inputs]
            return [fn(text, text.index("[")) for (text,) in inputs]

        if call(py_fn) != call(cy_fn):
            print(f"{title}: backends disagree", file=sys.stderr)
            return 2
        t_py = min(timeit.repeat(lambda: call(py_fn), number=1, repeat=args.repeat))
        t_cy = min(timeit.repeat(lambda: call(cy_fn), number=1, repeat=args.repeat))
        print(f"{title:<50} {t_py:>10.4f} {t_cy:>10.4f} {t_py / t_cy:>7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
